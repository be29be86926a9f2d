#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vsgae/experiments.hpp"
#include "vsgae/sampling.hpp"

namespace py = pybind11;
using namespace vsgae;

namespace {

NodeType to_type(const std::string& s) {
  const auto t = parse_op(s);
  if (!t) throw std::invalid_argument("unknown node type '" + s + "'");
  return *t;
}

CellGraph make_graph(const std::vector<std::string>& ops, const std::vector<std::pair<int, int>>& edges) {
  std::vector<NodeType> labels;
  for (const auto& s : ops) labels.push_back(to_type(s));
  std::vector<Edge> e;
  for (auto [u, v] : edges) e.push_back({u, v});
  return CellGraph(std::move(labels), std::move(e));
}

std::vector<std::string> ops_of(const CellGraph& g) {
  std::vector<std::string> out;
  for (NodeType t : g.labels()) out.emplace_back(op_name(t));
  return out;
}

std::vector<std::pair<int, int>> edges_of(const CellGraph& g) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : g.edges()) out.emplace_back(e.from, e.to);
  return out;
}

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<CellGraph> graphs_at(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<CellGraph> out;
  for (std::size_t i : idx) out.push_back(ds.records.at(i).graph);
  return out;
}

SplitSpec split_spec(double train, double test, double validation, bool stratified, std::uint64_t seed) {
  SplitSpec s;
  s.train = train;
  s.test = test;
  s.validation = validation;
  s.method = stratified ? SplitMethod::SizeStratified : SplitMethod::Random;
  s.seed = seed;
  return s;
}

py::dict result_dict(const PredictorResult& r) {
  py::list log;
  for (const auto& e : r.log)
    log.append(py::dict(py::arg("epoch") = e.epoch, py::arg("train_rmse") = e.train_rmse,
                        py::arg("val_rmse") = e.val_rmse));
  return py::dict(py::arg("test_rmse") = r.test_rmse, py::arg("best_epoch") = r.best_epoch,
                  py::arg("best_val_rmse") = r.best_val_rmse, py::arg("log") = log);
}

}  // namespace

PYBIND11_MODULE(_vsgae, m) {
  m.doc() = "Variational sequential graph autoencoder for small architecture cells";

  py::class_<CellGraph>(m, "CellGraph")
      .def(py::init(&make_graph), py::arg("ops"), py::arg("edges"))
      .def_property_readonly("ops", &ops_of)
      .def_property_readonly("edges", &edges_of)
      .def("__len__", &CellGraph::size)
      .def("__eq__", [](const CellGraph& a, const CellGraph& b) { return a == b; })
      .def("__hash__", [](const CellGraph& g) { return graph_hash(g, false).value; })
      .def("to_json", [](const CellGraph& g) { return serialize(g); })
      .def_static("from_json", [](const std::string& s) { return deserialize(s).graph; })
      .def("__repr__", [](const CellGraph& g) { return "CellGraph(" + serialize(g) + ")"; });

  m.def("is_valid", [](const CellGraph& g) { return is_valid(g); });
  m.def("enumerate_valid", [](int n, bool dedup) { return enumerate_valid(n, {}, dedup); }, py::arg("n"),
        py::arg("dedup") = false);
  m.def("canonical_form", &canonical_form);
  m.def("graph_hash", [](const CellGraph& g, bool iso) { return graph_hash(g, iso).hex(); }, py::arg("graph"),
        py::arg("isomorphism_invariant") = true);
  m.def("edit_distance", &edit_distance);
  m.def("longest_path", &longest_path);
  m.def("synth_accuracy", &synth_accuracy);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("graphs",
                             [](const Dataset& d) {
                               std::vector<CellGraph> g;
                               for (const auto& r : d.records) g.push_back(r.graph);
                               return g;
                             })
      .def_property_readonly("accuracies",
                             [](const Dataset& d) {
                               std::vector<double> a;
                               for (const auto& r : d.records) a.push_back(r.accuracy);
                               return a;
                             })
      .def("subset", [](const Dataset& d, const std::vector<std::size_t>& idx) { return d.subset(idx); })
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); })
      .def_static("load", &load_dataset);

  m.def(
      "make_dataset",
      [](int max_nodes, bool dedup, std::optional<std::size_t> sample_k, std::uint64_t seed) {
        DatasetParams p;
        p.max_n = max_nodes;
        p.dedup = dedup;
        SearchSpaceLimits limits;
        if (sample_k) {
          p.mode = DatasetParams::Mode::SampleK;
          p.k = *sample_k;
          limits.max_nodes = max_nodes;
        }
        return make_dataset(limits, p, seed);
      },
      py::arg("max_nodes") = 4, py::arg("dedup") = false, py::arg("sample_k") = py::none(), py::arg("seed") = 0);

  m.def(
      "split",
      [](const Dataset& ds, double train, double test, double validation, bool stratified, std::uint64_t seed) {
        const Split s = split(ds, split_spec(train, test, validation, stratified, seed));
        return py::dict(py::arg("train") = s.train, py::arg("test") = s.test, py::arg("validation") = s.validation);
      },
      py::arg("dataset"), py::arg("train") = 0.7, py::arg("test") = 0.2, py::arg("validation") = 0.1,
      py::arg("stratified") = false, py::arg("seed") = 0);

  py::class_<VsgaeModel>(m, "VsgaeModel")
      .def(py::init([](int node_dim, int graph_dim, std::uint64_t seed) {
             return std::make_unique<VsgaeModel>(EncoderConfig{node_dim, graph_dim, 2, true}, seed);
           }),
           py::arg("node_dim") = 32, py::arg("graph_dim") = 16, py::arg("seed") = 0)
      .def_property_readonly("latent_dim", &VsgaeModel::latent_dim)
      .def(
          "train",
          [](VsgaeModel& model, const Dataset& ds, int epochs, double lr, int batch_size, double alpha,
             std::uint64_t seed, std::optional<std::filesystem::path> checkpoint, bool resume) {
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.learning_rate = lr;
            cfg.batch_size = batch_size;
            cfg.alpha = alpha;
            cfg.seed = seed;
            cfg.checkpoint = checkpoint;
            cfg.resume = resume;
            std::vector<EpochLoss> log;
            {
              py::gil_scoped_release release;
              log = train_vsgae(model, ds, cfg);
            }
            py::list out;
            for (const auto& e : log)
              out.append(py::dict(py::arg("epoch") = e.epoch, py::arg("L_V") = e.loss.node,
                                  py::arg("L_E") = e.loss.edge, py::arg("D_KL") = e.loss.kl,
                                  py::arg("total") = e.loss.total, py::arg("lr") = e.learning_rate));
            return out;
          },
          py::arg("dataset"), py::arg("epochs") = 300, py::arg("lr") = 1e-4, py::arg("batch_size") = 32,
          py::arg("alpha") = 0.005, py::arg("seed") = 0, py::arg("checkpoint") = py::none(),
          py::arg("resume") = false)
      .def("embed", &VsgaeModel::embed)
      .def("sample_posterior",
           [](const VsgaeModel& m, const CellGraph& g, std::uint64_t seed) {
             Rng rng(seed);
             return m.sample_posterior(g, rng);
           })
      .def(
          "decode",
          [](const VsgaeModel& m, const std::vector<double>& z, std::uint64_t seed) {
            Rng rng(seed);
            return m.decode_latent(z, rng);
          },
          py::arg("z"), py::arg("seed") = 0)
      .def("save", [](const VsgaeModel& m, const std::filesystem::path& p) { m.save(p); })
      .def_static("load", &VsgaeModel::load);

  m.def(
      "eval_reconstruction",
      [](const VsgaeModel& model, const std::vector<CellGraph>& graphs, std::uint64_t seed, int z_samples,
         int decodes) { return eval_reconstruction(model, graphs, seed, z_samples, decodes).accuracy; },
      py::arg("model"), py::arg("graphs"), py::arg("seed"), py::arg("z_samples") = 10, py::arg("decodes") = 10);
  m.def(
      "eval_prior_validity",
      [](const VsgaeModel& model, std::uint64_t seed, int latents, int decodes) {
        return eval_prior_validity(model, seed, latents, decodes).validity;
      },
      py::arg("model"), py::arg("seed"), py::arg("latents") = 1000, py::arg("decodes") = 10);

  m.def(
      "train_predictor",
      [](const Dataset& ds, int node_dim, int graph_dim, int epochs, double lr, std::uint64_t seed) {
        PredictorModel model({node_dim, graph_dim, 2, false}, seed);
        PredTrainConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = lr;
        cfg.seed = seed;
        SplitSpec spec;
        spec.seed = seed;
        return result_dict(train_joint(model, ds, split(ds, spec), cfg));
      },
      py::arg("dataset"), py::arg("node_dim") = 32, py::arg("graph_dim") = 16, py::arg("epochs") = 100,
      py::arg("lr") = 1e-5, py::arg("seed") = 0);
  m.def(
      "zero_shot",
      [](const Dataset& ds, int holdout, int node_dim, int graph_dim, int epochs, double lr, std::uint64_t seed) {
        PredictorModel model({node_dim, graph_dim, 2, false}, seed);
        PredTrainConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = lr;
        cfg.seed = seed;
        return result_dict(zero_shot(model, ds, ZeroShotSpec{holdout, 0.1}, cfg));
      },
      py::arg("dataset"), py::arg("holdout"), py::arg("node_dim") = 32, py::arg("graph_dim") = 16,
      py::arg("epochs") = 100, py::arg("lr") = 1e-5, py::arg("seed") = 0);

  m.def("sample_uniform_per_size",
        [](const Dataset& ds, std::size_t k, std::uint64_t seed) { return sample_uniform_per_size(ds, k, seed).indices; });
  m.def("sample_edit_uniform",
        [](const Dataset& ds, std::size_t k, std::uint64_t seed) { return sample_edit_uniform(ds, k, seed).indices; });
  m.def(
      "latent_bin_sample",
      [](const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, std::optional<int> bins) {
        const SampleResult r = latent_bin_sample(points, k, seed, bins);
        return py::make_tuple(r.indices, to_py(r.diagnostics));
      },
      py::arg("points"), py::arg("k"), py::arg("seed"), py::arg("bins") = py::none());

  py::class_<PcaModel>(m, "PcaModel")
      .def_readonly("mean", &PcaModel::mean)
      .def_readonly("components", &PcaModel::components)
      .def_readonly("explained_variance", &PcaModel::explained_variance)
      .def_readonly("explained_variance_ratio", &PcaModel::explained_variance_ratio)
      .def("reduce", [](const PcaModel& p, const Eigen::MatrixXd& x, Eigen::Index dims) { return reduce(p, x, dims); },
           py::arg("points"), py::arg("dims") = 4);
  m.def("fit_pca", &fit_pca);
}
