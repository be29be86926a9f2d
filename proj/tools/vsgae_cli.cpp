// Command-line driver: dataset generation, training, sampling and evaluation.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "vsgae/checkpoint.hpp"
#include "vsgae/experiments.hpp"
#include "vsgae/sampling.hpp"

namespace fs = std::filesystem;
using namespace vsgae;
using ojson = nlohmann::ordered_json;

namespace {

struct DataOptions {
  std::string path;
  int max_nodes = 4;
  bool dedup = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--dataset", path, "JSONL dataset to load instead of enumerating");
    cmd->add_option("--max-nodes", max_nodes, "Enumerate every valid cell up to this many nodes")
        ->check(CLI::Range(2, 7));
    cmd->add_flag("--dedup", dedup, "Keep one graph per isomorphism class");
  }
  Dataset load() const {
    if (!path.empty()) return load_dataset(path);
    DatasetParams p;
    p.max_n = max_nodes;
    p.dedup = dedup;
    return make_dataset({}, p, 0);
  }
  ojson describe() const {
    if (!path.empty()) return {{"path", path}};
    return {{"max_nodes", max_nodes}, {"dedup", dedup}};
  }
};

struct SplitOptions {
  double train = 0.7, test = 0.2, validation = 0.1;
  bool stratified = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--train-ratio", train, "Training share")->capture_default_str();
    cmd->add_option("--test-ratio", test, "Test share")->capture_default_str();
    cmd->add_option("--val-ratio", validation, "Validation share")->capture_default_str();
    cmd->add_flag("--stratified", stratified, "Split each node count separately");
  }
  SplitSpec spec(std::uint64_t seed) const {
    SplitSpec s;
    s.train = train;
    s.test = test;
    s.validation = validation;
    s.method = stratified ? SplitMethod::SizeStratified : SplitMethod::Random;
    s.seed = seed;
    s.check();
    return s;
  }
};

void write_json(const fs::path& path, const ojson& j) { write_file_atomic(path, j.dump(2) + "\n"); }

fs::path prepare(const std::string& out) {
  fs::create_directories(out);
  return fs::path(out);
}

ojson split_json(const Split& s) {
  return {{"train", s.train.size()}, {"test", s.test.size()}, {"validation", s.validation.size()}};
}

std::vector<CellGraph> graphs_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<CellGraph> out;
  for (std::size_t i : idx) out.push_back(ds.records[i].graph);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational sequential graph autoencoder toolkit"};
  app.require_subcommand(1);
  std::string out;
  std::uint64_t seed = 0;
  DataOptions data;
  SplitOptions split_opts;

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "Enumerate or sample labeled cells");
  std::optional<std::size_t> sample_k;
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--max-nodes", data.max_nodes, "Largest node count")->check(CLI::Range(2, 7));
  gen->add_flag("--dedup", data.dedup, "Keep one graph per isomorphism class");
  gen->add_option("--sample-k", sample_k, "Draw this many graphs instead of taking all");
  auto* gen_seed = gen->add_option("--seed", seed, "Seed for --sample-k");

  // train-vsgae
  auto* tv = app.add_subcommand("train-vsgae", "Train the autoencoder");
  TrainConfig tcfg;
  EncoderConfig ecfg;
  bool resume = false;
  tv->add_option("--out", out, "Output directory")->required();
  tv->add_option("--seed", seed, "Seed")->required();
  data.add_to(tv);
  tv->add_option("--node-dim", ecfg.node_dim, "Node embedding size")->capture_default_str();
  tv->add_option("--graph-dim", ecfg.graph_dim, "Graph embedding size")->capture_default_str();
  tv->add_option("--epochs", tcfg.epochs, "Epochs")->capture_default_str();
  tv->add_option("--lr", tcfg.learning_rate, "Learning rate")->capture_default_str();
  tv->add_option("--batch", tcfg.batch_size, "Batch size")->capture_default_str();
  tv->add_option("--alpha", tcfg.alpha, "KL weight")->capture_default_str();
  tv->add_option("--checkpoint-every", tcfg.checkpoint_every, "Epochs between checkpoints")->capture_default_str();
  tv->add_flag("--resume", resume, "Continue from OUT/vsgae.ck if present");

  // train-predictor and zero-shot
  PredTrainConfig pcfg;
  EncoderConfig pecfg{32, 16, 2, false};
  auto add_pred = [&](CLI::App* cmd) {
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--seed", seed, "Seed")->required();
    data.add_to(cmd);
    cmd->add_option("--node-dim", pecfg.node_dim, "Node embedding size")->capture_default_str();
    cmd->add_option("--graph-dim", pecfg.graph_dim, "Graph embedding size")->capture_default_str();
    cmd->add_option("--epochs", pcfg.epochs, "Epochs")->capture_default_str();
    cmd->add_option("--lr", pcfg.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--batch", pcfg.batch_size, "Batch size")->capture_default_str();
  };
  auto* tp = app.add_subcommand("train-predictor", "Train encoder and accuracy predictor jointly");
  add_pred(tp);
  split_opts.add_to(tp);
  auto* zs = app.add_subcommand("zero-shot", "Train on all node counts but one, test on that one");
  add_pred(zs);
  std::optional<int> holdout;
  double zs_val = 0.1;
  zs->add_option("--holdout", holdout, "Held-out node count (default: the largest)");
  zs->add_option("--val-fraction", zs_val, "Validation share of the seen sizes")->capture_default_str();

  // sample
  auto* smp = app.add_subcommand("sample", "Down-sample a dataset");
  std::string method, checkpoint;
  std::optional<std::size_t> k;
  std::optional<double> fraction;
  int pca_dims = 4;
  smp->add_option("--out", out, "Output directory")->required();
  smp->add_option("--seed", seed, "Seed")->required();
  smp->add_option("--method", method, "uniform, edit or latent")
      ->required()
      ->check(CLI::IsMember({"uniform", "edit", "latent"}));
  auto* smp_k = smp->add_option("--k", k, "Number of graphs");
  smp->add_option("--fraction", fraction, "Share of the dataset")->excludes(smp_k);
  smp->add_option("--checkpoint", checkpoint, "VS-GAE checkpoint (latent method)");
  smp->add_option("--pca-dims", pca_dims, "Reduced dimensions (latent method)")->capture_default_str();
  data.add_to(smp);

  // eval-recon
  auto* er = app.add_subcommand("eval-recon", "Reconstruction accuracy on the test split");
  int z_samples = 10, decodes = 10, latents = 1000;
  er->add_option("--out", out, "Output directory")->required();
  er->add_option("--seed", seed, "Seed")->required();
  er->add_option("--checkpoint", checkpoint, "VS-GAE checkpoint")->required();
  er->add_option("--z-samples", z_samples, "Posterior samples per graph")->capture_default_str();
  er->add_option("--decodes", decodes, "Decodes per sample")->capture_default_str();
  data.add_to(er);
  split_opts.add_to(er);

  // eval-prior
  auto* ep = app.add_subcommand("eval-prior", "Validity of graphs decoded from the prior");
  ep->add_option("--out", out, "Output directory")->required();
  ep->add_option("--seed", seed, "Seed")->required();
  ep->add_option("--checkpoint", checkpoint, "VS-GAE checkpoint")->required();
  ep->add_option("--latents", latents, "Prior samples")->capture_default_str();
  ep->add_option("--decodes", decodes, "Decodes per sample")->capture_default_str();

  // pca-report
  auto* pr = app.add_subcommand("pca-report", "Explained variance of the latent means");
  pr->add_option("--out", out, "Output directory")->required();
  pr->add_option("--checkpoint", checkpoint, "VS-GAE checkpoint")->required();
  data.add_to(pr);

  // sampling-stability
  auto* ss = app.add_subcommand("sampling-stability", "Predictor test error under training-set down-sampling");
  StabilityConfig scfg;
  ss->add_option("--out", out, "Output directory")->required();
  ss->add_option("--seed", seed, "Seed for the base split")->required();
  ss->add_option("--checkpoint", checkpoint, "VS-GAE checkpoint for the latent method")->required();
  ss->add_option("--fractions", scfg.fractions, "Training-set fractions")->delimiter(',');
  ss->add_option("--seeds", scfg.seeds, "Per-cell seeds")->delimiter(',');
  ss->add_option("--methods", scfg.methods, "Sampling methods")->delimiter(',');
  ss->add_option("--epochs", scfg.train.epochs, "Predictor epochs")->capture_default_str();
  ss->add_option("--lr", scfg.train.learning_rate, "Predictor learning rate")->capture_default_str();
  ss->add_option("--node-dim", scfg.predictor_encoder.node_dim, "Predictor node size")->capture_default_str();
  ss->add_option("--graph-dim", scfg.predictor_encoder.graph_dim, "Predictor graph size")->capture_default_str();
  data.add_to(ss);
  split_opts.add_to(ss);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (gen->parsed() && sample_k && gen_seed->count() == 0) {
    std::cerr << "gen-dataset: --seed is required with --sample-k\n";
    return 1;
  }
  if (smp->parsed() && !k && !fraction) {
    std::cerr << "sample: one of --k or --fraction is required\n";
    return 1;
  }
  if (smp->parsed() && method == "latent" && checkpoint.empty()) {
    std::cerr << "sample: --checkpoint is required for the latent method\n";
    return 1;
  }

  try {
    const fs::path dir = prepare(out);

    if (gen->parsed()) {
      DatasetParams p;
      p.max_n = data.max_nodes;
      p.dedup = data.dedup;
      if (sample_k) {
        p.mode = DatasetParams::Mode::SampleK;
        p.k = *sample_k;
        SearchSpaceLimits limits;
        limits.max_nodes = data.max_nodes;
        const Dataset ds = make_dataset(limits, p, seed);
        save_dataset(ds, dir / "dataset.jsonl");
        write_json(dir / "summary.json", {{"records", ds.size()}, {"seed", seed}, {"sample_k", *sample_k}});
      } else {
        const Dataset ds = make_dataset({}, p, 0);
        save_dataset(ds, dir / "dataset.jsonl");
        write_json(dir / "summary.json", {{"records", ds.size()}, {"max_nodes", p.max_n}, {"dedup", p.dedup}});
      }
    } else if (tv->parsed()) {
      const Dataset ds = data.load();
      tcfg.seed = seed;
      tcfg.checkpoint = dir / "vsgae.ck";
      tcfg.resume = resume;
      VsgaeModel model(ecfg, seed);
      const auto log = train_vsgae(model, ds, tcfg, [](const EpochLoss& e) {
        std::cerr << "epoch " << e.epoch << " total " << e.loss.total << " lr " << e.learning_rate << "\n";
      });
      write_file_atomic(dir / "loss_log.csv", loss_log_csv(log));
      const auto& last = log.back().loss;
      write_json(dir / "summary.json", {{"records", ds.size()},
                                        {"data", data.describe()},
                                        {"seed", seed},
                                        {"epochs", tcfg.epochs},
                                        {"final", {{"L_V", last.node}, {"L_E", last.edge}, {"D_KL", last.kl},
                                                   {"total", last.total}}},
                                        {"checkpoint", "vsgae.ck"}});
    } else if (tp->parsed() || zs->parsed()) {
      const Dataset ds = data.load();
      pcfg.seed = seed;
      PredictorModel model(pecfg, seed);
      PredictorResult r;
      ojson spec;
      if (tp->parsed()) {
        const Split s = split(ds, split_opts.spec(seed));
        r = train_joint(model, ds, s, pcfg);
        spec = {{"mode", "standard"}, {"split", split_json(s)}};
      } else {
        ZeroShotSpec z;
        int largest = 0;
        for (const auto& rec : ds.records) largest = std::max(largest, rec.graph.size());
        z.holdout_nodes = holdout.value_or(largest);
        z.validation_fraction = zs_val;
        r = zero_shot(model, ds, z, pcfg);
        spec = {{"mode", "zero-shot"}, {"holdout_nodes", z.holdout_nodes}};
      }
      spec["data"] = data.describe();
      spec["epochs"] = pcfg.epochs;
      spec["learning_rate"] = pcfg.learning_rate;
      spec["seed"] = seed;
      write_file_atomic(dir / "metrics.csv", predictor_log_csv(r.log));
      model.save(dir / "predictor.ck", {{"best_epoch", r.best_epoch}});
      write_json(dir / "summary.json", {{"test_rmse", r.test_rmse},
                                        {"best_epoch", r.best_epoch},
                                        {"best_val_rmse", r.best_val_rmse},
                                        {"spec", spec}});
    } else if (smp->parsed()) {
      const Dataset ds = data.load();
      const std::size_t want =
          k ? *k : static_cast<std::size_t>(std::llround(*fraction * static_cast<double>(ds.size())));
      SampleResult r;
      if (method == "uniform") {
        r = sample_uniform_per_size(ds, want, seed);
      } else if (method == "edit") {
        r = sample_edit_uniform(ds, want, seed);
      } else {
        const auto model = VsgaeModel::load(checkpoint);
        Eigen::MatrixXd means(static_cast<Eigen::Index>(ds.size()), model->latent_dim());
        for (std::size_t i = 0; i < ds.size(); ++i) {
          const auto m = model->embed(ds.records[i].graph);
          for (int j = 0; j < model->latent_dim(); ++j) means(static_cast<Eigen::Index>(i), j) = m[static_cast<std::size_t>(j)];
        }
        const PcaModel pca = fit_pca(means);
        r = latent_bin_sample(reduce(pca, means, std::min<Eigen::Index>(pca_dims, pca.components.rows())), want, seed);
      }
      write_json(dir / "sample.json", r.to_json());
    } else if (er->parsed()) {
      const auto model = VsgaeModel::load(checkpoint);
      const Dataset ds = data.load();
      const Split s = split(ds, split_opts.spec(seed));
      const auto r = eval_reconstruction(*model, graphs_of(ds, s.test), seed, z_samples, decodes);
      write_json(dir / "summary.json", {{"reconstruction_accuracy", r.accuracy},
                                        {"graphs", r.graphs},
                                        {"decodes", r.decodes},
                                        {"exact", r.exact},
                                        {"seed", seed},
                                        {"data", data.describe()}});
    } else if (ep->parsed()) {
      const auto model = VsgaeModel::load(checkpoint);
      const auto r = eval_prior_validity(*model, seed, latents, decodes);
      write_json(dir / "summary.json",
                 {{"prior_validity", r.validity}, {"decodes", r.decodes}, {"valid", r.valid}, {"seed", seed}});
    } else if (pr->parsed()) {
      const auto model = VsgaeModel::load(checkpoint);
      const Dataset ds = data.load();
      Eigen::MatrixXd means(static_cast<Eigen::Index>(ds.size()), model->latent_dim());
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto m = model->embed(ds.records[i].graph);
        for (int j = 0; j < model->latent_dim(); ++j) means(static_cast<Eigen::Index>(i), j) = m[static_cast<std::size_t>(j)];
      }
      const PcaModel pca = fit_pca(means);
      write_file_atomic(dir / "pca_report.csv", pca_report_csv(pca));
      double first4 = 0.0;
      for (Eigen::Index i = 0; i < std::min<Eigen::Index>(4, pca.explained_variance_ratio.size()); ++i)
        first4 += pca.explained_variance_ratio(i);
      write_json(dir / "summary.json", {{"points", ds.size()}, {"dims", pca.dims()}, {"ratio_first_4", first4}});
    } else if (ss->parsed()) {
      const auto model = VsgaeModel::load(checkpoint);
      const Dataset ds = data.load();
      scfg.split = split_opts.spec(seed);
      scfg.predictor_encoder.variational = false;
      const auto r = run_sampling_stability(ds, *model, scfg, [](const MetricRow& row) {
        std::cerr << row.method << " fraction " << row.fraction << " seed " << row.seed << " test_rmse " << row.value
                  << "\n";
      });
      write_file_atomic(dir / "stability.csv", metric_rows_csv(r.rows));
      ojson summary = r.summary();
      summary["data"] = data.describe();
      summary["seed"] = seed;
      write_json(dir / "summary.json", summary);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
