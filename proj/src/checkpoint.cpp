#include "vsgae/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vsgae::nn {

namespace {

constexpr std::array<char, 8> kMagic{'V', 'S', 'G', 'A', 'E', 'C', 'K', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void append_matrix(std::string& payload, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
}

struct Parsed {
  nlohmann::json manifest;
  std::string payload;
};

Parsed read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  const std::uint64_t len = get_u64(bytes.data() + 8);
  if (16 + len > bytes.size()) throw std::runtime_error("truncated checkpoint manifest");
  Parsed p;
  p.manifest = nlohmann::json::parse(bytes.substr(16, len));
  p.payload = bytes.substr(16 + len);
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const nlohmann::json& meta) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "vsgae-checkpoint";
  manifest["version"] = 1;
  manifest["meta"] = meta;
  auto tensors = nlohmann::ordered_json::array();
  std::string payload;
  auto emit = [&](const std::string& name, const char* kind, const Matrix& m, std::int64_t step) {
    nlohmann::ordered_json t;
    t["name"] = name;
    t["kind"] = kind;
    t["shape"] = {m.rows(), m.cols()};
    t["offset"] = payload.size();
    t["step"] = step;
    tensors.push_back(std::move(t));
    append_matrix(payload, m);
  };
  for (const auto& e : store.entries()) {
    emit(e.name, "param", e.param.value(), e.adam.step);
    emit(e.name, "adam_m", e.adam.first_moment, e.adam.step);
    emit(e.name, "adam_v", e.adam.second_moment, e.adam.step);
  }
  manifest["tensors"] = std::move(tensors);
  const std::string text = manifest.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put_u64(out, text.size());
  out += text;
  out += payload;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path) {
  return read_file(path).manifest.value("meta", nlohmann::json::object());
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& store) {
  const Parsed p = read_file(path);
  std::size_t restored = 0;
  for (const auto& t : p.manifest.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto kind = t.at("kind").get<std::string>();
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    if (!store.contains(name)) throw std::runtime_error("checkpoint has unknown parameter '" + name + "'");
    if (offset + static_cast<std::size_t>(rows * cols) * 4 > p.payload.size())
      throw std::runtime_error("checkpoint payload truncated at '" + name + "'");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = std::bit_cast<float>(get_u32(p.payload.data() + offset + static_cast<std::size_t>(i) * 4));

    for (auto& e : store.entries()) {
      if (e.name != name) continue;
      if (e.param.rows() != rows || e.param.cols() != cols)
        throw std::runtime_error("shape mismatch for parameter '" + name + "'");
      if (kind == "param") {
        e.param.mutable_value() = m;
        ++restored;
      } else if (kind == "adam_m") {
        e.adam.first_moment = m;
      } else if (kind == "adam_v") {
        e.adam.second_moment = m;
      }
      e.adam.step = t.value("step", std::int64_t{0});
    }
  }
  if (restored != store.size()) throw std::runtime_error("checkpoint does not cover every parameter");
  return p.manifest.value("meta", nlohmann::json::object());
}

}  // namespace vsgae::nn
