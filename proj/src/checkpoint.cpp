#include "mgmn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace mgmn {
namespace {

constexpr char kMagic[8] = {'M', 'G', 'M', 'N', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("checkpoint truncated");
  return v;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["input_dim"] = c.input_dim;
  j["gcn_layers"] = c.gcn_layers;
  j["gcn_dim"] = c.gcn_dim;
  j["perspectives"] = c.perspectives;
  j["dropout"] = c.dropout;
  j["ngmn_aggregator"] = to_string(c.ngmn_aggregator);
  j["sgnn_aggregator"] = to_string(c.sgnn_aggregator);
  j["task"] = to_string(c.task);
  j["mode"] = to_string(c.mode);
  j["normalize_attention"] = c.normalize_attention;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
  if (j.contains("input_dim")) c.input_dim = j.at("input_dim").get<int>();
  if (j.contains("gcn_layers")) c.gcn_layers = j.at("gcn_layers").get<int>();
  if (j.contains("gcn_dim")) c.gcn_dim = j.at("gcn_dim").get<int>();
  if (j.contains("perspectives")) c.perspectives = j.at("perspectives").get<int>();
  if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
  if (j.contains("ngmn_aggregator")) c.ngmn_aggregator = parse_aggregator(j.at("ngmn_aggregator").get<std::string>());
  if (j.contains("sgnn_aggregator")) c.sgnn_aggregator = parse_aggregator(j.at("sgnn_aggregator").get<std::string>());
  if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("normalize_attention")) c.normalize_attention = j.at("normalize_attention").get<bool>();
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  nlohmann::json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["config"] = to_json(ck.config);
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ck.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size());
  }
  header["extra"] = ck.extra;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kCheckpointFormatVersion);
    write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, m] : ck.tensors) {
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
      os.write(reinterpret_cast<const char*>(rm.data()),
               static_cast<std::streamsize>(rm.size() * sizeof(double)));
    }
    if (!os) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(is);
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw CheckpointError("checkpoint header truncated");
  const nlohmann::json header = nlohmann::json::parse(text);

  Checkpoint ck;
  ck.config = model_config_from_json(header.at("config"));
  ck.extra = header.value("extra", nlohmann::json::object());
  const std::streampos payload_start = is.tellg();
  for (const auto& t : header.at("tensors")) {
    const Index rows = t.at("shape").at(0).get<Index>();
    const Index cols = t.at("shape").at(1).get<Index>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    is.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(double)));
    is.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!is) throw CheckpointError("checkpoint payload truncated at " + t.at("name").get<std::string>());
    ck.tensors.emplace_back(t.at("name").get<std::string>(), Matrix(rm));
  }
  return ck;
}

Checkpoint make_checkpoint(const Model& model) {
  Checkpoint ck;
  ck.config = model.config();
  for (const auto& [name, t] : model.params().entries()) ck.tensors.emplace_back(name, t.value());
  return ck;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_checkpoint(path, make_checkpoint(model));
}

void restore_params(const Checkpoint& ck, Model& model) {
  for (auto& [name, t] : model.params().entries()) {
    auto it = std::find_if(ck.tensors.begin(), ck.tensors.end(),
                           [&](const auto& e) { return e.first == name; });
    if (it == ck.tensors.end()) throw CheckpointError("checkpoint lacks parameter " + name);
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      throw CheckpointError("checkpoint shape mismatch for " + name);
    }
    Tensor handle = t;
    handle.mutable_value() = it->second;
  }
}

Model load_model(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  Model model(ck.config);
  restore_params(ck, model);
  return model;
}

}  // namespace mgmn
