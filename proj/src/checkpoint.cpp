#include "socproc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace socproc::ckpt {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  // Stored little endian; every supported target is little endian.
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

nlohmann::json model_config_to_json(const pm::ModelConfig& cfg) {
  return nlohmann::json{
      {"variant", pm::variant_name(cfg.variant)},
      {"share_social_encoders", cfg.variant.share_social_encoders},
      {"deterministic_decoding", cfg.variant.deterministic_decoding},
      {"feature_dim", cfg.feature_dim},
      {"t_obs", cfg.t_obs},
      {"t_fut", cfg.t_fut},
      {"d_e", cfg.d_e},
      {"enc_layers", cfg.enc_layers},
      {"enc_hidden", cfg.enc_hidden},
      {"pooler_layers", cfg.pooler_layers},
      {"pooler_hidden", cfg.pooler_hidden},
      {"pooler_out", cfg.pooler_out},
      {"z_layers", cfg.z_layers},
      {"z_hidden", cfg.z_hidden},
      {"attn_heads", cfg.attn_heads},
      {"attn_qk_dim", cfg.attn_qk_dim},
      {"dropout", cfg.dropout},
      {"no_pool", cfg.no_pool},
      {"pool_final_only", cfg.pool_final_only},
  };
}

pm::ModelConfig model_config_from_json(const nlohmann::json& j) {
  pm::ModelConfig cfg;
  if (j.contains("variant")) cfg.variant = pm::parse_variant(j.at("variant").get<std::string>());
  if (j.contains("share_social_encoders"))
    cfg.variant.share_social_encoders = j.at("share_social_encoders").get<bool>();
  if (j.contains("deterministic_decoding"))
    cfg.variant.deterministic_decoding = j.at("deterministic_decoding").get<bool>();
  auto get_int = [&j](const char* key, int& out) {
    if (j.contains(key)) out = j.at(key).get<int>();
  };
  get_int("feature_dim", cfg.feature_dim);
  get_int("t_obs", cfg.t_obs);
  get_int("t_fut", cfg.t_fut);
  get_int("d_e", cfg.d_e);
  get_int("enc_layers", cfg.enc_layers);
  get_int("enc_hidden", cfg.enc_hidden);
  get_int("pooler_layers", cfg.pooler_layers);
  get_int("pooler_hidden", cfg.pooler_hidden);
  get_int("pooler_out", cfg.pooler_out);
  get_int("z_layers", cfg.z_layers);
  get_int("z_hidden", cfg.z_hidden);
  get_int("attn_heads", cfg.attn_heads);
  get_int("attn_qk_dim", cfg.attn_qk_dim);
  if (j.contains("dropout")) cfg.dropout = j.at("dropout").get<double>();
  if (j.contains("no_pool")) cfg.no_pool = j.at("no_pool").get<bool>();
  if (j.contains("pool_final_only")) cfg.pool_final_only = j.at("pool_final_only").get<bool>();
  return cfg;
}

nlohmann::json stats_to_json(const dsets::StandardizationStats& stats) {
  nlohmann::json j;
  j["feature_dim"] = stats.feature_dim;
  j["dims"] = stats.dims;
  j["mean"] = std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size());
  j["stddev"] =
      std::vector<double>(stats.stddev.data(), stats.stddev.data() + stats.stddev.size());
  return j;
}

dsets::StandardizationStats stats_from_json(const nlohmann::json& j) {
  dsets::StandardizationStats stats;
  stats.feature_dim = j.at("feature_dim").get<int>();
  stats.dims = j.at("dims").get<std::vector<int>>();
  auto mean = j.at("mean").get<std::vector<double>>();
  auto stddev = j.at("stddev").get<std::vector<double>>();
  if (mean.size() != stats.dims.size() || stddev.size() != stats.dims.size())
    throw CheckpointError("standardization block is inconsistent");
  stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<long>(mean.size()));
  stats.stddev =
      Eigen::Map<const Eigen::VectorXd>(stddev.data(), static_cast<long>(stddev.size()));
  return stats;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  nlohmann::json header;
  header["layout_version"] = c.layout_version;
  header["config"] = model_config_to_json(c.config);
  header["stats"] = c.stats ? stats_to_json(*c.stats) : nlohmann::json(nullptr);
  header["metrics"] = c.metrics;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, m] : c.parameters)
    params.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  header["params"] = std::move(params);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  const std::string text = header.dump();
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : c.parameters)
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
  if (!os) throw CheckpointError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open: " + path.string());
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint file: " + path.string());
  const std::uint64_t len = read_u64(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw CheckpointError("truncated header: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad header: ") + e.what());
  }

  Checkpoint c;
  c.layout_version = header.at("layout_version").get<int>();
  c.config = model_config_from_json(header.at("config"));
  if (!header.at("stats").is_null()) c.stats = stats_from_json(header.at("stats"));
  c.metrics = header.at("metrics").get<std::map<std::string, double>>();
  for (const auto& entry : header.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    ad::Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
    if (!is) throw CheckpointError("truncated payload at " + name + ": " + path.string());
    c.parameters.emplace(name, std::move(m));
  }
  return c;
}

std::map<std::string, ad::Mat> extract_parameters(const pm::ProcessModel& model) {
  std::map<std::string, ad::Mat> out;
  for (const auto& [name, v] : model.params().entries()) out.emplace(name, v.value());
  return out;
}

void apply_parameters(pm::ProcessModel& model,
                      const std::map<std::string, ad::Mat>& parameters) {
  const auto& entries = model.params().entries();
  for (const auto& [name, _] : entries)
    if (!parameters.count(name))
      throw CheckpointError("checkpoint is missing parameter " + name);
  for (const auto& [name, m] : parameters) {
    if (!entries.count(name)) throw CheckpointError("checkpoint has extra parameter " + name);
    auto it = entries.find(name);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
      throw CheckpointError("shape mismatch for parameter " + name);
    model.params().set_value(name, m);
  }
}

}  // namespace socproc::ckpt
