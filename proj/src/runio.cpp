#include "socproc/runio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace socproc::run {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration.

json run_config_to_json(const RunConfig& rc) {
  json j;
  j["variant"] = rc.variant;
  j["paths"] = rc.paths;
  j["no_pool"] = rc.no_pool;
  j["pool_oT"] = rc.pool_oT;
  j["no_det_decoding"] = rc.no_det_decoding;
  j["unshared_social_encoders"] = rc.unshared_social_encoders;
  j["feature_dim"] = rc.feature_dim;
  j["t_obs"] = rc.t_obs;
  j["t_fut"] = rc.t_fut;
  j["d_e"] = rc.d_e;
  j["enc_layers"] = rc.enc_layers;
  j["enc_hidden"] = rc.enc_hidden;
  j["pooler_layers"] = rc.pooler_layers;
  j["pooler_hidden"] = rc.pooler_hidden;
  j["pooler_out"] = rc.pooler_out;
  j["z_layers"] = rc.z_layers;
  j["z_hidden"] = rc.z_hidden;
  j["attn_heads"] = rc.attn_heads;
  j["attn_qk_dim"] = rc.attn_qk_dim;
  j["batch_size"] = rc.train.batch_size;
  j["learning_rate"] = rc.train.learning_rate;
  j["weight_decay"] = rc.train.weight_decay;
  j["dropout"] = rc.train.dropout;
  j["context_regime"] = regime_name(rc.train.context_regime);
  j["context_min_fraction"] = rc.train.context_min_fraction;
  j["context_max_fraction"] = rc.train.context_max_fraction;
  j["context_fraction"] = rc.train.context_fraction;
  j["initial_fraction"] = rc.train.initial_fraction;
  j["max_epochs"] = rc.train.max_epochs;
  j["patience"] = rc.train.patience;
  j["teacher_forcing"] = rc.train.teacher_forcing;
  j["seed"] = rc.train.seed;
  j["train_data"] = rc.train_data;
  j["val_data"] = rc.val_data;
  j["stats_path"] = rc.stats_path;
  j["run_name"] = rc.run_name;
  return j;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& into) {
  if (j.contains(key)) {
    try {
      into = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "variant", "paths", "no_pool", "pool_oT", "no_det_decoding",
      "unshared_social_encoders", "feature_dim", "t_obs", "t_fut", "d_e",
      "enc_layers", "enc_hidden", "pooler_layers", "pooler_hidden",
      "pooler_out", "z_layers", "z_hidden", "attn_heads", "attn_qk_dim",
      "batch_size", "learning_rate", "weight_decay", "dropout",
      "context_regime", "context_min_fraction", "context_max_fraction",
      "context_fraction", "initial_fraction", "max_epochs", "patience",
      "teacher_forcing", "seed", "train_data", "val_data", "stats_path",
      "run_name"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + key + "'");

  RunConfig rc;
  take(j, "variant", rc.variant);
  take(j, "paths", rc.paths);
  take(j, "no_pool", rc.no_pool);
  take(j, "pool_oT", rc.pool_oT);
  take(j, "no_det_decoding", rc.no_det_decoding);
  take(j, "unshared_social_encoders", rc.unshared_social_encoders);
  take(j, "feature_dim", rc.feature_dim);
  take(j, "t_obs", rc.t_obs);
  take(j, "t_fut", rc.t_fut);
  take(j, "d_e", rc.d_e);
  take(j, "enc_layers", rc.enc_layers);
  take(j, "enc_hidden", rc.enc_hidden);
  take(j, "pooler_layers", rc.pooler_layers);
  take(j, "pooler_hidden", rc.pooler_hidden);
  take(j, "pooler_out", rc.pooler_out);
  take(j, "z_layers", rc.z_layers);
  take(j, "z_hidden", rc.z_hidden);
  take(j, "attn_heads", rc.attn_heads);
  take(j, "attn_qk_dim", rc.attn_qk_dim);
  take(j, "batch_size", rc.train.batch_size);
  take(j, "learning_rate", rc.train.learning_rate);
  take(j, "weight_decay", rc.train.weight_decay);
  take(j, "dropout", rc.train.dropout);
  if (j.contains("context_regime"))
    rc.train.context_regime = parse_regime(j.at("context_regime").get<std::string>());
  take(j, "context_min_fraction", rc.train.context_min_fraction);
  take(j, "context_max_fraction", rc.train.context_max_fraction);
  take(j, "context_fraction", rc.train.context_fraction);
  take(j, "initial_fraction", rc.train.initial_fraction);
  take(j, "max_epochs", rc.train.max_epochs);
  take(j, "patience", rc.train.patience);
  take(j, "teacher_forcing", rc.train.teacher_forcing);
  take(j, "seed", rc.train.seed);
  take(j, "train_data", rc.train_data);
  take(j, "val_data", rc.val_data);
  take(j, "stats_path", rc.stats_path);
  take(j, "run_name", rc.run_name);
  return rc;
}

void save_run_config(const std::filesystem::path& path, const RunConfig& rc) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for write: " + path.string());
  f << run_config_to_json(rc).dump(2) << "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

pm::ModelConfig to_model_config(const RunConfig& rc) {
  struct Entry {
    pm::Family family;
    dsets::EncoderKind kind;
    pm::AttentionKind attention;
  };
  static const std::map<std::string, Entry> table = {
      {"np", {pm::Family::kNP, dsets::EncoderKind::kMLP, pm::AttentionKind::kNone}},
      {"anp-dot", {pm::Family::kANP, dsets::EncoderKind::kMLP, pm::AttentionKind::kDot}},
      {"anp-multihead",
       {pm::Family::kANP, dsets::EncoderKind::kMLP, pm::AttentionKind::kMultihead}},
      {"sp-mlp", {pm::Family::kSP, dsets::EncoderKind::kMLP, pm::AttentionKind::kNone}},
      {"sp-gru", {pm::Family::kSP, dsets::EncoderKind::kGRU, pm::AttentionKind::kNone}},
      {"asp-mlp-dot", {pm::Family::kASP, dsets::EncoderKind::kMLP, pm::AttentionKind::kDot}},
      {"asp-mlp-multihead",
       {pm::Family::kASP, dsets::EncoderKind::kMLP, pm::AttentionKind::kMultihead}},
      {"asp-gru-dot", {pm::Family::kASP, dsets::EncoderKind::kGRU, pm::AttentionKind::kDot}},
      {"asp-gru-multihead",
       {pm::Family::kASP, dsets::EncoderKind::kGRU, pm::AttentionKind::kMultihead}},
  };

  const auto it = table.find(rc.variant);
  if (it == table.end()) {
    std::string names;
    for (const auto& [name, _] : table) names += names.empty() ? name : ", " + name;
    throw ConfigError("unknown variant '" + rc.variant + "' (expected one of " +
                      names + ")");
  }
  const Entry& e = it->second;

  pm::PathSet paths;
  if (rc.paths == "latent")
    paths = pm::PathSet::kLatent;
  else if (rc.paths == "latent+det")
    paths = pm::PathSet::kLatentDet;
  else
    throw ConfigError("unknown paths '" + rc.paths +
                      "' (expected latent or latent+det)");
  if (e.attention != pm::AttentionKind::kNone && paths != pm::PathSet::kLatentDet)
    throw ConfigError("variant '" + rc.variant +
                      "' is attentive and requires paths latent+det");

  const bool social = e.family == pm::Family::kSP || e.family == pm::Family::kASP;
  if (!social) {
    if (rc.no_pool)
      throw ConfigError("no_pool does not apply to variant '" + rc.variant +
                        "' (no partner pooling to remove)");
    if (rc.pool_oT)
      throw ConfigError("pool_oT does not apply to variant '" + rc.variant + "'");
    if (rc.no_det_decoding)
      throw ConfigError("no_det_decoding does not apply to variant '" + rc.variant +
                        "' (it never decodes context futures)");
  }

  pm::ModelConfig cfg;
  cfg.variant.family = e.family;
  cfg.variant.paths = paths;
  cfg.variant.attention = e.attention;
  cfg.variant.encoder_kind = e.kind;
  cfg.variant.share_social_encoders = !rc.unshared_social_encoders;
  cfg.variant.deterministic_decoding = social && !rc.no_det_decoding;
  cfg.feature_dim = rc.feature_dim;
  cfg.t_obs = rc.t_obs;
  cfg.t_fut = rc.t_fut;
  cfg.d_e = rc.d_e;
  cfg.enc_layers = rc.enc_layers;
  cfg.enc_hidden = rc.enc_hidden;
  cfg.pooler_layers = rc.pooler_layers;
  cfg.pooler_hidden = rc.pooler_hidden;
  cfg.pooler_out = rc.pooler_out;
  cfg.z_layers = rc.z_layers;
  cfg.z_hidden = rc.z_hidden;
  cfg.attn_heads = rc.attn_heads;
  cfg.attn_qk_dim = rc.attn_qk_dim;
  cfg.dropout = rc.train.dropout;
  cfg.no_pool = rc.no_pool;
  cfg.pool_final_only = rc.pool_oT;
  try {
    pm::validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::string regime_name(train::ContextRegime r) {
  return r == train::ContextRegime::kRandom ? "random" : "fixed-initial";
}

train::ContextRegime parse_regime(const std::string& name) {
  if (name == "random") return train::ContextRegime::kRandom;
  if (name == "fixed-initial") return train::ContextRegime::kFixedInitial;
  throw ConfigError("unknown context regime '" + name +
                    "' (expected random or fixed-initial)");
}

std::vector<std::string> preset_names() {
  return {"np-haggling", "np-toy", "sp-gru-haggling", "sp-gru-toy",
          "sp-mlp-haggling"};
}

RunConfig preset(const std::string& name) {
  RunConfig rc;
  rc.run_name = name;
  if (name == "np-haggling") {
    rc.variant = "np";
    rc.enc_layers = 2;
    rc.enc_hidden = 416;
    rc.train.batch_size = 128;
    rc.train.learning_rate = 3e-5;
    rc.train.weight_decay = 5e-4;
    rc.train.dropout = 0.25;
    return rc;
  }
  if (name == "sp-mlp-haggling") {
    rc.variant = "sp-mlp";
    rc.enc_layers = 2;
    rc.enc_hidden = 64;
    rc.train.batch_size = 128;
    rc.train.learning_rate = 3e-5;
    rc.train.weight_decay = 5e-4;
    rc.train.dropout = 0.25;
    return rc;
  }
  if (name == "sp-gru-haggling") {
    rc.variant = "sp-gru";
    rc.enc_layers = 1;
    rc.enc_hidden = 320;
    rc.train.batch_size = 64;
    rc.train.learning_rate = 1e-5;
    rc.train.weight_decay = 1e-3;
    rc.train.dropout = 0.0;
    return rc;
  }
  // The synthetic task: one participant, one feature, 10 observed and 10
  // future steps, batches of 100 with a fixed 25% context fraction. Partner
  // pooling needs partners and the pose layout, so it is off, as is the
  // auxiliary context decoding (the ELBO alone trains these).
  const auto toy = [&rc](const std::string& variant) {
    rc.variant = variant;
    rc.feature_dim = 1;
    rc.t_obs = 10;
    rc.t_fut = 10;
    rc.d_e = 32;
    rc.z_layers = 2;
    rc.z_hidden = 32;
    rc.train.batch_size = 100;
    rc.train.learning_rate = 1e-3;
    rc.train.weight_decay = 0.0;
    rc.train.dropout = 0.0;
    rc.train.context_min_fraction = 0.25;
    rc.train.context_max_fraction = 0.25;
    rc.train.context_fraction = 0.25;
    rc.train.max_epochs = 40;
    rc.train.patience = 10;
    // Teacher forcing degenerates on the single-channel task: the decoder
    // learns to echo the teacher and collapses under its own feedback.
    rc.train.teacher_forcing = false;
  };
  if (name == "np-toy") {
    toy("np");
    rc.enc_layers = 2;
    rc.enc_hidden = 32;
    return rc;
  }
  if (name == "sp-gru-toy") {
    toy("sp-gru");
    rc.enc_layers = 1;
    rc.enc_hidden = 32;
    rc.no_pool = true;
    rc.no_det_decoding = true;
    rc.pooler_layers = 2;
    rc.pooler_hidden = 32;
    rc.pooler_out = 16;
    return rc;
  }
  std::string names;
  for (const auto& n : preset_names()) names += names.empty() ? n : ", " + n;
  throw ConfigError("unknown preset '" + name + "' (expected one of " + names + ")");
}

// ---------------------------------------------------------------------------
// Run directories and manifests.

void save_manifest(const std::filesystem::path& run_dir, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config_path"] = m.config_path;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["parameter_count"] = m.parameter_count;
  std::ofstream f(run_dir / "manifest.json");
  if (!f)
    throw ConfigError("cannot write manifest in " + run_dir.string());
  f << j.dump(2) << "\n";
}

RunManifest load_manifest(const std::filesystem::path& run_dir) {
  std::ifstream f(run_dir / "manifest.json");
  if (!f)
    throw ConfigError("missing manifest in " + run_dir.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError((run_dir / "manifest.json").string() + ": " + e.what());
  }
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_path = j.at("config_path").get<std::string>();
  m.seed = j.at("seed").get<unsigned long long>();
  m.version = j.at("version").get<std::string>();
  m.inputs = j.at("inputs").get<std::vector<std::string>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  m.parameter_count = j.at("parameter_count").get<long>();
  return m;
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path default_run_root() {
  const char* env = std::getenv("SOCPROC_RUN_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

std::filesystem::path create_run_dir(const std::filesystem::path& root,
                                     const std::string& name) {
  std::filesystem::create_directories(root);
  for (int k = 1;; ++k) {
    const std::string candidate = k == 1 ? name : name + "-" + std::to_string(k);
    const auto dir = root / candidate;
    if (!std::filesystem::exists(dir)) {
      std::filesystem::create_directory(dir);
      return dir;
    }
  }
}

// ---------------------------------------------------------------------------
// Stores.

StoreKind sniff_store(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw dsets::StoreError("cannot open: " + path.string());
  char magic[4] = {0, 0, 0, 0};
  f.read(magic, 4);
  if (f.gcount() == 4) {
    if (std::string(magic, 4) == "SPWS") return StoreKind::kWindowed;
    if (std::string(magic, 4) == "SPGL") return StoreKind::kGlancing;
  }
  throw dsets::StoreError(path.string() + " is not a known sample store");
}

LoadedSamples load_any_samples(const std::filesystem::path& path) {
  LoadedSamples out;
  out.kind = sniff_store(path);
  if (out.kind == StoreKind::kWindowed) {
    auto [samples, rate] = dsets::load_samples(path);
    out.samples = std::move(samples);
    out.sample_rate_hz = rate;
  } else {
    auto [glances, step] = dsets::load_glancing(path);
    out.phase_step = step;
    out.samples.reserve(glances.size());
    for (const auto& g : glances) out.samples.push_back(dsets::to_group_sample(g));
    out.glances = std::move(glances);
  }
  return out;
}

std::vector<dsets::SampleBatch> build_batches(const LoadedSamples& data,
                                              int batch_size,
                                              dsets::EncoderKind kind,
                                              bool shuffle, uint64_t seed) {
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (data.kind == StoreKind::kWindowed)
    return dsets::make_batches(data.samples, batch_size, kind);
  if (shuffle) {
    std::mt19937_64 rng(seed);
    return dsets::make_random_batches(data.samples, batch_size, rng);
  }
  std::vector<dsets::SampleBatch> out;
  for (size_t i = 0; i < data.samples.size(); i += static_cast<size_t>(batch_size)) {
    dsets::SampleBatch b;
    b.group_id = data.samples[i].group_id;
    const size_t end = std::min(data.samples.size(), i + static_cast<size_t>(batch_size));
    b.samples.assign(data.samples.begin() + static_cast<long>(i),
                     data.samples.begin() + static_cast<long>(end));
    out.push_back(std::move(b));
  }
  return out;
}

std::map<std::string, long> interaction_frame_counts(
    const std::vector<data::GroupSample>& samples) {
  std::map<std::string, long> out;
  for (const auto& s : samples) {
    long last = 0;
    for (const auto& p : s.future)
      if (!p.timestamps.empty()) last = std::max(last, p.timestamps.back());
    auto [it, _] = out.try_emplace(s.group_id, 0L);
    it->second = std::max(it->second, last + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing.

PreprocessReport preprocess_raw(const std::filesystem::path& raw_dir,
                                const std::filesystem::path& out_dir,
                                const dsets::WindowingConfig& wcfg) {
  const auto group_dirs = dsets::list_group_dirs(raw_dir);
  if (group_dirs.empty())
    throw dsets::IngestError("no group directories under " + raw_dir.string());

  PreprocessReport report;
  std::vector<data::GroupSample> train_samples, test_samples;
  double rate = wcfg.sample_rate_hz;
  for (const auto& dir : group_dirs) {
    const dsets::GroupRecording rec = dsets::ingest_group_recording(dir);
    dsets::WindowingConfig gcfg = wcfg;
    gcfg.sample_rate_hz = rec.sample_rate_hz;
    rate = rec.sample_rate_hz;
    auto samples = dsets::window_interaction(rec.group_id, rec.timeline, gcfg);

    GroupReport gr;
    gr.group_id = rec.group_id;
    gr.split = rec.split;
    gr.participants = static_cast<int>(rec.timeline.size());
    gr.frames = rec.timeline.empty() ? 0 : rec.timeline[0].steps.rows();
    gr.samples = static_cast<long>(samples.size());
    if (samples.empty())
      report.warnings.push_back("group " + rec.group_id + " produced no samples");
    report.groups.push_back(gr);

    auto& sink = rec.split == "train" ? train_samples : test_samples;
    sink.insert(sink.end(), std::make_move_iterator(samples.begin()),
                std::make_move_iterator(samples.end()));
  }
  report.train_samples = static_cast<long>(train_samples.size());
  report.test_samples = static_cast<long>(test_samples.size());

  std::filesystem::create_directories(out_dir);
  dsets::save_samples(out_dir / "train.bin", train_samples, rate);
  dsets::save_samples(out_dir / "test.bin", test_samples, rate);
  const dsets::StandardizationStats stats = dsets::fit_standardization(train_samples);
  dsets::save_stats(out_dir / "stats.json", stats);

  json j;
  j["stats_from"] = "train";
  j["train_samples"] = report.train_samples;
  j["test_samples"] = report.test_samples;
  j["warnings"] = report.warnings;
  json groups = json::array();
  for (const auto& g : report.groups) {
    json gj;
    gj["group_id"] = g.group_id;
    gj["split"] = g.split;
    gj["participants"] = g.participants;
    gj["frames"] = g.frames;
    gj["samples"] = g.samples;
    groups.push_back(gj);
  }
  j["groups"] = groups;
  std::ofstream f(out_dir / "ingest_report.json");
  f << j.dump(2) << "\n";
  return report;
}

// ---------------------------------------------------------------------------
// Mock recordings.

namespace {

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

// Moves `yaw` toward `target` by at most `step` radians along the short way.
double turn_toward(double yaw, double target, double step) {
  const double diff = wrap_angle(target - yaw);
  if (std::abs(diff) <= step) return target;
  return yaw + (diff > 0 ? step : -step);
}

}  // namespace

void write_mock_dataset(const std::filesystem::path& dir, const MockConfig& cfg) {
  if (cfg.participants < 2)
    throw ConfigError("mock recordings need at least two participants");
  if (cfg.groups < 1 || cfg.train_groups < 0 || cfg.train_groups > cfg.groups)
    throw ConfigError("mock group counts are inconsistent");
  const long frames = std::lround(cfg.seconds * cfg.sample_rate_hz);
  if (frames < 2) throw ConfigError("mock recording too short");

  std::filesystem::create_directories(dir);
  const int n = cfg.participants;
  const double radius = 100.0;  // centimeters

  for (int g = 0; g < cfg.groups; ++g) {
    std::mt19937_64 rng(cfg.seed * 0x100000001b3ULL + static_cast<uint64_t>(g));

    // Speaker handover schedule: who speaks at each frame.
    std::vector<int> speaker(static_cast<size_t>(frames));
    int current = static_cast<int>(rng() % static_cast<uint64_t>(n));
    long next_switch = 20 + static_cast<long>(rng() % 20);
    for (long t = 0; t < frames; ++t) {
      if (t == next_switch) {
        const int hop = 1 + static_cast<int>(rng() % static_cast<uint64_t>(n - 1));
        current = (current + hop) % n;
        next_switch = t + 20 + static_cast<long>(rng() % 20);
      }
      speaker[static_cast<size_t>(t)] = current;
    }

    std::vector<Eigen::Vector3d> base(static_cast<size_t>(n));
    std::vector<double> face_yaw(static_cast<size_t>(n)), body_yaw(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * i / n;
      base[static_cast<size_t>(i)] =
          Eigen::Vector3d(radius * std::cos(a), radius * std::sin(a), 150.0);
      // Everyone starts facing the circle center.
      face_yaw[static_cast<size_t>(i)] = wrap_angle(a + std::numbers::pi);
      body_yaw[static_cast<size_t>(i)] = face_yaw[static_cast<size_t>(i)];
    }

    std::map<std::string, std::vector<dsets::RawFrame>> streams;
    for (int i = 0; i < n; ++i)
      streams["p" + std::to_string(i)].reserve(static_cast<size_t>(frames));

    for (long t = 0; t < frames; ++t) {
      // Listeners react to the speaker from a few frames back, the body
      // follows with twice the lag, so partner streams predict this stream.
      const long seen = std::max<long>(0, t - cfg.reaction_delay_frames);
      const long seen_body = std::max<long>(0, t - 2 * cfg.reaction_delay_frames);
      for (int i = 0; i < n; ++i) {
        const auto si = static_cast<size_t>(i);
        const bool speaking = speaker[static_cast<size_t>(t)] == i;

        double face_target;
        if (speaking) {
          // The speaker sweeps their gaze across the circle center.
          const double a = 2.0 * std::numbers::pi * i / n;
          face_target = wrap_angle(a + std::numbers::pi +
                                   0.5 * std::sin(2.0 * std::numbers::pi * t / 30.0));
        } else {
          const int sp = speaker[static_cast<size_t>(seen)];
          const Eigen::Vector3d to =
              base[static_cast<size_t>(sp)] - base[si];
          face_target = std::atan2(to.y(), to.x());
        }
        face_yaw[si] = turn_toward(face_yaw[si], face_target, 0.25);

        double body_target;
        {
          const int sp = speaker[static_cast<size_t>(seen_body)];
          if (sp == i) {
            const double a = 2.0 * std::numbers::pi * i / n;
            body_target = wrap_angle(a + std::numbers::pi);
          } else {
            const Eigen::Vector3d to =
                base[static_cast<size_t>(sp)] - base[si];
            body_target = std::atan2(to.y(), to.x());
          }
        }
        body_yaw[si] = turn_toward(body_yaw[si], body_target, 0.08);

        dsets::RawFrame fr;
        fr.frame = t;
        const double bob = speaking ? 3.0 : 1.0;
        fr.nose = base[si] +
                  Eigen::Vector3d(
                      0.8 * std::sin(2.0 * std::numbers::pi * t / 27.0 + 2.0 * i),
                      0.8 * std::cos(2.0 * std::numbers::pi * t / 23.0 + i),
                      bob * std::sin(2.0 * std::numbers::pi * t / 13.0 + i));
        fr.face_normal =
            Eigen::Vector3d(std::cos(face_yaw[si]), std::sin(face_yaw[si]), 0.0);
        fr.shoulder_mid = fr.nose - Eigen::Vector3d(0.0, 0.0, 20.0);
        fr.body_normal =
            Eigen::Vector3d(std::cos(body_yaw[si]), std::sin(body_yaw[si]), 0.0);
        fr.speaking = speaking ? 1.0 : 0.0;
        streams["p" + std::to_string(i)].push_back(fr);
      }
    }

    const std::string group_id = "mock" + std::to_string(g);
    const std::string split = g < cfg.train_groups ? "train" : "test";
    dsets::write_raw_group(dir / group_id, group_id, split, cfg.sample_rate_hz,
                           streams);
  }
}

}  // namespace socproc::run
