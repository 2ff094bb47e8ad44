#pragma once
// Experiment plumbing shared by the command-line front end and the test
// drivers: flat JSON run configurations with named presets, pre-flight
// validation down to a model configuration, run directories with manifests,
// store loading for either sample format, the raw-to-store preprocessing
// pipeline, and a scripted mock recording generator.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "socproc/datasets.hpp"
#include "socproc/process_model.hpp"
#include "socproc/training.hpp"

namespace socproc::run {

// Stamped into manifests so a run names the code that produced it.
inline constexpr const char* kVersionTag = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration.
//
// `variant` uses the operator-facing names
//   np, anp-dot, anp-multihead, sp-mlp, sp-gru,
//   asp-mlp-dot, asp-mlp-multihead, asp-gru-dot, asp-gru-multihead
// and `paths` is "latent" or "latent+det"; attentive variants require the
// latter. Social variants keep their auxiliary context decoders unless
// no_det_decoding is set. unshared_social_encoders mirrors the published
// architecture; switching it off shares one observation encoder across the
// context and target sides.

struct RunConfig {
  std::string variant = "sp-gru";
  std::string paths = "latent";

  bool no_pool = false;
  bool pool_oT = false;
  bool no_det_decoding = false;
  bool unshared_social_encoders = true;

  int feature_dim = data::kFeatureDim;
  int t_obs = 60;
  int t_fut = 60;
  int d_e = 64;
  int enc_layers = 1;
  int enc_hidden = 320;
  int pooler_layers = 2;
  int pooler_hidden = 64;
  int pooler_out = 32;
  int z_layers = 2;
  int z_hidden = 64;
  int attn_heads = 8;
  int attn_qk_dim = 32;

  train::TrainConfig train;

  std::string train_data;
  std::string val_data;    // empty: validate on the training batches
  std::string stats_path;  // empty: no standardization
  std::string run_name = "run";
};

// Flat key set; unknown keys are rejected by name, missing keys keep their
// defaults.
nlohmann::json run_config_to_json(const RunConfig& rc);
RunConfig run_config_from_json(const nlohmann::json& j);
void save_run_config(const std::filesystem::path& path, const RunConfig& rc);
RunConfig load_run_config(const std::filesystem::path& path);

// Full pre-flight validation: variant/paths table, ablation flags that do
// not apply to the family (for example no_pool on np), and the model-side
// consistency checks. Throws ConfigError naming the offending combination.
pm::ModelConfig to_model_config(const RunConfig& rc);

std::string regime_name(train::ContextRegime r);
train::ContextRegime parse_regime(const std::string& name);

// Named starting points: np-haggling, sp-mlp-haggling, sp-gru-haggling,
// np-toy, sp-gru-toy. The haggling presets carry the published architecture
// widths and optimizer settings; the toy presets carry the synthetic-task
// protocol (batch 100, fixed 25% context fraction).
std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

// ---------------------------------------------------------------------------
// Run directories and manifests.

struct RunManifest {
  std::string command;
  std::string config_path;
  unsigned long long seed = 0;
  std::string version = kVersionTag;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;
  long parameter_count = -1;  // -1 when the command builds no model
};

void save_manifest(const std::filesystem::path& run_dir, const RunManifest& m);
RunManifest load_manifest(const std::filesystem::path& run_dir);

// UTC wall time as 2026-01-31T12:34:56Z.
std::string timestamp_utc();

// $SOCPROC_RUN_ROOT when set, otherwise "runs".
std::filesystem::path default_run_root();

// Creates root/name, appending -2, -3, ... until the name is free.
std::filesystem::path create_run_dir(const std::filesystem::path& root,
                                     const std::string& name);

// ---------------------------------------------------------------------------
// Stores.

enum class StoreKind { kWindowed, kGlancing };

// Either store format, loaded as model-ready samples. Glancing sequences map
// to single-participant group samples; `glances` stays aligned with
// `samples` so downstream reports can recover phase and type.
struct LoadedSamples {
  StoreKind kind = StoreKind::kWindowed;
  std::vector<data::GroupSample> samples;
  double sample_rate_hz = 0.0;  // windowed stores
  double phase_step = 0.0;      // glancing stores
  std::vector<dsets::GlancingSequence> glances;
};

StoreKind sniff_store(const std::filesystem::path& path);
LoadedSamples load_any_samples(const std::filesystem::path& path);

// Windowed stores bucket by the model contract for `kind`. Glancing pools
// are chunked in store order, or shuffled first when `shuffle` is set (the
// training protocol); evaluation keeps store order so records line up with
// `glances`.
std::vector<dsets::SampleBatch> build_batches(const LoadedSamples& data,
                                              int batch_size,
                                              dsets::EncoderKind kind,
                                              bool shuffle, uint64_t seed);

// Longest recording per group in frames (one past the last future
// timestamp), as required by the fixed-initial context regime.
std::map<std::string, long> interaction_frame_counts(
    const std::vector<data::GroupSample>& samples);

// ---------------------------------------------------------------------------
// Preprocessing pipeline: raw interchange groups in, windowed stores out.

struct GroupReport {
  std::string group_id;
  std::string split;
  int participants = 0;
  long frames = 0;
  long samples = 0;
};

struct PreprocessReport {
  std::vector<GroupReport> groups;
  long train_samples = 0;
  long test_samples = 0;
  std::vector<std::string> warnings;  // zero-sample groups and the like
};

// Ingests every group directory under raw_dir, windows each recording, and
// writes train.bin / test.bin / stats.json / ingest_report.json into
// out_dir. Standardization statistics are fitted on the train split only.
// Schema violations surface as dsets::IngestError with file and frame
// locations; an empty group contributes zero samples and a warning.
PreprocessReport preprocess_raw(const std::filesystem::path& raw_dir,
                                const std::filesystem::path& out_dir,
                                const dsets::WindowingConfig& wcfg);

// ---------------------------------------------------------------------------
// Mock recordings: a scripted circle of agents with one rotating speaker.
// Listeners re-orient toward the current speaker a beat after each handover,
// so partner observation carries real signal for the pooling path.

struct MockConfig {
  int groups = 2;
  int train_groups = 1;
  int participants = 3;
  double seconds = 60.0;
  double sample_rate_hz = 10.0;
  int reaction_delay_frames = 3;
  uint64_t seed = 0;
};

void write_mock_dataset(const std::filesystem::path& dir, const MockConfig& cfg);

}  // namespace socproc::run
