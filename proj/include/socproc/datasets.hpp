#pragma once
// Dataset construction: the synthetic glancing benchmark, interaction
// windowing, location standardization, batch assembly, and the on-disk
// interchange/store formats.

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "socproc/data_model.hpp"

namespace socproc::dsets {

struct DegenerateStatisticsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Synthetic glancing benchmark.
//
// Type I holds a pristine sinusoid over 20 steps; Type III matches it on the
// first 14 steps and then freezes at the step-13 value (a gaze fixating
// mid-sweep). Both types are emitted for every phase.

enum class GlanceType { kTypeI, kTypeIII };

inline constexpr int kGlanceSteps = 20;
inline constexpr int kGlanceObsSteps = 10;

struct GlancingSequence {
  double phase = 0.0;
  GlanceType type = GlanceType::kTypeI;
  std::array<double, kGlanceSteps> values{};
};

// Phases enumerate p * phase_step for p = 0, 1, ... while the value stays
// below 2*pi. Deterministic; two calls produce bit-identical output.
std::vector<GlancingSequence> generate_glancing_dataset(double phase_step = 0.001);

// First 10 steps observed, last 10 future, offset 1, one participant.
data::GroupSample to_group_sample(const GlancingSequence& g);

// Draws `count` distinct phase indices out of [0, n_phases), sorted.
std::vector<size_t> choose_eval_phases(size_t n_phases, size_t count,
                                       std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Windowing.

struct WindowingConfig {
  double obs_len_s = 2.0;
  double fut_len_s = 2.0;
  double overlap_fraction = 0.8;  // of the observed window
  double max_offset_s = 5.0;
  double sample_rate_hz = 10.0;
};

// Enumerates every (observed window, future window) pair: observed starts
// advance by obs_len*(1-overlap) steps; offsets run from 1 step to the
// configured maximum. Ordered by window start, then offset. Returns empty
// when the timeline cannot fit one pair.
std::vector<data::GroupSample> window_interaction(
    const std::string& group_id,
    const std::vector<data::ParticipantSequence>& timeline,
    const WindowingConfig& cfg);

// ---------------------------------------------------------------------------
// Standardization. Only location dimensions are affected; quaternions and
// the speaking flag pass through bit-identical.

struct StandardizationStats {
  int feature_dim = 0;
  std::vector<int> dims;  // standardized dimensions, canonical order
  Eigen::VectorXd mean;   // one entry per standardized dim
  Eigen::VectorXd stddev;
};

StandardizationStats fit_standardization(
    const std::vector<data::GroupSample>& train_samples);

data::GroupSample standardize(const StandardizationStats& stats,
                              data::GroupSample s);
data::GroupSample destandardize(const StandardizationStats& stats,
                                data::GroupSample s);

// Row-matrix forms used by model I/O; rows are timesteps.
void standardize_rows(const StandardizationStats& stats, Eigen::MatrixXd& m);
void destandardize_rows(const StandardizationStats& stats, Eigen::MatrixXd& m);
// Rescales per-dim standard deviations back to data scale (no mean shift).
void destandardize_std_rows(const StandardizationStats& stats,
                            Eigen::MatrixXd& m);

// ---------------------------------------------------------------------------
// Batch assembly.

struct SampleBatch {
  std::string group_id;
  std::vector<data::GroupSample> samples;
};

enum class EncoderKind { kMLP, kGRU };

// Buckets samples so every batch holds one group, one observed length, one
// future length, and no repeated observed-window start. The MLP kind
// additionally fixes a single (obs, fut) length across all batches (the
// most populous pair; other lengths are dropped).
std::vector<SampleBatch> make_batches(
    const std::vector<data::GroupSample>& samples, int batch_size,
    EncoderKind kind);

// Re-checks the batch constraints sample-by-sample.
std::vector<data::Violation> validate_batches(
    const std::vector<SampleBatch>& batches, EncoderKind kind);

// Plain shuffled chunking for single-group pools (the synthetic task).
std::vector<SampleBatch> make_random_batches(
    const std::vector<data::GroupSample>& samples, int batch_size,
    std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Interchange format: one directory per group holding manifest.json plus one
// JSON-lines file per participant. Each record carries a frame index, twelve
// real-valued pose fields, and a binary speaking flag:
//   frame, nose_x/y/z, face_normal_x/y/z, shoulder_mid_x/y/z,
//   body_normal_x/y/z, speaking
// Readers reject unknown fields and malformed frames with file/frame
// locations in the error.

struct RawFrame {
  long frame = 0;
  Eigen::Vector3d nose = Eigen::Vector3d::Zero();
  Eigen::Vector3d face_normal = Eigen::Vector3d::Zero();
  Eigen::Vector3d shoulder_mid = Eigen::Vector3d::Zero();
  Eigen::Vector3d body_normal = Eigen::Vector3d::Zero();
  double speaking = 0.0;
};

struct GroupRecording {
  std::string group_id;
  std::string split;  // "train" or "test"
  double sample_rate_hz = 10.0;
  std::vector<data::ParticipantSequence> timeline;  // 15-dim rows
};

void write_raw_group(const std::filesystem::path& dir,
                     const std::string& group_id, const std::string& split,
                     double sample_rate_hz,
                     const std::map<std::string, std::vector<RawFrame>>& streams);

// Converts normals to quaternions and hemisphere-aligns each participant
// stream; timestamps are re-indexed to consecutive sample indices.
GroupRecording ingest_group_recording(const std::filesystem::path& group_dir);

// Group directories under root (those holding manifest.json), sorted.
std::vector<std::filesystem::path> list_group_dirs(
    const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Versioned stores.

inline constexpr int kLayoutVersion = 1;

void save_samples(const std::filesystem::path& path,
                  const std::vector<data::GroupSample>& samples,
                  double sample_rate_hz);
std::pair<std::vector<data::GroupSample>, double> load_samples(
    const std::filesystem::path& path);

void save_stats(const std::filesystem::path& path,
                const StandardizationStats& stats);
StandardizationStats load_stats(const std::filesystem::path& path);

void save_glancing(const std::filesystem::path& path,
                   const std::vector<GlancingSequence>& seqs,
                   double phase_step);
std::pair<std::vector<GlancingSequence>, double> load_glancing(
    const std::filesystem::path& path);

}  // namespace socproc::dsets
