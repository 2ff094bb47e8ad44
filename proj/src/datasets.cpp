#include "socproc/datasets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "socproc/geometry.hpp"

namespace socproc::dsets {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic glancing benchmark.

std::vector<GlancingSequence> generate_glancing_dataset(double phase_step) {
  if (phase_step <= 0.0)
    throw std::invalid_argument("generate_glancing_dataset: phase_step <= 0");
  std::vector<GlancingSequence> out;
  const double two_pi = 2.0 * std::numbers::pi;
  for (long p = 0; static_cast<double>(p) * phase_step < two_pi; ++p) {
    const double phase = static_cast<double>(p) * phase_step;
    GlancingSequence base;
    base.phase = phase;
    base.type = GlanceType::kTypeI;
    for (int n = 0; n < kGlanceSteps; ++n)
      base.values[n] =
          std::sin(static_cast<double>(n) * (3.0 * std::numbers::pi + phase) / 19.0);
    GlancingSequence clipped = base;
    clipped.type = GlanceType::kTypeIII;
    for (int n = 14; n < kGlanceSteps; ++n)
      clipped.values[n] = clipped.values[13];
    out.push_back(base);
    out.push_back(clipped);
  }
  return out;
}

data::GroupSample to_group_sample(const GlancingSequence& g) {
  data::GroupSample s;
  s.group_id = "glance";
  s.offset_steps = 1;
  data::ParticipantSequence obs, fut;
  obs.participant_id = fut.participant_id = "p0";
  obs.steps.resize(kGlanceObsSteps, 1);
  fut.steps.resize(kGlanceSteps - kGlanceObsSteps, 1);
  for (int t = 0; t < kGlanceObsSteps; ++t) {
    obs.steps(t, 0) = g.values[t];
    obs.timestamps.push_back(t);
  }
  for (int t = kGlanceObsSteps; t < kGlanceSteps; ++t) {
    fut.steps(t - kGlanceObsSteps, 0) = g.values[t];
    fut.timestamps.push_back(t);
  }
  s.observed.push_back(std::move(obs));
  s.future.push_back(std::move(fut));
  return s;
}

std::vector<size_t> choose_eval_phases(size_t n_phases, size_t count,
                                       std::mt19937_64& rng) {
  if (count > n_phases)
    throw std::invalid_argument("choose_eval_phases: count > n_phases");
  std::vector<size_t> all(n_phases);
  for (size_t i = 0; i < n_phases; ++i) all[i] = i;
  std::vector<size_t> picked;
  picked.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  return picked;  // std::sample preserves the sorted order
}

// ---------------------------------------------------------------------------
// Windowing.

namespace {

long to_steps(double seconds, double rate) {
  return static_cast<long>(std::floor(seconds * rate + 0.5));
}

}  // namespace

std::vector<data::GroupSample> window_interaction(
    const std::string& group_id,
    const std::vector<data::ParticipantSequence>& timeline,
    const WindowingConfig& cfg) {
  if (cfg.obs_len_s <= 0 || cfg.fut_len_s <= 0 || cfg.sample_rate_hz <= 0 ||
      cfg.overlap_fraction < 0 || cfg.overlap_fraction >= 1 ||
      cfg.max_offset_s < 0)
    throw std::invalid_argument("window_interaction: bad config");
  std::vector<data::GroupSample> out;
  if (timeline.empty()) return out;

  const long t_obs = to_steps(cfg.obs_len_s, cfg.sample_rate_hz);
  const long t_fut = to_steps(cfg.fut_len_s, cfg.sample_rate_hz);
  const long max_off = to_steps(cfg.max_offset_s, cfg.sample_rate_hz);
  const long stride = std::max<long>(
      1, static_cast<long>(std::floor(
             static_cast<double>(t_obs) * (1.0 - cfg.overlap_fraction) + 0.5)));
  const long len = timeline[0].steps.rows();
  for (const auto& p : timeline)
    if (p.steps.rows() != len)
      throw std::invalid_argument("window_interaction: unaligned participants");

  for (long start = 0; start + t_obs <= len; start += stride) {
    const long obs_end = start + t_obs - 1;
    for (long off = 1; off <= max_off; ++off) {
      const long f1 = obs_end + off;
      if (f1 + t_fut > len) break;
      data::GroupSample s;
      s.group_id = group_id;
      s.offset_steps = static_cast<int>(off);
      for (const auto& p : timeline) {
        data::ParticipantSequence obs, fut;
        obs.participant_id = fut.participant_id = p.participant_id;
        obs.steps = p.steps.middleRows(start, t_obs);
        fut.steps = p.steps.middleRows(f1, t_fut);
        for (long t = 0; t < t_obs; ++t)
          obs.timestamps.push_back(p.timestamps[start + t]);
        for (long t = 0; t < t_fut; ++t)
          fut.timestamps.push_back(p.timestamps[f1 + t]);
        s.observed.push_back(std::move(obs));
        s.future.push_back(std::move(fut));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization.

StandardizationStats fit_standardization(
    const std::vector<data::GroupSample>& train_samples) {
  StandardizationStats stats;
  if (train_samples.empty())
    throw std::invalid_argument("fit_standardization: empty sample set");
  stats.feature_dim =
      static_cast<int>(train_samples[0].observed.at(0).steps.cols());
  if (stats.feature_dim == data::kFeatureDim)
    stats.dims.assign(data::kLocationDims.begin(), data::kLocationDims.end());
  const size_t nd = stats.dims.size();
  stats.mean = Eigen::VectorXd::Zero(nd);
  stats.stddev = Eigen::VectorXd::Ones(nd);
  if (nd == 0) return stats;

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(nd);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(nd);
  long count = 0;
  auto accumulate = [&](const Eigen::MatrixXd& m) {
    for (size_t k = 0; k < nd; ++k) {
      sum(k) += m.col(stats.dims[k]).sum();
      sumsq(k) += m.col(stats.dims[k]).squaredNorm();
    }
    count += m.rows();
  };
  for (const auto& s : train_samples) {
    for (const auto& p : s.observed) accumulate(p.steps);
    for (const auto& p : s.future) accumulate(p.steps);
  }
  stats.mean = sum / static_cast<double>(count);
  for (size_t k = 0; k < nd; ++k) {
    const double var =
        sumsq(k) / static_cast<double>(count) - stats.mean(k) * stats.mean(k);
    if (var < 1e-12)
      throw DegenerateStatisticsError(
          "fit_standardization: zero variance in location dim " +
          std::to_string(stats.dims[k]));
    stats.stddev(k) = std::sqrt(var);
  }
  return stats;
}

void standardize_rows(const StandardizationStats& stats, Eigen::MatrixXd& m) {
  for (size_t k = 0; k < stats.dims.size(); ++k)
    m.col(stats.dims[k]) =
        (m.col(stats.dims[k]).array() - stats.mean(k)) / stats.stddev(k);
}

void destandardize_rows(const StandardizationStats& stats, Eigen::MatrixXd& m) {
  for (size_t k = 0; k < stats.dims.size(); ++k)
    m.col(stats.dims[k]) =
        m.col(stats.dims[k]).array() * stats.stddev(k) + stats.mean(k);
}

void destandardize_std_rows(const StandardizationStats& stats,
                            Eigen::MatrixXd& m) {
  for (size_t k = 0; k < stats.dims.size(); ++k)
    m.col(stats.dims[k]) *= stats.stddev(k);
}

data::GroupSample standardize(const StandardizationStats& stats,
                              data::GroupSample s) {
  for (auto& p : s.observed) standardize_rows(stats, p.steps);
  for (auto& p : s.future) standardize_rows(stats, p.steps);
  return s;
}

data::GroupSample destandardize(const StandardizationStats& stats,
                                data::GroupSample s) {
  for (auto& p : s.observed) destandardize_rows(stats, p.steps);
  for (auto& p : s.future) destandardize_rows(stats, p.steps);
  return s;
}

// ---------------------------------------------------------------------------
// Batch assembly.

namespace {

long obs_len_of(const data::GroupSample& s) {
  return s.observed.at(0).steps.rows();
}
long fut_len_of(const data::GroupSample& s) {
  return s.future.at(0).steps.rows();
}
long start_of(const data::GroupSample& s) {
  return s.observed.at(0).timestamps.at(0);
}

}  // namespace

std::vector<SampleBatch> make_batches(
    const std::vector<data::GroupSample>& samples, int batch_size,
    EncoderKind kind) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size");

  // MLP models require one fixed (obs, fut) length across all batches; keep
  // the most populous pair, breaking ties toward shorter windows.
  std::pair<long, long> fixed{-1, -1};
  if (kind == EncoderKind::kMLP) {
    std::map<std::pair<long, long>, long> counts;
    for (const auto& s : samples) counts[{obs_len_of(s), fut_len_of(s)}]++;
    long best = -1;
    for (const auto& [lens, n] : counts)
      if (n > best) {
        best = n;
        fixed = lens;
      }
  }

  std::map<std::tuple<std::string, long, long>, std::vector<const data::GroupSample*>>
      buckets;
  for (const auto& s : samples) {
    const std::pair<long, long> lens{obs_len_of(s), fut_len_of(s)};
    if (kind == EncoderKind::kMLP && lens != fixed) continue;
    buckets[{s.group_id, lens.first, lens.second}].push_back(&s);
  }

  std::vector<SampleBatch> out;
  for (auto& [key, bucket] : buckets) {
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const data::GroupSample* a, const data::GroupSample* b) {
                       return std::pair(start_of(*a), a->offset_steps) <
                              std::pair(start_of(*b), b->offset_steps);
                     });
    std::vector<SampleBatch> open;
    std::vector<std::set<long>> open_starts;
    for (const data::GroupSample* s : bucket) {
      bool placed = false;
      for (size_t b = 0; b < open.size(); ++b) {
        if (static_cast<int>(open[b].samples.size()) < batch_size &&
            !open_starts[b].count(start_of(*s))) {
          open[b].samples.push_back(*s);
          open_starts[b].insert(start_of(*s));
          placed = true;
          break;
        }
      }
      if (!placed) {
        SampleBatch nb;
        nb.group_id = std::get<0>(key);
        nb.samples.push_back(*s);
        open.push_back(std::move(nb));
        open_starts.push_back({start_of(*s)});
      }
    }
    for (auto& b : open) out.push_back(std::move(b));
  }
  return out;
}

std::vector<data::Violation> validate_batches(
    const std::vector<SampleBatch>& batches, EncoderKind kind) {
  std::vector<data::Violation> out;
  long fixed_obs = -1, fixed_fut = -1;
  for (size_t bi = 0; bi < batches.size(); ++bi) {
    const auto& b = batches[bi];
    const std::string where = "batch " + std::to_string(bi);
    if (b.samples.empty()) {
      out.push_back({where, "empty batch"});
      continue;
    }
    std::set<long> starts;
    for (const auto& s : b.samples) {
      if (s.group_id != b.group_id)
        out.push_back({where, "mixed groups in batch"});
      if (obs_len_of(s) != obs_len_of(b.samples[0]))
        out.push_back({where, "mixed observed lengths in batch"});
      if (fut_len_of(s) != fut_len_of(b.samples[0]))
        out.push_back({where, "mixed future lengths in batch"});
      if (!starts.insert(start_of(s)).second)
        out.push_back({where, "repeated observed window start"});
    }
    if (kind == EncoderKind::kMLP) {
      if (fixed_obs < 0) {
        fixed_obs = obs_len_of(b.samples[0]);
        fixed_fut = fut_len_of(b.samples[0]);
      } else if (obs_len_of(b.samples[0]) != fixed_obs ||
                 fut_len_of(b.samples[0]) != fixed_fut) {
        out.push_back({where, "window length differs across batches"});
      }
    }
  }
  return out;
}

std::vector<SampleBatch> make_random_batches(
    const std::vector<data::GroupSample>& samples, int batch_size,
    std::mt19937_64& rng) {
  if (batch_size < 1)
    throw std::invalid_argument("make_random_batches: batch_size");
  std::vector<size_t> idx(samples.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<SampleBatch> out;
  for (size_t at = 0; at < idx.size(); at += batch_size) {
    SampleBatch b;
    const size_t end = std::min(idx.size(), at + batch_size);
    for (size_t i = at; i < end; ++i) b.samples.push_back(samples[idx[i]]);
    b.group_id = b.samples[0].group_id;
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interchange format.

namespace {

const std::vector<std::string> kRawFields = {
    "frame",          "nose_x",        "nose_y",        "nose_z",
    "face_normal_x",  "face_normal_y", "face_normal_z", "shoulder_mid_x",
    "shoulder_mid_y", "shoulder_mid_z", "body_normal_x", "body_normal_y",
    "body_normal_z",  "speaking"};

double require_number(const json& j, const std::string& key,
                      const std::string& where) {
  if (!j.contains(key))
    throw IngestError(where + ": missing field '" + key + "'");
  if (!j[key].is_number())
    throw IngestError(where + ": field '" + key + "' is not a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v))
    throw IngestError(where + ": field '" + key + "' is not finite");
  return v;
}

}  // namespace

void write_raw_group(const std::filesystem::path& dir,
                     const std::string& group_id, const std::string& split,
                     double sample_rate_hz,
                     const std::map<std::string, std::vector<RawFrame>>& streams) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["group_id"] = group_id;
  manifest["split"] = split;
  manifest["sample_rate_hz"] = sample_rate_hz;
  std::vector<std::string> ids;
  for (const auto& [id, frames] : streams) ids.push_back(id);
  manifest["participants"] = ids;
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";

  for (const auto& [id, frames] : streams) {
    std::ofstream f(dir / (id + ".jsonl"));
    for (const auto& fr : frames) {
      json rec;
      rec["frame"] = fr.frame;
      rec["nose_x"] = fr.nose.x();
      rec["nose_y"] = fr.nose.y();
      rec["nose_z"] = fr.nose.z();
      rec["face_normal_x"] = fr.face_normal.x();
      rec["face_normal_y"] = fr.face_normal.y();
      rec["face_normal_z"] = fr.face_normal.z();
      rec["shoulder_mid_x"] = fr.shoulder_mid.x();
      rec["shoulder_mid_y"] = fr.shoulder_mid.y();
      rec["shoulder_mid_z"] = fr.shoulder_mid.z();
      rec["body_normal_x"] = fr.body_normal.x();
      rec["body_normal_y"] = fr.body_normal.y();
      rec["body_normal_z"] = fr.body_normal.z();
      rec["speaking"] = fr.speaking;
      f << rec.dump() << "\n";
    }
  }
}

GroupRecording ingest_group_recording(const std::filesystem::path& group_dir) {
  const auto manifest_path = group_dir / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw IngestError("missing manifest: " + manifest_path.string());
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw IngestError(manifest_path.string() + ": " + e.what());
  }
  for (const auto& [key, _] : manifest.items()) {
    if (key != "group_id" && key != "split" && key != "sample_rate_hz" &&
        key != "participants")
      throw IngestError(manifest_path.string() + ": unknown field '" + key + "'");
  }

  GroupRecording rec;
  rec.group_id = manifest.at("group_id").get<std::string>();
  rec.split = manifest.at("split").get<std::string>();
  rec.sample_rate_hz = manifest.at("sample_rate_hz").get<double>();
  if (rec.split != "train" && rec.split != "test")
    throw IngestError(manifest_path.string() + ": split must be train|test");

  std::vector<long> reference_frames;
  for (const auto& id_json : manifest.at("participants")) {
    const std::string id = id_json.get<std::string>();
    const auto file = group_dir / (id + ".jsonl");
    std::ifstream f(file);
    if (!f) throw IngestError("missing participant file: " + file.string());

    std::vector<long> frames;
    std::vector<geom::Quaternion> head_chain, body_chain;
    std::vector<Eigen::VectorXd> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where =
          file.string() + " frame record " + std::to_string(line_no);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw IngestError(where + ": " + e.what());
      }
      for (const auto& [key, _] : j.items())
        if (std::find(kRawFields.begin(), kRawFields.end(), key) ==
            kRawFields.end())
          throw IngestError(where + ": unknown field '" + key + "'");
      RawFrame fr;
      fr.frame = static_cast<long>(require_number(j, "frame", where));
      fr.nose = {require_number(j, "nose_x", where),
                 require_number(j, "nose_y", where),
                 require_number(j, "nose_z", where)};
      fr.face_normal = {require_number(j, "face_normal_x", where),
                        require_number(j, "face_normal_y", where),
                        require_number(j, "face_normal_z", where)};
      fr.shoulder_mid = {require_number(j, "shoulder_mid_x", where),
                         require_number(j, "shoulder_mid_y", where),
                         require_number(j, "shoulder_mid_z", where)};
      fr.body_normal = {require_number(j, "body_normal_x", where),
                        require_number(j, "body_normal_y", where),
                        require_number(j, "body_normal_z", where)};
      fr.speaking = require_number(j, "speaking", where);
      if (fr.speaking != 0.0 && fr.speaking != 1.0)
        throw IngestError(where + ": speaking flag not binary");

      frames.push_back(fr.frame);
      geom::Quaternion hq, bq;
      try {
        hq = geom::normal_to_quaternion(fr.face_normal);
        bq = geom::normal_to_quaternion(fr.body_normal);
      } catch (const std::runtime_error& e) {
        throw IngestError(where + ": " + e.what());
      }
      head_chain.push_back(hq);
      body_chain.push_back(bq);
      Eigen::VectorXd row(data::kFeatureDim);
      row.segment<3>(data::kHeadLocOffset) = fr.nose;
      row.segment<3>(data::kBodyLocOffset) = fr.shoulder_mid;
      row(data::kSpeakingOffset) = fr.speaking;
      rows.push_back(row);
    }
    if (rows.empty())
      throw IngestError(file.string() + ": no frames");
    for (size_t t = 1; t < frames.size(); ++t) {
      if (frames[t] - frames[t - 1] != frames[1] - frames[0] ||
          frames[t] <= frames[t - 1])
        throw IngestError(file.string() + " frame record " +
                          std::to_string(t + 1) + ": non-uniform frame index");
    }
    if (reference_frames.empty())
      reference_frames = frames;
    else if (reference_frames != frames)
      throw IngestError(file.string() + ": frame grid differs from first participant");

    const auto head_aligned = geom::hemisphere_align(head_chain);
    const auto body_aligned = geom::hemisphere_align(body_chain);
    data::ParticipantSequence seq;
    seq.participant_id = id;
    seq.steps.resize(static_cast<long>(rows.size()), data::kFeatureDim);
    for (size_t t = 0; t < rows.size(); ++t) {
      rows[t](data::kHeadQuatOffset + 0) = head_aligned[t].w;
      rows[t](data::kHeadQuatOffset + 1) = head_aligned[t].x;
      rows[t](data::kHeadQuatOffset + 2) = head_aligned[t].y;
      rows[t](data::kHeadQuatOffset + 3) = head_aligned[t].z;
      rows[t](data::kBodyQuatOffset + 0) = body_aligned[t].w;
      rows[t](data::kBodyQuatOffset + 1) = body_aligned[t].x;
      rows[t](data::kBodyQuatOffset + 2) = body_aligned[t].y;
      rows[t](data::kBodyQuatOffset + 3) = body_aligned[t].z;
      seq.steps.row(t) = rows[t];
      seq.timestamps.push_back(static_cast<long>(t));
    }
    rec.timeline.push_back(std::move(seq));
  }
  return rec;
}

std::vector<std::filesystem::path> list_group_dirs(
    const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(root)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory() &&
        std::filesystem::exists(entry.path() / "manifest.json"))
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Versioned stores.

namespace {

void put_bytes(std::ofstream& f, const void* p, size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void put_u32(std::ofstream& f, uint32_t v) { put_bytes(f, &v, 4); }
void put_i64(std::ofstream& f, int64_t v) { put_bytes(f, &v, 8); }
void put_f64(std::ofstream& f, double v) { put_bytes(f, &v, 8); }
void put_str(std::ofstream& f, const std::string& s) {
  put_u32(f, static_cast<uint32_t>(s.size()));
  put_bytes(f, s.data(), s.size());
}
void put_mat(std::ofstream& f, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(f, m(i, j));
}

void get_bytes(std::ifstream& f, void* p, size_t n, const char* what) {
  f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(f.gcount()) != n)
    throw StoreError(std::string("truncated store while reading ") + what);
}
uint32_t get_u32(std::ifstream& f, const char* what) {
  uint32_t v;
  get_bytes(f, &v, 4, what);
  return v;
}
int64_t get_i64(std::ifstream& f, const char* what) {
  int64_t v;
  get_bytes(f, &v, 8, what);
  return v;
}
double get_f64(std::ifstream& f, const char* what) {
  double v;
  get_bytes(f, &v, 8, what);
  return v;
}
std::string get_str(std::ifstream& f, const char* what) {
  const uint32_t n = get_u32(f, what);
  if (n > (1u << 20)) throw StoreError("string too long in store");
  std::string s(n, '\0');
  get_bytes(f, s.data(), n, what);
  return s;
}
Eigen::MatrixXd get_mat(std::ifstream& f, long rows, long cols,
                        const char* what) {
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = get_f64(f, what);
  return m;
}

void check_magic(std::ifstream& f, const char expect[4], const char* what) {
  char magic[4];
  get_bytes(f, magic, 4, what);
  if (std::memcmp(magic, expect, 4) != 0)
    throw StoreError(std::string("bad magic for ") + what);
}

}  // namespace

void save_samples(const std::filesystem::path& path,
                  const std::vector<data::GroupSample>& samples,
                  double sample_rate_hz) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StoreError("cannot open for write: " + path.string());
  put_bytes(f, "SPWS", 4);
  put_u32(f, 1);  // store version
  put_u32(f, kLayoutVersion);
  const uint32_t dim =
      samples.empty() ? 0u
                      : static_cast<uint32_t>(samples[0].observed.at(0).steps.cols());
  put_u32(f, dim);
  put_f64(f, sample_rate_hz);
  put_i64(f, static_cast<int64_t>(samples.size()));
  for (const auto& s : samples) {
    put_str(f, s.group_id);
    put_u32(f, static_cast<uint32_t>(s.offset_steps));
    put_u32(f, static_cast<uint32_t>(s.observed.size()));
    put_u32(f, static_cast<uint32_t>(s.observed.at(0).steps.rows()));
    put_u32(f, static_cast<uint32_t>(s.future.at(0).steps.rows()));
    for (size_t i = 0; i < s.observed.size(); ++i) {
      put_str(f, s.observed[i].participant_id);
      put_i64(f, s.observed[i].timestamps.at(0));
      put_i64(f, s.future[i].timestamps.at(0));
      put_mat(f, s.observed[i].steps);
      put_mat(f, s.future[i].steps);
    }
  }
}

std::pair<std::vector<data::GroupSample>, double> load_samples(
    const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StoreError("cannot open: " + path.string());
  check_magic(f, "SPWS", "sample store");
  if (get_u32(f, "version") != 1) throw StoreError("unsupported store version");
  if (get_u32(f, "layout") != kLayoutVersion)
    throw StoreError("layout version mismatch");
  const uint32_t dim = get_u32(f, "feature dim");
  const double rate = get_f64(f, "sample rate");
  const int64_t n = get_i64(f, "sample count");
  std::vector<data::GroupSample> samples;
  samples.reserve(static_cast<size_t>(n));
  for (int64_t k = 0; k < n; ++k) {
    data::GroupSample s;
    s.group_id = get_str(f, "group id");
    s.offset_steps = static_cast<int>(get_u32(f, "offset"));
    const uint32_t people = get_u32(f, "people");
    const uint32_t t_obs = get_u32(f, "obs len");
    const uint32_t t_fut = get_u32(f, "fut len");
    for (uint32_t i = 0; i < people; ++i) {
      data::ParticipantSequence obs, fut;
      obs.participant_id = fut.participant_id = get_str(f, "participant");
      const int64_t o0 = get_i64(f, "obs start");
      const int64_t f0 = get_i64(f, "fut start");
      obs.steps = get_mat(f, t_obs, dim, "obs data");
      fut.steps = get_mat(f, t_fut, dim, "fut data");
      for (uint32_t t = 0; t < t_obs; ++t) obs.timestamps.push_back(o0 + t);
      for (uint32_t t = 0; t < t_fut; ++t) fut.timestamps.push_back(f0 + t);
      s.observed.push_back(std::move(obs));
      s.future.push_back(std::move(fut));
    }
    samples.push_back(std::move(s));
  }
  return {std::move(samples), rate};
}

void save_stats(const std::filesystem::path& path,
                const StandardizationStats& stats) {
  json j;
  j["layout_version"] = kLayoutVersion;
  j["feature_dim"] = stats.feature_dim;
  j["dims"] = stats.dims;
  j["mean"] = std::vector<double>(stats.mean.data(),
                                  stats.mean.data() + stats.mean.size());
  j["std"] = std::vector<double>(stats.stddev.data(),
                                 stats.stddev.data() + stats.stddev.size());
  std::ofstream f(path);
  if (!f) throw StoreError("cannot open for write: " + path.string());
  f << j.dump(2) << "\n";
}

StandardizationStats load_stats(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw StoreError("cannot open: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw StoreError(path.string() + ": " + e.what());
  }
  for (const auto& [key, _] : j.items())
    if (key != "layout_version" && key != "feature_dim" && key != "dims" &&
        key != "mean" && key != "std")
      throw StoreError(path.string() + ": unknown field '" + key + "'");
  if (j.at("layout_version").get<int>() != kLayoutVersion)
    throw StoreError("layout version mismatch in stats");
  StandardizationStats stats;
  stats.feature_dim = j.at("feature_dim").get<int>();
  stats.dims = j.at("dims").get<std::vector<int>>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("std").get<std::vector<double>>();
  if (mean.size() != stats.dims.size() || sd.size() != stats.dims.size())
    throw StoreError("stats arity mismatch");
  stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  stats.stddev = Eigen::Map<const Eigen::VectorXd>(sd.data(), sd.size());
  return stats;
}

void save_glancing(const std::filesystem::path& path,
                   const std::vector<GlancingSequence>& seqs,
                   double phase_step) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StoreError("cannot open for write: " + path.string());
  put_bytes(f, "SPGL", 4);
  put_u32(f, 1);
  put_f64(f, phase_step);
  put_i64(f, static_cast<int64_t>(seqs.size()));
  for (const auto& g : seqs) {
    put_f64(f, g.phase);
    const uint32_t t = g.type == GlanceType::kTypeI ? 0u : 1u;
    put_u32(f, t);
    for (double v : g.values) put_f64(f, v);
  }
}

std::pair<std::vector<GlancingSequence>, double> load_glancing(
    const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StoreError("cannot open: " + path.string());
  check_magic(f, "SPGL", "glancing store");
  if (get_u32(f, "version") != 1)
    throw StoreError("unsupported glancing store version");
  const double step = get_f64(f, "phase step");
  const int64_t n = get_i64(f, "sequence count");
  std::vector<GlancingSequence> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t k = 0; k < n; ++k) {
    GlancingSequence g;
    g.phase = get_f64(f, "phase");
    g.type = get_u32(f, "type") == 0 ? GlanceType::kTypeI : GlanceType::kTypeIII;
    for (int i = 0; i < kGlanceSteps; ++i) g.values[i] = get_f64(f, "values");
    out.push_back(g);
  }
  return {std::move(out), step};
}

}  // namespace socproc::dsets
