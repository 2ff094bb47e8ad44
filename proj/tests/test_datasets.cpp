#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "socproc/data_model.hpp"
#include "socproc/datasets.hpp"
#include "test_support.hpp"

using namespace socproc;
namespace fs = std::filesystem;
using dsets::GlanceType;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("socproc_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

data::ParticipantSequence make_timeline_participant(const std::string& id,
                                                    long len, int dim,
                                                    std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  data::ParticipantSequence p;
  p.participant_id = id;
  p.steps.resize(len, dim);
  for (long t = 0; t < len; ++t) {
    for (int d = 0; d < dim; ++d) p.steps(t, d) = g(rng);
    if (dim == data::kFeatureDim) {
      for (int off : {data::kHeadQuatOffset, data::kBodyQuatOffset}) {
        Eigen::RowVector4d q = p.steps.row(t).segment<4>(off);
        p.steps.row(t).segment<4>(off) = q / q.norm();
      }
      p.steps(t, data::kSpeakingOffset) = t % 2;
    }
    p.timestamps.push_back(t);
  }
  return p;
}

}  // namespace

TEST_CASE("glancing dataset matches the published set definition") {
  const auto seqs = dsets::generate_glancing_dataset();
  REQUIRE(seqs.size() == 12568);
  size_t type1 = 0, type3 = 0;
  for (const auto& g : seqs)
    (g.type == GlanceType::kTypeI ? type1 : type3)++;
  REQUIRE(type1 == 6284);
  REQUIRE(type3 == 6284);

  // Phase 0, Type I endpoints.
  REQUIRE(seqs[0].phase == 0.0);
  REQUIRE(seqs[0].type == GlanceType::kTypeI);
  REQUIRE(std::abs(seqs[0].values[0]) < 1e-12);
  REQUIRE(std::abs(seqs[0].values[19]) < 1e-12);

  for (const auto& g : seqs) {
    for (double v : g.values) {
      REQUIRE(v <= 1.0);
      REQUIRE(v >= -1.0);
    }
    if (g.type == GlanceType::kTypeIII) {
      for (int n = 14; n < dsets::kGlanceSteps; ++n)
        REQUIRE(g.values[n] == g.values[13]);
    }
  }

  // Types alternate per phase and share the first 14 steps.
  for (size_t k = 0; k + 1 < seqs.size(); k += 2) {
    REQUIRE(seqs[k].type == GlanceType::kTypeI);
    REQUIRE(seqs[k + 1].type == GlanceType::kTypeIII);
    REQUIRE(seqs[k].phase == seqs[k + 1].phase);
    for (int n = 0; n < 14; ++n)
      REQUIRE(seqs[k].values[n] == seqs[k + 1].values[n]);
  }

  // Deterministic: bit-identical on regeneration.
  const auto again = dsets::generate_glancing_dataset();
  REQUIRE(again.size() == seqs.size());
  for (size_t k = 0; k < seqs.size(); ++k) {
    REQUIRE(again[k].phase == seqs[k].phase);
    REQUIRE(again[k].values == seqs[k].values);
  }

  // Coarser stepping still stops below 2*pi.
  REQUIRE(dsets::generate_glancing_dataset(0.01).size() == 2 * 629);
}

TEST_CASE("glancing sequences convert to valid single-participant samples") {
  const auto seqs = dsets::generate_glancing_dataset(0.1);
  const auto s = dsets::to_group_sample(seqs[7]);
  REQUIRE(data::validate_group_sample(s).empty());
  REQUIRE(s.observed[0].steps.rows() == 10);
  REQUIRE(s.future[0].steps.rows() == 10);
  REQUIRE(s.offset_steps == 1);
  REQUIRE(s.observed[0].steps(3, 0) == seqs[7].values[3]);
  REQUIRE(s.future[0].steps(0, 0) == seqs[7].values[10]);
}

TEST_CASE("evaluation phase subset is distinct, sorted, deterministic") {
  std::mt19937_64 rng(99);
  const auto picked = dsets::choose_eval_phases(6284, 785, rng);
  REQUIRE(picked.size() == 785);
  REQUIRE(std::is_sorted(picked.begin(), picked.end()));
  REQUIRE(std::set<size_t>(picked.begin(), picked.end()).size() == 785);
  REQUIRE(picked.back() < 6284);
  std::mt19937_64 rng2(99);
  REQUIRE(dsets::choose_eval_phases(6284, 785, rng2) == picked);
}

TEST_CASE("windowing matches the documented 10 s example") {
  std::mt19937_64 rng(5);
  std::vector<data::ParticipantSequence> timeline;
  for (int i = 0; i < 3; ++i)
    timeline.push_back(
        make_timeline_participant("p" + std::to_string(i), 100, 15, rng));
  dsets::WindowingConfig cfg;  // 2 s / 2 s / 0.8 / 5 s / 10 Hz
  const auto samples = dsets::window_interaction("g", timeline, cfg);

  const auto want = testsup::brute_force_windows(100, 20, 20, 50, 4);
  REQUIRE(samples.size() == want.size());
  std::set<testsup::WindowSlot> got;
  std::set<long> starts;
  for (const auto& s : samples) {
    got.insert({s.observed[0].timestamps[0], s.offset_steps});
    starts.insert(s.observed[0].timestamps[0]);
  }
  REQUIRE(got == std::set<testsup::WindowSlot>(want.begin(), want.end()));
  REQUIRE(starts.count(0) == 1);
  REQUIRE(starts.count(4) == 1);
  REQUIRE(starts.count(8) == 1);
  for (long s : starts) REQUIRE(s % 4 == 0);

  // Window contents are slices of the timeline.
  const auto& first = samples[0];
  REQUIRE(first.observed[1].steps == timeline[1].steps.middleRows(0, 20));
  REQUIRE(first.future[2].steps ==
          timeline[2].steps.middleRows(20 + first.offset_steps - 1, 20));
  for (const auto& s : samples) REQUIRE(data::validate_group_sample(s).empty());
}

TEST_CASE("windowing equals the brute-force oracle on random timelines") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<long> len_d(10, 200);
  std::uniform_int_distribution<int> obs_d(1, 3), fut_d(1, 3), off_d(0, 5);
  std::uniform_int_distribution<int> ov_d(0, 3);
  const double overlaps[] = {0.0, 0.25, 0.5, 0.8};
  for (int trial = 0; trial < 20; ++trial) {
    const long len = len_d(rng);
    dsets::WindowingConfig cfg;
    cfg.obs_len_s = obs_d(rng);
    cfg.fut_len_s = fut_d(rng);
    cfg.max_offset_s = off_d(rng);
    cfg.overlap_fraction = overlaps[ov_d(rng)];
    cfg.sample_rate_hz = 10.0;
    std::vector<data::ParticipantSequence> timeline{
        make_timeline_participant("p0", len, 1, rng)};
    const auto samples = dsets::window_interaction("g", timeline, cfg);

    const long t_obs = std::lround(cfg.obs_len_s * 10.0);
    const long t_fut = std::lround(cfg.fut_len_s * 10.0);
    const long max_off = std::lround(cfg.max_offset_s * 10.0);
    const long stride = std::max<long>(
        1, std::lround(t_obs * (1.0 - cfg.overlap_fraction)));
    const auto want =
        testsup::brute_force_windows(len, t_obs, t_fut, max_off, stride);

    std::vector<testsup::WindowSlot> got;
    for (const auto& s : samples) {
      got.push_back({s.observed[0].timestamps[0], s.offset_steps});
      // Future strictly after observed.
      REQUIRE(s.future[0].timestamps.front() >
              s.observed[0].timestamps.back());
    }
    REQUIRE(got == want);  // same set AND same deterministic order
  }
}

TEST_CASE("windowing boundary cases") {
  std::mt19937_64 rng(23);
  dsets::WindowingConfig cfg;
  cfg.obs_len_s = 2.0;
  cfg.fut_len_s = 2.0;
  cfg.max_offset_s = 5.0;

  SECTION("timeline of exactly obs+fut yields one sample") {
    std::vector<data::ParticipantSequence> timeline{
        make_timeline_participant("p0", 40, 1, rng)};
    REQUIRE(dsets::window_interaction("g", timeline, cfg).size() == 1);
  }
  SECTION("shorter timeline yields none") {
    std::vector<data::ParticipantSequence> timeline{
        make_timeline_participant("p0", 39, 1, rng)};
    REQUIRE(dsets::window_interaction("g", timeline, cfg).empty());
  }
  SECTION("zero overlap strides by the full observed length") {
    cfg.overlap_fraction = 0.0;
    std::vector<data::ParticipantSequence> timeline{
        make_timeline_participant("p0", 101, 1, rng)};
    const auto samples = dsets::window_interaction("g", timeline, cfg);
    std::set<long> starts;
    for (const auto& s : samples) starts.insert(s.observed[0].timestamps[0]);
    REQUIRE(starts == std::set<long>{0, 20, 40, 60});
  }
}

TEST_CASE("standardization hits zero mean unit variance on location dims") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<data::GroupSample> samples;
  for (int k = 0; k < 12; ++k) {
    data::GroupSample s;
    s.group_id = "g";
    s.offset_steps = 1;
    for (int i = 0; i < 2; ++i) {
      data::ParticipantSequence obs, fut;
      obs.participant_id = fut.participant_id = "p" + std::to_string(i);
      obs.steps.resize(5, data::kFeatureDim);
      fut.steps.resize(4, data::kFeatureDim);
      for (long t = 0; t < 5; ++t) {
        for (int d = 0; d < 15; ++d) obs.steps(t, d) = 40.0 + 9.0 * g(rng);
        obs.timestamps.push_back(t);
      }
      for (long t = 0; t < 4; ++t) {
        for (int d = 0; d < 15; ++d) fut.steps(t, d) = 40.0 + 9.0 * g(rng);
        fut.timestamps.push_back(5 + t);
      }
      s.observed.push_back(std::move(obs));
      s.future.push_back(std::move(fut));
    }
    samples.push_back(std::move(s));
  }

  const auto stats = dsets::fit_standardization(samples);
  REQUIRE(stats.dims == std::vector<int>{0, 1, 2, 7, 8, 9});

  // Pool standardized location values and check the moments.
  std::vector<data::GroupSample> std_samples;
  for (const auto& s : samples) std_samples.push_back(dsets::standardize(stats, s));
  for (size_t k = 0; k < stats.dims.size(); ++k) {
    double sum = 0, sumsq = 0;
    long n = 0;
    for (const auto& s : std_samples) {
      for (const auto& p : s.observed) {
        sum += p.steps.col(stats.dims[k]).sum();
        sumsq += p.steps.col(stats.dims[k]).squaredNorm();
        n += p.steps.rows();
      }
      for (const auto& p : s.future) {
        sum += p.steps.col(stats.dims[k]).sum();
        sumsq += p.steps.col(stats.dims[k]).squaredNorm();
        n += p.steps.rows();
      }
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    REQUIRE(std::abs(mean) < 1e-9);
    REQUIRE(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }

  // Pass-through dims bit-identical.
  REQUIRE(std_samples[0].observed[0].steps.col(3) ==
          samples[0].observed[0].steps.col(3));
  REQUIRE(std_samples[0].future[1].steps.col(14) ==
          samples[0].future[1].steps.col(14));

  // Inverse restores the original within 1e-9.
  const auto back = dsets::destandardize(stats, std_samples[0]);
  REQUIRE((back.observed[0].steps - samples[0].observed[0].steps)
              .cwiseAbs()
              .maxCoeff() < 1e-9);

  // Test-set moments stay shifted in general.
  data::GroupSample shifted = samples[0];
  for (auto& p : shifted.observed) p.steps.col(0).array() += 25.0;
  const auto shifted_std = dsets::standardize(stats, shifted);
  REQUIRE(std::abs(shifted_std.observed[0].steps.col(0).mean()) > 0.5);
}

TEST_CASE("degenerate location variance is rejected") {
  data::GroupSample s;
  s.group_id = "g";
  s.offset_steps = 1;
  data::ParticipantSequence obs, fut;
  obs.participant_id = fut.participant_id = "p0";
  obs.steps = Eigen::MatrixXd::Ones(4, data::kFeatureDim);
  fut.steps = Eigen::MatrixXd::Ones(3, data::kFeatureDim);
  obs.timestamps = {0, 1, 2, 3};
  fut.timestamps = {4, 5, 6};
  s.observed.push_back(obs);
  s.future.push_back(fut);
  REQUIRE_THROWS_AS(dsets::fit_standardization({s}),
                    dsets::DegenerateStatisticsError);
}

TEST_CASE("single-channel data standardizes as identity") {
  std::mt19937_64 rng(37);
  std::vector<data::GroupSample> samples;
  const auto seqs = dsets::generate_glancing_dataset(0.5);
  for (const auto& g : seqs) samples.push_back(dsets::to_group_sample(g));
  const auto stats = dsets::fit_standardization(samples);
  REQUIRE(stats.dims.empty());
  const auto out = dsets::standardize(stats, samples[0]);
  REQUIRE(out.observed[0].steps == samples[0].observed[0].steps);
}

namespace {

std::vector<data::GroupSample> windowed_pool(std::mt19937_64& rng,
                                             const std::vector<std::string>& groups,
                                             long len, double fut_s) {
  std::vector<data::GroupSample> pool;
  for (const auto& gid : groups) {
    std::vector<data::ParticipantSequence> timeline;
    for (int i = 0; i < 2; ++i)
      timeline.push_back(
          make_timeline_participant("p" + std::to_string(i), len, 15, rng));
    dsets::WindowingConfig cfg;
    cfg.fut_len_s = fut_s;
    auto ws = dsets::window_interaction(gid, timeline, cfg);
    pool.insert(pool.end(), ws.begin(), ws.end());
  }
  return pool;
}

}  // namespace

TEST_CASE("batches keep one group, unique starts, uniform lengths") {
  std::mt19937_64 rng(41);
  auto pool = windowed_pool(rng, {"a", "b"}, 90, 2.0);
  const auto batches = dsets::make_batches(pool, 16, dsets::EncoderKind::kGRU);

  size_t total = 0;
  for (const auto& b : batches) total += b.samples.size();
  REQUIRE(total == pool.size());
  REQUIRE(dsets::validate_batches(batches, dsets::EncoderKind::kGRU).empty());

  // Two samples sharing a start must land in different batches.
  for (const auto& b : batches) {
    std::set<long> starts;
    for (const auto& s : b.samples) {
      REQUIRE(s.group_id == b.group_id);
      REQUIRE(starts.insert(s.observed[0].timestamps[0]).second);
    }
  }

  // The validator notices violations in hand-corrupted batches.
  auto bad = batches;
  if (bad.size() >= 2 && !bad[1].samples.empty()) {
    bad[0].samples.push_back(bad[1].samples[0]);
    bad[0].samples.back().group_id = "other";
    REQUIRE(!dsets::validate_batches(bad, dsets::EncoderKind::kGRU).empty());
  }
}

TEST_CASE("GRU batching covers mixed-length pools that MLP batching drops") {
  std::mt19937_64 rng(43);
  auto pool = windowed_pool(rng, {"a"}, 90, 2.0);
  auto short_fut = windowed_pool(rng, {"b"}, 90, 1.0);
  pool.insert(pool.end(), short_fut.begin(), short_fut.end());

  const auto gru = dsets::make_batches(pool, 16, dsets::EncoderKind::kGRU);
  const auto mlp = dsets::make_batches(pool, 16, dsets::EncoderKind::kMLP);
  REQUIRE(dsets::validate_batches(gru, dsets::EncoderKind::kGRU).empty());
  REQUIRE(dsets::validate_batches(mlp, dsets::EncoderKind::kMLP).empty());

  size_t gru_n = 0, mlp_n = 0;
  for (const auto& b : gru) gru_n += b.samples.size();
  for (const auto& b : mlp) mlp_n += b.samples.size();
  REQUIRE(gru_n == pool.size());
  REQUIRE(mlp_n < pool.size());
  REQUIRE(gru.size() > mlp.size());

  // MLP batches share one window length everywhere.
  for (const auto& b : mlp)
    for (const auto& s : b.samples) {
      REQUIRE(s.observed[0].steps.rows() == mlp[0].samples[0].observed[0].steps.rows());
      REQUIRE(s.future[0].steps.rows() == mlp[0].samples[0].future[0].steps.rows());
    }
}

TEST_CASE("random batches chunk a shuffled pool") {
  std::mt19937_64 rng(47);
  const auto seqs = dsets::generate_glancing_dataset(0.05);
  std::vector<data::GroupSample> samples;
  for (const auto& g : seqs) samples.push_back(dsets::to_group_sample(g));
  const auto batches = dsets::make_random_batches(samples, 100, rng);
  size_t total = 0;
  for (const auto& b : batches) {
    REQUIRE(b.samples.size() <= 100);
    total += b.samples.size();
  }
  REQUIRE(total == samples.size());
  REQUIRE(batches.size() == (samples.size() + 99) / 100);
}

TEST_CASE("interchange round-trip with quaternion conversion") {
  const fs::path dir = temp_dir("interchange");
  std::map<std::string, std::vector<dsets::RawFrame>> streams;
  for (int i = 0; i < 2; ++i) {
    std::vector<dsets::RawFrame> frames;
    for (int t = 0; t < 6; ++t) {
      dsets::RawFrame fr;
      fr.frame = 10 + t;
      fr.nose = {1.0 * t, 2.0, 3.0};
      fr.face_normal = {1.0, 0.0, 0.0};  // reference direction
      fr.shoulder_mid = {0.5 * t, -1.0, 0.0};
      fr.body_normal = {0.0, (t % 2 == 0) ? 1.0 : -1.0, 0.0};
      fr.speaking = t % 2;
      frames.push_back(fr);
    }
    streams["p" + std::to_string(i)] = frames;
  }
  dsets::write_raw_group(dir / "g0", "g0", "train", 10.0, streams);

  const auto rec = dsets::ingest_group_recording(dir / "g0");
  REQUIRE(rec.group_id == "g0");
  REQUIRE(rec.split == "train");
  REQUIRE(rec.timeline.size() == 2);
  const auto& p0 = rec.timeline[0];
  REQUIRE(p0.steps.rows() == 6);
  REQUIRE(p0.timestamps == std::vector<long>{0, 1, 2, 3, 4, 5});

  // Face normal along the reference direction gives the identity quaternion.
  REQUIRE(p0.steps(0, data::kHeadQuatOffset) == Catch::Approx(1.0));
  REQUIRE(std::abs(p0.steps(0, data::kHeadQuatOffset + 1)) < 1e-12);

  // Alternating-direction body normals still produce an aligned chain.
  for (long t = 1; t < 6; ++t) {
    double d = 0;
    for (int k = 0; k < 4; ++k)
      d += p0.steps(t - 1, data::kBodyQuatOffset + k) *
           p0.steps(t, data::kBodyQuatOffset + k);
    REQUIRE(d >= 0.0);
  }

  // Validation-grade output: samples built from it validate cleanly.
  dsets::WindowingConfig cfg;
  cfg.obs_len_s = 0.2;
  cfg.fut_len_s = 0.2;
  cfg.overlap_fraction = 0.0;
  cfg.max_offset_s = 0.2;
  const auto ws = dsets::window_interaction(rec.group_id, rec.timeline, cfg);
  REQUIRE(!ws.empty());
  for (const auto& s : ws) REQUIRE(data::validate_group_sample(s).empty());
}

TEST_CASE("ingestion rejects malformed inputs with locations") {
  const fs::path dir = temp_dir("ingest_errors");

  SECTION("unknown field") {
    std::map<std::string, std::vector<dsets::RawFrame>> streams;
    streams["p0"] = {dsets::RawFrame{}};
    streams["p0"][0].face_normal = {1, 0, 0};
    streams["p0"][0].body_normal = {1, 0, 0};
    dsets::write_raw_group(dir / "g", "g", "train", 10.0, streams);
    std::ofstream f(dir / "g" / "p0.jsonl", std::ios::app);
    f << R"({"frame":1,"nose_x":0,"nose_y":0,"nose_z":0,"face_normal_x":1,)"
      << R"("face_normal_y":0,"face_normal_z":0,"shoulder_mid_x":0,)"
      << R"("shoulder_mid_y":0,"shoulder_mid_z":0,"body_normal_x":1,)"
      << R"("body_normal_y":0,"body_normal_z":0,"speaking":0,"extra":5})"
      << "\n";
    f.close();
    REQUIRE_THROWS_WITH(dsets::ingest_group_recording(dir / "g"),
                        Catch::Matchers::ContainsSubstring("unknown field"));
  }

  SECTION("non-binary speaking names the frame") {
    std::map<std::string, std::vector<dsets::RawFrame>> streams;
    dsets::RawFrame a, b;
    a.frame = 0;
    b.frame = 1;
    a.face_normal = b.face_normal = {1, 0, 0};
    a.body_normal = b.body_normal = {1, 0, 0};
    b.speaking = 0.5;
    streams["p0"] = {a, b};
    dsets::write_raw_group(dir / "g2", "g2", "test", 10.0, streams);
    REQUIRE_THROWS_WITH(dsets::ingest_group_recording(dir / "g2"),
                        Catch::Matchers::ContainsSubstring("record 2"));
  }

  SECTION("zero normal is an ingestion error") {
    std::map<std::string, std::vector<dsets::RawFrame>> streams;
    dsets::RawFrame a;
    a.face_normal = {0, 0, 0};
    a.body_normal = {1, 0, 0};
    streams["p0"] = {a};
    dsets::write_raw_group(dir / "g3", "g3", "train", 10.0, streams);
    REQUIRE_THROWS_AS(dsets::ingest_group_recording(dir / "g3"),
                      dsets::IngestError);
  }

  SECTION("non-uniform frame grid") {
    std::map<std::string, std::vector<dsets::RawFrame>> streams;
    dsets::RawFrame a, b, c;
    a.frame = 0;
    b.frame = 1;
    c.frame = 5;
    for (auto* fr : {&a, &b, &c}) {
      fr->face_normal = {1, 0, 0};
      fr->body_normal = {1, 0, 0};
    }
    streams["p0"] = {a, b, c};
    dsets::write_raw_group(dir / "g4", "g4", "train", 10.0, streams);
    REQUIRE_THROWS_WITH(dsets::ingest_group_recording(dir / "g4"),
                        Catch::Matchers::ContainsSubstring("non-uniform"));
  }
}

TEST_CASE("group directory enumeration") {
  const fs::path root = temp_dir("groups");
  for (const char* name : {"g_b", "g_a", "g_c"}) {
    std::map<std::string, std::vector<dsets::RawFrame>> streams;
    dsets::RawFrame fr;
    fr.face_normal = {1, 0, 0};
    fr.body_normal = {1, 0, 0};
    streams["p0"] = {fr};
    dsets::write_raw_group(root / name, name, "train", 10.0, streams);
  }
  fs::create_directories(root / "not_a_group");
  const auto dirs = dsets::list_group_dirs(root);
  REQUIRE(dirs.size() == 3);
  REQUIRE(dirs[0].filename() == "g_a");
  REQUIRE(dirs[2].filename() == "g_c");
}

TEST_CASE("sample store round-trips bit-exactly") {
  std::mt19937_64 rng(53);
  auto pool = windowed_pool(rng, {"a"}, 60, 2.0);
  const fs::path dir = temp_dir("store");
  dsets::save_samples(dir / "train.spw", pool, 10.0);
  const auto [back, rate] = dsets::load_samples(dir / "train.spw");
  REQUIRE(rate == 10.0);
  REQUIRE(back.size() == pool.size());
  for (size_t k = 0; k < pool.size(); ++k) {
    REQUIRE(back[k].group_id == pool[k].group_id);
    REQUIRE(back[k].offset_steps == pool[k].offset_steps);
    for (size_t i = 0; i < pool[k].observed.size(); ++i) {
      REQUIRE(back[k].observed[i].steps == pool[k].observed[i].steps);
      REQUIRE(back[k].future[i].steps == pool[k].future[i].steps);
      REQUIRE(back[k].observed[i].timestamps == pool[k].observed[i].timestamps);
      REQUIRE(back[k].future[i].timestamps == pool[k].future[i].timestamps);
    }
  }

  SECTION("corrupted magic is rejected") {
    std::ofstream f(dir / "bad.spw", std::ios::binary);
    f << "NOPE";
    f.close();
    REQUIRE_THROWS_AS(dsets::load_samples(dir / "bad.spw"), dsets::StoreError);
  }
}

TEST_CASE("stats store round-trips exactly") {
  std::mt19937_64 rng(59);
  auto pool = windowed_pool(rng, {"a"}, 60, 2.0);
  const auto stats = dsets::fit_standardization(pool);
  const fs::path dir = temp_dir("stats");
  dsets::save_stats(dir / "stats.json", stats);
  const auto back = dsets::load_stats(dir / "stats.json");
  REQUIRE(back.feature_dim == stats.feature_dim);
  REQUIRE(back.dims == stats.dims);
  REQUIRE(back.mean == stats.mean);
  REQUIRE(back.stddev == stats.stddev);
}

TEST_CASE("glancing store round-trips bit-exactly") {
  const auto seqs = dsets::generate_glancing_dataset(0.01);
  const fs::path dir = temp_dir("glancing");
  dsets::save_glancing(dir / "glancing.bin", seqs, 0.01);
  const auto [back, step] = dsets::load_glancing(dir / "glancing.bin");
  REQUIRE(step == 0.01);
  REQUIRE(back.size() == seqs.size());
  for (size_t k = 0; k < seqs.size(); ++k) {
    REQUIRE(back[k].phase == seqs[k].phase);
    REQUIRE(back[k].type == seqs[k].type);
    REQUIRE(back[k].values == seqs[k].values);
  }
}
