// Command-line front end: dataset generation and ingestion, training,
// evaluation and plot-data export. All hyperparameters live in JSON run
// configs; flags select paths, seeds and simple overrides. Exit codes:
// 0 success, 1 validation error, 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "socproc/checkpoint.hpp"
#include "socproc/evaluation.hpp"
#include "socproc/runio.hpp"

namespace ckpt = socproc::ckpt;
namespace data = socproc::data;
namespace dsets = socproc::dsets;
namespace ev = socproc::eval;
namespace pm = socproc::pm;
namespace run = socproc::run;
namespace train = socproc::train;
using json = nlohmann::json;

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const run::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dsets::StoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dsets::IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ckpt::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}

// Shortest stable text for a double: round trips bit-exactly, so regenerated
// files stay byte-identical.
std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

void check_window_lengths(const std::vector<dsets::SampleBatch>& batches,
                          const pm::ModelConfig& cfg) {
  for (const auto& b : batches) {
    if (b.samples.empty()) continue;
    const long obs = b.samples[0].observed.at(0).steps.rows();
    const long fut = b.samples[0].future.at(0).steps.rows();
    if (fut != cfg.t_fut)
      throw run::ConfigError("model decodes " + std::to_string(cfg.t_fut) +
                             " future steps but the store windows hold " +
                             std::to_string(fut));
    if (cfg.variant.encoder_kind == dsets::EncoderKind::kMLP && obs != cfg.t_obs)
      throw run::ConfigError("model expects " + std::to_string(cfg.t_obs) +
                             " observed steps but the store windows hold " +
                             std::to_string(obs));
  }
}

std::map<std::string, long> frames_for_regime(const run::RunConfig& rc,
                                              const run::LoadedSamples& tr,
                                              const run::LoadedSamples* val) {
  std::map<std::string, long> frames;
  if (rc.train.context_regime != train::ContextRegime::kFixedInitial) return frames;
  frames = run::interaction_frame_counts(tr.samples);
  if (val)
    for (const auto& [group, count] : run::interaction_frame_counts(val->samples)) {
      auto [it, inserted] = frames.try_emplace(group, count);
      if (!inserted) it->second = std::max(it->second, count);
    }
  return frames;
}

struct GenerateSyntheticOpts {
  std::string out;
  double phase_step = 0.001;
};

int run_generate_synthetic(const GenerateSyntheticOpts& o) {
  const std::string started = run::timestamp_utc();
  const auto seqs = dsets::generate_glancing_dataset(o.phase_step);
  std::filesystem::create_directories(o.out);
  dsets::save_glancing(std::filesystem::path(o.out) / "glancing.bin", seqs,
                       o.phase_step);
  run::RunManifest m;
  m.command = "generate-synthetic";
  m.seed = 0;
  m.outputs = {"glancing.bin"};
  m.started_at = started;
  m.finished_at = run::timestamp_utc();
  run::save_manifest(o.out, m);
  std::cout << "wrote " << seqs.size() << " sequences (" << seqs.size() / 2
            << " phases x 2 types) to " << o.out << "/glancing.bin\n";
  return 0;
}

struct GenerateMockOpts {
  std::string out;
  run::MockConfig cfg;
};

int run_generate_mock(const GenerateMockOpts& o) {
  const std::string started = run::timestamp_utc();
  run::write_mock_dataset(o.out, o.cfg);
  run::RunManifest m;
  m.command = "generate-mock";
  m.seed = o.cfg.seed;
  for (int g = 0; g < o.cfg.groups; ++g) m.outputs.push_back("mock" + std::to_string(g));
  m.started_at = started;
  m.finished_at = run::timestamp_utc();
  run::save_manifest(o.out, m);
  std::cout << "wrote " << o.cfg.groups << " mock groups ("
            << o.cfg.train_groups << " train) to " << o.out << "\n";
  return 0;
}

struct PreprocessOpts {
  std::string raw;
  std::string out;
  dsets::WindowingConfig wcfg;
};

int run_preprocess(const PreprocessOpts& o) {
  const std::string started = run::timestamp_utc();
  const run::PreprocessReport report = run::preprocess_raw(o.raw, o.out, o.wcfg);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& g : report.groups)
    std::cout << g.group_id << " (" << g.split << "): " << g.participants
              << " participants, " << g.frames << " frames, " << g.samples
              << " samples\n";
  std::cout << "train samples: " << report.train_samples
            << ", test samples: " << report.test_samples << "\n";
  run::RunManifest m;
  m.command = "preprocess";
  m.inputs = {o.raw};
  m.outputs = {"train.bin", "test.bin", "stats.json", "ingest_report.json"};
  m.started_at = started;
  m.finished_at = run::timestamp_utc();
  run::save_manifest(o.out, m);
  return 0;
}

struct TrainOpts {
  std::string config;
  std::string preset;
  std::string data;
  std::string val;
  std::string stats;
  std::string run_root;
  std::string run_name;
  long long seed = -1;
};

run::RunConfig resolve_config(const std::string& config, const std::string& preset,
                              std::string& source) {
  if (config.empty() == preset.empty())
    throw run::ConfigError("pass exactly one of --config or --preset");
  if (!config.empty()) {
    source = config;
    return run::load_run_config(config);
  }
  source = "preset:" + preset;
  return run::preset(preset);
}

int run_train(const TrainOpts& o) {
  const std::string started = run::timestamp_utc();
  std::string source;
  run::RunConfig rc = resolve_config(o.config, o.preset, source);
  if (!o.data.empty()) rc.train_data = o.data;
  if (!o.val.empty()) rc.val_data = o.val;
  if (!o.stats.empty()) rc.stats_path = o.stats;
  if (!o.run_name.empty()) rc.run_name = o.run_name;
  if (o.seed >= 0) rc.train.seed = static_cast<unsigned long long>(o.seed);

  const pm::ModelConfig mcfg = run::to_model_config(rc);
  if (rc.train_data.empty())
    throw run::ConfigError("no training data configured (set train_data or pass --data)");

  const run::LoadedSamples tr = run::load_any_samples(rc.train_data);
  std::optional<run::LoadedSamples> val;
  if (!rc.val_data.empty()) val = run::load_any_samples(rc.val_data);
  std::optional<dsets::StandardizationStats> stats;
  if (!rc.stats_path.empty()) stats = dsets::load_stats(rc.stats_path);

  train::TrainData td;
  td.train_batches = run::build_batches(tr, rc.train.batch_size,
                                        mcfg.variant.encoder_kind,
                                        /*shuffle=*/true, rc.train.seed);
  if (val)
    td.val_batches = run::build_batches(*val, rc.train.batch_size,
                                        mcfg.variant.encoder_kind,
                                        /*shuffle=*/false, 0);
  check_window_lengths(td.train_batches, mcfg);
  check_window_lengths(td.val_batches, mcfg);
  td.stats = stats ? &*stats : nullptr;
  td.interaction_frames = frames_for_regime(rc, tr, val ? &*val : nullptr);

  const std::filesystem::path root =
      o.run_root.empty() ? run::default_run_root() : std::filesystem::path(o.run_root);
  const std::filesystem::path run_dir = run::create_run_dir(root, rc.run_name);
  run::save_run_config(run_dir / "config.json", rc);

  pm::ProcessModel model(mcfg, rc.train.seed);

  run::RunManifest m;
  m.command = "train";
  m.config_path = source;
  m.seed = rc.train.seed;
  m.inputs = {rc.train_data};
  if (!rc.val_data.empty()) m.inputs.push_back(rc.val_data);
  if (!rc.stats_path.empty()) m.inputs.push_back(rc.stats_path);
  m.started_at = started;
  m.parameter_count = model.parameter_count();
  run::save_manifest(run_dir, m);

  const train::TrainResult result = train::train(model, td, rc.train, run_dir);

  m.outputs = {"config.json", "metrics.jsonl", "ckpt_averaged.bin"};
  for (size_t k = 1; k <= result.best.size(); ++k)
    m.outputs.push_back("ckpt_best_" + std::to_string(k) + ".bin");
  m.finished_at = run::timestamp_utc();
  run::save_manifest(run_dir, m);

  std::cout << "run dir: " << run_dir.string() << "\n"
            << "parameters: " << model.parameter_count() << "\n"
            << "epochs: " << result.history.size()
            << (result.early_stopped ? " (early stop)" : "") << "\n"
            << "best val nll: " << num(result.best_val_nll) << " at epoch "
            << result.best_epoch << "\n";
  return 0;
}

struct EvaluateOpts {
  std::vector<std::string> checkpoints;
  std::string data;
  std::string out;
  std::string regime = "random";
  std::string stats;
  double context_fraction = 0.5;
  double initial_fraction = 0.2;
  int batch_size = 128;
  unsigned long long seed = 0;
};

std::vector<std::string> checkpoint_tags(const std::vector<std::string>& paths) {
  std::vector<std::string> tags;
  std::set<std::string> used;
  for (const auto& p : paths) {
    std::string base = std::filesystem::path(p).stem().string();
    std::string tag = base;
    for (int k = 2; used.count(tag); ++k) tag = base + "-" + std::to_string(k);
    used.insert(tag);
    tags.push_back(tag);
  }
  return tags;
}

int run_evaluate(const EvaluateOpts& o) {
  const std::string started = run::timestamp_utc();
  const train::ContextRegime regime = run::parse_regime(o.regime);

  std::vector<ckpt::Checkpoint> checkpoints;
  for (const auto& path : o.checkpoints) {
    ckpt::Checkpoint c = ckpt::load_checkpoint(path);
    if (c.layout_version != dsets::kLayoutVersion)
      throw run::ConfigError("checkpoint " + path + " carries data layout version " +
                             std::to_string(c.layout_version) +
                             " but this data uses version " +
                             std::to_string(dsets::kLayoutVersion));
    checkpoints.push_back(std::move(c));
  }

  const run::LoadedSamples data_store = run::load_any_samples(o.data);
  const auto batches =
      run::build_batches(data_store, o.batch_size,
                         checkpoints[0].config.variant.encoder_kind,
                         /*shuffle=*/false, 0);

  std::map<std::string, long> frames;
  if (regime == train::ContextRegime::kFixedInitial)
    frames = run::interaction_frame_counts(data_store.samples);

  // One split per batch, shared across checkpoints so every model sees the
  // same context sets.
  std::mt19937_64 rng(o.seed);
  std::vector<data::SplitBatch> splits;
  std::filesystem::create_directories(o.out);
  std::ofstream ctx_log(std::filesystem::path(o.out) / "contexts.jsonl");
  long total_targets = 0;
  for (size_t i = 0; i < batches.size(); ++i) {
    train::ContextSampling cs;
    cs.regime = regime;
    cs.training = false;
    cs.eval_fraction = o.context_fraction;
    cs.initial_fraction = o.initial_fraction;
    if (regime == train::ContextRegime::kFixedInitial) {
      const auto it = frames.find(batches[i].group_id);
      if (it == frames.end())
        throw run::ConfigError("no recording length known for group " +
                               batches[i].group_id);
      cs.interaction_frames = it->second;
    }
    data::SplitBatch split = train::sample_context(batches[i], cs, rng);
    json line;
    line["batch"] = i;
    line["group_id"] = split.group_id;
    line["regime"] = o.regime;
    line["context_count"] = split.context.size();
    line["target_count"] = split.target.size();
    json ids = json::array();
    for (const auto& s : split.context) {
      json id;
      id["obs_start"] = s.observed.at(0).timestamps.front();
      id["offset"] = s.offset_steps;
      ids.push_back(id);
    }
    line["context_ids"] = ids;
    ctx_log << line.dump() << "\n";
    total_targets += static_cast<long>(split.target.size());
    if (!split.target.empty()) splits.push_back(std::move(split));
  }
  ctx_log.close();
  if (splits.empty() || total_targets == 0)
    throw run::ConfigError("this regime leaves no target sequences to score");

  std::optional<dsets::StandardizationStats> stats_override;
  if (!o.stats.empty()) stats_override = dsets::load_stats(o.stats);

  const std::vector<std::string> tags = checkpoint_tags(o.checkpoints);
  run::RunManifest m;
  m.command = "evaluate";
  m.seed = o.seed;
  m.inputs = o.checkpoints;
  m.inputs.push_back(o.data);
  if (!o.stats.empty()) m.inputs.push_back(o.stats);
  m.started_at = started;
  m.outputs = {"contexts.jsonl"};

  for (size_t c = 0; c < checkpoints.size(); ++c) {
    const ckpt::Checkpoint& cp = checkpoints[c];
    check_window_lengths(batches, cp.config);
    pm::ProcessModel model(cp.config, 0);
    ckpt::apply_parameters(model, cp.parameters);
    const dsets::StandardizationStats* stats =
        stats_override ? &*stats_override : (cp.stats ? &*cp.stats : nullptr);

    const ev::EvaluationSummary summary = ev::evaluate_splits(model, splits, stats);
    const auto reports = ev::per_timestep_report(summary.sequences);

    const auto out_dir = std::filesystem::path(o.out);
    {
      std::ofstream f(out_dir / ("summary_" + tags[c] + ".txt"));
      f << "checkpoint: " << o.checkpoints[c] << "\n"
        << ev::format_summary_table(summary);
    }
    {
      std::ofstream f(out_dir / ("sequences_" + tags[c] + ".jsonl"));
      ev::write_sequence_records(f, summary);
    }
    {
      std::ofstream f(out_dir / ("timesteps_" + tags[c] + ".jsonl"));
      ev::write_timestep_records(f, reports);
    }
    m.outputs.push_back("summary_" + tags[c] + ".txt");
    m.outputs.push_back("sequences_" + tags[c] + ".jsonl");
    m.outputs.push_back("timesteps_" + tags[c] + ".jsonl");

    // For the synthetic task under the random regime the records cover the
    // store in order, so each one can be tied back to its phase and type and
    // scored against the bimodal expected mean.
    if (data_store.kind == run::StoreKind::kGlancing &&
        regime == train::ContextRegime::kRandom &&
        summary.sequences.size() == data_store.glances.size()) {
      std::map<double, std::pair<const dsets::GlancingSequence*,
                                 const dsets::GlancingSequence*>>
          by_phase;
      for (const auto& g : data_store.glances) {
        auto& slot = by_phase[g.phase];
        (g.type == dsets::GlanceType::kTypeI ? slot.first : slot.second) = &g;
      }
      std::ofstream f(out_dir / ("phases_" + tags[c] + ".jsonl"));
      for (size_t i = 0; i < summary.sequences.size(); ++i) {
        const auto& g = data_store.glances[i];
        const auto& rec = summary.sequences[i];
        const auto& slot = by_phase.at(g.phase);
        json line;
        line["phase"] = g.phase;
        line["type"] = g.type == dsets::GlanceType::kTypeI ? "I" : "III";
        line["nll"] = rec.metrics.nll;
        double true_err = 0.0, expected_err = 0.0;
        const long t_fut = rec.prediction.mean.at(0).rows();
        for (long t = 0; t < t_fut; ++t) {
          const double pred = rec.prediction.mean[0](t, 0);
          const double truth = rec.truth[0](t, 0);
          double expected = truth;
          if (slot.first && slot.second) {
            const size_t at = static_cast<size_t>(dsets::kGlanceObsSteps + t);
            expected = 0.5 * (slot.first->values[at] + slot.second->values[at]);
          }
          true_err += std::abs(pred - truth);
          expected_err += std::abs(pred - expected);
        }
        line["mae_true_deg"] = 90.0 * true_err / static_cast<double>(t_fut);
        line["mae_expected_deg"] = 90.0 * expected_err / static_cast<double>(t_fut);
        f << line.dump() << "\n";
      }
      m.outputs.push_back("phases_" + tags[c] + ".jsonl");
    }

    std::cout << "checkpoint: " << o.checkpoints[c] << "\n"
              << ev::format_summary_table(summary) << "\n";
  }

  m.finished_at = run::timestamp_utc();
  run::save_manifest(o.out, m);
  return 0;
}

struct PlotOpts {
  std::string kind;
  std::string in;
  std::string out;
};

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw run::ConfigError("cannot open metrics file: " + path);
  std::vector<json> records;
  std::string line;
  long n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw run::ConfigError(path + " record " + std::to_string(n) + ": " + e.what());
    }
  }
  return records;
}

void require_columns(const std::vector<json>& records,
                     const std::vector<std::string>& cols, const std::string& path) {
  for (size_t i = 0; i < records.size(); ++i)
    for (const auto& c : cols)
      if (!records[i].contains(c))
        throw run::ConfigError(path + " record " + std::to_string(i + 1) +
                               " is missing column '" + c + "'");
}

int run_plot(const PlotOpts& o) {
  const std::string started = run::timestamp_utc();
  std::filesystem::create_directories(o.out);
  run::RunManifest m;
  m.command = "plot";
  m.inputs = {o.in};
  m.started_at = started;

  const std::vector<json> records = read_jsonl(o.in);
  if (o.kind == "curves") {
    require_columns(records, {"metric", "t_fut", "step", "value"}, o.in);
    std::map<std::string, std::vector<const json*>> by_metric;
    for (const auto& r : records)
      by_metric[r.at("metric").get<std::string>()].push_back(&r);
    for (const auto& [metric, rows] : by_metric) {
      const auto path = std::filesystem::path(o.out) / (metric + "_curve.csv");
      std::ofstream f(path);
      f << "t_fut,step,value\n";
      for (const json* r : rows)
        f << r->at("t_fut").get<long>() << "," << r->at("step").get<long>() << ","
          << num(r->at("value").get<double>()) << "\n";
      m.outputs.push_back(metric + "_curve.csv");
    }
    std::cout << "wrote " << by_metric.size() << " curve files to " << o.out << "\n";
  } else if (o.kind == "scatter") {
    require_columns(records, {"phase", "type", "nll", "mae_true_deg", "mae_expected_deg"},
                    o.in);
    const auto path = std::filesystem::path(o.out) / "phase_error_scatter.csv";
    std::ofstream f(path);
    f << "phase,type,nll,mae_true_deg,mae_expected_deg\n";
    for (const auto& r : records)
      f << num(r.at("phase").get<double>()) << "," << r.at("type").get<std::string>()
        << "," << num(r.at("nll").get<double>()) << ","
        << num(r.at("mae_true_deg").get<double>()) << ","
        << num(r.at("mae_expected_deg").get<double>()) << "\n";
    m.outputs.push_back("phase_error_scatter.csv");
    std::cout << "wrote " << records.size() << " scatter rows to " << path.string()
              << "\n";
  } else {
    throw run::ConfigError("unknown plot kind '" + o.kind +
                           "' (expected curves or scatter)");
  }

  m.finished_at = run::timestamp_utc();
  run::save_manifest(o.out, m);
  return 0;
}

struct PresetOpts {
  std::string name;
  std::string out;
};

int run_preset_cmd(const PresetOpts& o) {
  const run::RunConfig rc = run::preset(o.name);
  if (o.out.empty()) {
    std::cout << run::run_config_to_json(rc).dump(2) << "\n";
  } else {
    run::save_run_config(o.out, rc);
    std::cout << "wrote " << o.out << "\n";
  }
  return 0;
}

struct CountParamsOpts {
  std::string config;
  std::string preset;
};

int run_count_params(const CountParamsOpts& o) {
  std::string source;
  const run::RunConfig rc = resolve_config(o.config, o.preset, source);
  std::cout << pm::count_parameters(run::to_model_config(rc)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"social process experiment driver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", run::kVersionTag);

  GenerateSyntheticOpts gs;
  auto* c_gs = app.add_subcommand("generate-synthetic",
                                  "write the synthetic glancing dataset");
  c_gs->add_option("--out", gs.out, "output directory")->required();
  c_gs->add_option("--phase-step", gs.phase_step, "phase grid step (default 0.001)");

  GenerateMockOpts gm;
  auto* c_gm = app.add_subcommand("generate-mock",
                                  "write scripted mock recordings in the raw format");
  c_gm->add_option("--out", gm.out, "output directory")->required();
  c_gm->add_option("--groups", gm.cfg.groups, "number of groups");
  c_gm->add_option("--train-groups", gm.cfg.train_groups, "groups in the train split");
  c_gm->add_option("--participants", gm.cfg.participants, "agents per group");
  c_gm->add_option("--seconds", gm.cfg.seconds, "recording length");
  c_gm->add_option("--rate", gm.cfg.sample_rate_hz, "sample rate in Hz");
  c_gm->add_option("--reaction-delay", gm.cfg.reaction_delay_frames,
                   "listener reaction delay in frames");
  c_gm->add_option("--seed", gm.cfg.seed, "script seed");

  PreprocessOpts pp;
  auto* c_pp = app.add_subcommand("preprocess",
                                  "ingest raw groups and write windowed stores");
  c_pp->add_option("--raw", pp.raw, "raw interchange root")->required();
  c_pp->add_option("--out", pp.out, "output directory")->required();
  c_pp->add_option("--obs-len", pp.wcfg.obs_len_s, "observed window seconds");
  c_pp->add_option("--fut-len", pp.wcfg.fut_len_s, "future window seconds");
  c_pp->add_option("--overlap", pp.wcfg.overlap_fraction, "observed window overlap");
  c_pp->add_option("--max-offset", pp.wcfg.max_offset_s, "max future offset seconds");
  c_pp->add_option("--rate", pp.wcfg.sample_rate_hz,
                   "fallback sample rate when a group omits one");

  TrainOpts tr;
  auto* c_tr = app.add_subcommand("train", "train a model into a fresh run directory");
  c_tr->add_option("--config", tr.config, "run config path");
  c_tr->add_option("--preset", tr.preset, "named preset instead of a config file");
  c_tr->add_option("--data", tr.data, "training store (overrides train_data)");
  c_tr->add_option("--val", tr.val, "validation store (overrides val_data)");
  c_tr->add_option("--stats", tr.stats, "standardization stats (overrides stats_path)");
  c_tr->add_option("--run-root", tr.run_root, "runs root (default $SOCPROC_RUN_ROOT)");
  c_tr->add_option("--run-name", tr.run_name, "run directory name");
  c_tr->add_option("--seed", tr.seed, "seed override");

  EvaluateOpts evo;
  auto* c_ev = app.add_subcommand("evaluate", "score checkpoints on a sample store");
  c_ev->add_option("--checkpoint", evo.checkpoints,
                   "checkpoint file (repeat for comparative evaluation)")
      ->required();
  c_ev->add_option("--data", evo.data, "sample store")->required();
  c_ev->add_option("--out", evo.out, "output directory")->required();
  c_ev->add_option("--regime", evo.regime, "context regime: random or fixed-initial");
  c_ev->add_option("--context-fraction", evo.context_fraction,
                   "context fraction for the random regime");
  c_ev->add_option("--initial-fraction", evo.initial_fraction,
                   "initial fraction for the fixed-initial regime");
  c_ev->add_option("--batch-size", evo.batch_size, "evaluation batch size");
  c_ev->add_option("--seed", evo.seed, "context draw seed");
  c_ev->add_option("--stats", evo.stats, "override standardization stats");

  PlotOpts pl;
  auto* c_pl = app.add_subcommand("plot", "export plot data from metrics files");
  c_pl->add_option("--kind", pl.kind, "curves or scatter")->required();
  c_pl->add_option("--in", pl.in, "metrics file (jsonl)")->required();
  c_pl->add_option("--out", pl.out, "output directory")->required();

  PresetOpts pr;
  auto* c_pr = app.add_subcommand("preset", "print or save a named run config");
  c_pr->add_option("name", pr.name, "preset name")->required();
  c_pr->add_option("--out", pr.out, "write to a file instead of stdout");

  CountParamsOpts cp;
  auto* c_cp = app.add_subcommand("count-params",
                                  "print the parameter count of a configuration");
  c_cp->add_option("--config", cp.config, "run config path");
  c_cp->add_option("--preset", cp.preset, "named preset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (c_gs->parsed()) return guarded([&] { return run_generate_synthetic(gs); });
  if (c_gm->parsed()) return guarded([&] { return run_generate_mock(gm); });
  if (c_pp->parsed()) return guarded([&] { return run_preprocess(pp); });
  if (c_tr->parsed()) return guarded([&] { return run_train(tr); });
  if (c_ev->parsed()) return guarded([&] { return run_evaluate(evo); });
  if (c_pl->parsed()) return guarded([&] { return run_plot(pl); });
  if (c_pr->parsed()) return guarded([&] { return run_preset_cmd(pr); });
  if (c_cp->parsed()) return guarded([&] { return run_count_params(cp); });
  return 1;
}
