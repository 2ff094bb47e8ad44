#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "socproc/checkpoint.hpp"
#include "socproc/training.hpp"

using namespace socproc;
using Mat = Eigen::MatrixXd;

namespace {

bool same_bits(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

std::filesystem::path temp_file(const char* stem) {
  auto dir = std::filesystem::temp_directory_path() / "socproc_ckpt_tests";
  std::filesystem::create_directories(dir);
  return dir / stem;
}

pm::ModelConfig odd_config() {
  pm::ModelConfig cfg;
  cfg.variant = pm::parse_variant("asp-mlp-multihead");
  cfg.variant.share_social_encoders = true;
  cfg.variant.deterministic_decoding = true;
  cfg.feature_dim = 15;
  cfg.t_obs = 4;
  cfg.t_fut = 3;
  cfg.d_e = 8;
  cfg.enc_layers = 2;
  cfg.enc_hidden = 6;
  cfg.pooler_layers = 2;
  cfg.pooler_hidden = 5;
  cfg.pooler_out = 4;
  cfg.z_layers = 2;
  cfg.z_hidden = 6;
  cfg.attn_heads = 2;
  cfg.attn_qk_dim = 4;
  cfg.dropout = 0.25;
  cfg.pool_final_only = true;
  return cfg;
}

dsets::StandardizationStats odd_stats() {
  dsets::StandardizationStats stats;
  stats.feature_dim = 15;
  stats.dims = {0, 1, 2, 7, 8, 9};
  stats.mean = Eigen::VectorXd::LinSpaced(6, -1.25, 2.5);
  stats.stddev = Eigen::VectorXd::LinSpaced(6, 0.5, 3.0);
  return stats;
}

}  // namespace

TEST_CASE("model config survives the json round trip") {
  const pm::ModelConfig cfg = odd_config();
  const pm::ModelConfig back = ckpt::model_config_from_json(ckpt::model_config_to_json(cfg));
  CHECK(pm::variant_name(back.variant) == pm::variant_name(cfg.variant));
  CHECK(back.variant.share_social_encoders == cfg.variant.share_social_encoders);
  CHECK(back.variant.deterministic_decoding == cfg.variant.deterministic_decoding);
  CHECK(back.feature_dim == cfg.feature_dim);
  CHECK(back.t_obs == cfg.t_obs);
  CHECK(back.t_fut == cfg.t_fut);
  CHECK(back.d_e == cfg.d_e);
  CHECK(back.enc_layers == cfg.enc_layers);
  CHECK(back.enc_hidden == cfg.enc_hidden);
  CHECK(back.pooler_layers == cfg.pooler_layers);
  CHECK(back.pooler_hidden == cfg.pooler_hidden);
  CHECK(back.pooler_out == cfg.pooler_out);
  CHECK(back.z_layers == cfg.z_layers);
  CHECK(back.z_hidden == cfg.z_hidden);
  CHECK(back.attn_heads == cfg.attn_heads);
  CHECK(back.attn_qk_dim == cfg.attn_qk_dim);
  CHECK(back.dropout == cfg.dropout);
  CHECK(back.no_pool == cfg.no_pool);
  CHECK(back.pool_final_only == cfg.pool_final_only);
}

TEST_CASE("standardization stats survive the json round trip") {
  const auto stats = odd_stats();
  const auto back = ckpt::stats_from_json(ckpt::stats_to_json(stats));
  CHECK(back.feature_dim == stats.feature_dim);
  CHECK(back.dims == stats.dims);
  CHECK(same_bits(back.mean, stats.mean));
  CHECK(same_bits(back.stddev, stats.stddev));
}

TEST_CASE("checkpoint files round trip bit-exactly") {
  pm::ProcessModel model(odd_config(), 11);
  ckpt::Checkpoint c;
  c.config = model.config();
  c.stats = odd_stats();
  c.parameters = ckpt::extract_parameters(model);
  c.metrics = {{"val_nll", -0.125}, {"epoch", 7.0}};

  const auto path = temp_file("roundtrip.bin");
  ckpt::save_checkpoint(path, c);
  const auto back = ckpt::load_checkpoint(path);

  CHECK(back.layout_version == dsets::kLayoutVersion);
  CHECK(pm::variant_name(back.config.variant) == pm::variant_name(c.config.variant));
  CHECK(back.metrics == c.metrics);
  REQUIRE(back.stats.has_value());
  CHECK(same_bits(back.stats->mean, c.stats->mean));
  REQUIRE(back.parameters.size() == c.parameters.size());
  for (const auto& [name, m] : c.parameters) {
    REQUIRE(back.parameters.count(name) == 1);
    CHECK(same_bits(back.parameters.at(name), m));
  }
}

TEST_CASE("checkpoint without stats stays stats-free") {
  pm::ProcessModel model(odd_config(), 3);
  ckpt::Checkpoint c;
  c.config = model.config();
  c.parameters = ckpt::extract_parameters(model);
  const auto path = temp_file("nostats.bin");
  ckpt::save_checkpoint(path, c);
  CHECK_FALSE(ckpt::load_checkpoint(path).stats.has_value());
}

TEST_CASE("layout version field is preserved") {
  pm::ProcessModel model(odd_config(), 3);
  ckpt::Checkpoint c;
  c.layout_version = 7;
  c.config = model.config();
  c.parameters = ckpt::extract_parameters(model);
  const auto path = temp_file("layout.bin");
  ckpt::save_checkpoint(path, c);
  CHECK(ckpt::load_checkpoint(path).layout_version == 7);
}

TEST_CASE("applying extracted parameters reproduces the model exactly") {
  const auto cfg = odd_config();
  pm::ProcessModel a(cfg, 1);
  pm::ProcessModel b(cfg, 2);

  const auto pa = ckpt::extract_parameters(a);
  const auto pb = ckpt::extract_parameters(b);
  bool any_diff = false;
  for (const auto& [name, m] : pa)
    if (!same_bits(m, pb.at(name))) any_diff = true;
  REQUIRE(any_diff);

  ckpt::apply_parameters(b, pa);
  for (const auto& [name, m] : ckpt::extract_parameters(b)) CHECK(same_bits(m, pa.at(name)));
}

TEST_CASE("parameter application rejects mismatched sets") {
  const auto cfg = odd_config();
  pm::ProcessModel model(cfg, 1);
  auto params = ckpt::extract_parameters(model);

  SECTION("missing name") {
    params.erase(params.begin());
    CHECK_THROWS_AS(ckpt::apply_parameters(model, params), ckpt::CheckpointError);
  }
  SECTION("extra name") {
    params.emplace("bogus.W", Mat::Zero(2, 2));
    CHECK_THROWS_AS(ckpt::apply_parameters(model, params), ckpt::CheckpointError);
  }
  SECTION("shape mismatch") {
    auto it = params.begin();
    it->second = Mat::Zero(it->second.rows() + 1, it->second.cols());
    CHECK_THROWS_AS(ckpt::apply_parameters(model, params), ckpt::CheckpointError);
  }
}

TEST_CASE("loading rejects missing and malformed files") {
  CHECK_THROWS_AS(ckpt::load_checkpoint(temp_file("does_not_exist.bin")),
                  ckpt::CheckpointError);
  const auto path = temp_file("garbage.bin");
  std::ofstream(path) << "definitely not a checkpoint";
  CHECK_THROWS_AS(ckpt::load_checkpoint(path), ckpt::CheckpointError);
}

TEST_CASE("parameter averaging commutes with the file round trip") {
  const auto cfg = odd_config();
  pm::ProcessModel a(cfg, 21);
  pm::ProcessModel b(cfg, 22);

  const auto direct =
      train::average_parameters({ckpt::extract_parameters(a), ckpt::extract_parameters(b)});

  ckpt::Checkpoint ca, cb;
  ca.config = cb.config = cfg;
  ca.parameters = ckpt::extract_parameters(a);
  cb.parameters = ckpt::extract_parameters(b);
  const auto pa = temp_file("avg_a.bin");
  const auto pb = temp_file("avg_b.bin");
  ckpt::save_checkpoint(pa, ca);
  ckpt::save_checkpoint(pb, cb);
  const auto via_files = train::average_parameters(
      {ckpt::load_checkpoint(pa).parameters, ckpt::load_checkpoint(pb).parameters});

  REQUIRE(via_files.size() == direct.size());
  for (const auto& [name, m] : direct) CHECK(same_bits(m, via_files.at(name)));
}
