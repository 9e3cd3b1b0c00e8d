#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "overlapgan/trainer.hpp"

using namespace ogan;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TrainConfig smoke_config(Variant variant) {
  TrainConfig c;
  c.variant = variant;
  c.dataset.type = "two_gaussian_toy";
  c.total_iters = 30;
  c.n_d = 2;
  c.batch_size_d = 32;
  c.batch_size_g = 32;
  c.width = 16;
  c.eval_interval = 10;
  c.checkpoint_interval = 15;
  c.eval_samples = 64;
  c.dma_samples_per_state = 32;
  c.seed = 5;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("zero iterations returns initialized weights and empty metrics") {
  TempDir dir("run_t0");
  TrainConfig c = smoke_config(Variant::kCpGan);
  c.total_iters = 0;
  RunRecord r = train(c, dir.path);
  CHECK(r.eval_rows.empty());
  CHECK(r.g_steps == 0);
  CHECK(r.d_steps == 0);
  CHECK(fs::exists(r.checkpoint_path));
  Checkpoint ckpt = load_checkpoint(r.checkpoint_path);
  CHECK(ckpt.iteration == 0);
  // metrics.csv holds only the header
  std::string contents = slurp(dir.path / "metrics.csv");
  CHECK(contents.find("iteration,gan_d") == 0);
  CHECK(contents.find('\n') == contents.size() - 1);
}

TEST_CASE("smoke runs stay finite for every variant, with update isolation") {
  for (Variant v : {Variant::kCpGan, Variant::kAcGan, Variant::kCGanConcat}) {
    CAPTURE(variant_name(v));
    TempDir dir("run_smoke_" + variant_name(v));
    TrainOptions opts;
    opts.verify_update_isolation = true;
    RunRecord r = train(smoke_config(v), dir.path, opts);
    CHECK(r.g_steps == 30);
    CHECK(r.d_steps == 60);  // n_d * g_steps exactly
    REQUIRE(!r.eval_rows.empty());
    for (const auto& row : r.eval_rows) {
      CHECK(std::isfinite(row.losses.composite_d));
      CHECK(std::isfinite(row.losses.composite_g));
      CHECK(std::isfinite(row.frechet));
      CHECK(row.dma_mean >= 0.0);
      CHECK(row.dma_mean <= 1.0);
    }
    CHECK(fs::exists(dir.path / "metrics.csv"));
    CHECK(fs::exists(dir.path / "config.json"));
    CHECK(fs::exists(dir.path / "checkpoints" / "ckpt_00000015.json"));
  }
}

TEST_CASE("identical config and seed reproduce checkpoints bit-identically") {
  TempDir dir_a("run_det_a");
  TempDir dir_b("run_det_b");
  TrainConfig c = smoke_config(Variant::kCpGan);
  RunRecord ra = train(c, dir_a.path);
  RunRecord rb = train(c, dir_b.path);
  CHECK(slurp(ra.checkpoint_path) == slurp(rb.checkpoint_path));
  CHECK(slurp(dir_a.path / "metrics.csv") == slurp(dir_b.path / "metrics.csv"));
}

TEST_CASE("different seeds diverge") {
  TempDir dir_a("run_seed_a");
  TempDir dir_b("run_seed_b");
  TrainConfig c = smoke_config(Variant::kCpGan);
  RunRecord ra = train(c, dir_a.path);
  c.seed = 6;
  RunRecord rb = train(c, dir_b.path);
  CHECK(slurp(ra.checkpoint_path) != slurp(rb.checkpoint_path));
}

TEST_CASE("learning rate decays along the schedule in the metrics log") {
  TempDir dir("run_lr");
  TrainConfig c = smoke_config(Variant::kAcGan);
  c.lr_decay = true;
  train(c, dir.path);
  std::ifstream in(dir.path / "metrics.csv");
  std::string line;
  std::getline(in, line);  // header
  double prev = 1.0;
  int rows = 0;
  while (std::getline(in, line)) {
    // lr is column 9 (0-based 8)
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 9; ++i) std::getline(ss, cell, ',');
    const double lr = std::stod(cell);
    CHECK(lr < prev + 1e-15);
    CHECK(lr > 0.0);
    prev = lr;
    ++rows;
  }
  CHECK(rows == 30);
  // The schedule itself reaches exactly zero at T.
  CHECK(lr_schedule(c.total_iters, c.total_iters, c.alpha0) == 0.0);
}

TEST_CASE("kl_cp_start_iter delays the classifier term") {
  TempDir dir("run_onset");
  TrainConfig c = smoke_config(Variant::kCpGan);
  c.kl_cp_start_iter = 10;
  train(c, dir.path);
  std::ifstream in(dir.path / "metrics.csv");
  std::string line;
  std::getline(in, line);
  int iter = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 5; ++i) std::getline(ss, cell, ',');  // cls_g column
    const double cls = std::stod(cell);
    if (iter < 10) CHECK(cls == 0.0);
    ++iter;
  }
}

TEST_CASE("NaN losses abort with a diagnostic checkpoint") {
  TempDir dir("run_nan");
  TrainConfig c = smoke_config(Variant::kCpGan);
  c.alpha0 = 1e300;  // blows up within a few updates
  c.lr_decay = false;
  CHECK_THROWS_AS(train(c, dir.path), NumericError);
  CHECK(fs::exists(dir.path / "checkpoints" / "ckpt_abort.json"));
}

TEST_CASE("config validation failures") {
  TrainConfig c = smoke_config(Variant::kCpGan);
  c.n_d = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = smoke_config(Variant::kCpGan);
  c.kl_cp_start_iter = 100;  // > total_iters
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = smoke_config(Variant::kCpGan);
  c.lambda_g = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("defaults echo the toy training settings") {
  TrainConfig c;
  CHECK(c.variant == Variant::kCpGan);
  CHECK(c.total_iters == 100000);
  CHECK(c.n_d == 5);
  CHECK(c.batch_size_d == 256);
  CHECK(c.batch_size_g == 256);
  CHECK(c.alpha0 == 1e-4);
  CHECK(c.beta1 == 0.5);
  CHECK(c.beta2 == 0.9);
  CHECK(c.lambda_r == 1.0);
  CHECK(c.lambda_g == 1.0);
  CHECK(c.lambda_gp == 0.1);
  CHECK(c.lr_decay);
  CHECK(c.width == 512);
  CHECK(c.z_dim == 2);
  CHECK(c.gan_mode == "wgan");
}

TEST_CASE("pgan smoke run trains on a frozen classifier") {
  TempDir dir("run_pgan_src");
  TrainConfig c = smoke_config(Variant::kCpGan);
  RunRecord src = train(c, dir.path);

  TempDir pdir("run_pgan");
  TrainConfig pc = smoke_config(Variant::kCpGan);
  pc.width = 16;
  RunRecord pr = train_pgan(pc, src.models, c.total_iters, pdir.path);
  CHECK(pr.g_steps == 30);
  CHECK(pr.d_steps == 60);
  CHECK(!pr.pgan_classifier_untrained);
  REQUIRE(pr.models.pgan.has_value());
  REQUIRE(!pr.eval_rows.empty());
  for (const auto& row : pr.eval_rows) {
    CHECK(std::isfinite(row.losses.composite_d));
    CHECK(std::isfinite(row.frechet));
  }

  // An untrained classifier is accepted but flagged.
  TempDir udir("run_pgan_untrained");
  RunRecord ur = train_pgan(pc, src.models, 0, udir.path);
  CHECK(ur.pgan_classifier_untrained);
}

TEST_CASE("nonsaturating mode also trains") {
  TempDir dir("run_nonsat");
  TrainConfig c = smoke_config(Variant::kAcGan);
  c.gan_mode = "nonsaturating";
  c.lambda_gp = 0.0;
  RunRecord r = train(c, dir.path);
  for (const auto& row : r.eval_rows) {
    CHECK(std::isfinite(row.losses.composite_d));
    CHECK(std::isfinite(row.losses.composite_g));
  }
}

TEST_CASE("ablation grids") {
  TempDir dir("run_grid");
  TrainConfig base = smoke_config(Variant::kCpGan);
  base.total_iters = 8;
  base.eval_interval = 4;
  base.checkpoint_interval = 8;

  auto empty_axes = ablation_grid(base, {}, dir.path / "base_only", 2);
  CHECK(empty_axes.size() == 1);

  auto lg = ablation_grid(base, {"lambda_g"}, dir.path / "lambda_g", 2);
  CHECK(lg.size() == 4);
  CHECK(lg[0].config.lambda_g == doctest::Approx(0.1));
  CHECK(lg[3].config.lambda_g == doctest::Approx(1.0));
  // Shared seed policy: every cell keeps the base seed.
  for (const auto& r : lg) CHECK(r.config.seed == base.seed);
  CHECK(fs::exists(dir.path / "lambda_g" / "ablation_summary.csv"));

  auto both = ablation_grid(base, {"dropout", "lambda_g"}, dir.path / "pair", 2);
  CHECK(both.size() == 8);

  CHECK_THROWS_AS(ablation_grid(base, {"unknown_axis"}, dir.path / "bad", 1),
                  std::invalid_argument);
}
