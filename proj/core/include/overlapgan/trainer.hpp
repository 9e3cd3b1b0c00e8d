#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "overlapgan/checkpoint.hpp"
#include "overlapgan/config.hpp"
#include "overlapgan/losses.hpp"
#include "overlapgan/nets.hpp"

namespace ogan {

struct EvalRow {
  std::int64_t iteration = 0;
  LossTerms losses;
  double lr = 0.0;
  double dma_mean = 0.0;
  double frechet = 0.0;
  double mean_posterior_kl = 0.0;
};

struct RunRecord {
  TrainConfig config;
  std::vector<EvalRow> eval_rows;
  ModelBundle models;
  std::string checkpoint_path;
  std::string metrics_path;
  double wall_seconds = 0.0;
  std::int64_t d_steps = 0;
  std::int64_t g_steps = 0;
  // Set when train_pgan received a classifier that was never trained.
  bool pgan_classifier_untrained = false;
};

struct TrainOptions {
  // Hash parameters around every step and throw if a D/C step touched G
  // weights or vice versa. Test hook; substantially slows training.
  bool verify_update_isolation = false;
};

// Alternating minimax training: per generator iteration, n_d D/C steps on
// fresh real batches, then one G step. Writes metrics.csv, config.json and
// periodic checkpoints under out_dir. NaN losses abort with NumericError
// after dumping a diagnostic checkpoint.
RunRecord train(const TrainConfig& config, const std::filesystem::path& out_dir,
                const TrainOptions& options = {});

// Trains (G_p, D_p) on (s^r, y^r) pairs produced by `source`'s classifier in
// eval mode. The returned bundle is `source` with the trained pGAN attached.
RunRecord train_pgan(const TrainConfig& config, const ModelBundle& source,
                     std::int64_t source_iteration,
                     const std::filesystem::path& out_dir,
                     const TrainOptions& options = {});

// Cartesian product over the named ablation axes (dropout, k_shared,
// kl_cp_start, lambda_g, seed) with the base config's seed shared across
// cells unless the seed axis is requested. Writes one run directory per cell
// plus ablation_summary.csv.
std::vector<RunRecord> ablation_grid(const TrainConfig& base,
                                     const std::vector<std::string>& axes,
                                     const std::filesystem::path& out_dir,
                                     int max_threads);

// Axis values used by ablation_grid.
std::vector<std::string> ablation_axis_values(const std::string& axis);

}  // namespace ogan
