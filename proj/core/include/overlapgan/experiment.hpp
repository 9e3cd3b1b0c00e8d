#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "overlapgan/checkpoint.hpp"
#include "overlapgan/config.hpp"
#include "overlapgan/trainer.hpp"

namespace ogan {

// Exit codes shared by run_experiment and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;
inline constexpr int kExitEvalError = 3;

struct ExperimentManifest {
  std::string name;
  std::filesystem::path config_path;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  bool with_pgan = false;
  std::filesystem::path pgan_config_path;  // optional; defaults from config
};

ExperimentManifest load_manifest(const std::filesystem::path& path);

// train -> (optional) train_pgan -> eval -> export per seed, skipping stages
// whose content hash already matches the recorded artifacts index. The index
// is rewritten atomically as out_dir/manifest.json.
int run_experiment(const std::filesystem::path& manifest_path,
                   std::string* error_message = nullptr);

struct EvalParams {
  Index dma_samples_per_state = 2000;
  Index frechet_samples = 10000;
  Index matrix_samples_per_class = 5000;
  Index entropy_samples = 20000;
  int interpolation_steps = 10;
  std::uint64_t seed = 7;
};

// Full evaluation of a checkpoint against a dataset; returns the metrics
// JSON document {dma_per_state, dma_mean, frechet_global, posterior_matrix,
// entropy_profile, ...}.
std::string run_full_eval(const Checkpoint& ckpt, const OverlapDataset& dataset,
                          const EvalParams& params);

// Plot-ready CSV bundles for a completed run directory: scatter.csv,
// posterior_matrix.csv, interpolation.csv, loss_curve.csv under
// run_dir/exports. Throws listing missing artifacts for incomplete runs.
std::vector<std::filesystem::path> export_plots(const std::filesystem::path& run_dir);

// x0,x1,coarse_label,fine_component rows for n samples of the dataset.
void export_dataset_csv(const OverlapDataset& dataset, Index n, std::uint64_t seed,
                        const std::filesystem::path& out_path);

std::string sha_like_hash(const std::string& payload);

}  // namespace ogan
