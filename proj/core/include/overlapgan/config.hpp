#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "overlapgan/dataset.hpp"
#include "overlapgan/nets.hpp"

namespace ogan {

// Raised on malformed or inconsistent configuration input; the message names
// the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string type = "two_gaussian_toy";  // two_gaussian_toy | ring | custom
  // ring
  std::string scheme = "10to5";
  int k_fine = 10;
  // custom: explicit mixture
  std::vector<FineComponent> components;
  int num_classes = 0;
  std::vector<std::vector<int>> membership;
};

OverlapDataset build_dataset(const DatasetSpec& spec);
// Explicit (means/covariances/weights/membership) form of any dataset.
DatasetSpec explicit_spec(const OverlapDataset& dataset);

struct TrainConfig {
  Variant variant = Variant::kCpGan;
  DatasetSpec dataset;
  std::int64_t total_iters = 100000;
  int n_d = 5;
  Index batch_size_d = 256;
  Index batch_size_g = 256;
  double alpha0 = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  double lambda_r = 1.0;
  double lambda_g = 1.0;
  double lambda_gp = 0.1;
  bool dropout = true;
  std::array<double, 3> dropout_rates{0.2, 0.5, 0.5};
  int k_shared = 3;
  std::int64_t kl_cp_start_iter = 0;
  bool lr_decay = true;
  std::uint64_t seed = 1;
  Index width = 512;
  Index z_dim = 2;
  std::string gan_mode = "wgan";  // wgan | nonsaturating
  std::int64_t eval_interval = 0;        // 0 -> total_iters / 50
  std::int64_t checkpoint_interval = 0;  // 0 -> total_iters / 10
  Index eval_samples = 2048;
  Index dma_samples_per_state = 256;

  void validate() const;
  std::int64_t effective_eval_interval() const;
  std::int64_t effective_checkpoint_interval() const;
};

TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::filesystem::path& path);
// Canonical form: sorted keys, round-trip-exact numbers.
std::string train_config_to_json(const TrainConfig& config);

DatasetSpec parse_dataset_spec(const std::string& json_text);
DatasetSpec load_dataset_spec(const std::filesystem::path& path);
std::string dataset_spec_to_json(const DatasetSpec& spec);

extern const char* const kVersionString;

}  // namespace ogan
