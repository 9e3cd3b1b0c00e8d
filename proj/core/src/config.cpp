#include "overlapgan/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "overlapgan/losses.hpp"

namespace ogan {

using nlohmann::json;

const char* const kVersionString = "overlapgan-0.1.0";

namespace {

// json::at with a ConfigError naming the missing key.
const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError(std::string("config: missing key \"") + key + "\"");
  }
  return *it;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for \"") + key + "\": " + e.what());
  }
}

json dataset_to_json(const DatasetSpec& spec) {
  json j;
  j["type"] = spec.type;
  if (spec.type == "ring") {
    j["scheme"] = spec.scheme;
    j["k_fine"] = spec.k_fine;
  } else if (spec.type == "custom") {
    json comps = json::array();
    for (const auto& c : spec.components) {
      comps.push_back({{"id", c.id},
                       {"mean", {c.mean[0], c.mean[1]}},
                       {"covariance", {c.cov[0], c.cov[1], c.cov[2], c.cov[3]}},
                       {"weight", c.weight}});
    }
    j["components"] = std::move(comps);
    j["num_classes"] = spec.num_classes;
    j["membership"] = spec.membership;
  }
  return j;
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec spec;
  spec.type = get_or<std::string>(j, "type", "two_gaussian_toy");
  if (spec.type == "two_gaussian_toy") {
    return spec;
  }
  if (spec.type == "ring") {
    spec.scheme = field(j, "scheme").get<std::string>();
    spec.k_fine = get_or<int>(j, "k_fine", spec.scheme == "7to3" ? 7 : 10);
    return spec;
  }
  if (spec.type == "custom") {
    for (const auto& cj : field(j, "components")) {
      FineComponent c;
      c.id = get_or<int>(cj, "id", static_cast<int>(spec.components.size()));
      auto mean = field(cj, "mean");
      c.mean = {mean.at(0).get<double>(), mean.at(1).get<double>()};
      auto cov = field(cj, "covariance");
      c.cov = {cov.at(0).get<double>(), cov.at(1).get<double>(),
               cov.at(2).get<double>(), cov.at(3).get<double>()};
      c.weight = field(cj, "weight").get<double>();
      spec.components.push_back(c);
    }
    spec.num_classes = field(j, "num_classes").get<int>();
    spec.membership = field(j, "membership").get<std::vector<std::vector<int>>>();
    return spec;
  }
  throw ConfigError("config: unknown dataset type \"" + spec.type + "\"");
}

}  // namespace

OverlapDataset build_dataset(const DatasetSpec& spec) {
  if (spec.type == "two_gaussian_toy") return build_two_gaussian_toy();
  if (spec.type == "ring") return build_ring_overlap(spec.k_fine, spec.scheme);
  if (spec.type == "custom") {
    OverlapScheme scheme;
    scheme.num_classes = spec.num_classes;
    scheme.membership = spec.membership;
    return OverlapDataset(spec.components, std::move(scheme));
  }
  throw ConfigError("config: unknown dataset type \"" + spec.type + "\"");
}

DatasetSpec explicit_spec(const OverlapDataset& dataset) {
  DatasetSpec spec;
  spec.type = "custom";
  spec.components = dataset.components();
  spec.num_classes = dataset.num_classes();
  spec.membership = dataset.scheme().membership;
  return spec;
}

void TrainConfig::validate() const {
  if (total_iters < 0) throw ConfigError("config: total_iters must be >= 0");
  if (n_d < 1) throw ConfigError("config: n_d must be >= 1");
  if (batch_size_d < 1 || batch_size_g < 1) {
    throw ConfigError("config: batch sizes must be >= 1");
  }
  if (lambda_r < 0 || lambda_g < 0 || lambda_gp < 0) {
    throw ConfigError("config: loss weights must be >= 0");
  }
  if (kl_cp_start_iter < 0 || kl_cp_start_iter > total_iters) {
    throw ConfigError("config: kl_cp_start_iter must lie in [0, total_iters]");
  }
  if (k_shared < 0 || k_shared > 3) {
    throw ConfigError("config: k_shared must be in 0..3");
  }
  for (double r : dropout_rates) {
    if (r < 0.0 || r >= 1.0) throw ConfigError("config: dropout rates must be in [0, 1)");
  }
  if (width < 1 || z_dim < 1) throw ConfigError("config: width and z_dim must be >= 1");
  if (alpha0 <= 0) throw ConfigError("config: alpha0 must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw ConfigError("config: beta1/beta2 must be in [0, 1)");
  }
  adv_mode_from_name(gan_mode);
  build_dataset(dataset);  // rejects malformed mixtures
}

std::int64_t TrainConfig::effective_eval_interval() const {
  if (eval_interval > 0) return eval_interval;
  return std::max<std::int64_t>(1, total_iters / 50);
}

std::int64_t TrainConfig::effective_checkpoint_interval() const {
  if (checkpoint_interval > 0) return checkpoint_interval;
  return std::max<std::int64_t>(1, total_iters / 10);
}

TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  TrainConfig c;
  c.variant = variant_from_name(field(j, "variant").get<std::string>());
  c.dataset = dataset_from_json(field(j, "dataset"));
  c.total_iters = field(j, "total_iters").get<std::int64_t>();
  c.n_d = get_or<int>(j, "n_d", c.n_d);
  c.batch_size_d = get_or<Index>(j, "batch_size_d", c.batch_size_d);
  c.batch_size_g = get_or<Index>(j, "batch_size_g", c.batch_size_g);
  c.alpha0 = get_or<double>(j, "alpha0", c.alpha0);
  c.beta1 = get_or<double>(j, "beta1", c.beta1);
  c.beta2 = get_or<double>(j, "beta2", c.beta2);
  c.adam_eps = get_or<double>(j, "adam_eps", c.adam_eps);
  c.lambda_r = get_or<double>(j, "lambda_r", c.lambda_r);
  c.lambda_g = get_or<double>(j, "lambda_g", c.lambda_g);
  c.lambda_gp = get_or<double>(j, "lambda_gp", c.lambda_gp);
  c.dropout = get_or<bool>(j, "dropout", c.dropout);
  if (j.contains("dropout_rates")) {
    auto rates = j["dropout_rates"].get<std::vector<double>>();
    if (rates.size() != 3) throw ConfigError("config: dropout_rates needs 3 entries");
    std::copy(rates.begin(), rates.end(), c.dropout_rates.begin());
  }
  c.k_shared = get_or<int>(j, "k_shared", c.k_shared);
  c.kl_cp_start_iter = get_or<std::int64_t>(j, "kl_cp_start_iter", c.kl_cp_start_iter);
  c.lr_decay = get_or<bool>(j, "lr_decay", c.lr_decay);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.width = get_or<Index>(j, "width", c.width);
  c.z_dim = get_or<Index>(j, "z_dim", c.z_dim);
  c.gan_mode = get_or<std::string>(j, "gan_mode", c.gan_mode);
  c.eval_interval = get_or<std::int64_t>(j, "eval_interval", c.eval_interval);
  c.checkpoint_interval =
      get_or<std::int64_t>(j, "checkpoint_interval", c.checkpoint_interval);
  c.eval_samples = get_or<Index>(j, "eval_samples", c.eval_samples);
  c.dma_samples_per_state =
      get_or<Index>(j, "dma_samples_per_state", c.dma_samples_per_state);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str());
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["variant"] = variant_name(c.variant);
  j["dataset"] = dataset_to_json(c.dataset);
  j["total_iters"] = c.total_iters;
  j["n_d"] = c.n_d;
  j["batch_size_d"] = c.batch_size_d;
  j["batch_size_g"] = c.batch_size_g;
  j["alpha0"] = c.alpha0;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["lambda_r"] = c.lambda_r;
  j["lambda_g"] = c.lambda_g;
  j["lambda_gp"] = c.lambda_gp;
  j["dropout"] = c.dropout;
  j["dropout_rates"] = c.dropout_rates;
  j["k_shared"] = c.k_shared;
  j["kl_cp_start_iter"] = c.kl_cp_start_iter;
  j["lr_decay"] = c.lr_decay;
  j["seed"] = c.seed;
  j["width"] = c.width;
  j["z_dim"] = c.z_dim;
  j["gan_mode"] = c.gan_mode;
  j["eval_interval"] = c.eval_interval;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["eval_samples"] = c.eval_samples;
  j["dma_samples_per_state"] = c.dma_samples_per_state;
  return j.dump(2);
}

DatasetSpec parse_dataset_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset spec: invalid JSON: ") + e.what());
  }
  return dataset_from_json(j);
}

DatasetSpec load_dataset_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset spec: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_spec(buf.str());
}

std::string dataset_spec_to_json(const DatasetSpec& spec) {
  return dataset_to_json(spec).dump(2);
}

}  // namespace ogan
