#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "overlapgan/checkpoint.hpp"
#include "overlapgan/config.hpp"
#include "overlapgan/eval.hpp"
#include "overlapgan/experiment.hpp"
#include "overlapgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace ogan;

namespace {

int worker_threads() {
  if (const char* env = std::getenv("OVERLAP_GAN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Dataset argument: a spec file path or one of the shorthands
// two_gaussian_toy | ring:10to5 | ring:7to3.
OverlapDataset dataset_from_arg(const std::string& arg) {
  if (fs::exists(arg)) return build_dataset(load_dataset_spec(arg));
  DatasetSpec spec;
  if (arg == "two_gaussian_toy" || arg == "toy") {
    spec.type = "two_gaussian_toy";
  } else if (arg == "ring:10to5") {
    spec.type = "ring";
    spec.scheme = "10to5";
    spec.k_fine = 10;
  } else if (arg == "ring:7to3") {
    spec.type = "ring";
    spec.scheme = "7to3";
    spec.k_fine = 7;
  } else {
    throw ConfigError("unknown dataset spec: " + arg);
  }
  return build_dataset(spec);
}

const ConditionState& find_state(const std::vector<ConditionState>& states,
                                 const std::string& name) {
  for (const auto& st : states) {
    if (st.name == name) return st;
  }
  std::string known;
  for (const auto& st : states) known += (known.empty() ? "" : ", ") + st.name;
  throw ConfigError("unknown condition state \"" + name + "\" (known: " + known + ")");
}

std::string fmtd(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CommonTrainArgs {
  std::string config_path;
  std::string out_dir = "run";
  std::optional<std::uint64_t> seed;
};

TrainConfig load_with_seed(const CommonTrainArgs& args) {
  TrainConfig config = load_train_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  return config;
}

int cmd_train(const CommonTrainArgs& args) {
  TrainConfig config = load_with_seed(args);
  RunRecord record = train(config, args.out_dir);
  std::cout << "trained " << variant_name(config.variant) << " for "
            << record.g_steps << " iterations (" << record.d_steps
            << " critic steps) in " << record.wall_seconds << "s\n"
            << "final checkpoint: " << record.checkpoint_path << "\n";
  if (!record.eval_rows.empty()) {
    const auto& last = record.eval_rows.back();
    std::cout << "final dma=" << last.dma_mean << " frechet=" << last.frechet
              << " mean_posterior_kl=" << last.mean_posterior_kl << "\n";
  }
  return kExitOk;
}

int cmd_train_pgan(const CommonTrainArgs& args, const std::string& classifier_path) {
  TrainConfig config = load_with_seed(args);
  Checkpoint source = load_checkpoint(classifier_path);
  RunRecord record =
      train_pgan(config, source.models, source.iteration, args.out_dir);
  std::cout << "trained pGAN for " << record.g_steps << " iterations in "
            << record.wall_seconds << "s\n"
            << "final checkpoint: " << record.checkpoint_path << "\n";
  if (record.pgan_classifier_untrained) {
    std::cout << "warning: source classifier had iteration 0 (untrained)\n";
  }
  if (!record.eval_rows.empty()) {
    std::cout << "final posterior-cloud frechet=" << record.eval_rows.back().frechet
              << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_arg,
             const std::string& out_path, std::uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  OverlapDataset dataset = dataset_from_arg(dataset_arg);
  EvalParams params;
  params.seed = seed;
  const std::string report = run_full_eval(ckpt, dataset, params);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("eval: cannot write " + out_path);
  out << report << "\n";
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_ablate(const CommonTrainArgs& args, const std::vector<std::string>& axes) {
  TrainConfig config = load_with_seed(args);
  auto records = ablation_grid(config, axes, args.out_dir, worker_threads());
  std::cout << "ran " << records.size() << " cells; summary: "
            << (fs::path(args.out_dir) / "ablation_summary.csv").string() << "\n";
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].eval_rows.empty()) continue;
    const auto& last = records[i].eval_rows.back();
    std::cout << "cell " << i << ": dma=" << last.dma_mean
              << " frechet=" << last.frechet << "\n";
  }
  return kExitOk;
}

int cmd_interpolate(const std::string& checkpoint_path, const std::string& dataset_arg,
                    const std::string& from, const std::string& to, int steps,
                    const std::string& out_path, std::uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  OverlapDataset dataset = dataset_from_arg(dataset_arg);
  auto states = enumerate_states(dataset.scheme());
  const ConditionState& a = find_state(states, from);
  const ConditionState& b = find_state(states, to);
  RngHub hub(seed);
  Tensor z = sample_noise(1, ckpt.models.g.z_dim, hub.stream("interpolate/noise"));
  auto trace = interpolate(ckpt.models.g, a, b, steps, z);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("interpolate: cannot write " + out_path);
  out << "step,t,x0,x1,oracle_component\n";
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / (steps - 1);
    out << k << ',' << fmtd(t) << ',' << fmtd(trace[static_cast<size_t>(k)][0]) << ','
        << fmtd(trace[static_cast<size_t>(k)][1]) << ','
        << dataset.oracle_component(trace[static_cast<size_t>(k)]) << '\n';
  }
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_posterior_matrix(const std::string& source, const std::string& checkpoint_path,
                         const std::string& dataset_arg, const std::string& out_path,
                         Index n, std::uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RngHub hub(seed);
  PosteriorMatrix pm;
  if (source == "real") {
    OverlapDataset dataset = dataset_from_arg(dataset_arg);
    BatchClassifier classifier = [&](const Tensor& x) {
      NoGradGuard guard;
      return classify(ckpt.models.dc, x, false, hub.stream("matrix/dropout"));
    };
    pm = posterior_matrix_real(classifier, dataset, n, hub.stream("matrix/data"));
  } else if (source == "pgan") {
    if (!ckpt.models.pgan) {
      throw ConfigError("posterior-matrix: checkpoint has no pGAN networks");
    }
    pm = posterior_matrix_pgan(*ckpt.models.pgan, n, hub.stream("matrix/noise"));
  } else {
    throw ConfigError("posterior-matrix: source must be real or pgan");
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("posterior-matrix: cannot write " + out_path);
  for (int j = 0; j < pm.num_classes; ++j) out << (j ? "," : "") << class_letter(j);
  out << '\n';
  for (int i = 0; i < pm.num_classes; ++i) {
    for (int j = 0; j < pm.num_classes; ++j) out << (j ? "," : "") << fmtd(pm.at(i, j));
    out << '\n';
  }
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Class-overlap GAN testbed: AC-GAN, cGAN-concat, CP-GAN, and pGAN on "
      "mixture-of-Gaussians data"};
  app.require_subcommand(1);

  CommonTrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one model from a config");
  train_cmd->add_option("--config", train_args.config_path, "Config JSON")->required();
  train_cmd->add_option("--seed", train_args.seed, "Override config seed");
  train_cmd->add_option("--out", train_args.out_dir, "Output directory");

  CommonTrainArgs pgan_args;
  std::string pgan_classifier;
  auto* pgan_cmd =
      app.add_subcommand("train-pgan", "Train a posterior GAN on a trained classifier");
  pgan_cmd->add_option("--config", pgan_args.config_path, "Config JSON")->required();
  pgan_cmd->add_option("--classifier", pgan_classifier,
                       "Checkpoint providing the frozen classifier")
      ->required();
  pgan_cmd->add_option("--seed", pgan_args.seed, "Override config seed");
  pgan_cmd->add_option("--out", pgan_args.out_dir, "Output directory");

  std::string eval_ckpt, eval_dataset, eval_out = "metrics.json";
  std::uint64_t eval_seed = 7;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON")->required();
  eval_cmd->add_option("--dataset", eval_dataset,
                       "Dataset spec file or shorthand (toy, ring:10to5, ring:7to3)")
      ->required();
  eval_cmd->add_option("--out", eval_out, "Output metrics JSON");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation RNG seed");

  CommonTrainArgs ablate_args;
  std::vector<std::string> ablate_axes;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run a configuration ablation grid");
  ablate_cmd->add_option("--config", ablate_args.config_path, "Base config JSON")
      ->required();
  ablate_cmd
      ->add_option("--axis", ablate_axes,
                   "Axis name (dropout, k_shared, kl_cp_start, lambda_g, seed); "
                   "repeatable")
      ->required();
  ablate_cmd->add_option("--seed", ablate_args.seed, "Override base seed");
  ablate_cmd->add_option("--out", ablate_args.out_dir, "Output directory");

  std::string interp_ckpt, interp_dataset, interp_from, interp_to,
      interp_out = "trace.csv";
  int interp_steps = 10;
  std::uint64_t interp_seed = 7;
  auto* interp_cmd =
      app.add_subcommand("interpolate", "Generate along a condition interpolation");
  interp_cmd->add_option("--checkpoint", interp_ckpt, "Checkpoint JSON")->required();
  interp_cmd->add_option("--dataset", interp_dataset, "Dataset spec")->required();
  interp_cmd->add_option("--from", interp_from, "Start state, e.g. A")->required();
  interp_cmd->add_option("--to", interp_to, "End state, e.g. B")->required();
  interp_cmd->add_option("--steps", interp_steps, "Interpolation steps");
  interp_cmd->add_option("--out", interp_out, "Output CSV");
  interp_cmd->add_option("--seed", interp_seed, "Noise seed");

  std::string pm_source, pm_ckpt, pm_dataset, pm_out = "matrix.csv";
  Index pm_n = 5000;
  std::uint64_t pm_seed = 7;
  auto* pm_cmd =
      app.add_subcommand("posterior-matrix", "Mean classifier posterior by class");
  pm_cmd->add_option("--source", pm_source, "real | pgan")->required();
  pm_cmd->add_option("--checkpoint", pm_ckpt, "Checkpoint JSON")->required();
  pm_cmd->add_option("--dataset", pm_dataset, "Dataset spec (real source)");
  pm_cmd->add_option("--out", pm_out, "Output CSV");
  pm_cmd->add_option("--n", pm_n, "Samples per class");
  pm_cmd->add_option("--seed", pm_seed, "Sampling seed");

  std::string ds_spec, ds_out = "dataset.csv";
  Index ds_n = 10000;
  std::uint64_t ds_seed = 1;
  auto* ds_cmd = app.add_subcommand("export-dataset", "Sample a dataset to CSV");
  ds_cmd->add_option("--dataset", ds_spec, "Dataset spec")->required();
  ds_cmd->add_option("--n", ds_n, "Sample count");
  ds_cmd->add_option("--seed", ds_seed, "Sampling seed");
  ds_cmd->add_option("--out", ds_out, "Output CSV");

  std::string plots_run_dir;
  auto* plots_cmd = app.add_subcommand("export-plots", "Export plot CSVs for a run");
  plots_cmd->add_option("--run", plots_run_dir, "Run directory")->required();

  std::string manifest_path;
  auto* run_cmd =
      app.add_subcommand("run", "Run a full experiment manifest (idempotent)");
  run_cmd->add_option("--manifest", manifest_path, "Manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (pgan_cmd->parsed()) return cmd_train_pgan(pgan_args, pgan_classifier);
    if (eval_cmd->parsed()) {
      try {
        return cmd_eval(eval_ckpt, eval_dataset, eval_out, eval_seed);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEvalError;
      }
    }
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, ablate_axes);
    if (interp_cmd->parsed()) {
      return cmd_interpolate(interp_ckpt, interp_dataset, interp_from, interp_to,
                             interp_steps, interp_out, interp_seed);
    }
    if (pm_cmd->parsed()) {
      return cmd_posterior_matrix(pm_source, pm_ckpt, pm_dataset, pm_out, pm_n,
                                  pm_seed);
    }
    if (ds_cmd->parsed()) {
      export_dataset_csv(dataset_from_arg(ds_spec), ds_n, ds_seed, ds_out);
      std::cout << "wrote " << ds_out << "\n";
      return kExitOk;
    }
    if (plots_cmd->parsed()) {
      auto files = export_plots(plots_run_dir);
      for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
      return kExitOk;
    }
    if (run_cmd->parsed()) {
      std::string err;
      const int code = run_experiment(manifest_path, &err);
      if (code != kExitOk) std::cerr << "error: " << err << "\n";
      return code;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const NumericError& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}
