#include "overlapgan/experiment.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "overlapgan/eval.hpp"

namespace ogan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(std::string(what) + ": cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string fmtd(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// 128-bit FNV-1a folded to hex; enough to detect config/code drift between
// runs, not a cryptographic commitment.
std::string sha_like_hash(const std::string& payload) {
  std::uint64_t h1 = 0xcbf29ce484222325ULL;
  std::uint64_t h2 = 0x84222325cbf29ce4ULL;
  for (unsigned char c : payload) {
    h1 = (h1 ^ c) * 0x100000001b3ULL;
    h2 = (h2 ^ (c + 0x9e)) * 0x100000001b3ULL;
  }
  char buf[36];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(h1),
                static_cast<unsigned long long>(h2));
  return buf;
}

ExperimentManifest load_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path, "manifest"));
  } catch (const json::exception& e) {
    throw ConfigError("manifest: invalid JSON in " + path.string() + ": " + e.what());
  }
  ExperimentManifest m;
  auto require = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) {
      throw ConfigError(std::string("manifest: missing key \"") + key + "\"");
    }
    return *it;
  };
  m.name = require("name").get<std::string>();
  const fs::path base = path.parent_path();
  m.config_path = base / require("config").get<std::string>();
  m.seeds = require("seeds").get<std::vector<std::uint64_t>>();
  m.out_dir = base / require("out_dir").get<std::string>();
  m.with_pgan = j.value("train_pgan", false);
  if (j.contains("pgan_config")) {
    m.pgan_config_path = base / j["pgan_config"].get<std::string>();
  }
  if (m.seeds.empty()) throw ConfigError("manifest: seeds list is empty");
  return m;
}

std::string run_full_eval(const Checkpoint& ckpt, const OverlapDataset& dataset,
                          const EvalParams& params) {
  RngHub hub(params.seed);
  NoGradGuard guard;
  const ModelBundle& models = ckpt.models;
  auto states = enumerate_states(dataset.scheme());

  json out;
  DmaResult d = dma(models.g, dataset, params.dma_samples_per_state,
                    hub.stream("eval/noise"));
  json per_state = json::object();
  for (size_t i = 0; i < states.size(); ++i) {
    per_state[states[i].name] = d.per_state[i];
  }
  out["dma_per_state"] = std::move(per_state);
  out["dma_mean"] = d.mean;

  // Global Frechet on raw points, generated under the variant's own
  // conditioning source.
  LabeledBatch real = dataset.sample_batch(params.frechet_samples,
                                           hub.stream("eval/data"));
  Tensor cond;
  if (models.variant == Variant::kCpGan) {
    LabeledBatch fresh = dataset.sample_batch(params.frechet_samples,
                                              hub.stream("eval/cond"));
    cond = classify(models.dc, fresh.x, false, hub.stream("eval/dropout"));
  } else {
    cond = sample_categorical(params.frechet_samples, dataset.num_classes(),
                              hub.stream("eval/cond"));
  }
  Tensor z = sample_noise(params.frechet_samples, models.g.z_dim,
                          hub.stream("eval/noise"));
  Tensor gen = generate(models.g, z, cond);
  out["frechet_global"] = frechet_distance(real.x, gen);

  // Per-state Frechet against the expected component's own samples
  // (artifact-specific extension; the reference metric is the global one).
  json per_state_frechet = json::object();
  for (const auto& st : states) {
    Tensor zs = sample_noise(2000, models.g.z_dim, hub.stream("eval/noise"));
    Tensor gs = generate(models.g, zs, condition_batch(st, 2000));
    Tensor ref = dataset.sample_component(st.expected_component, 2000,
                                          hub.stream("eval/component"));
    per_state_frechet[st.name] = frechet_distance(ref, gs);
  }
  out["frechet_per_state_extension"] = std::move(per_state_frechet);

  BatchClassifier classifier = [&](const Tensor& x) {
    return classify(models.dc, x, false, hub.stream("eval/dropout"));
  };
  PosteriorMatrix pm = posterior_matrix_real(classifier, dataset,
                                             params.matrix_samples_per_class,
                                             hub.stream("eval/data"));
  json matrix = json::array();
  for (int i = 0; i < pm.num_classes; ++i) {
    json row = json::array();
    for (int j = 0; j < pm.num_classes; ++j) row.push_back(pm.at(i, j));
    matrix.push_back(std::move(row));
  }
  out["posterior_matrix"] = std::move(matrix);

  EntropyProfile prof = posterior_entropy_profile(gen, dataset);
  out["entropy_profile"] = {{"mean", prof.mean}, {"q10", prof.q10},
                            {"q25", prof.q25},  {"q50", prof.q50},
                            {"q75", prof.q75},  {"q90", prof.q90},
                            {"n", prof.n}};

  EntropyProfile real_prof = posterior_entropy_profile(real.x, dataset);
  out["entropy_profile_real_reference"] = {
      {"mean", real_prof.mean}, {"q10", real_prof.q10}, {"q25", real_prof.q25},
      {"q50", real_prof.q50},   {"q75", real_prof.q75}, {"q90", real_prof.q90},
      {"n", real_prof.n}};
  return out.dump(2);
}

void export_dataset_csv(const OverlapDataset& dataset, Index n, std::uint64_t seed,
                        const fs::path& out_path) {
  RngHub hub(seed);
  LabeledBatch batch = dataset.sample_batch(n, hub.stream("export/data"));
  if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("export-dataset: cannot write " + out_path.string());
  out << "x0,x1,coarse_label,fine_component\n";
  auto xv = batch.x.values();
  for (Index i = 0; i < n; ++i) {
    out << fmtd(xv[static_cast<size_t>(2 * i)]) << ','
        << fmtd(xv[static_cast<size_t>(2 * i + 1)]) << ','
        << class_letter(batch.labels[static_cast<size_t>(i)]) << ','
        << batch.fine[static_cast<size_t>(i)] << '\n';
  }
}

std::vector<fs::path> export_plots(const fs::path& run_dir) {
  const fs::path config_path = run_dir / "config.json";
  const fs::path ckpt_path = run_dir / "checkpoints" / "ckpt_final.json";
  const fs::path metrics_path = run_dir / "metrics.csv";
  std::vector<std::string> missing;
  for (const auto& p : {config_path, ckpt_path, metrics_path}) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string msg = "export-plots: run is incomplete; missing:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }

  TrainConfig config = load_train_config(config_path);
  OverlapDataset dataset = build_dataset(config.dataset);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  auto states = enumerate_states(dataset.scheme());
  RngHub hub(config.seed);
  NoGradGuard guard;

  const fs::path exports = run_dir / "exports";
  fs::create_directories(exports);
  std::vector<fs::path> written;

  // Real vs generated scatter per condition state.
  {
    const Index n = 500;
    std::ofstream out(exports / "scatter.csv");
    out << "state,kind,x0,x1\n";
    for (const auto& st : states) {
      // Real rows are drawn from the state's expected component.
      Tensor real = dataset.sample_component(st.expected_component, n,
                                             hub.stream("export/component"));
      auto rv = real.values();
      for (Index i = 0; i < n; ++i) {
        out << st.name << ",real," << fmtd(rv[static_cast<size_t>(2 * i)]) << ','
            << fmtd(rv[static_cast<size_t>(2 * i + 1)]) << '\n';
      }
      Tensor z = sample_noise(n, ckpt.models.g.z_dim, hub.stream("export/noise"));
      Tensor gen = generate(ckpt.models.g, z, condition_batch(st, n));
      auto gv = gen.values();
      for (Index i = 0; i < n; ++i) {
        out << st.name << ",generated," << fmtd(gv[static_cast<size_t>(2 * i)]) << ','
            << fmtd(gv[static_cast<size_t>(2 * i + 1)]) << '\n';
      }
    }
    written.push_back(exports / "scatter.csv");
  }

  // Mean posterior matrix of the trained classifier on real data.
  {
    BatchClassifier classifier = [&](const Tensor& x) {
      return classify(ckpt.models.dc, x, false, hub.stream("export/dropout"));
    };
    PosteriorMatrix pm = posterior_matrix_real(classifier, dataset, 2000,
                                               hub.stream("export/data"));
    std::ofstream out(exports / "posterior_matrix.csv");
    for (int j = 0; j < pm.num_classes; ++j) {
      out << (j ? "," : "") << class_letter(j);
    }
    out << '\n';
    for (int i = 0; i < pm.num_classes; ++i) {
      for (int j = 0; j < pm.num_classes; ++j) {
        out << (j ? "," : "") << fmtd(pm.at(i, j));
      }
      out << '\n';
    }
    written.push_back(exports / "posterior_matrix.csv");
  }

  // Condition interpolation between the first two class-distinct states.
  {
    std::vector<const ConditionState*> distinct;
    for (const auto& st : states) {
      if (st.classes.size() == 1) distinct.push_back(&st);
    }
    std::ofstream out(exports / "interpolation.csv");
    out << "step,t,x0,x1,oracle_component\n";
    if (distinct.size() >= 2) {
      Tensor z = sample_noise(1, ckpt.models.g.z_dim, hub.stream("export/noise"));
      const int steps = 10;
      auto trace = interpolate(ckpt.models.g, *distinct[0], *distinct[1], steps, z);
      for (int k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / (steps - 1);
        out << k << ',' << fmtd(t) << ',' << fmtd(trace[static_cast<size_t>(k)][0])
            << ',' << fmtd(trace[static_cast<size_t>(k)][1]) << ','
            << dataset.oracle_component(trace[static_cast<size_t>(k)]) << '\n';
      }
    }
    written.push_back(exports / "interpolation.csv");
  }

  // Loss curves distilled from the metrics log.
  {
    std::ifstream in(metrics_path);
    std::ofstream out(exports / "loss_curve.csv");
    std::string line;
    std::getline(in, line);
    out << "iteration,gan_d,gan_g,ac_r,cls_g,gp,composite_d,composite_g,lr\n";
    while (std::getline(in, line)) {
      size_t pos = 0;
      // keep the first 9 of 12 columns
      int commas = 0;
      for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == ',') {
          if (++commas == 9) {
            pos = i;
            break;
          }
        }
      }
      out << (pos ? line.substr(0, pos) : line) << '\n';
    }
    written.push_back(exports / "loss_curve.csv");
  }

  return written;
}

namespace {

struct StageIndex {
  json stages = json::object();
  fs::path index_path;

  void load(const fs::path& path) {
    index_path = path;
    if (fs::exists(path)) {
      try {
        json j = json::parse(read_file(path, "manifest index"));
        if (j.contains("stages")) stages = j["stages"];
      } catch (...) {
        stages = json::object();  // rebuild a corrupt index from scratch
      }
    }
  }

  bool stage_done(const std::string& seed_key, const std::string& stage,
                  const std::string& hash,
                  const std::vector<fs::path>& artifacts) const {
    if (!stages.contains(seed_key) || !stages[seed_key].contains(stage)) return false;
    const json& st = stages[seed_key][stage];
    if (st.value("hash", "") != hash) return false;
    for (const auto& a : artifacts) {
      if (!fs::exists(a)) return false;
    }
    return true;
  }

  void record(const ExperimentManifest& m, const std::string& seed_key,
              const std::string& stage, const std::string& hash,
              const std::vector<fs::path>& artifacts) {
    json entry;
    entry["hash"] = hash;
    json arts = json::array();
    for (const auto& a : artifacts) arts.push_back(a.string());
    entry["artifacts"] = std::move(arts);
    stages[seed_key][stage] = std::move(entry);
    json out;
    out["name"] = m.name;
    out["config"] = m.config_path.string();
    out["seeds"] = m.seeds;
    out["version"] = kVersionString;
    out["stages"] = stages;
    write_file_atomic(index_path, out.dump(2) + "\n");
  }
};

}  // namespace

int run_experiment(const fs::path& manifest_path, std::string* error_message) {
  auto fail = [&](int code, const std::string& msg) {
    if (error_message) *error_message = msg;
    else std::cerr << msg << "\n";
    return code;
  };
  ExperimentManifest m;
  TrainConfig base_config;
  try {
    m = load_manifest(manifest_path);
    base_config = load_train_config(m.config_path);
  } catch (const std::exception& e) {
    return fail(kExitConfigError, e.what());
  }

  fs::create_directories(m.out_dir);
  StageIndex index;
  index.load(m.out_dir / "manifest.json");
  const std::string config_json = train_config_to_json(base_config);

  for (std::uint64_t seed : m.seeds) {
    const std::string seed_key = "seed_" + std::to_string(seed);
    const fs::path seed_dir = m.out_dir / seed_key;
    TrainConfig config = base_config;
    config.seed = seed;

    // --- train ---
    const fs::path train_dir = seed_dir / "train";
    const fs::path final_ckpt = train_dir / "checkpoints" / "ckpt_final.json";
    const std::string train_hash =
        sha_like_hash(config_json + "|seed=" + std::to_string(seed) + "|" +
                      kVersionString);
    std::int64_t trained_iteration = config.total_iters;
    if (!index.stage_done(seed_key, "train", train_hash,
                          {final_ckpt, train_dir / "metrics.csv"})) {
      try {
        train(config, train_dir);
      } catch (const NumericError& e) {
        return fail(kExitRuntimeError, std::string("train aborted: ") + e.what());
      } catch (const std::exception& e) {
        return fail(kExitRuntimeError, std::string("train failed: ") + e.what());
      }
      index.record(m, seed_key, "train", train_hash,
                   {final_ckpt, train_dir / "metrics.csv"});
    }

    // --- pgan ---
    std::string pgan_hash;
    fs::path pgan_ckpt;
    if (m.with_pgan) {
      TrainConfig pgan_config = config;
      if (!m.pgan_config_path.empty()) {
        try {
          pgan_config = load_train_config(m.pgan_config_path);
          pgan_config.seed = seed;
          pgan_config.dataset = config.dataset;
        } catch (const std::exception& e) {
          return fail(kExitConfigError, e.what());
        }
      }
      const fs::path pgan_dir = seed_dir / "pgan";
      pgan_ckpt = pgan_dir / "checkpoints" / "ckpt_final.json";
      pgan_hash = sha_like_hash(train_config_to_json(pgan_config) + "|" +
                                train_hash + "|" + kVersionString);
      if (!index.stage_done(seed_key, "pgan", pgan_hash, {pgan_ckpt})) {
        try {
          Checkpoint source = load_checkpoint(final_ckpt);
          train_pgan(pgan_config, source.models, source.iteration, pgan_dir);
        } catch (const NumericError& e) {
          return fail(kExitRuntimeError, std::string("train-pgan aborted: ") + e.what());
        } catch (const std::exception& e) {
          return fail(kExitRuntimeError, std::string("train-pgan failed: ") + e.what());
        }
        index.record(m, seed_key, "pgan", pgan_hash, {pgan_ckpt});
      }
      trained_iteration = pgan_config.total_iters;
    }
    (void)trained_iteration;

    // --- eval ---
    const fs::path eval_path = seed_dir / "eval.json";
    const std::string eval_hash =
        sha_like_hash(train_hash + "|" + pgan_hash + "|eval|" + kVersionString);
    if (!index.stage_done(seed_key, "eval", eval_hash, {eval_path})) {
      try {
        Checkpoint ckpt = load_checkpoint(m.with_pgan && !pgan_ckpt.empty()
                                              ? pgan_ckpt
                                              : final_ckpt);
        OverlapDataset dataset = build_dataset(config.dataset);
        EvalParams params;
        params.seed = seed;
        write_file_atomic(eval_path, run_full_eval(ckpt, dataset, params) + "\n");
      } catch (const std::exception& e) {
        return fail(kExitEvalError, std::string("eval failed: ") + e.what());
      }
      index.record(m, seed_key, "eval", eval_hash, {eval_path});
    }

    // --- export ---
    const std::string export_hash =
        sha_like_hash(eval_hash + "|export|" + kVersionString);
    const fs::path exports_dir = train_dir / "exports";
    if (!index.stage_done(seed_key, "export", export_hash,
                          {exports_dir / "scatter.csv"})) {
      try {
        auto files = export_plots(train_dir);
        index.record(m, seed_key, "export", export_hash, files);
      } catch (const std::exception& e) {
        return fail(kExitEvalError, std::string("export failed: ") + e.what());
      }
    }
  }
  return kExitOk;
}

}  // namespace ogan
