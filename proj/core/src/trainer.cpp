#include "overlapgan/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "overlapgan/adam.hpp"
#include "overlapgan/eval.hpp"

namespace ogan {

namespace fs = std::filesystem;

namespace {

struct ParamGroup {
  std::vector<NamedParam> named;
  std::vector<Tensor> tensors;
  std::vector<AdamState> states;
};

ParamGroup make_group(std::vector<NamedParam> named) {
  ParamGroup g;
  g.named = std::move(named);
  for (const auto& p : g.named) g.tensors.push_back(p.tensor);
  g.states.resize(g.named.size());
  return g;
}

void zero_grads(ParamGroup& g) {
  for (auto& t : g.tensors) t.zero_grad();
}

std::uint64_t hash_params(const ParamGroup& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : g.tensors) {
    for (double v : t.values()) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      h ^= bits;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class MetricsWriter {
 public:
  explicit MetricsWriter(const fs::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("trainer: cannot write " + path.string());
    out_ << "iteration,gan_d,gan_g,ac_r,cls_g,gp,composite_d,composite_g,lr,"
            "dma,frechet,mean_posterior_kl\n";
  }

  void row(std::int64_t iter, const LossTerms& t, double lr, const EvalRow* ev) {
    out_ << iter << ',' << fmt(t.gan_d) << ',' << fmt(t.gan_g) << ','
         << fmt(t.ac_r) << ',' << fmt(t.cls_g) << ',' << fmt(t.gp) << ','
         << fmt(t.composite_d) << ',' << fmt(t.composite_g) << ',' << fmt(lr);
    if (ev) {
      out_ << ',' << fmt(ev->dma_mean) << ',' << fmt(ev->frechet) << ','
           << fmt(ev->mean_posterior_kl);
    } else {
      out_ << ",,,";
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

Checkpoint snapshot(const ModelBundle& models,
                    const std::vector<const ParamGroup*>& groups,
                    const RngHub& hub, std::int64_t iteration) {
  Checkpoint ckpt;
  ckpt.models = models;
  for (const auto* g : groups) {
    for (size_t i = 0; i < g->named.size(); ++i) {
      ckpt.adam_state[g->named[i].name] = g->states[i];
    }
  }
  ckpt.rng_stream_positions = hub.positions();
  ckpt.iteration = iteration;
  return ckpt;
}

void require_finite(const Tensor& loss, const char* what, std::int64_t iter) {
  if (std::isfinite(loss.item())) return;
  throw NumericError(std::string(what) + " became non-finite at iteration " +
                     std::to_string(iter));
}

// Shared per-run state for the main GAN loop.
struct GanRun {
  TrainConfig config;
  OverlapDataset dataset;
  RngHub hub;
  ModelBundle models;
  ParamGroup g_params;
  ParamGroup dc_params;
  AdvMode mode;

  explicit GanRun(const TrainConfig& cfg)
      : config(cfg),
        dataset(build_dataset(cfg.dataset)),
        hub(cfg.seed),
        mode(adv_mode_from_name(cfg.gan_mode)) {
    const int c = dataset.num_classes();
    const Index data_dim = 2;
    models.variant = cfg.variant;
    models.g = make_generator(cfg.z_dim, c, cfg.width, data_dim,
                              hub.stream("init/g"));
    const Index dc_in =
        cfg.variant == Variant::kCGanConcat ? data_dim + c : data_dim;
    DropoutSpec drop{cfg.dropout, cfg.dropout_rates};
    models.dc = make_disc_classifier(dc_in, c, cfg.width, cfg.k_shared, drop,
                                     hub.stream("init/dc"));
    g_params = make_group(named_params(models.g));
    dc_params = make_group(named_params(models.dc));
  }

  // Variant condition batch: classifier posterior of a fresh real batch for
  // CP-GAN (eval-mode classifier, held constant), categorical one-hot
  // otherwise.
  Tensor make_condition(Index n, const std::string& data_stream,
                        const std::string& cat_stream) {
    if (config.variant == Variant::kCpGan) {
      NoGradGuard guard;
      LabeledBatch fresh = dataset.sample_batch(n, hub.stream(data_stream));
      return classify(models.dc, fresh.x, /*train_mode=*/false,
                      hub.stream("dropout/dc"));
    }
    return sample_categorical(n, dataset.num_classes(), hub.stream(cat_stream));
  }

  Tensor critic_input(const Tensor& x, const Tensor& cond) {
    if (config.variant != Variant::kCGanConcat) return x;
    const Tensor parts[] = {x, cond};
    return concat(parts, 1);
  }
};

EvalRow run_eval(GanRun& run, std::int64_t iteration, const LossTerms& terms,
                 double lr) {
  NoGradGuard guard;
  const TrainConfig& cfg = run.config;
  EvalRow row;
  row.iteration = iteration;
  row.losses = terms;
  row.lr = lr;

  row.dma_mean = dma(run.models.g, run.dataset, cfg.dma_samples_per_state,
                     run.hub.stream("eval/noise"))
                     .mean;

  const Index n = cfg.eval_samples;
  LabeledBatch real = run.dataset.sample_batch(n, run.hub.stream("eval/data"));
  Tensor cond;
  Tensor target;  // posterior target for mean_posterior_kl
  if (cfg.variant == Variant::kCpGan) {
    LabeledBatch fresh = run.dataset.sample_batch(n, run.hub.stream("eval/cond"));
    cond = classify(run.models.dc, fresh.x, false, run.hub.stream("dropout/dc"));
    target = cond;
  } else {
    cond = sample_categorical(n, run.dataset.num_classes(),
                              run.hub.stream("eval/cond"));
    target = cond;
  }
  Tensor z = sample_noise(n, cfg.z_dim, run.hub.stream("eval/noise"));
  Tensor gen = generate(run.models.g, z, cond);
  row.frechet = frechet_distance(real.x, gen);
  Tensor s_gen = classify(run.models.dc, run.critic_input(gen, cond), false,
                          run.hub.stream("dropout/dc"));
  row.mean_posterior_kl = kl_cp_loss(target, s_gen).item();
  return row;
}

}  // namespace

RunRecord train(const TrainConfig& config, const fs::path& out_dir,
                const TrainOptions& options) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "checkpoints");
  {
    std::ofstream cfg_out(out_dir / "config.json");
    cfg_out << train_config_to_json(config) << "\n";
  }

  GanRun run(config);
  const std::int64_t T = config.total_iters;
  const std::int64_t eval_every = config.effective_eval_interval();
  const std::int64_t ckpt_every = config.effective_checkpoint_interval();
  MetricsWriter metrics(out_dir / "metrics.csv");

  RunRecord record;
  record.config = config;
  record.metrics_path = (out_dir / "metrics.csv").string();

  AdamParams adam_hp{config.alpha0, config.beta1, config.beta2, config.adam_eps};

  for (std::int64_t t = 0; t < T; ++t) {
    const double alpha_t =
        config.lr_decay ? lr_schedule(t, T, config.alpha0) : config.alpha0;
    adam_hp.alpha = alpha_t;
    LossTerms terms;
    try {

    const std::uint64_t g_hash_before =
        options.verify_update_isolation ? hash_params(run.g_params) : 0;

    // D/C steps, each on a fresh real batch.
    for (int j = 0; j < config.n_d; ++j) {
      LabeledBatch real =
          run.dataset.sample_batch(config.batch_size_d, run.hub.stream("data/d"));
      Tensor cond = run.make_condition(config.batch_size_d, "data/cond", "cond/cat");
      Tensor x_fake;
      {
        NoGradGuard guard;
        Tensor z = sample_noise(config.batch_size_d, config.z_dim,
                                run.hub.stream("noise/g"));
        x_fake = generate(run.models.g, z, cond);
      }

      ComposeInputs inputs;
      Tensor d_real;
      if (config.variant == Variant::kCGanConcat) {
        d_real = discriminate(run.models.dc, run.critic_input(real.x, real.y),
                              true, run.hub.stream("dropout/dc"));
      } else {
        auto out = disc_classifier_forward(run.models.dc, real.x, true,
                                           run.hub.stream("dropout/dc"));
        d_real = out.d_score;
        inputs.ac_r = kl_ac_loss_real(softmax_rows(out.c_logits), real.y);
      }
      Tensor d_fake = discriminate(run.models.dc, run.critic_input(x_fake, cond),
                                   true, run.hub.stream("dropout/dc"));
      AdvPair adv = adversarial_loss(d_real, d_fake, run.mode);
      inputs.gan_d = adv.d_part;

      if (config.lambda_gp > 0.0) {
        if (config.variant == Variant::kCGanConcat) {
          CondCriticFn critic = [&](const Tensor& x, const Tensor& c) {
            return discriminate(run.models.dc, run.critic_input(x, c), true,
                                run.hub.stream("dropout/dc"));
          };
          inputs.gp = gradient_penalty(critic, real.x, x_fake, real.y, cond,
                                       run.hub.stream("gp/eps"));
        } else {
          CriticFn critic = [&](const Tensor& x) {
            return discriminate(run.models.dc, x, true,
                                run.hub.stream("dropout/dc"));
          };
          inputs.gp = gradient_penalty(critic, real.x, x_fake,
                                       run.hub.stream("gp/eps"));
        }
      }

      Tensor composite_d =
          compose(config.variant, inputs, config.lambda_r, config.lambda_g,
                  config.lambda_gp)
              .first;
      require_finite(composite_d, "composite_d", t);

      zero_grads(run.dc_params);
      zero_grads(run.g_params);
      backward(composite_d);
      adam_step(run.dc_params.tensors, run.dc_params.states, adam_hp);
      record.d_steps += 1;

      terms.gan_d = adv.d_part.item();
      terms.ac_r = inputs.ac_r.defined() ? inputs.ac_r.item() : 0.0;
      terms.gp = inputs.gp.defined() ? inputs.gp.item() : 0.0;
      terms.composite_d = composite_d.item();
    }

    if (options.verify_update_isolation && hash_params(run.g_params) != g_hash_before) {
      throw std::logic_error("trainer: D/C step modified generator parameters");
    }
    const std::uint64_t dc_hash_before =
        options.verify_update_isolation ? hash_params(run.dc_params) : 0;

    // G step.
    {
      Tensor cond = run.make_condition(config.batch_size_g, "data/cond", "cond/cat");
      Tensor z = sample_noise(config.batch_size_g, config.z_dim,
                              run.hub.stream("noise/g"));
      Tensor x_gen = generate(run.models.g, z, cond);

      ComposeInputs inputs;
      const bool want_cls =
          config.variant != Variant::kCGanConcat && t >= config.kl_cp_start_iter;
      if (want_cls) {
        auto out = disc_classifier_forward(run.models.dc,
                                           run.critic_input(x_gen, cond), true,
                                           run.hub.stream("dropout/dc"));
        inputs.gan_g = adversarial_generator_part(out.d_score, run.mode);
        Tensor s_gen = softmax_rows(out.c_logits);
        inputs.cls_g = config.variant == Variant::kCpGan
                           ? kl_cp_loss(cond, s_gen)
                           : kl_ac_loss_gen(s_gen, cond);
      } else {
        Tensor d_fake = discriminate(run.models.dc, run.critic_input(x_gen, cond),
                                     true, run.hub.stream("dropout/dc"));
        inputs.gan_g = adversarial_generator_part(d_fake, run.mode);
      }

      Tensor composite_g =
          compose(config.variant, inputs, config.lambda_r, config.lambda_g,
                  config.lambda_gp)
              .second;
      require_finite(composite_g, "composite_g", t);

      zero_grads(run.dc_params);
      zero_grads(run.g_params);
      backward(composite_g);
      adam_step(run.g_params.tensors, run.g_params.states, adam_hp);
      record.g_steps += 1;

      terms.gan_g = inputs.gan_g.item();
      terms.cls_g = inputs.cls_g.defined() ? inputs.cls_g.item() : 0.0;
      terms.composite_g = composite_g.item();
    }

    if (options.verify_update_isolation && hash_params(run.dc_params) != dc_hash_before) {
      throw std::logic_error("trainer: G step modified discriminator parameters");
    }

    } catch (const NumericError& e) {
      // Dump the state that produced the failure, then surface it.
      save_checkpoint(out_dir / "checkpoints" / "ckpt_abort.json",
                      snapshot(run.models, {&run.g_params, &run.dc_params},
                               run.hub, t));
      throw NumericError(std::string(e.what()) + " at iteration " +
                         std::to_string(t) + "; diagnostic checkpoint written");
    }

    const bool do_eval = (t + 1) % eval_every == 0 || t + 1 == T;
    if (do_eval) {
      EvalRow row = run_eval(run, t + 1, terms, alpha_t);
      record.eval_rows.push_back(row);
      metrics.row(t, terms, alpha_t, &row);
    } else {
      metrics.row(t, terms, alpha_t, nullptr);
    }
    if ((t + 1) % ckpt_every == 0 && t + 1 != T) {
      char name[48];
      std::snprintf(name, sizeof(name), "ckpt_%08lld.json",
                    static_cast<long long>(t + 1));
      save_checkpoint(out_dir / "checkpoints" / name,
                      snapshot(run.models, {&run.g_params, &run.dc_params},
                               run.hub, t + 1));
    }
  }

  const fs::path final_path = out_dir / "checkpoints" / "ckpt_final.json";
  save_checkpoint(final_path, snapshot(run.models, {&run.g_params, &run.dc_params},
                                       run.hub, T));
  record.checkpoint_path = final_path.string();
  record.models = std::move(run.models);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return record;
}

RunRecord train_pgan(const TrainConfig& config, const ModelBundle& source,
                     std::int64_t source_iteration, const fs::path& out_dir,
                     const TrainOptions& options) {
  (void)options;
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "checkpoints");
  {
    std::ofstream cfg_out(out_dir / "config.json");
    cfg_out << train_config_to_json(config) << "\n";
  }

  OverlapDataset dataset = build_dataset(config.dataset);
  const int c = dataset.num_classes();
  if (source.dc.num_classes != c) {
    throw std::invalid_argument("train_pgan: classifier has " +
                                std::to_string(source.dc.num_classes) +
                                " classes, dataset has " + std::to_string(c));
  }
  RngHub hub(config.seed);
  ModelBundle models = clone(source);
  models.pgan = make_pgan(c, config.width, hub.stream("init/pgan"));
  PGanNets& nets = *models.pgan;
  ParamGroup gp_params = make_group(pgan_generator_params(nets));
  ParamGroup dp_params = make_group(pgan_critic_params(nets));
  const AdvMode mode = AdvMode::kWgan;

  // eval-mode classifier posteriors for a fresh real batch, held constant
  auto posterior_batch = [&](Index n, const std::string& stream) {
    NoGradGuard guard;
    LabeledBatch real = dataset.sample_batch(n, hub.stream(stream));
    Tensor s = classify(source.dc, real.x, false, hub.stream("dropout/dc"));
    return std::make_pair(s, real.y);
  };

  const std::int64_t T = config.total_iters;
  const std::int64_t eval_every = config.effective_eval_interval();
  const std::int64_t ckpt_every = config.effective_checkpoint_interval();
  MetricsWriter metrics(out_dir / "metrics.csv");
  RunRecord record;
  record.config = config;
  record.metrics_path = (out_dir / "metrics.csv").string();
  record.pgan_classifier_untrained = source_iteration == 0;

  AdamParams adam_hp{config.alpha0, config.beta1, config.beta2, config.adam_eps};
  for (std::int64_t t = 0; t < T; ++t) {
    const double alpha_t =
        config.lr_decay ? lr_schedule(t, T, config.alpha0) : config.alpha0;
    adam_hp.alpha = alpha_t;
    LossTerms terms;
    try {

    for (int j = 0; j < config.n_d; ++j) {
      auto [s_real, y_real] = posterior_batch(config.batch_size_d, "pgan/data");
      Tensor s_fake, y_fake;
      {
        NoGradGuard guard;
        PganSample sample = pgan_sample(nets, config.batch_size_d,
                                        hub.stream("pgan/noise"),
                                        hub.stream("pgan/cond"));
        s_fake = sample.s;
        y_fake = sample.y;
      }
      Tensor d_real = pgan_critic(nets, s_real, y_real);
      Tensor d_fake = pgan_critic(nets, s_fake, y_fake);
      AdvPair adv = pgan_losses(d_real, d_fake);
      Tensor composite_d = adv.d_part;
      if (config.lambda_gp > 0.0) {
        CondCriticFn critic = [&](const Tensor& s, const Tensor& y) {
          return pgan_critic(nets, s, y);
        };
        Tensor gp = gradient_penalty(critic, s_real, s_fake, y_real, y_fake,
                                     hub.stream("gp/eps"));
        composite_d = add(composite_d, affine(gp, config.lambda_gp, 0.0));
        terms.gp = gp.item();
      }
      require_finite(composite_d, "pgan composite_d", t);
      zero_grads(dp_params);
      zero_grads(gp_params);
      backward(composite_d);
      adam_step(dp_params.tensors, dp_params.states, adam_hp);
      record.d_steps += 1;
      terms.gan_d = adv.d_part.item();
      terms.composite_d = composite_d.item();
    }

    {
      Tensor z = sample_noise(config.batch_size_g, c, hub.stream("pgan/noise"));
      Tensor y = sample_categorical(config.batch_size_g, c, hub.stream("pgan/cond"));
      Tensor s_gen = pgan_generate(nets, z, y);
      Tensor d_fake = pgan_critic(nets, s_gen, y);
      Tensor composite_g = adversarial_generator_part(d_fake, mode);
      require_finite(composite_g, "pgan composite_g", t);
      zero_grads(dp_params);
      zero_grads(gp_params);
      backward(composite_g);
      adam_step(gp_params.tensors, gp_params.states, adam_hp);
      record.g_steps += 1;
      terms.gan_g = composite_g.item();
      terms.composite_g = composite_g.item();
    }

    } catch (const NumericError& e) {
      save_checkpoint(out_dir / "checkpoints" / "ckpt_abort.json",
                      snapshot(models, {&gp_params, &dp_params}, hub, t));
      throw NumericError(std::string(e.what()) + " at iteration " +
                         std::to_string(t) + "; diagnostic checkpoint written");
    }

    const bool do_eval = (t + 1) % eval_every == 0 || t + 1 == T;
    if (do_eval) {
      NoGradGuard guard;
      EvalRow row;
      row.iteration = t + 1;
      row.losses = terms;
      row.lr = alpha_t;
      // Frechet between real-posterior and generated-posterior clouds.
      auto [s_real, y_real] = posterior_batch(config.eval_samples, "eval/data");
      (void)y_real;
      PganSample sample = pgan_sample(nets, config.eval_samples,
                                      hub.stream("eval/noise"),
                                      hub.stream("eval/cond"));
      row.frechet = frechet_distance(s_real, sample.s);
      row.dma_mean = 0.0;
      row.mean_posterior_kl = 0.0;
      record.eval_rows.push_back(row);
      metrics.row(t, terms, alpha_t, &row);
    } else {
      metrics.row(t, terms, alpha_t, nullptr);
    }
    if ((t + 1) % ckpt_every == 0 && t + 1 != T) {
      char name[48];
      std::snprintf(name, sizeof(name), "ckpt_%08lld.json",
                    static_cast<long long>(t + 1));
      save_checkpoint(out_dir / "checkpoints" / name,
                      snapshot(models, {&gp_params, &dp_params}, hub, t + 1));
    }
  }

  const fs::path final_path = out_dir / "checkpoints" / "ckpt_final.json";
  save_checkpoint(final_path, snapshot(models, {&gp_params, &dp_params}, hub, T));
  record.checkpoint_path = final_path.string();
  record.models = std::move(models);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return record;
}

namespace {

struct AxisDef {
  std::string name;
  std::vector<std::string> values;
};

void apply_axis(TrainConfig& cfg, const std::string& axis, const std::string& value) {
  if (axis == "dropout") {
    cfg.dropout = value == "on";
  } else if (axis == "k_shared") {
    cfg.k_shared = std::stoi(value);
  } else if (axis == "kl_cp_start") {
    cfg.kl_cp_start_iter = std::stoll(value);
  } else if (axis == "lambda_g") {
    cfg.lambda_g = std::stod(value);
  } else if (axis == "seed") {
    cfg.seed = cfg.seed + static_cast<std::uint64_t>(std::stoull(value));
  } else {
    throw std::invalid_argument("ablation: unknown axis " + axis);
  }
}

}  // namespace

std::vector<std::string> ablation_axis_values(const std::string& axis) {
  if (axis == "dropout") return {"on", "off"};
  if (axis == "k_shared") return {"0", "1", "2", "3"};
  if (axis == "kl_cp_start") return {"0", "20000", "40000"};
  if (axis == "lambda_g") return {"0.1", "0.2", "0.4", "1"};
  if (axis == "seed") return {"0", "1", "2"};
  throw std::invalid_argument("ablation: unknown axis " + axis);
}

std::vector<RunRecord> ablation_grid(const TrainConfig& base,
                                     const std::vector<std::string>& axes,
                                     const fs::path& out_dir, int max_threads) {
  std::vector<AxisDef> defs;
  for (const auto& a : axes) defs.push_back({a, ablation_axis_values(a)});

  // Row-major Cartesian product of the axis values.
  std::vector<std::vector<std::pair<std::string, std::string>>> cells;
  std::vector<size_t> idx(defs.size(), 0);
  while (true) {
    std::vector<std::pair<std::string, std::string>> cell;
    for (size_t i = 0; i < defs.size(); ++i) {
      cell.emplace_back(defs[i].name, defs[i].values[idx[i]]);
    }
    cells.push_back(std::move(cell));
    size_t k = defs.size();
    while (k > 0) {
      --k;
      if (++idx[k] < defs[k].values.size()) break;
      idx[k] = 0;
      if (k == 0) {
        k = SIZE_MAX;
        break;
      }
    }
    if (defs.empty() || k == SIZE_MAX) break;
  }

  fs::create_directories(out_dir);
  std::vector<RunRecord> records(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<size_t> next{0};
  const int workers = std::max(
      1, std::min<int>(max_threads, static_cast<int>(cells.size())));
  auto work = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        TrainConfig cfg = base;
        std::string cell_name = "cell" + std::to_string(i);
        for (const auto& [axis, value] : cells[i]) {
          apply_axis(cfg, axis, value);
          cell_name += "_" + axis + "=" + value;
        }
        records[i] = train(cfg, out_dir / cell_name);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ofstream summary(out_dir / "ablation_summary.csv");
  summary << "cell";
  for (const auto& d : defs) summary << ',' << d.name;
  summary << ",dma_mean,frechet,composite_d,composite_g\n";
  for (size_t i = 0; i < cells.size(); ++i) {
    summary << i;
    for (const auto& [axis, value] : cells[i]) {
      (void)axis;
      summary << ',' << value;
    }
    const auto& rows = records[i].eval_rows;
    if (rows.empty()) {
      summary << ",,,,\n";
    } else {
      const EvalRow& last = rows.back();
      summary << ',' << fmt(last.dma_mean) << ',' << fmt(last.frechet) << ','
              << fmt(last.losses.composite_d) << ',' << fmt(last.losses.composite_g)
              << '\n';
    }
  }
  return records;
}

}  // namespace ogan
