#include "overlapgan/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace ogan {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kAcGan: return "ac-gan";
    case Variant::kCGanConcat: return "cgan-concat";
    case Variant::kCpGan: return "cp-gan";
  }
  throw std::logic_error("unreachable variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "ac-gan") return Variant::kAcGan;
  if (name == "cgan-concat") return Variant::kCGanConcat;
  if (name == "cp-gan") return Variant::kCpGan;
  throw std::invalid_argument("unknown variant: " + name +
                              " (expected ac-gan, cgan-concat, or cp-gan)");
}

Linear make_linear(Index in, Index out, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(static_cast<size_t>(in * out));
  for (double& v : w) v = rng.uniform_range(-bound, bound);
  Linear l;
  l.w = Tensor::from({in, out}, std::move(w), /*requires_grad=*/true);
  l.b = Tensor::zeros({1, out}, /*requires_grad=*/true);
  return l;
}

Tensor linear(const Linear& l, const Tensor& x) { return add(matmul(x, l.w), l.b); }

namespace {

void require_simplex_rows(const Tensor& t, const char* what) {
  const Index n = t.rows(), c = t.cols();
  auto v = t.values();
  for (Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Index j = 0; j < c; ++j) {
      const double e = v[static_cast<size_t>(i * c + j)];
      if (e < -1e-6) {
        throw std::invalid_argument(std::string(what) + ": negative entry " +
                                    std::to_string(e) + " in row " + std::to_string(i));
      }
      sum += e;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
    }
  }
}

Tensor mlp_concat_input(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat(parts, 1);
}

}  // namespace

GeneratorNet make_generator(Index z_dim, Index cond_dim, Index width,
                            Index out_dim, RngStream& rng) {
  GeneratorNet net;
  net.z_dim = z_dim;
  net.cond_dim = cond_dim;
  net.width = width;
  net.out_dim = out_dim;
  Index in = z_dim + cond_dim;
  for (int i = 0; i < 3; ++i) {
    net.hidden.push_back(make_linear(in, width, rng));
    in = width;
  }
  net.out = make_linear(in, out_dim, rng);
  return net;
}

Tensor generate(const GeneratorNet& net, const Tensor& z, const Tensor& cond) {
  if (z.rows() != cond.rows()) {
    throw ShapeError("generate: z rows " + std::to_string(z.rows()) +
                     " != cond rows " + std::to_string(cond.rows()));
  }
  if (z.cols() != net.z_dim || cond.cols() != net.cond_dim) {
    throw ShapeError("generate: input dims " + shape_str(z.shape()) + " / " +
                     shape_str(cond.shape()) + " do not match net (" +
                     std::to_string(net.z_dim) + ", " + std::to_string(net.cond_dim) + ")");
  }
  require_simplex_rows(cond, "generate: cond");
  Tensor h = mlp_concat_input(z, cond);
  for (const auto& l : net.hidden) h = relu(linear(l, h));
  return linear(net.out, h);
}

DiscClassifierNet make_disc_classifier(Index in_dim, int num_classes,
                                       Index width, int k_shared,
                                       const DropoutSpec& dropout,
                                       RngStream& rng) {
  if (k_shared < 0 || k_shared > 3) {
    throw std::invalid_argument("k_shared must be in 0..3, got " +
                                std::to_string(k_shared));
  }
  DiscClassifierNet net;
  net.in_dim = in_dim;
  net.num_classes = num_classes;
  net.width = width;
  net.k_shared = k_shared;
  net.dropout = dropout;
  Index in = in_dim;
  for (int i = 0; i < k_shared; ++i) {
    net.shared.push_back(make_linear(in, width, rng));
    in = width;
  }
  Index tail_in = in;
  for (int i = k_shared; i < 3; ++i) {
    net.d_tail.push_back(make_linear(tail_in, width, rng));
    tail_in = width;
  }
  tail_in = in;
  for (int i = k_shared; i < 3; ++i) {
    net.c_tail.push_back(make_linear(tail_in, width, rng));
    tail_in = width;
  }
  net.d_head = make_linear(tail_in, 1, rng);
  net.c_head = make_linear(tail_in, num_classes, rng);
  return net;
}

namespace {

Tensor hidden_layer(const Linear& l, const Tensor& x, double rate, bool enabled,
                    bool train_mode, RngStream& rng) {
  Tensor h = relu(linear(l, x));
  if (enabled) h = dropout(h, rate, train_mode, rng);
  return h;
}

}  // namespace

DiscClassifierOut disc_classifier_forward(const DiscClassifierNet& net,
                                          const Tensor& x, bool train_mode,
                                          RngStream& rng) {
  if (x.cols() != net.in_dim) {
    throw ShapeError("disc_classifier: input " + shape_str(x.shape()) +
                     " does not match in_dim " + std::to_string(net.in_dim));
  }
  const auto& rates = net.dropout.rates;
  Tensor h = x;
  int layer = 0;
  for (const auto& l : net.shared) {
    h = hidden_layer(l, h, rates[static_cast<size_t>(layer)], net.dropout.enabled,
                     train_mode, rng);
    ++layer;
  }
  Tensor hd = h, hc = h;
  int dl = layer;
  for (const auto& l : net.d_tail) {
    hd = hidden_layer(l, hd, rates[static_cast<size_t>(dl)], net.dropout.enabled,
                      train_mode, rng);
    ++dl;
  }
  int cl = layer;
  for (const auto& l : net.c_tail) {
    hc = hidden_layer(l, hc, rates[static_cast<size_t>(cl)], net.dropout.enabled,
                      train_mode, rng);
    ++cl;
  }
  return {linear(net.d_head, hd), linear(net.c_head, hc)};
}

Tensor discriminate(const DiscClassifierNet& net, const Tensor& x,
                    bool train_mode, RngStream& rng) {
  if (x.cols() != net.in_dim) {
    throw ShapeError("discriminate: input " + shape_str(x.shape()) +
                     " does not match in_dim " + std::to_string(net.in_dim));
  }
  const auto& rates = net.dropout.rates;
  Tensor h = x;
  int layer = 0;
  for (const auto& l : net.shared) {
    h = hidden_layer(l, h, rates[static_cast<size_t>(layer)], net.dropout.enabled,
                     train_mode, rng);
    ++layer;
  }
  for (const auto& l : net.d_tail) {
    h = hidden_layer(l, h, rates[static_cast<size_t>(layer)], net.dropout.enabled,
                     train_mode, rng);
    ++layer;
  }
  return linear(net.d_head, h);
}

Tensor classify_logits(const DiscClassifierNet& net, const Tensor& x,
                       bool train_mode, RngStream& rng) {
  if (x.cols() != net.in_dim) {
    throw ShapeError("classify: input " + shape_str(x.shape()) +
                     " does not match in_dim " + std::to_string(net.in_dim));
  }
  const auto& rates = net.dropout.rates;
  Tensor h = x;
  int layer = 0;
  for (const auto& l : net.shared) {
    h = hidden_layer(l, h, rates[static_cast<size_t>(layer)], net.dropout.enabled,
                     train_mode, rng);
    ++layer;
  }
  for (const auto& l : net.c_tail) {
    h = hidden_layer(l, h, rates[static_cast<size_t>(layer)], net.dropout.enabled,
                     train_mode, rng);
    ++layer;
  }
  return linear(net.c_head, h);
}

Tensor classify(const DiscClassifierNet& net, const Tensor& x, bool train_mode,
                RngStream& rng) {
  return softmax_rows(classify_logits(net, x, train_mode, rng));
}

PGanNets make_pgan(int num_classes, Index width, RngStream& rng) {
  PGanNets nets;
  nets.num_classes = num_classes;
  nets.width = width;
  Index in = 2 * static_cast<Index>(num_classes);  // [z_p ; y_p]
  for (int i = 0; i < 3; ++i) {
    nets.g_hidden.push_back(make_linear(in, width, rng));
    in = width;
  }
  nets.g_out = make_linear(in, num_classes, rng);
  in = num_classes;
  for (int i = 0; i < 3; ++i) {
    nets.d_hidden.push_back(make_linear(in, width, rng));
    nets.d_proj.push_back(make_linear(num_classes, width, rng));
    in = width;
  }
  nets.d_head = make_linear(in, 1, rng);
  return nets;
}

Tensor pgan_generate(const PGanNets& nets, const Tensor& z, const Tensor& y) {
  if (z.cols() != nets.num_classes || y.cols() != nets.num_classes ||
      z.rows() != y.rows()) {
    throw ShapeError("pgan_generate: z " + shape_str(z.shape()) + " / y " +
                     shape_str(y.shape()) + " do not match c = " +
                     std::to_string(nets.num_classes));
  }
  Tensor h = mlp_concat_input(z, y);
  for (const auto& l : nets.g_hidden) h = relu(linear(l, h));
  return softmax_rows(linear(nets.g_out, h));
}

Tensor pgan_critic(const PGanNets& nets, const Tensor& s, const Tensor& y) {
  if (s.cols() != nets.num_classes || y.cols() != nets.num_classes ||
      s.rows() != y.rows()) {
    throw ShapeError("pgan_critic: s " + shape_str(s.shape()) + " / y " +
                     shape_str(y.shape()) + " do not match c = " +
                     std::to_string(nets.num_classes));
  }
  Tensor h = s;
  for (size_t i = 0; i < nets.d_hidden.size(); ++i) {
    h = add(relu(linear(nets.d_hidden[i], h)), linear(nets.d_proj[i], y));
  }
  return linear(nets.d_head, h);
}

PganSample pgan_sample(const PGanNets& nets, Index n, RngStream& z_rng,
                       RngStream& y_rng) {
  std::vector<double> z(static_cast<size_t>(n * nets.num_classes));
  for (double& v : z) v = z_rng.normal();
  Tensor zt = Tensor::from({n, nets.num_classes}, std::move(z));
  std::vector<double> y(static_cast<size_t>(n * nets.num_classes), 0.0);
  for (Index i = 0; i < n; ++i) {
    const auto label = y_rng.below(static_cast<std::uint64_t>(nets.num_classes));
    y[static_cast<size_t>(i * nets.num_classes + static_cast<Index>(label))] = 1.0;
  }
  Tensor yt = Tensor::from({n, nets.num_classes}, std::move(y));
  return {pgan_generate(nets, zt, yt), yt};
}

namespace {

void push_linear(std::vector<NamedParam>& out, const std::string& name,
                 const Linear& l) {
  out.push_back({name + ".w", l.w});
  out.push_back({name + ".b", l.b});
}

}  // namespace

std::vector<NamedParam> named_params(const GeneratorNet& net) {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < net.hidden.size(); ++i)
    push_linear(out, "g.hidden" + std::to_string(i), net.hidden[i]);
  push_linear(out, "g.out", net.out);
  return out;
}

std::vector<NamedParam> named_params(const DiscClassifierNet& net) {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < net.shared.size(); ++i)
    push_linear(out, "dc.shared" + std::to_string(i), net.shared[i]);
  for (size_t i = 0; i < net.d_tail.size(); ++i)
    push_linear(out, "dc.d_tail" + std::to_string(i), net.d_tail[i]);
  for (size_t i = 0; i < net.c_tail.size(); ++i)
    push_linear(out, "dc.c_tail" + std::to_string(i), net.c_tail[i]);
  push_linear(out, "dc.d_head", net.d_head);
  push_linear(out, "dc.c_head", net.c_head);
  return out;
}

std::vector<NamedParam> pgan_generator_params(const PGanNets& nets) {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < nets.g_hidden.size(); ++i)
    push_linear(out, "pgan.g_hidden" + std::to_string(i), nets.g_hidden[i]);
  push_linear(out, "pgan.g_out", nets.g_out);
  return out;
}

std::vector<NamedParam> pgan_critic_params(const PGanNets& nets) {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < nets.d_hidden.size(); ++i) {
    push_linear(out, "pgan.d_hidden" + std::to_string(i), nets.d_hidden[i]);
    push_linear(out, "pgan.d_proj" + std::to_string(i), nets.d_proj[i]);
  }
  push_linear(out, "pgan.d_head", nets.d_head);
  return out;
}

std::vector<NamedParam> named_params(const ModelBundle& bundle) {
  std::vector<NamedParam> out = named_params(bundle.g);
  auto dc = named_params(bundle.dc);
  out.insert(out.end(), dc.begin(), dc.end());
  if (bundle.pgan) {
    auto pg = pgan_generator_params(*bundle.pgan);
    auto pd = pgan_critic_params(*bundle.pgan);
    out.insert(out.end(), pg.begin(), pg.end());
    out.insert(out.end(), pd.begin(), pd.end());
  }
  return out;
}

namespace {

Linear clone_linear(const Linear& l) {
  Linear out;
  out.w = Tensor::from(l.w.shape(), {l.w.values().begin(), l.w.values().end()},
                       /*requires_grad=*/true);
  out.b = Tensor::from(l.b.shape(), {l.b.values().begin(), l.b.values().end()},
                       /*requires_grad=*/true);
  return out;
}

}  // namespace

ModelBundle clone(const ModelBundle& bundle) {
  ModelBundle out;
  out.variant = bundle.variant;
  out.g = bundle.g;
  out.g.hidden.clear();
  for (const auto& l : bundle.g.hidden) out.g.hidden.push_back(clone_linear(l));
  out.g.out = clone_linear(bundle.g.out);
  out.dc = bundle.dc;
  out.dc.shared.clear();
  out.dc.d_tail.clear();
  out.dc.c_tail.clear();
  for (const auto& l : bundle.dc.shared) out.dc.shared.push_back(clone_linear(l));
  for (const auto& l : bundle.dc.d_tail) out.dc.d_tail.push_back(clone_linear(l));
  for (const auto& l : bundle.dc.c_tail) out.dc.c_tail.push_back(clone_linear(l));
  out.dc.d_head = clone_linear(bundle.dc.d_head);
  out.dc.c_head = clone_linear(bundle.dc.c_head);
  if (bundle.pgan) {
    PGanNets p = *bundle.pgan;
    p.g_hidden.clear();
    p.d_hidden.clear();
    p.d_proj.clear();
    for (const auto& l : bundle.pgan->g_hidden) p.g_hidden.push_back(clone_linear(l));
    p.g_out = clone_linear(bundle.pgan->g_out);
    for (const auto& l : bundle.pgan->d_hidden) p.d_hidden.push_back(clone_linear(l));
    for (const auto& l : bundle.pgan->d_proj) p.d_proj.push_back(clone_linear(l));
    p.d_head = clone_linear(bundle.pgan->d_head);
    out.pgan = std::move(p);
  }
  return out;
}

}  // namespace ogan
