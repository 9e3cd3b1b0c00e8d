#include "overlapgan/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ogan {

using nlohmann::json;

namespace {

json tensor_values(const Tensor& t) {
  return json(std::vector<double>(t.values().begin(), t.values().end()));
}

json layer_entry(const NamedParam& p) {
  json j;
  j["name"] = p.name;
  j["shape"] = p.tensor.shape();
  j["values"] = tensor_values(p.tensor);
  return j;
}

// Architecture metadata needed to rebuild the nets before loading weights.
json arch_entry(const ModelBundle& b) {
  json j;
  j["z_dim"] = b.g.z_dim;
  j["cond_dim"] = b.g.cond_dim;
  j["g_width"] = b.g.width;
  j["out_dim"] = b.g.out_dim;
  j["dc_in_dim"] = b.dc.in_dim;
  j["num_classes"] = b.dc.num_classes;
  j["dc_width"] = b.dc.width;
  j["k_shared"] = b.dc.k_shared;
  j["dropout"] = b.dc.dropout.enabled;
  j["dropout_rates"] = b.dc.dropout.rates;
  if (b.pgan) j["pgan_width"] = b.pgan->width;
  return j;
}

void load_values(Tensor& t, const json& entry, const std::string& name) {
  auto shape = entry.at("shape").get<Shape>();
  auto values = entry.at("values").get<std::vector<double>>();
  if (shape != t.shape() || static_cast<Index>(values.size()) != shape_size(shape)) {
    throw std::runtime_error("checkpoint: layer " + name + " has shape " +
                             shape_str(shape) + ", expected " + shape_str(t.shape()));
  }
  auto dst = t.mutable_values();
  std::copy(values.begin(), values.end(), dst.begin());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["format_version"] = ckpt.format_version;
  j["variant"] = variant_name(ckpt.models.variant);
  j["iteration"] = ckpt.iteration;
  j["arch"] = arch_entry(ckpt.models);
  json layers = json::array();
  for (const auto& p : named_params(ckpt.models)) layers.push_back(layer_entry(p));
  j["layers"] = std::move(layers);
  json adam = json::object();
  for (const auto& [name, st] : ckpt.adam_state) {
    adam[name] = {{"m", st.m}, {"v", st.v}, {"t", st.t}};
  }
  j["adam_state"] = std::move(adam);
  j["rng_stream_positions"] = ckpt.rng_stream_positions;

  std::filesystem::create_directories(path.parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: invalid JSON in " + path.string() + ": " +
                             e.what());
  }
  Checkpoint ckpt;
  ckpt.format_version = j.at("format_version").get<int>();
  if (ckpt.format_version != 1) {
    throw std::runtime_error("checkpoint: unsupported format_version " +
                             std::to_string(ckpt.format_version));
  }
  ckpt.iteration = j.at("iteration").get<std::int64_t>();

  const json& arch = j.at("arch");
  // Architecture is rebuilt with zero weights, then overwritten from layers.
  RngStream dummy(0, "checkpoint/rebuild");
  ModelBundle b;
  b.variant = variant_from_name(j.at("variant").get<std::string>());
  DropoutSpec dropout;
  dropout.enabled = arch.at("dropout").get<bool>();
  auto rates = arch.at("dropout_rates").get<std::vector<double>>();
  std::copy(rates.begin(), rates.end(), dropout.rates.begin());
  b.g = make_generator(arch.at("z_dim").get<Index>(), arch.at("cond_dim").get<Index>(),
                       arch.at("g_width").get<Index>(), arch.at("out_dim").get<Index>(),
                       dummy);
  b.dc = make_disc_classifier(arch.at("dc_in_dim").get<Index>(),
                              arch.at("num_classes").get<int>(),
                              arch.at("dc_width").get<Index>(),
                              arch.at("k_shared").get<int>(), dropout, dummy);
  if (arch.contains("pgan_width")) {
    b.pgan = make_pgan(arch.at("num_classes").get<int>(),
                       arch.at("pgan_width").get<Index>(), dummy);
  }
  ckpt.models = std::move(b);

  std::map<std::string, const json*> by_name;
  for (const auto& entry : j.at("layers")) {
    by_name[entry.at("name").get<std::string>()] = &entry;
  }
  for (auto& p : named_params(ckpt.models)) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint: missing layer " + p.name);
    }
    Tensor t = p.tensor;
    load_values(t, *it->second, p.name);
  }

  for (const auto& [name, st] : j.at("adam_state").items()) {
    AdamState s;
    s.m = st.at("m").get<std::vector<double>>();
    s.v = st.at("v").get<std::vector<double>>();
    s.t = st.at("t").get<std::int64_t>();
    ckpt.adam_state.emplace(name, std::move(s));
  }
  ckpt.rng_stream_positions =
      j.at("rng_stream_positions").get<std::map<std::string, std::uint64_t>>();
  return ckpt;
}

}  // namespace ogan
