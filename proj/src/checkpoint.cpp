#include "lsdm/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <map>

#include "lsdm/config.hpp"
#include "lsdm/error.hpp"

namespace lsdm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kContainerVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error("truncated tensor container");
  return v;
}

NamedTensors named(const LsdmParams& p, const std::string& prefix = "") {
  NamedTensors out;
  p.for_each([&](const std::string& name, const Tensor& t) { out.emplace_back(prefix + name, t); });
  return out;
}

void assign(LsdmParams& p, const std::map<std::string, Tensor>& by_name, const std::string& prefix,
            const fs::path& file) {
  p.for_each([&](const std::string& name, Tensor& t) {
    const auto it = by_name.find(prefix + name);
    if (it == by_name.end()) throw Error(file.string() + ": missing tensor " + prefix + name);
    if (it->second.shape() != t.shape()) {
      throw ShapeError(file.string() + ": tensor " + prefix + name + " has shape " +
                       shape_string(it->second.shape()) + ", expected " + shape_string(t.shape()));
    }
    t = it->second;
  });
}

void write_file(const fs::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_named_tensors(out, tensors);
  if (!out) throw Error("write failed: " + path.string());
}

std::map<std::string, Tensor> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::map<std::string, Tensor> out;
  for (auto& [name, t] : read_named_tensors(in)) out.emplace(std::move(name), std::move(t));
  return out;
}

void write_json(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_named_tensors(std::ostream& out, const NamedTensors& tensors) {
  out.write("LSDC", 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, t);
  }
}

NamedTensors read_named_tensors(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "LSDC") throw Error("bad tensor container magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kContainerVersion) {
    throw Error("unsupported tensor container version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in);
  NamedTensors out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw Error("truncated tensor container");
    out.emplace_back(std::move(name), read_tensor(in));
  }
  return out;
}

fs::path save_checkpoint(const fs::path& root, const TrainState& state, const TrainConfig& config) {
  const std::string leaf = "epoch-" + std::to_string(state.epochs_done);
  const fs::path dir = root / leaf;
  fs::create_directories(dir);

  const LsdmParams& p = state.model.params;
  write_file(dir / "params.lsdc", named(p));
  if (state.optimizer.step > 0 && !state.optimizer.first_moment.scales.empty()) {
    NamedTensors moments = named(state.optimizer.first_moment, "m/");
    for (auto& e : named(state.optimizer.second_moment, "v/")) moments.push_back(std::move(e));
    write_file(dir / "optimizer.lsdc", moments);
  }

  json m;
  m["format_version"] = 1;
  m["dim"] = p.dims.dim;
  m["num_users"] = p.dims.num_users;
  m["num_items"] = p.dims.num_items;
  m["share_embeddings"] = p.share_embeddings;
  m["scales"] = json::array();
  for (const auto& s : p.scales) m["scales"].push_back({{"kind", s.scale.name()}, {"max_items", s.max_items}});
  m["join"] = {{"strategy", std::string(join_name(p.join.strategy))},
               {"hidden_width", p.join.hidden_bias.size()}};
  m["epoch_anchor"] = state.model.epoch;
  m["optimizer_step"] = state.optimizer.step;
  m["epochs_done"] = state.epochs_done;
  m["history"] = json::array();
  for (const auto& h : state.history) {
    m["history"].push_back({{"epoch", h.epoch},
                            {"total", h.loss.total},
                            {"joint", h.loss.joint},
                            {"per_scale", h.loss.per_scale}});
  }
  m["train_config"] = to_json(config);
  write_json(dir / "manifest.json", m);
  write_json(root / "latest.json", {{"epoch", state.epochs_done}, {"path", leaf}});
  return dir;
}

TrainState load_checkpoint(const fs::path& epoch_dir) {
  const json m = read_json(epoch_dir / "manifest.json");
  TrainState state;
  try {
    ModelDims dims{m.at("num_users").get<std::size_t>(), m.at("num_items").get<std::size_t>(),
                   m.at("dim").get<std::size_t>()};
    std::vector<TimeScale> scales;
    std::vector<std::size_t> max_items;
    for (const auto& s : m.at("scales")) {
      scales.push_back(TimeScale::parse(s.at("kind").get<std::string>()));
      max_items.push_back(s.at("max_items").get<std::size_t>());
    }
    const JoinStrategy join = parse_join(m.at("join").at("strategy").get<std::string>());
    InitOptions init;
    init.hidden_width = m.at("join").at("hidden_width").get<std::size_t>();
    state.model.params =
        init_params(dims, scales, max_items, join, m.at("share_embeddings").get<bool>(), init);
    state.model.epoch = m.at("epoch_anchor").get<Timestamp>();
    state.optimizer.step = m.at("optimizer_step").get<std::uint64_t>();
    state.epochs_done = m.at("epochs_done").get<std::size_t>();
    for (const auto& h : m.at("history")) {
      EpochLoss e;
      e.epoch = h.at("epoch").get<std::size_t>();
      e.loss.total = h.at("total").get<double>();
      e.loss.joint = h.at("joint").get<double>();
      e.loss.per_scale = h.at("per_scale").get<std::vector<double>>();
      state.history.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error((epoch_dir / "manifest.json").string() + ": " + e.what());
  }

  const fs::path params_file = epoch_dir / "params.lsdc";
  assign(state.model.params, read_file(params_file), "", params_file);
  const fs::path opt_file = epoch_dir / "optimizer.lsdc";
  if (fs::exists(opt_file)) {
    const auto tensors = read_file(opt_file);
    state.optimizer.first_moment = state.model.params.zeros_like();
    state.optimizer.second_moment = state.model.params.zeros_like();
    assign(state.optimizer.first_moment, tensors, "m/", opt_file);
    assign(state.optimizer.second_moment, tensors, "v/", opt_file);
  }
  return state;
}

std::optional<fs::path> latest_checkpoint(const fs::path& root) {
  const fs::path file = root / "latest.json";
  if (!fs::exists(file)) return std::nullopt;
  const json j = read_json(file);
  if (!j.contains("path") || !j["path"].is_string()) throw Error(file.string() + ": missing path");
  return root / j["path"].get<std::string>();
}

void check_resumable(const TrainState& state, const TrainConfig& config) {
  const LsdmParams& p = state.model.params;
  const std::vector<TimeScale> scales = state.model.scales();
  if (scales != config.scales) throw InvalidArgument("checkpoint scales differ from config");
  if (p.dims.dim != config.dim) throw InvalidArgument("checkpoint dim differs from config");
  if (p.join.strategy != config.join) throw InvalidArgument("checkpoint join differs from config");
  if (p.share_embeddings != config.share_embeddings) {
    throw InvalidArgument("checkpoint share_embeddings differs from config");
  }
  if (state.epochs_done > config.epochs) {
    throw InvalidArgument("checkpoint has " + std::to_string(state.epochs_done) +
                          " epochs, config asks for " + std::to_string(config.epochs));
  }
}

}  // namespace lsdm
