#include "lsdm/config.hpp"

#include <fstream>
#include <set>
#include <string>

namespace lsdm {

using nlohmann::json;

namespace {

// Typed access to one JSON object; remembers which keys were read so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + what);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected true or false");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
        out = v.get<T>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer");
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("expected a number");
        out = v.get<T>();
      } else {
        if (!v.is_string()) throw ConfigError("expected a string");
        out = v.get<std::string>();
      }
    } catch (const ConfigError& e) {
      throw ConfigError(key_path(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(key_path(key) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<TimeScale> parse_scales(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a non-empty list of scales");
  std::vector<TimeScale> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_string()) throw ConfigError(p + ": expected a scale name");
    try {
      out.push_back(TimeScale::parse(v[i].get<std::string>()));
    } catch (const InvalidArgument& e) {
      throw ConfigError(p + ": " + e.what());
    }
    for (std::size_t k = 0; k + 1 < out.size(); ++k) {
      if (out[k] == out.back()) throw ConfigError(p + ": duplicate scale " + out.back().name());
    }
  }
  return out;
}

JoinStrategy read_join(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a join name");
  try {
    return parse_join(v.get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json scales_json(const std::vector<TimeScale>& scales) {
  json out = json::array();
  for (const auto& s : scales) out.push_back(s.name());
  return out;
}

void parse_train(const json& j, TrainConfig& c) {
  Section s(j, "train");
  s.read("dim", c.dim);
  s.read("epochs", c.epochs);
  s.read("learning_rate", c.learning_rate);
  s.read("batch_size", c.batch_size);
  if (s.has("optimizer")) {
    Section o(s.raw("optimizer"), "train.optimizer");
    std::string kind = c.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd";
    o.read("kind", kind);
    if (kind == "adam") {
      c.optimizer.kind = OptimizerKind::Adam;
    } else if (kind == "sgd") {
      c.optimizer.kind = OptimizerKind::Sgd;
    } else {
      throw ConfigError("train.optimizer.kind: expected adam or sgd, got " + kind);
    }
    o.read("beta1", c.optimizer.beta1);
    o.read("beta2", c.optimizer.beta2);
    o.read("epsilon", c.optimizer.epsilon);
    o.finish();
  }
  s.read("lambda", c.per_scale_loss_weight);
  s.read("gradient_clip_norm", c.gradient_clip_norm);
  if (s.has("loss_weights")) {
    Section w(s.raw("loss_weights"), "train.loss_weights");
    w.read("m", c.loss_weights.positive);
    w.read("n", c.loss_weights.negative);
    w.finish();
  }
  s.read("share_embeddings", c.share_embeddings);
  s.read("hidden_width", c.hidden_width);
  s.read("max_items_percentile", c.max_items_percentile);
  s.read("max_items_cap", c.max_items_cap);
  if (s.has("epoch_anchor")) {
    const json& v = s.raw("epoch_anchor");
    if (v.is_null()) {
      c.epoch_anchor.reset();
    } else if (v.is_number_integer()) {
      c.epoch_anchor = v.get<Timestamp>();
    } else {
      throw ConfigError("train.epoch_anchor: expected an integer timestamp or null");
    }
  }
  bool parallel = c.policy == ExecutionPolicy::Parallel;
  s.read("parallel", parallel);
  c.policy = parallel ? ExecutionPolicy::Parallel : ExecutionPolicy::Serial;
  s.finish();
}

}  // namespace

SyntheticSpec parse_synthetic(const json& j) {
  SyntheticSpec spec;
  Section s(j, "synthetic");
  s.read("num_users", spec.num_users);
  s.read("num_items", spec.num_items);
  s.read("horizon_days", spec.horizon_days);
  s.read("noise_rate", spec.noise_rate);
  s.read("seed", spec.seed);
  s.read("rules_per_user", spec.rules_per_user);
  s.read("random_phase", spec.random_phase);
  s.read("start_time", spec.start_time);
  if (s.has("periodic_rules")) {
    const json& rules = s.raw("periodic_rules");
    if (!rules.is_array()) throw ConfigError("synthetic.periodic_rules: expected a list");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      Section r(rules[i], "synthetic.periodic_rules[" + std::to_string(i) + "]");
      PeriodicRule rule;
      r.read("item", rule.item);
      r.read("period_days", rule.period_days);
      r.read("jitter_days", rule.jitter_days);
      r.finish();
      spec.periodic_rules.push_back(rule);
    }
  }
  if (s.has("copurchase_rules")) {
    const json& rules = s.raw("copurchase_rules");
    if (!rules.is_array()) throw ConfigError("synthetic.copurchase_rules: expected a list");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      Section r(rules[i], "synthetic.copurchase_rules[" + std::to_string(i) + "]");
      CopurchaseRule rule;
      r.read("trigger", rule.trigger);
      r.read("companion", rule.companion);
      r.read("gap_events", rule.gap_events);
      r.read("probability", rule.probability);
      r.finish();
      spec.copurchase_rules.push_back(rule);
    }
  }
  s.finish();
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("synthetic.") + e.what());
  }
  return spec;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section s(j, "");
  s.read("seed", c.train.seed);
  if (s.has("scales")) c.train.scales = parse_scales(s.raw("scales"), "scales");
  if (s.has("join")) c.train.join = read_join(s.raw("join"), "join");
  std::string out = c.output_dir.string();
  s.read("output_dir", out);
  c.output_dir = out;
  s.read("checkpoint_every", c.checkpoint_every);
  if (c.checkpoint_every == 0) throw ConfigError("checkpoint_every: must be >= 1");

  if (s.has("data")) {
    Section d(s.raw("data"), "data");
    DataSource src;
    std::string path;
    d.read("path", path);
    if (path.empty()) throw ConfigError("data.path: required");
    src.path = path;
    std::string delim(1, src.schema.delimiter);
    d.read("delimiter", delim);
    if (delim == "\\t" || delim == "tab") delim = "\t";
    if (delim.size() != 1) throw ConfigError("data.delimiter: expected one character");
    src.schema.delimiter = delim[0];
    d.read("has_header", src.schema.has_header);
    d.read("user_column", src.schema.user_column);
    d.read("item_column", src.schema.item_column);
    d.read("time_column", src.schema.time_column);
    std::string id_type = "integer";
    d.read("id_type", id_type);
    if (id_type == "integer") {
      src.schema.id_type = IdType::Integer;
    } else if (id_type == "string") {
      src.schema.id_type = IdType::String;
    } else {
      throw ConfigError("data.id_type: expected integer or string, got " + id_type);
    }
    d.finish();
    c.data = src;
  }
  if (s.has("synthetic")) {
    json spec = s.raw("synthetic");
    if (spec.is_object() && !spec.contains("seed")) spec["seed"] = c.train.seed;
    c.synthetic = parse_synthetic(spec);
  }
  if (c.data && c.synthetic) {
    throw ConfigError("config: data and synthetic are mutually exclusive");
  }
  if (s.has("train")) parse_train(s.raw("train"), c.train);

  if (s.has("eval")) {
    Section e(s.raw("eval"), "eval");
    if (e.has("ks")) {
      const json& ks = e.raw("ks");
      if (!ks.is_array() || ks.empty()) throw ConfigError("eval.ks: expected a non-empty list");
      c.eval.ks.clear();
      for (const auto& k : ks) {
        if (!k.is_number_unsigned() || k.get<std::size_t>() == 0) {
          throw ConfigError("eval.ks: entries must be positive integers");
        }
        c.eval.ks.push_back(k.get<std::size_t>());
      }
    }
    e.read("parallel", c.eval.parallel);
    e.finish();
  }

  c.ablation.scale_sets = {{TimeScale::item()},
                           {TimeScale::item(), TimeScale::day()},
                           {TimeScale::item(), TimeScale::week()},
                           {TimeScale::item(), TimeScale::day(), TimeScale::week()}};
  c.ablation.joins = {JoinStrategy::Average, JoinStrategy::Max, JoinStrategy::Weighted,
                      JoinStrategy::Mlp};
  c.ablation.seeds = {c.train.seed};
  if (s.has("ablation")) {
    Section a(s.raw("ablation"), "ablation");
    if (a.has("scale_sets")) {
      const json& sets = a.raw("scale_sets");
      if (!sets.is_array() || sets.empty()) {
        throw ConfigError("ablation.scale_sets: expected a non-empty list");
      }
      c.ablation.scale_sets.clear();
      for (std::size_t i = 0; i < sets.size(); ++i) {
        c.ablation.scale_sets.push_back(
            parse_scales(sets[i], "ablation.scale_sets[" + std::to_string(i) + "]"));
      }
    }
    if (a.has("joins")) {
      const json& joins = a.raw("joins");
      if (!joins.is_array() || joins.empty()) throw ConfigError("ablation.joins: expected a non-empty list");
      c.ablation.joins.clear();
      for (std::size_t i = 0; i < joins.size(); ++i) {
        c.ablation.joins.push_back(read_join(joins[i], "ablation.joins[" + std::to_string(i) + "]"));
      }
    }
    if (a.has("seeds")) {
      const json& seeds = a.raw("seeds");
      if (!seeds.is_array() || seeds.empty()) throw ConfigError("ablation.seeds: expected a non-empty list");
      c.ablation.seeds.clear();
      for (const auto& v : seeds) {
        if (!v.is_number_unsigned()) throw ConfigError("ablation.seeds: expected non-negative integers");
        c.ablation.seeds.push_back(v.get<std::uint64_t>());
      }
    }
    a.finish();
  }
  s.finish();

  try {
    c.train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + file.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const TrainConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["optimizer"] = {{"kind", c.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd"},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  j["lambda"] = c.per_scale_loss_weight;
  j["gradient_clip_norm"] = c.gradient_clip_norm;
  j["loss_weights"] = {{"m", c.loss_weights.positive}, {"n", c.loss_weights.negative}};
  j["share_embeddings"] = c.share_embeddings;
  j["hidden_width"] = c.hidden_width;
  j["max_items_percentile"] = c.max_items_percentile;
  j["max_items_cap"] = c.max_items_cap;
  j["epoch_anchor"] = c.epoch_anchor ? json(*c.epoch_anchor) : json(nullptr);
  j["parallel"] = c.policy == ExecutionPolicy::Parallel;
  return j;
}

json to_json(const SyntheticSpec& spec) {
  json j;
  j["num_users"] = spec.num_users;
  j["num_items"] = spec.num_items;
  j["horizon_days"] = spec.horizon_days;
  j["noise_rate"] = spec.noise_rate;
  j["seed"] = spec.seed;
  j["rules_per_user"] = spec.rules_per_user;
  j["random_phase"] = spec.random_phase;
  j["start_time"] = spec.start_time;
  j["periodic_rules"] = json::array();
  for (const auto& r : spec.periodic_rules) {
    j["periodic_rules"].push_back(
        {{"item", r.item}, {"period_days", r.period_days}, {"jitter_days", r.jitter_days}});
  }
  j["copurchase_rules"] = json::array();
  for (const auto& r : spec.copurchase_rules) {
    j["copurchase_rules"].push_back({{"trigger", r.trigger},
                                     {"companion", r.companion},
                                     {"gap_events", r.gap_events},
                                     {"probability", r.probability}});
  }
  return j;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.train.seed;
  j["scales"] = scales_json(c.train.scales);
  j["join"] = std::string(join_name(c.train.join));
  j["output_dir"] = c.output_dir.string();
  j["checkpoint_every"] = c.checkpoint_every;
  if (c.data) {
    const auto& s = c.data->schema;
    j["data"] = {{"path", c.data->path.string()},
                 {"delimiter", std::string(1, s.delimiter)},
                 {"has_header", s.has_header},
                 {"user_column", s.user_column},
                 {"item_column", s.item_column},
                 {"time_column", s.time_column},
                 {"id_type", s.id_type == IdType::Integer ? "integer" : "string"}};
  }
  if (c.synthetic) j["synthetic"] = to_json(*c.synthetic);
  j["train"] = to_json(c.train);
  j["eval"] = {{"ks", c.eval.ks}, {"parallel", c.eval.parallel}};
  json sets = json::array();
  for (const auto& set : c.ablation.scale_sets) sets.push_back(scales_json(set));
  json joins = json::array();
  for (auto s : c.ablation.joins) joins.push_back(std::string(join_name(s)));
  j["ablation"] = {{"scale_sets", sets}, {"joins", joins}, {"seeds", c.ablation.seeds}};
  return j;
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + key + "': empty key segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + key + "': " + part + " is not inside an object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace lsdm
