#include "lsdm/params.hpp"

#include <random>

#include "lsdm/error.hpp"

namespace lsdm {

std::string_view join_name(JoinStrategy s) {
  switch (s) {
    case JoinStrategy::Average: return "average";
    case JoinStrategy::Max: return "max";
    case JoinStrategy::Weighted: return "weighted";
    case JoinStrategy::Mlp: return "mlp";
  }
  return "?";
}

JoinStrategy parse_join(std::string_view text) {
  if (text == "average" || text == "avg") return JoinStrategy::Average;
  if (text == "max") return JoinStrategy::Max;
  if (text == "weighted") return JoinStrategy::Weighted;
  if (text == "mlp") return JoinStrategy::Mlp;
  throw InvalidArgument("unknown join strategy '" + std::string(text) + "'");
}

const Tensor& LsdmParams::item_embeddings(std::size_t scale) const {
  return scales[share_embeddings ? 0 : scale].item_embeddings;
}

const Tensor& LsdmParams::user_embeddings(std::size_t scale) const {
  return scales[share_embeddings ? 0 : scale].user_embeddings;
}

LsdmParams LsdmParams::zeros_like() const {
  LsdmParams z = *this;
  z.for_each([](const std::string&, Tensor& t) { t.fill(0.0); });
  return z;
}

namespace {

template <typename P, typename F>
void visit(P& p, F&& f) {
  for (std::size_t c = 0; c < p.scales.size(); ++c) {
    auto& s = p.scales[c];
    const std::string prefix = "scale" + std::to_string(c) + "." + s.scale.name() + ".";
    if (s.item_embeddings.size()) f(prefix + "item_embeddings", s.item_embeddings);
    if (s.user_embeddings.size()) f(prefix + "user_embeddings", s.user_embeddings);
    f(prefix + "attention", s.attention);
    f(prefix + "lstm_input", s.lstm_input);
    f(prefix + "lstm_recurrent", s.lstm_recurrent);
    f(prefix + "lstm_bias", s.lstm_bias);
  }
  for (std::size_t c = 0; c < p.join.scale_weights.size(); ++c) {
    f("join.scale_weights" + std::to_string(c), p.join.scale_weights[c]);
  }
  if (p.join.hidden_weights.size()) f("join.hidden_weights", p.join.hidden_weights);
  if (p.join.hidden_bias.size()) f("join.hidden_bias", p.join.hidden_bias);
  if (p.join.output_weights.size()) f("join.output_weights", p.join.output_weights);
}

class Uniform {
 public:
  Uniform(std::uint64_t seed, double scale) : engine_(seed), dist_(-scale, scale) {}
  Tensor tensor(Tensor::Shape shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = dist_(engine_);
    return t;
  }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> dist_;
};

}  // namespace

void LsdmParams::for_each(const std::function<void(const std::string&, Tensor&)>& f) {
  visit(*this, f);
}

void LsdmParams::for_each(
    const std::function<void(const std::string&, const Tensor&)>& f) const {
  visit(*this, f);
}

JoinParams init_join(JoinStrategy strategy, std::size_t num_scales, std::size_t num_items,
                     const InitOptions& options) {
  Uniform rng(options.seed ^ 0x9e3779b97f4a7c15ULL, options.scale);
  JoinParams j;
  j.strategy = strategy;
  if (strategy == JoinStrategy::Weighted) {
    for (std::size_t c = 0; c < num_scales; ++c) j.scale_weights.push_back(rng.tensor({num_items}));
  } else if (strategy == JoinStrategy::Mlp) {
    const std::size_t h = options.hidden_width ? options.hidden_width : num_items;
    j.hidden_weights = rng.tensor({h, num_scales * num_items});
    j.hidden_bias = Tensor({h}, 0.0);
    j.output_weights = rng.tensor({num_items, h});
  }
  return j;
}

LsdmParams init_params(const ModelDims& dims, std::span<const TimeScale> scales,
                       std::span<const std::size_t> max_items, JoinStrategy join,
                       bool share_embeddings, const InitOptions& options) {
  if (scales.empty()) throw InvalidArgument("model needs at least one time scale");
  if (scales.size() != max_items.size()) {
    throw InvalidArgument("one max_items value per scale required");
  }
  if (dims.dim == 0 || dims.num_items == 0 || dims.num_users == 0) {
    throw InvalidArgument("model dimensions must be positive");
  }
  Uniform rng(options.seed, options.scale);
  const std::size_t d = dims.dim;
  LsdmParams p;
  p.dims = dims;
  p.share_embeddings = share_embeddings;
  for (std::size_t c = 0; c < scales.size(); ++c) {
    if (max_items[c] == 0) throw InvalidArgument("max_items must be >= 1");
    ScaleParams s;
    s.scale = scales[c];
    s.max_items = max_items[c];
    if (c == 0 || !share_embeddings) {
      s.item_embeddings = rng.tensor({dims.num_items + 1, d});
      s.user_embeddings = rng.tensor({dims.num_users + 1, d});
      for (std::size_t k = 0; k < d; ++k) {
        s.item_embeddings.at(0, k) = 0.0;
        s.user_embeddings.at(0, k) = 0.0;
      }
    }
    s.attention = rng.tensor({s.max_items, d});
    s.lstm_input = rng.tensor({4 * d, d * s.max_items});
    s.lstm_recurrent = rng.tensor({4 * d, d});
    s.lstm_bias = Tensor({4 * d}, 0.0);
    for (std::size_t k = d; k < 2 * d; ++k) s.lstm_bias[k] = options.forget_bias;
    p.scales.push_back(std::move(s));
  }
  p.join = init_join(join, scales.size(), dims.num_items, options);
  return p;
}

}  // namespace lsdm
