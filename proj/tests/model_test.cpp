#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lsdm/error.hpp"
#include "lsdm/model.hpp"
#include "support.hpp"

namespace lsdm {
namespace {

using Vec = std::vector<double>;

// Plain-loop reference implementations, independent of the tape.
namespace oracle {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec matvec(const Tensor& m, const Vec& x) {
  Vec out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r] += m.at(r, c) * x[c];
  return out;
}

Vec encode(const Tensor& p, std::vector<ItemId> items, std::size_t m) {
  std::sort(items.begin(), items.end());
  Vec out;
  for (ItemId i : items)
    for (double v : p.row(i)) out.push_back(v);
  out.resize(m * p.cols(), 0.0);
  return out;
}

Vec hadamard(const Vec& a, std::span<const double> b) {
  Vec out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
  return out;
}

struct State {
  Vec h, c;
};

State lstm(const ScaleParams& s, const Vec& x, const State& st) {
  const std::size_t d = st.h.size();
  const Vec wx = matvec(s.lstm_input, x), uh = matvec(s.lstm_recurrent, st.h);
  State out{Vec(d), Vec(d)};
  for (std::size_t k = 0; k < d; ++k) {
    auto z = [&](std::size_t gate) { return wx[gate * d + k] + uh[gate * d + k] + s.lstm_bias[gate * d + k]; };
    const double i = sigmoid(z(0)), f = sigmoid(z(1)), o = sigmoid(z(2)), g = std::tanh(z(3));
    out.c[k] = f * st.c[k] + i * g;
    out.h[k] = o * std::tanh(out.c[k]);
  }
  return out;
}

Vec softmax_scores(const Tensor& p, const Vec& v) {
  Vec logits;
  for (std::size_t i = 1; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += p.at(i, k) * v[k];
    logits.push_back(s);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - mx));
  for (double& l : logits) l /= z;
  return logits;
}

std::vector<Vec> forward(const ScaleParams& s, const std::vector<std::vector<ItemId>>& seq, UserId u) {
  const std::size_t d = s.attention.cols();
  State st{Vec(d, 0.0), Vec(d, 0.0)};
  std::vector<Vec> out;
  for (const auto& t : seq) {
    st = lstm(s, hadamard(encode(s.item_embeddings, t, s.max_items), s.attention.values()), st);
    out.push_back(softmax_scores(s.item_embeddings, hadamard(st.h, s.user_embeddings.row(u))));
  }
  return out;
}

}  // namespace oracle

void expect_near(const Tensor& got, const Vec& want, double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], tol) << "index " << k;
}

LsdmParams one_branch(std::size_t users, std::size_t items, std::size_t dim, std::size_t m,
                      std::uint64_t seed = 3) {
  return testing::small_params(users, items, dim, {TimeScale::item()}, {m}, JoinStrategy::Average, seed);
}

TEST(Encode, SingleItemIsPadded) {
  LsdmParams p = one_branch(1, 3, 2, 2);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const ItemId items[] = {2};
  const Tensor enc = encode_transaction(vars.branches[0], items).value();
  const auto row = p.scales[0].item_embeddings.row(2);
  EXPECT_EQ(enc, Tensor::vector({row[0], row[1], 0.0, 0.0}));
}

TEST(Encode, FullTransactionHasNoPadding) {
  LsdmParams p = one_branch(1, 5, 3, 2);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const ItemId items[] = {4, 1};
  const Tensor enc = encode_transaction(vars.branches[0], items).value();
  EXPECT_EQ(enc.size(), 6u);
  expect_near(enc, oracle::encode(p.scales[0].item_embeddings, {1, 4}, 2), 0.0);
}

TEST(Encode, OrderOfInputSetDoesNotMatter) {
  LsdmParams p = one_branch(1, 6, 2, 4);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const ItemId a[] = {5, 2, 3}, b[] = {3, 5, 2};
  EXPECT_EQ(encode_transaction(vars.branches[0], a).value(),
            encode_transaction(vars.branches[0], b).value());
}

TEST(Encode, OversizedKeepsMostRecent) {
  LsdmParams p = one_branch(1, 6, 2, 2);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const ItemId items[] = {6, 1, 4, 1};  // oldest first: latest distinct are 1, 4
  expect_near(encode_transaction(vars.branches[0], items).value(),
              oracle::encode(p.scales[0].item_embeddings, {1, 4}, 2), 0.0);
}

TEST(Encode, UnknownItemIsRejected) {
  LsdmParams p = one_branch(1, 3, 2, 2);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const ItemId bad[] = {4}, pad[] = {0};
  EXPECT_THROW(encode_transaction(vars.branches[0], bad), InvalidArgument);
  EXPECT_THROW(encode_transaction(vars.branches[0], pad), InvalidArgument);
}

TEST(Attention, OnesZerosAndHandCase) {
  LsdmParams p = one_branch(1, 3, 2, 2);
  const ItemId items[] = {1, 3};
  const Vec enc = oracle::encode(p.scales[0].item_embeddings, {1, 3}, 2);
  for (double fill : {1.0, 0.0}) {
    p.scales[0].attention.fill(fill);
    ad::Tape t;
    const auto vars = bind_model(t, p, nullptr);
    const auto& b = vars.branches[0];
    const Tensor out = apply_attention(b, encode_transaction(b, items)).value();
    expect_near(out, fill == 1.0 ? enc : Vec(4, 0.0), 0.0);
  }
  p.scales[0].attention = Tensor::matrix(2, 2, {0.5, -2.0, 3.0, 0.25});
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const auto& b = vars.branches[0];
  const Tensor out = apply_attention(b, encode_transaction(b, items)).value();
  expect_near(out, {0.5 * enc[0], -2.0 * enc[1], 3.0 * enc[2], 0.25 * enc[3]}, 0.0);
}

TEST(Lstm, ZeroNetworkGivesZeroHidden) {
  LsdmParams p = one_branch(1, 3, 2, 1);
  auto& s = p.scales[0];
  s.lstm_input.fill(0);
  s.lstm_recurrent.fill(0);
  s.lstm_bias.fill(0);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const auto st = lstm_step(vars.branches[0], t.constant(Tensor::vector({0.3, -0.7})), initial_state(t, 2));
  EXPECT_EQ(st.hidden.value(), Tensor::vector({0, 0}));
}

TEST(Lstm, HandSetTwoDimensionalCell) {
  LsdmParams p = one_branch(1, 3, 2, 1);
  auto& s = p.scales[0];
  // 8 x 2 input weights, 8 x 2 recurrent weights, 8 biases: gate blocks i, f, o, g.
  s.lstm_input = Tensor::matrix(8, 2, {0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8,
                                       -0.9, 1.0, 0.2, 0.1, 0.3, -0.2, 0.05, 0.6});
  s.lstm_recurrent = Tensor::matrix(8, 2, {0.2, -0.1, 0.0, 0.3, 0.4, 0.4, -0.5, 0.1,
                                           0.6, -0.2, 0.1, 0.1, -0.3, 0.2, 0.2, -0.4});
  s.lstm_bias = Tensor::vector({0.0, 0.1, 1.0, 1.0, -0.2, 0.0, 0.3, -0.1});
  const Vec x{0.5, -1.5}, h{0.25, -0.5}, c{0.1, 0.3};
  const oracle::State want = oracle::lstm(s, x, {h, c});

  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const ScaleState st{t.constant(Tensor({2}, h)), t.constant(Tensor({2}, c))};
  const ScaleState got = lstm_step(vars.branches[0], t.constant(Tensor({2}, x)), st);
  expect_near(got.hidden.value(), want.h);
  expect_near(got.cell.value(), want.c);
}

TEST(Lstm, HiddenStaysInsideUnitInterval) {
  std::mt19937_64 rng(6);
  LsdmParams p = testing::small_params(1, 4, 3, {TimeScale::item()}, {2}, JoinStrategy::Average, 8, 1.0);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  ScaleState st = initial_state(t, 3);
  for (int k = 0; k < 50; ++k) {
    st = lstm_step(vars.branches[0], t.constant(testing::random_tensor({6}, rng, -3, 3)), st);
    for (double v : st.hidden.value().values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(UserInteraction, IdentityAnnihilationAndHandCase) {
  LsdmParams p = one_branch(2, 3, 3, 1);
  p.scales[0].user_embeddings = Tensor::matrix(3, 3, {0, 0, 0, 1, 1, 1, 0.5, -2, 4});
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const auto& b = vars.branches[0];
  const ad::Var h = t.constant(Tensor::vector({0.3, -0.1, 0.2}));
  EXPECT_EQ(user_interaction(b, 1, h).value(), h.value());
  EXPECT_EQ(user_interaction(b, 2, t.constant(Tensor({3}))).value(), Tensor({3}));
  expect_near(user_interaction(b, 2, h).value(), {0.15, 0.2, 0.8});
  EXPECT_THROW(user_interaction(b, 3, h), InvalidArgument);
  EXPECT_THROW(user_interaction(b, 0, h), InvalidArgument);
}

TEST(PredictScores, ZeroInteractionIsUniform) {
  LsdmParams p = one_branch(1, 5, 2, 1);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const Tensor s = predict_scores(vars.branches[0], t.constant(Tensor({2}))).value();
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(PredictScores, HandCaseFourItems) {
  LsdmParams p = one_branch(1, 4, 2, 1);
  p.scales[0].item_embeddings = Tensor::matrix(5, 2, {0, 0, 1, 0, 0, 1, 1, 1, -1, 0.5});
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const Tensor s = predict_scores(vars.branches[0], t.constant(Tensor::vector({0.4, -0.2}))).value();
  // logits 0.4, -0.2, 0.2, -0.5
  const double e[] = {std::exp(0.4), std::exp(-0.2), std::exp(0.2), std::exp(-0.5)};
  const double z = e[0] + e[1] + e[2] + e[3];
  expect_near(s, {e[0] / z, e[1] / z, e[2] / z, e[3] / z});
}

TEST(ForwardSequence, OnePredictionPerTransaction) {
  LsdmParams p = one_branch(1, 4, 2, 2);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const std::vector<std::vector<ItemId>> one{{1, 2}};
  EXPECT_EQ(forward_sequence(vars.branches[0], one, 1).size(), 1u);
  EXPECT_THROW(forward_sequence(vars.branches[0], std::vector<std::vector<ItemId>>{}, 1),
               InvalidArgument);
}

TEST(ForwardSequence, MatchesComposedOracle) {
  LsdmParams p = testing::small_params(2, 3, 2, {TimeScale::item()}, {2}, JoinStrategy::Average, 21, 0.9);
  const std::vector<std::vector<ItemId>> seq{{3, 1}, {2}};
  const auto want = oracle::forward(p.scales[0], seq, 2);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  const auto got = forward_sequence(vars.branches[0], seq, 2);
  ASSERT_EQ(got.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j) expect_near(got[j].value(), want[j]);
  ad::Tape again;
  const auto vars2 = bind_model(again, p, nullptr);
  const auto repeat = forward_sequence(vars2.branches[0], seq, 2);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(repeat[j].value(), got[j].value());
}

TEST(ForwardSequence, PaddingSlotsAreNeutral) {
  LsdmParams p = testing::small_params(1, 5, 3, {TimeScale::item()}, {3}, JoinStrategy::Average, 4, 0.7);
  const std::vector<std::vector<ItemId>> seq{{2}, {1, 5}, {4}};
  auto run = [&](const LsdmParams& params) {
    ad::Tape t;
    const auto vars = bind_model(t, params, nullptr);
    return forward_sequence(vars.branches[0], seq, 1).back().value();
  };
  const Tensor base = run(p);
  // Attention on slots that only ever hold padding cannot matter.
  LsdmParams q = p;
  for (std::size_t k = 0; k < 3; ++k) q.scales[0].attention.at(2, k) = 100.0 + k;
  EXPECT_EQ(run(q), base);
  EXPECT_EQ(p.scales[0].item_embeddings.row(0)[0], 0.0);
}

TEST(ForwardSequence, PredictionsAreDistributions) {
  std::mt19937_64 rng(1);
  LsdmParams p = testing::small_params(3, 7, 4, {TimeScale::item()}, {3}, JoinStrategy::Average, 9, 1.0);
  std::uniform_int_distribution<ItemId> item(1, 7);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  std::vector<std::vector<ItemId>> seq;
  for (int k = 0; k < 6; ++k) seq.push_back({item(rng), item(rng)});
  for (const auto& pred : forward_sequence(vars.branches[0], seq, 3)) {
    double s = 0.0;
    for (double v : pred.value().values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Params, InitializationContract) {
  const LsdmParams p = testing::small_params(4, 6, 3, {TimeScale::item(), TimeScale::day()}, {1, 2},
                                             JoinStrategy::Mlp, 5, 0.08);
  for (const auto& s : p.scales) {
    for (double v : s.item_embeddings.row(0)) EXPECT_EQ(v, 0.0);
    for (std::size_t k = 0; k < 12; ++k) {
      EXPECT_EQ(s.lstm_bias[k], (k >= 3 && k < 6) ? 1.0 : 0.0);
    }
    for (double v : s.lstm_input.values()) EXPECT_LE(std::abs(v), 0.08);
    EXPECT_EQ(s.lstm_input.shape(), (Tensor::Shape{12, 3 * s.max_items}));
  }
  EXPECT_EQ(p.join.hidden_weights.shape(), (Tensor::Shape{6, 12}));
  EXPECT_EQ(p.join.output_weights.shape(), (Tensor::Shape{6, 6}));
}

TEST(Params, SharedEmbeddingsAreBoundOnce) {
  InitOptions init;
  const LsdmParams p = init_params({2, 4, 2}, std::vector{TimeScale::item(), TimeScale::week()},
                                   std::vector<std::size_t>{1, 2}, JoinStrategy::Average, true, init);
  EXPECT_EQ(p.scales[1].item_embeddings.size(), 0u);
  ad::Tape t;
  const auto vars = bind_model(t, p, nullptr);
  EXPECT_EQ(vars.branches[0].item_embeddings.id, vars.branches[1].item_embeddings.id);
}

}  // namespace
}  // namespace lsdm
