#include "lsdm/model.hpp"

#include <algorithm>

#include "lsdm/error.hpp"

namespace lsdm {

ModelVars vars_from_leaves(const LsdmParams& layout, std::span<const ad::Var> leaves) {
  std::size_t next = 0;
  auto take = [&]() {
    if (next >= leaves.size()) throw ShapeError("vars_from_leaves: too few leaves for model layout");
    return leaves[next++];
  };
  ModelVars vars;
  const std::size_t d = layout.dims.dim;
  ad::Var shared_items, shared_users, shared_scoring;
  for (std::size_t c = 0; c < layout.scales.size(); ++c) {
    const ScaleParams& s = layout.scales[c];
    BranchVars b;
    b.dim = d;
    b.max_items = s.max_items;
    b.num_items = layout.dims.num_items;
    b.num_users = layout.dims.num_users;
    if (s.item_embeddings.size()) {
      b.item_embeddings = take();
      b.user_embeddings = take();
      b.scoring = ad::slice_rows(b.item_embeddings, 1, b.num_items);
      shared_items = b.item_embeddings;
      shared_users = b.user_embeddings;
      shared_scoring = b.scoring;
    } else {
      b.item_embeddings = shared_items;
      b.user_embeddings = shared_users;
      b.scoring = shared_scoring;
    }
    b.attention = ad::reshape(take(), {s.max_items * d});
    b.lstm_input = take();
    b.lstm_recurrent = take();
    b.lstm_bias = take();
    vars.branches.push_back(b);
  }
  const JoinParams& j = layout.join;
  vars.join.strategy = j.strategy;
  for (std::size_t c = 0; c < j.scale_weights.size(); ++c) vars.join.scale_weights.push_back(take());
  if (j.hidden_weights.size()) vars.join.hidden_weights = take();
  if (j.hidden_bias.size()) vars.join.hidden_bias = take();
  if (j.output_weights.size()) vars.join.output_weights = take();
  if (next != leaves.size()) throw ShapeError("vars_from_leaves: too many leaves for model layout");
  return vars;
}

ModelVars bind_model(ad::Tape& tape, const LsdmParams& params, LsdmParams* grads) {
  std::vector<Tensor*> sinks;
  if (grads) grads->for_each([&](const std::string&, Tensor& t) { sinks.push_back(&t); });
  std::vector<ad::Var> leaves;
  params.for_each([&](const std::string& name, const Tensor& t) {
    Tensor* sink = nullptr;
    if (grads) {
      if (leaves.size() >= sinks.size()) throw ShapeError("bind_model: gradient layout differs");
      sink = sinks[leaves.size()];
      if (!sink->same_shape(t)) throw ShapeError("bind_model: gradient shape mismatch for " + name);
    }
    leaves.push_back(tape.parameter(t, sink));
  });
  return vars_from_leaves(params, leaves);
}

std::vector<Tensor> flatten(const LsdmParams& params) {
  std::vector<Tensor> out;
  params.for_each([&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

ScaleState initial_state(ad::Tape& tape, std::size_t dim) {
  return {tape.constant(Tensor({dim}, 0.0)), tape.constant(Tensor({dim}, 0.0))};
}

ad::Var encode_transaction(const BranchVars& branch, std::span<const ItemId> items) {
  if (items.empty()) throw InvalidArgument("encode_transaction: empty transaction");
  std::vector<ItemId> latest;  // distinct, most recent first
  for (auto it = items.rbegin(); it != items.rend(); ++it) {
    if (*it == kPaddingItem || *it > branch.num_items) {
      throw InvalidArgument("encode_transaction: unknown item id " + std::to_string(*it));
    }
    if (std::find(latest.begin(), latest.end(), *it) == latest.end()) latest.push_back(*it);
  }
  if (latest.size() > branch.max_items) latest.resize(branch.max_items);
  std::vector<std::size_t> rows(latest.begin(), latest.end());
  std::sort(rows.begin(), rows.end());
  ad::Var gathered = ad::gather_rows(branch.item_embeddings, rows);
  ad::Var flat = ad::reshape(gathered, {rows.size() * branch.dim});
  if (rows.size() == branch.max_items) return flat;
  return ad::pad(flat, branch.max_items * branch.dim);
}

ad::Var apply_attention(const BranchVars& branch, ad::Var encoded) {
  return ad::mul(encoded, branch.attention);
}

ScaleState lstm_step(const BranchVars& branch, ad::Var input, const ScaleState& state) {
  const std::size_t d = branch.dim;
  ad::Var z = ad::add(ad::add(ad::matmul(branch.lstm_input, input),
                              ad::matmul(branch.lstm_recurrent, state.hidden)),
                      branch.lstm_bias);
  ad::Var in_gate = ad::sigmoid(ad::slice(z, 0, d));
  ad::Var forget_gate = ad::sigmoid(ad::slice(z, d, d));
  ad::Var out_gate = ad::sigmoid(ad::slice(z, 2 * d, d));
  ad::Var candidate = ad::tanh(ad::slice(z, 3 * d, d));
  ad::Var cell = ad::add(ad::mul(forget_gate, state.cell), ad::mul(in_gate, candidate));
  ad::Var hidden = ad::mul(out_gate, ad::tanh(cell));
  return {hidden, cell};
}

ad::Var user_interaction(const BranchVars& branch, UserId user, ad::Var hidden) {
  if (user == 0 || user > branch.num_users) {
    throw InvalidArgument("user_interaction: unknown user id " + std::to_string(user));
  }
  const std::size_t row = user;
  ad::Var vu = ad::reshape(ad::gather_rows(branch.user_embeddings, {&row, 1}), {branch.dim});
  return ad::mul(vu, hidden);
}

ad::Var predict_scores(const BranchVars& branch, ad::Var interaction) {
  return ad::softmax(ad::matmul(branch.scoring, interaction));
}

std::vector<ad::Var> forward_sequence(const BranchVars& branch,
                                      std::span<const std::vector<ItemId>> transactions,
                                      UserId user) {
  if (transactions.empty()) throw InvalidArgument("forward_sequence: empty sequence");
  ad::Tape& tape = *branch.item_embeddings.tape;
  ScaleState state = initial_state(tape, branch.dim);
  std::vector<ad::Var> out;
  out.reserve(transactions.size());
  for (const auto& t : transactions) {
    ad::Var x = apply_attention(branch, encode_transaction(branch, t));
    state = lstm_step(branch, x, state);
    out.push_back(predict_scores(branch, user_interaction(branch, user, state.hidden)));
  }
  return out;
}

}  // namespace lsdm
