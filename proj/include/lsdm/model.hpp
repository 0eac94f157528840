#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lsdm/params.hpp"
#include "lsdm/purchase_log.hpp"
#include "lsdm/tape.hpp"

namespace lsdm {

/// Tape handles for the tensors of one branch. Built once per tape; reused
/// across every step of every sequence recorded on it.
struct BranchVars {
  ad::Var item_embeddings;
  ad::Var user_embeddings;
  ad::Var attention;  // flattened to max_items * D
  ad::Var lstm_input;
  ad::Var lstm_recurrent;
  ad::Var lstm_bias;
  ad::Var scoring;    // item_embeddings rows 1..|I|
  std::size_t dim = 0;
  std::size_t max_items = 0;
  std::size_t num_items = 0;
  std::size_t num_users = 0;
};

struct JoinVars {
  JoinStrategy strategy = JoinStrategy::Average;
  std::vector<ad::Var> scale_weights;
  ad::Var hidden_weights;
  ad::Var hidden_bias;
  ad::Var output_weights;
};

struct ModelVars {
  std::vector<BranchVars> branches;
  JoinVars join;
};

/// Binds every tensor of `params` onto `tape`. When `grads` is non-null it
/// must have the layout of `params`; backward() accumulates into it. Shared
/// embeddings are bound once.
ModelVars bind_model(ad::Tape& tape, const LsdmParams& params, LsdmParams* grads);

/// Assembles model handles from leaves listed in LsdmParams::for_each order.
ModelVars vars_from_leaves(const LsdmParams& layout, std::span<const ad::Var> leaves);

/// Copies of every tensor in LsdmParams::for_each order.
std::vector<Tensor> flatten(const LsdmParams& params);

struct ScaleState {
  ad::Var hidden;
  ad::Var cell;
};

ScaleState initial_state(ad::Tape& tape, std::size_t dim);

/// Embeds a transaction into a D * max_items vector: distinct items (the
/// latest `max_items` when there are more, given oldest-first), ascending
/// id order, embeddings concatenated and zero-padded.
ad::Var encode_transaction(const BranchVars& branch, std::span<const ItemId> items);

/// Hadamard product with the shared attention matrix.
ad::Var apply_attention(const BranchVars& branch, ad::Var encoded);

/// Standard LSTM cell: sigmoid gates, tanh candidate and output squash.
ScaleState lstm_step(const BranchVars& branch, ad::Var input, const ScaleState& state);

/// v_u ⊙ hidden.
ad::Var user_interaction(const BranchVars& branch, UserId user, ad::Var hidden);

/// Softmax over the dot products of `interaction` with every item embedding.
/// Entry k is the probability of item k+1.
ad::Var predict_scores(const BranchVars& branch, ad::Var interaction);

/// Runs encode -> attend -> LSTM -> user interaction -> softmax over each
/// transaction from a zero state. Output j predicts transaction j+1.
std::vector<ad::Var> forward_sequence(const BranchVars& branch,
                                      std::span<const std::vector<ItemId>> transactions,
                                      UserId user);

}  // namespace lsdm
