#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lsdm/bucketing.hpp"
#include "lsdm/tensor.hpp"

namespace lsdm {

enum class JoinStrategy { Average, Max, Weighted, Mlp };

std::string_view join_name(JoinStrategy s);
JoinStrategy parse_join(std::string_view text);

/// Learnable tensors of one time-scale branch.
///
///   item_embeddings  (|I|+1) x D, row 0 is padding and stays zero; rows
///                    1..|I| double as the output scoring matrix
///   user_embeddings  (|U|+1) x D
///   attention        max_items x D, shared by every transaction
///   lstm_input       4D x (D * max_items), gate blocks in order i, f, o, g
///   lstm_recurrent   4D x D
///   lstm_bias        4D
///
/// With shared embeddings only branch 0 owns item/user embeddings; the
/// others leave those tensors empty.
struct ScaleParams {
  TimeScale scale;
  std::size_t max_items = 1;
  Tensor item_embeddings;
  Tensor user_embeddings;
  Tensor attention;
  Tensor lstm_input;
  Tensor lstm_recurrent;
  Tensor lstm_bias;
};

/// Parameters of the joint function. Weighted uses `scale_weights` (one
/// |I|-vector per scale). Mlp uses hidden_weights H x (|T| |I|),
/// hidden_bias H and output_weights |I| x H.
struct JoinParams {
  JoinStrategy strategy = JoinStrategy::Average;
  std::vector<Tensor> scale_weights;
  Tensor hidden_weights;
  Tensor hidden_bias;
  Tensor output_weights;
};

struct ModelDims {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t dim = 0;
};

/// Every learnable tensor of the full model. Gradients and optimizer moments
/// use the same layout (see zeros_like).
struct LsdmParams {
  ModelDims dims;
  bool share_embeddings = false;
  std::vector<ScaleParams> scales;
  JoinParams join;

  const Tensor& item_embeddings(std::size_t scale) const;
  const Tensor& user_embeddings(std::size_t scale) const;

  /// Same structure, all values zero.
  LsdmParams zeros_like() const;

  /// Visits each non-empty tensor with a stable name, in a fixed order.
  void for_each(const std::function<void(const std::string&, Tensor&)>& f);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& f) const;
};

struct InitOptions {
  double scale = 0.08;
  double forget_bias = 1.0;
  std::uint64_t seed = 1;
  /// MLP hidden width; 0 means |I|.
  std::size_t hidden_width = 0;
};

/// Uniform[-scale, scale] for weights and embeddings, zero padding rows,
/// forget-gate bias `forget_bias`, other biases zero.
LsdmParams init_params(const ModelDims& dims, std::span<const TimeScale> scales,
                       std::span<const std::size_t> max_items, JoinStrategy join,
                       bool share_embeddings, const InitOptions& options);

/// Builds join parameters for `num_scales` rows over `num_items` items.
JoinParams init_join(JoinStrategy strategy, std::size_t num_scales, std::size_t num_items,
                     const InitOptions& options);

}  // namespace lsdm
