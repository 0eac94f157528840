#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsdm/tensor.hpp"
#include "lsdm/training.hpp"

namespace lsdm {

/// Named tensor container: "LSDC", uint32 version, uint64 count, then per
/// entry uint32 name length, name bytes, and one tensor in the write_tensor
/// layout. Little-endian.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
void write_named_tensors(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_named_tensors(std::istream& in);

/// Layout of a checkpoint directory `<root>/epoch-<k>/`:
///   params.lsdc     model tensors (LsdmParams::for_each names)
///   optimizer.lsdc  Adam moments as m/<name>, v/<name> (absent before step 1)
///   manifest.json   scales with max_items, dim, |U|, |I|, join strategy,
///                   window anchor, optimizer step, epochs done, loss
///                   history, training config
/// `<root>/latest.json` names the newest complete epoch directory.
std::filesystem::path save_checkpoint(const std::filesystem::path& root, const TrainState& state,
                                      const TrainConfig& config);

/// Loads an epoch directory written by save_checkpoint.
TrainState load_checkpoint(const std::filesystem::path& epoch_dir);

/// Epoch directory named by `<root>/latest.json`, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& root);

/// Throws InvalidArgument when `state` was not trained with the same model
/// shape as `config` would build.
void check_resumable(const TrainState& state, const TrainConfig& config);

}  // namespace lsdm
