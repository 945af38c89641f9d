#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>

#include <torch/torch.h>

#include "crackbench/backbone.hpp"
#include "crackbench/image.hpp"
#include "crackbench/nn/backbones.hpp"

namespace crackbench::nn {

/// Backbone -> global average pooling -> one fully connected unit. The
/// sigmoid of the unit's output is the crack probability.
class CrackNetImpl : public torch::nn::Module {
public:
  explicit CrackNetImpl(std::shared_ptr<Backbone> backbone);

  /// Pooled backbone features, [N, C].
  torch::Tensor features(const torch::Tensor& x);
  /// Head logits for pooled features, [N].
  torch::Tensor head_logits(const torch::Tensor& features);
  /// Logits for normalized input images, [N].
  torch::Tensor forward(const torch::Tensor& x);

  std::shared_ptr<Backbone> backbone;
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(CrackNet);

/// Named tensors (parameters and buffers) of a module, keyed by their
/// dotted path.
using TensorMap = std::map<std::string, torch::Tensor>;

TensorMap named_state(const torch::nn::Module& module);

/// SHA-256 over names, dtypes, shapes and raw bytes, in name order.
std::string state_checksum(const TensorMap& state);

/// Pickled {name: tensor} dictionary, interchangeable with Python's
/// torch.save and torch.load(..., weights_only=False).
void save_state(const std::filesystem::path& path, const TensorMap& state);
TensorMap load_state(const std::filesystem::path& path);

/// Copies tensors into module's parameters and buffers. Every module entry
/// must be present with matching shape; keys the module does not have are
/// ignored and counted in the return value. Throws ConfigError otherwise.
std::size_t assign_state(torch::nn::Module& module, const TensorMap& state,
                         const std::string& origin);

/// Normalized [N, 3, S, S] float batch for the given preprocessing contract.
/// Every patch must be patch_size x patch_size; throws DataError otherwise.
torch::Tensor to_input_batch(std::span<const ImagePatch> patches, const std::string& backbone,
                             int patch_size);
torch::Tensor to_input_batch(std::span<const ImagePatch* const> patches,
                             const std::string& backbone, int patch_size);

} // namespace crackbench::nn
