#include "crackbench/nn/network.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "crackbench/dataset.hpp"
#include "crackbench/errors.hpp"
#include "crackbench/log.hpp"

namespace crackbench::nn {

CrackNetImpl::CrackNetImpl(std::shared_ptr<Backbone> backbone_module)
    : backbone(register_module("backbone", std::move(backbone_module))),
      head(register_module("head", torch::nn::Linear(backbone->feature_channels(), 1))) {}

torch::Tensor CrackNetImpl::features(const torch::Tensor& x) {
  return backbone->forward(x).mean({2, 3});
}

torch::Tensor CrackNetImpl::head_logits(const torch::Tensor& pooled) {
  return head(pooled).squeeze(1);
}

torch::Tensor CrackNetImpl::forward(const torch::Tensor& x) { return head_logits(features(x)); }

TensorMap named_state(const torch::nn::Module& module) {
  TensorMap out;
  for (const auto& item : module.named_parameters(/*recurse=*/true)) {
    out.emplace(item.key(), item.value());
  }
  for (const auto& item : module.named_buffers(/*recurse=*/true)) {
    out.emplace(item.key(), item.value());
  }
  return out;
}

std::string state_checksum(const TensorMap& state) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 initialization failed");
  }
  auto update = [&](const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx.get(), data, size) != 1) {
      throw Error("SHA-256 update failed");
    }
  };
  for (const auto& [name, tensor] : state) {
    const auto t = tensor.detach().cpu().contiguous();
    const std::string header =
        name + '\0' + std::string(c10::toString(t.scalar_type())) + '\0' +
        c10::str(t.sizes());
    update(header.data(), header.size() + 1);
    update(t.data_ptr(), t.nbytes());
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-256 finalization failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

void save_state(const std::filesystem::path& path, const TensorMap& state) {
  c10::Dict<std::string, torch::Tensor> dict;
  for (const auto& [name, tensor] : state) {
    dict.insert(name, tensor.detach().cpu().contiguous());
  }
  const auto bytes = torch::pickle_save(dict);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw DataError("cannot write checkpoint " + path.string());
  }
}

TensorMap load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read checkpoint " + path.string());
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  TensorMap out;
  try {
    const auto value = torch::pickle_load(bytes);
    if (!value.isGenericDict()) {
      throw ConfigError("checkpoint " + path.string() + " is not a name -> tensor dictionary");
    }
    for (const auto& entry : value.toGenericDict()) {
      if (!entry.key().isString() || !entry.value().isTensor()) {
        throw ConfigError("checkpoint " + path.string() + " has a non-tensor entry");
      }
      out.emplace(entry.key().toStringRef(), entry.value().toTensor());
    }
  } catch (const c10::Error& e) {
    throw ConfigError("cannot decode checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return out;
}

std::size_t assign_state(torch::nn::Module& module, const TensorMap& state,
                         const std::string& origin) {
  torch::NoGradGuard no_grad;
  const auto target = named_state(module);
  for (const auto& [name, tensor] : target) {
    auto it = state.find(name);
    if (it == state.end()) {
      throw ConfigError(origin + " lacks tensor '" + name + "'");
    }
    if (it->second.sizes() != tensor.sizes()) {
      throw ConfigError(origin + ": tensor '" + name + "' has shape " +
                        c10::str(it->second.sizes()) + ", expected " + c10::str(tensor.sizes()));
    }
    tensor.copy_(it->second);
  }
  std::size_t ignored = 0;
  for (const auto& [name, tensor] : state) {
    ignored += target.contains(name) ? 0 : 1;
  }
  if (ignored > 0) {
    log::debug(origin + ": ignored " + std::to_string(ignored) +
               " tensor(s) not used by the network");
  }
  return ignored;
}

torch::Tensor to_input_batch(std::span<const ImagePatch* const> patches,
                             const std::string& backbone, int patch_size) {
  const auto pre = BackboneRegistry::instance().get(backbone).preprocessing();
  const auto side = static_cast<std::int64_t>(pre.input_size);
  auto batch = torch::empty({static_cast<std::int64_t>(patches.size()), side, side, 3},
                            torch::kFloat32);
  const NormalizeScheme scheme = BackboneSpecific{backbone};
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& px = patches[i]->pixels;
    if (px.height() != patch_size || px.width() != patch_size) {
      throw DataError("patch is " + std::to_string(px.height()) + "x" +
                      std::to_string(px.width()) + ", model expects " +
                      std::to_string(patch_size) + "x" + std::to_string(patch_size));
    }
    const auto norm = normalize(*patches[i], scheme);
    auto* dst = batch[static_cast<std::int64_t>(i)].data_ptr<float>();
    for (std::size_t k = 0; k < norm.values.size(); ++k) {
      dst[k] = static_cast<float>(norm.values[k]);
    }
  }
  return batch.permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor to_input_batch(std::span<const ImagePatch> patches, const std::string& backbone,
                             int patch_size) {
  std::vector<const ImagePatch*> ptrs;
  ptrs.reserve(patches.size());
  for (const auto& p : patches) {
    ptrs.push_back(&p);
  }
  return to_input_batch(std::span<const ImagePatch* const>(ptrs), backbone, patch_size);
}

} // namespace crackbench::nn
