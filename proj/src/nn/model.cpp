#include "crackbench/model.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "crackbench/errors.hpp"
#include "crackbench/log.hpp"
#include "crackbench/nn/model_impl.hpp"
#include "crackbench/results.hpp"

namespace crackbench {

namespace {

constexpr std::int64_t kInferenceChunk = 16;

void apply_trainability(nn::CrackNetImpl& net, TrainMode mode) {
  const bool backbone_learns = mode == TrainMode::fine_tune_all;
  for (auto& p : net.backbone->parameters()) {
    p.set_requires_grad(backbone_learns);
  }
  for (auto& p : net.head->parameters()) {
    p.set_requires_grad(true);
  }
}

std::int64_t numel_of(const std::vector<torch::Tensor>& tensors, bool only_trainable) {
  std::int64_t n = 0;
  for (const auto& t : tensors) {
    if (!only_trainable || t.requires_grad()) {
      n += t.numel();
    }
  }
  return n;
}

} // namespace

std::filesystem::path default_weight_store() {
  if (const char* env = std::getenv(kWeightStoreEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return "weights";
}

std::filesystem::path checkpoint_path(const std::filesystem::path& store, std::string_view name) {
  return store / (std::string(name) + ".pt");
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

std::vector<std::filesystem::path> init_weight_store(const std::filesystem::path& store,
                                                     std::span<const std::string> names,
                                                     std::uint64_t seed) {
  std::vector<std::filesystem::path> written;
  for (const auto& name : names) {
    BackboneRegistry::instance().get(name);
    torch::manual_seed(seed);
    auto backbone = nn::make_backbone(name);
    const auto path = checkpoint_path(store, name);
    nn::save_state(path, nn::named_state(*backbone));
    log::info("wrote " + path.string() + " (" + name + ")");
    written.push_back(path);
  }
  return written;
}

std::string checkpoint_checksum(const std::filesystem::path& checkpoint) {
  return nn::state_checksum(nn::load_state(checkpoint));
}

ClassifierModel::ClassifierModel(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
ClassifierModel::ClassifierModel(ClassifierModel&&) noexcept = default;
ClassifierModel& ClassifierModel::operator=(ClassifierModel&&) noexcept = default;
ClassifierModel::~ClassifierModel() = default;

const BackboneDescriptor& ClassifierModel::backbone() const { return impl_->descriptor; }
TrainMode ClassifierModel::mode() const { return impl_->mode; }
std::uint64_t ClassifierModel::seed() const { return impl_->seed; }
double ClassifierModel::decision_threshold() const { return impl_->decision_threshold; }

void ClassifierModel::set_decision_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw UsageError("decision threshold must lie in (0, 1)");
  }
  impl_->decision_threshold = threshold;
}

int ClassifierModel::patch_size() const { return impl_->patch_size; }

std::vector<double> ClassifierModel::predict(std::span<const ImagePatch> batch) const {
  std::vector<double> out;
  if (batch.empty()) {
    return out;
  }
  out.reserve(batch.size());
  std::lock_guard lock(impl_->inference_mutex);
  auto& net = *impl_->net;
  const bool was_training = net.is_training();
  net.eval();
  {
    torch::InferenceMode guard;
    for (std::size_t start = 0; start < batch.size();
         start += static_cast<std::size_t>(kInferenceChunk)) {
      const auto len = std::min<std::size_t>(kInferenceChunk, batch.size() - start);
      const auto input =
          nn::to_input_batch(batch.subspan(start, len), impl_->descriptor.name, impl_->patch_size);
      const auto probs = torch::sigmoid(net.forward(input)).to(torch::kFloat64).contiguous();
      const auto* data = probs.data_ptr<double>();
      out.insert(out.end(), data, data + probs.numel());
    }
  }
  net.train(was_training);
  if (impl_->mode == TrainMode::frozen_features) {
    net.backbone->eval();
  }
  return out;
}

ParameterCounts ClassifierModel::parameter_counts() const {
  const auto& net = *impl_->net;
  ParameterCounts counts;
  const auto all = net.parameters();
  counts.total = numel_of(all, false);
  counts.trainable = numel_of(all, true);
  counts.frozen = counts.total - counts.trainable;
  counts.head = numel_of(net.head->parameters(), false);
  return counts;
}

std::string ClassifierModel::backbone_checksum() const {
  return nn::state_checksum(nn::named_state(*impl_->net->backbone));
}

const std::string& ClassifierModel::pretrained_checksum() const {
  return impl_->pretrained_checksum;
}

std::string ClassifierModel::head_checksum() const {
  return nn::state_checksum(nn::named_state(*impl_->net->head));
}

std::string ClassifierModel::weights_checksum() const {
  return nn::state_checksum(nn::named_state(*impl_->net));
}

void ClassifierModel::save(const std::filesystem::path& checkpoint,
                           const std::string& training_config_digest) const {
  nn::save_state(checkpoint, nn::named_state(*impl_->net));
  nlohmann::ordered_json sidecar;
  sidecar["backbone"] = impl_->descriptor.name;
  sidecar["mode"] = std::string(to_string(impl_->mode));
  sidecar["seed"] = impl_->seed;
  sidecar["decision_threshold"] = impl_->decision_threshold;
  sidecar["preprocessing_id"] = impl_->descriptor.preprocessing_id;
  sidecar["training_config_digest"] = training_config_digest;
  sidecar["patch_size"] = impl_->patch_size;
  sidecar["pretrained_backbone_checksum"] = impl_->pretrained_checksum;
  write_text_file(sidecar_path(checkpoint), sidecar.dump(2) + "\n");
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& checkpoint) {
  const auto meta_path = sidecar_path(checkpoint);
  if (!std::filesystem::exists(meta_path)) {
    throw ConfigError("model sidecar not found: " + meta_path.string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model sidecar " + meta_path.string() + ": " + e.what());
  }
  auto impl = std::make_unique<Impl>();
  try {
    impl->descriptor = BackboneRegistry::instance().get(meta.at("backbone").get<std::string>());
    impl->mode = train_mode_from_string(meta.at("mode").get<std::string>());
    impl->seed = meta.at("seed").get<std::uint64_t>();
    impl->decision_threshold = meta.at("decision_threshold").get<double>();
    impl->patch_size = meta.value("patch_size", kDefaultPatchSize);
    impl->pretrained_checksum = meta.value("pretrained_backbone_checksum", std::string{});
    const auto pre = meta.at("preprocessing_id").get<std::string>();
    if (pre != impl->descriptor.preprocessing_id) {
      throw ConfigError("model " + checkpoint.string() + " was trained with preprocessing " + pre +
                        " but " + impl->descriptor.name + " now uses " +
                        impl->descriptor.preprocessing_id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model sidecar " + meta_path.string() + ": " + e.what());
  }
  impl->net = nn::CrackNet(nn::make_backbone(impl->descriptor.name));
  nn::assign_state(*impl->net, nn::load_state(checkpoint), checkpoint.string());
  apply_trainability(*impl->net, impl->mode);
  impl->net->eval();
  return ClassifierModel(std::move(impl));
}

ClassifierModel build_classifier(std::string_view name, TrainMode mode, std::uint64_t seed,
                                 const BuildOptions& options) {
  auto impl = std::make_unique<ClassifierModel::Impl>();
  impl->descriptor = BackboneRegistry::instance().get(name);
  impl->mode = mode;
  impl->seed = seed;
  impl->patch_size = options.patch_size;
  if (options.patch_size <= 0) {
    throw UsageError("patch size must be positive");
  }
  impl->decision_threshold = options.decision_threshold;
  if (!(options.decision_threshold > 0.0 && options.decision_threshold < 1.0)) {
    throw UsageError("decision threshold must lie in (0, 1)");
  }
  const auto path = checkpoint_path(options.weight_store, name);
  if (!std::filesystem::exists(path)) {
    throw ConfigError("pretrained checkpoint for " + std::string(name) + " not found at " +
                      path.string() + " (set " + kWeightStoreEnv +
                      " or run `crackbench init-weights`)");
  }
  auto backbone = nn::make_backbone(name);
  const auto state = nn::load_state(path);
  nn::assign_state(*backbone, state, path.string());
  impl->pretrained_checksum = nn::state_checksum(nn::named_state(*backbone));

  torch::manual_seed(seed);
  impl->net = nn::CrackNet(std::move(backbone));
  apply_trainability(*impl->net, mode);
  impl->net->eval();
  return ClassifierModel(std::move(impl));
}

} // namespace crackbench
