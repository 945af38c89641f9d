#include "crackbench/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>


#include "crackbench/log.hpp"
#include "crackbench/nn/model_impl.hpp"
#include "crackbench/rng.hpp"

namespace crackbench {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kEvalChunk = 32;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

torch::Tensor label_tensor(const PatchSubset& set) {
  auto t = torch::empty({static_cast<std::int64_t>(set.size())}, torch::kFloat32);
  auto* data = t.data_ptr<float>();
  for (std::size_t i = 0; i < set.size(); ++i) {
    data[i] = set[i].label == Label::positive ? 1.0F : 0.0F;
  }
  return t;
}

torch::Tensor input_batch(const PatchSubset& set, std::span<const std::size_t> positions,
                          const ClassifierModel& model) {
  std::vector<const ImagePatch*> ptrs;
  ptrs.reserve(positions.size());
  for (auto pos : positions) {
    ptrs.push_back(&set[pos]);
  }
  return nn::to_input_batch(std::span<const ImagePatch* const>(ptrs), model.backbone().name,
                            model.patch_size());
}

// Pooled backbone features of every item, computed in inference mode.
torch::Tensor pooled_features(nn::CrackNetImpl& net, const PatchSubset& set,
                              const ClassifierModel& model, std::size_t chunk) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  std::vector<std::size_t> positions(set.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    const auto len = std::min(chunk, set.size() - start);
    const std::span<const std::size_t> slice(positions.data() + start, len);
    parts.push_back(net.features(input_batch(set, slice, model)));
  }
  return torch::cat(parts);
}

double accuracy_of(const torch::Tensor& logits, const torch::Tensor& labels) {
  // sigmoid(z) >= 0.5 iff z >= 0
  const auto predicted = logits.ge(0.0).to(torch::kFloat32);
  return predicted.eq(labels).to(torch::kFloat64).mean().item<double>();
}

void check_trainable_set(const PatchSubset& set) {
  if (set.empty()) {
    throw UsageError("training set is empty");
  }
  bool has_positive = false;
  bool has_negative = false;
  for (std::size_t i = 0; i < set.size(); ++i) {
    (set[i].label == Label::positive ? has_positive : has_negative) = true;
  }
  if (!has_positive || !has_negative) {
    throw UsageError("training set contains a single class");
  }
}

} // namespace

PatchSubset PatchSubset::all(std::span<const ImagePatch> patches) {
  PatchSubset s{patches, std::vector<std::size_t>(patches.size())};
  std::iota(s.indices.begin(), s.indices.end(), std::size_t{0});
  return s;
}

std::vector<ImagePatch> PatchSubset::materialize() const {
  std::vector<ImagePatch> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    out.push_back(patches[i]);
  }
  return out;
}

TrainRunRecord train(ClassifierModel& model, const PatchSubset& train_set,
                     const PatchSubset& val_set, const TrainConfig& config) {
  config.validate();
  check_trainable_set(train_set);
  const auto start = Clock::now();

  TrainRunRecord record;
  record.config = config;
  record.mode = model.mode();
  record.model_id = model.backbone().name + "/" + std::string(to_string(model.mode())) + "/seed" +
                    std::to_string(model.seed());

  auto& net = *model.impl().net;
  const bool frozen = model.mode() == TrainMode::frozen_features;
  record.head_trained = !(frozen && !config.frozen_head_training);

  if (config.epochs == 0 || !record.head_trained) {
    net.eval();
    record.final_weights_checksum = model.weights_checksum();
    record.wall_clock_seconds = seconds_since(start);
    return record;
  }

  torch::manual_seed(config.seed);
  const auto lr = config.resolved_learning_rate(model.mode());
  std::vector<torch::Tensor> params;
  for (auto& p : net.parameters()) {
    if (p.requires_grad()) {
      params.push_back(p);
    }
  }
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(lr));

  const auto train_labels = label_tensor(train_set);
  const auto val_labels = label_tensor(val_set);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  torch::Tensor train_features;
  torch::Tensor val_features;
  if (frozen) {
    net.backbone->eval();
    train_features = pooled_features(net, train_set, model, batch);
    if (!val_set.empty()) {
      val_features = pooled_features(net, val_set, model, batch);
    }
  }

  auto val_accuracy = [&]() -> std::optional<double> {
    if (val_set.empty()) {
      return std::nullopt;
    }
    torch::NoGradGuard no_grad;
    if (frozen) {
      return accuracy_of(net.head_logits(val_features), val_labels);
    }
    net.eval();
    std::vector<torch::Tensor> logits;
    std::vector<std::size_t> positions(val_set.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    for (std::size_t s = 0; s < val_set.size(); s += batch) {
      const auto len = std::min(batch, val_set.size() - s);
      logits.push_back(
          net.forward(input_batch(val_set, std::span(positions.data() + s, len), model)));
    }
    return accuracy_of(torch::cat(logits), val_labels);
  };

  SplitRng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::optional<double> best_val;
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    if (frozen) {
      net.head->train();
    } else {
      net.train();
    }
    double loss_sum = 0.0;
    double correct = 0.0;
    for (std::size_t s = 0; s < order.size(); s += batch) {
      const auto len = std::min(batch, order.size() - s);
      const std::span<const std::size_t> slice(order.data() + s, len);
      const auto index = torch::tensor(
          std::vector<std::int64_t>(slice.begin(), slice.end()), torch::kInt64);
      const auto targets = train_labels.index_select(0, index);
      const auto logits = frozen ? net.head_logits(train_features.index_select(0, index))
                                 : net.forward(input_batch(train_set, slice, model));
      const auto loss = torch::binary_cross_entropy_with_logits(logits, targets);
      const double loss_value = loss.item<double>();
      if (!std::isfinite(loss_value)) {
        record.wall_clock_seconds = seconds_since(start);
        record.final_weights_checksum = model.weights_checksum();
        throw TrainingDiverged("loss became non-finite in epoch " + std::to_string(epoch) +
                                   " (last finite epoch: " + std::to_string(epoch - 1) + ")",
                               record);
      }
      optimizer.zero_grad();
      loss.backward();
      optimizer.step();
      loss_sum += loss_value * static_cast<double>(len);
      correct += accuracy_of(logits.detach(), targets) * static_cast<double>(len);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = correct / static_cast<double>(order.size());
    stats.val_accuracy = val_accuracy();
    record.per_epoch.push_back(stats);
    log::info(record.model_id + " epoch " + std::to_string(epoch) + "/" +
              std::to_string(config.epochs) + ": loss " + log::fixed(stats.train_loss, 5) +
              " train_acc " + log::fixed(stats.train_accuracy, 4) + " val_acc " +
              (stats.val_accuracy ? log::fixed(*stats.val_accuracy, 4) : std::string("n/a")));

    if (config.early_stopping_patience > 0 && stats.val_accuracy) {
      if (!best_val || *stats.val_accuracy > *best_val) {
        best_val = stats.val_accuracy;
        epochs_since_best = 0;
      } else if (++epochs_since_best >= config.early_stopping_patience) {
        record.stopped_early = true;
        break;
      }
    }
  }

  net.eval();
  record.final_weights_checksum = model.weights_checksum();
  record.wall_clock_seconds = seconds_since(start);
  return record;
}

Evaluation evaluate_detailed(const PatchScorer& model, const PatchSubset& test_set,
                             double threshold, double margin) {
  if (test_set.empty()) {
    throw UsageError("test set is empty");
  }
  Evaluation ev;
  ev.scores.reserve(test_set.size());
  std::vector<ImagePatch> chunk;
  for (std::size_t s = 0; s < test_set.size(); s += kEvalChunk) {
    const auto len = std::min(kEvalChunk, test_set.size() - s);
    chunk.clear();
    for (std::size_t i = s; i < s + len; ++i) {
      chunk.push_back(test_set[i]);
    }
    const auto probs = model.predict(chunk);
    if (probs.size() != len) {
      throw DataError("scorer returned " + std::to_string(probs.size()) + " probabilities for " +
                      std::to_string(len) + " patches");
    }
    ev.scores.insert(ev.scores.end(), probs.begin(), probs.end());
  }
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const double p = ev.scores[i];
    const bool predicted_positive = classify(p, threshold) == Label::positive;
    const bool actual_positive = test_set[i].label == Label::positive;
    if (predicted_positive) {
      ++(actual_positive ? ev.confusion.tp : ev.confusion.fp);
    } else {
      ++(actual_positive ? ev.confusion.fn : ev.confusion.tn);
    }
    if (within_abstain_band(p, threshold, margin)) {
      ++ev.low_confidence;
    }
  }
  const auto total = ev.confusion.tp + ev.confusion.fp + ev.confusion.tn + ev.confusion.fn;
  if (total != test_set.size()) {
    throw TrainingError("confusion counts do not cover the test set");
  }
  return ev;
}

ConfusionMatrix evaluate(const PatchScorer& model, const PatchSubset& test_set, double threshold) {
  return evaluate_detailed(model, test_set, threshold, 0.0).confusion;
}

} // namespace crackbench
