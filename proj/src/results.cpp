#include "crackbench/results.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "crackbench/errors.hpp"

namespace crackbench {

namespace {

using nlohmann::json;

json metric_json(const MetricValue& v) { return v ? json(*v) : json(); }

MetricValue metric_from(const json& j) {
  if (j.is_null()) {
    return std::nullopt;
  }
  return j.get<double>();
}

json config_json(const TrainConfig& c) {
  return {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate ? json(*c.learning_rate) : json()},
      {"optimizer_id", c.optimizer_id},
      {"loss_id", c.loss_id},
      {"seed", c.seed},
      {"margin", c.margin},
      {"sampling", c.sampling},
      {"frozen_head_training", c.frozen_head_training},
      {"early_stopping_patience", c.early_stopping_patience},
      {"decision_threshold", c.decision_threshold},
  };
}

TrainConfig config_from(const json& j) {
  static const std::vector<std::string> kKnown{
      "epochs",   "batch_size", "learning_rate",        "optimizer_id",
      "loss_id",  "seed",       "margin",               "sampling",
      "frozen_head_training",   "early_stopping_patience", "decision_threshold"};
  if (!j.is_object()) {
    throw DataError("train config must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw DataError("unknown train config key '" + key + "'");
    }
  }
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("learning_rate") && !j.at("learning_rate").is_null()) {
    c.learning_rate = j.at("learning_rate").get<double>();
  }
  c.optimizer_id = j.value("optimizer_id", c.optimizer_id);
  c.loss_id = j.value("loss_id", c.loss_id);
  c.seed = j.value("seed", c.seed);
  c.margin = j.value("margin", c.margin);
  c.sampling = j.value("sampling", c.sampling);
  c.frozen_head_training = j.value("frozen_head_training", c.frozen_head_training);
  c.early_stopping_patience = j.value("early_stopping_patience", c.early_stopping_patience);
  c.decision_threshold = j.value("decision_threshold", c.decision_threshold);
  return c;
}

} // namespace

double TrainConfig::resolved_learning_rate(TrainMode mode) const {
  if (learning_rate) {
    return *learning_rate;
  }
  return mode == TrainMode::fine_tune_all ? 1e-4 : 1e-3;
}

void TrainConfig::validate() const {
  if (epochs < 0) {
    throw UsageError("epochs must be >= 0");
  }
  if (batch_size < 1) {
    throw UsageError("batch_size must be >= 1");
  }
  if (learning_rate && !(*learning_rate > 0.0)) {
    throw UsageError("learning_rate must be positive");
  }
  if (optimizer_id != "adam") {
    throw UsageError("unsupported optimizer '" + optimizer_id + "' (supported: adam)");
  }
  if (loss_id != "binary_cross_entropy") {
    throw UsageError("unsupported loss '" + loss_id + "' (supported: binary_cross_entropy)");
  }
  if (sampling != "random_shuffle_per_epoch") {
    throw UsageError("unsupported sampling '" + sampling +
                     "' (supported: random_shuffle_per_epoch)");
  }
  if (!(margin >= 0.0 && margin < 1.0)) {
    throw UsageError("margin must lie in [0, 1)");
  }
  if (early_stopping_patience < 0) {
    throw UsageError("early_stopping_patience must be >= 0");
  }
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
    throw UsageError("decision_threshold must lie in (0, 1)");
  }
}

std::string TrainConfig::digest() const { return sha256_hex(config_json(*this).dump()); }

std::string train_config_to_json(const TrainConfig& config) {
  return config_json(config).dump(2) + "\n";
}

TrainConfig train_config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed train config: ") + e.what());
  }
}

std::string run_result_filename(std::string_view backbone, TrainMode mode, std::uint64_t seed) {
  return fmt::format("{}__{}__seed{}.json", backbone, to_string(mode), seed);
}

std::string run_result_to_json(const RunResult& r) {
  json per_epoch = json::array();
  for (const auto& e : r.per_epoch) {
    per_epoch.push_back({{"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"train_accuracy", e.train_accuracy},
                         {"val_accuracy", metric_json(e.val_accuracy)}});
  }
  json predictions = json::array();
  for (const auto& p : r.predictions) {
    predictions.push_back({{"path", p.path}, {"label", to_string(p.label)}, {"score", p.score}});
  }
  json j{
      {"backbone", r.backbone},
      {"mode", to_string(r.mode)},
      {"seed", r.seed},
      {"config", config_json(r.config)},
      {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn},
                     {"fn", r.confusion.fn}}},
      {"metrics", {{"accuracy", metric_json(r.metrics.accuracy)},
                   {"precision", metric_json(r.metrics.precision)},
                   {"recall", metric_json(r.metrics.recall)},
                   {"f1", metric_json(r.metrics.f1)}}},
      {"per_epoch", std::move(per_epoch)},
      {"timestamps", {{"started", r.started_at}, {"finished", r.finished_at}}},
      {"wall_clock_seconds", r.wall_clock_seconds},
      {"dataset_root", r.dataset_root},
      {"split_manifest", r.split_manifest},
      {"low_confidence", r.low_confidence},
      {"predictions", std::move(predictions)},
  };
  return j.dump(2) + "\n";
}

RunResult run_result_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    RunResult r;
    r.backbone = j.at("backbone").get<std::string>();
    r.mode = train_mode_from_string(j.at("mode").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = config_from(j.at("config"));
    const auto& cm = j.at("confusion");
    r.confusion = {cm.at("tp").get<std::uint64_t>(), cm.at("fp").get<std::uint64_t>(),
                   cm.at("tn").get<std::uint64_t>(), cm.at("fn").get<std::uint64_t>()};
    const auto& m = j.at("metrics");
    r.metrics = {metric_from(m.at("accuracy")), metric_from(m.at("precision")),
                 metric_from(m.at("recall")), metric_from(m.at("f1"))};
    for (const auto& e : j.value("per_epoch", json::array())) {
      r.per_epoch.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                             e.at("train_accuracy").get<double>(),
                             metric_from(e.at("val_accuracy"))});
    }
    if (j.contains("timestamps")) {
      r.started_at = j["timestamps"].value("started", "");
      r.finished_at = j["timestamps"].value("finished", "");
    }
    r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    r.dataset_root = j.value("dataset_root", "");
    r.split_manifest = j.value("split_manifest", "");
    r.low_confidence = j.value("low_confidence", std::size_t{0});
    for (const auto& p : j.value("predictions", json::array())) {
      r.predictions.push_back({p.at("path").get<std::string>(),
                               label_from_string(p.at("label").get<std::string>()),
                               p.at("score").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run result: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed run result: ") + e.what());
  }
}

void save_run_result(const std::filesystem::path& path, const RunResult& result) {
  write_text_file(path, run_result_to_json(result));
}

RunResult load_run_result(const std::filesystem::path& path) {
  try {
    return run_result_from_json(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::filesystem::path> list_result_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw DataError("results directory not found: " + dir.string());
  }
  // An experiment output directory keeps its run files under runs/.
  const fs::path runs = fs::is_directory(dir / "runs") ? dir / "runs" : dir;
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(runs)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        name.find("__seed") != std::string::npos) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw DataError("failed writing " + path.string());
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex += fmt::format("{:02x}", digest[i]);
  }
  return hex;
}

} // namespace crackbench
