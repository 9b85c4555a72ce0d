#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stresskit/corpus.hpp"
#include "stresskit/dsp.hpp"
#include "stresskit/neural/network.hpp"

namespace stresskit {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  int early_stop_patience = 10;
  int max_frames = 300;  // feature maps are padded/center-cropped to this
  double grad_clip_norm = 5.0;

  void validate() const;
};

/// Feature maps addressed by utterance id: <dir>/<id>.skft, with an
/// in-memory overlay so tests can inject maps directly.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const FeatureMap& get(const std::string& id) const;
  void put(const std::string& id, FeatureMap fm) { cache_[id] = std::move(fm); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::map<std::string, FeatureMap> cache_;
};

/// Ordered class-name set for one task; maps utterances to class indices.
struct LabelSpace {
  std::vector<std::string> names;

  int size() const { return static_cast<int>(names.size()); }
  /// Class index of an utterance, or -1 when it has no label on this axis.
  int index_of(const Utterance& u) const;

  static LabelSpace binary();  // stress, no_stress
  static LabelSpace styles();  // the nine speaking styles
  static LabelSpace for_axis(ClassAxis axis);
};

/// Confusion matrix (rows = true class, columns = predicted) plus accuracy.
struct Metrics {
  int k = 0;
  std::vector<long> confusion;  // k x k row-major
  double accuracy = 0.0;
  long total = 0;

  long& at(int truth, int pred) { return confusion[std::size_t(truth) * k + pred]; }
  long at(int truth, int pred) const { return confusion[std::size_t(truth) * k + pred]; }
};

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 0-based; ties go to the earliest epoch
  double best_val_accuracy = 0.0;
};

/// Mini-batch training with the Adam optimizer; keeps the parameters of
/// the best validation-accuracy epoch. Deterministic per cfg.seed.
TrainHistory train(Network& net, const Manifest& train_manifest, const Manifest& val_manifest,
                   const FeatureStore& features, const LabelSpace& labels,
                   const TrainConfig& cfg);

/// Argmax evaluation over a labeled manifest.
Metrics evaluate(Network& net, const Manifest& manifest, const FeatureStore& features,
                 const LabelSpace& labels, int max_frames);

/// Mean and population standard deviation over per-seed accuracies.
struct RunSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0;
  double std_dev = 0.0;
  bool std_defined = false;  // false when fewer than two runs succeeded
  std::vector<std::uint64_t> failed_seeds;
};

RunSummary summarize(std::span<const double> accuracies);

struct RepeatResult {
  RunSummary summary;
  std::vector<Metrics> per_seed;
  int best_seed_index = -1;  // highest test accuracy, earliest on ties
  std::vector<std::vector<double>> parameter_snapshots;  // per succeeded seed
};

/// Train/evaluate once per seed with otherwise identical configuration.
RepeatResult repeat_runs(const std::function<Network()>& make_network,
                         const Manifest& train_manifest, const Manifest& val_manifest,
                         const Manifest& test_manifest, const FeatureStore& features,
                         const LabelSpace& labels, const TrainConfig& base,
                         std::span<const std::uint64_t> seeds);

/// One evaluation side of the cross-domain grid.
struct DomainSide {
  std::string corpus;
  bool anonymized = false;
  const Manifest* test_manifest = nullptr;
  const FeatureStore* features = nullptr;
};

struct CrossDomainRow {
  bool train_anonymized = false;
  std::string test_corpus;
  bool test_anonymized = false;
  Metrics metrics;
};

/// The six-row grid: models trained on corpus A (raw and anonymized)
/// against A's opposite-anonymization test set and both variants of
/// corpus B, in that order.
std::vector<CrossDomainRow> cross_domain(Network& trained_on_raw, Network& trained_on_anon,
                                         const DomainSide& a_raw, const DomainSide& a_anon,
                                         const DomainSide& b_raw, const DomainSide& b_anon,
                                         const LabelSpace& labels, int max_frames);

// --- Reporting ----------------------------------------------------------------

/// One row of the metrics artifact; serialized as metrics.json.
struct RunRecord {
  std::string task;
  std::string corpus;
  FeatureKind feature_kind = FeatureKind::MFCC;
  Architecture architecture = Architecture::Cnn;
  bool anonymized_train = false;
  bool anonymized_test = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0;
  double std_dev = 0.0;
  std::string confusion_csv_path;
  std::string checkpoint_path;
};

void write_metrics_json(const RunRecord& record, const std::filesystem::path& path);
RunRecord read_metrics_json(const std::filesystem::path& path);

void write_confusion_csv(const Metrics& metrics, const std::vector<std::string>& class_names,
                         const std::filesystem::path& path);

/// "93.6% [0.003]" (accuracy percentage to one decimal, raw standard
/// deviation bracketed to three).
std::string format_accuracy(double mean, double std_dev);

/// Plain-text table over the collected records; throws on an empty list.
std::string render_report(const std::vector<RunRecord>& records);

/// Pad (with the map's floor row) or center-crop to max_frames.
FeatureMap pad_or_crop(const FeatureMap& fm, int max_frames);

}  // namespace stresskit
