#include "stresskit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "stresskit/errors.hpp"
#include "stresskit/rng.hpp"

namespace stresskit {

using ordered_json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be positive");
  if (early_stop_patience < 1) throw ConfigError("train: early_stop_patience must be >= 1");
  if (max_frames < 1) throw ConfigError("train: max_frames must be >= 1");
}

const FeatureMap& FeatureStore::get(const std::string& id) const {
  const auto it = cache_.find(id);
  if (it != cache_.end()) return it->second;
  if (dir_.empty()) throw DataError("feature store: no features for '" + id + "'");
  const auto path = dir_ / (id + ".skft");
  if (!std::filesystem::exists(path))
    throw DataError("feature store: missing feature file " + path.string());
  return cache_.emplace(id, read_features(path)).first->second;
}

int LabelSpace::index_of(const Utterance& u) const {
  std::string name;
  if (size() == 2) {
    const auto label = u.effective_stress();
    if (!label) return -1;
    name = to_string(*label);
  } else {
    if (!u.style) return -1;
    name = to_string(*u.style);
  }
  for (int i = 0; i < size(); ++i)
    if (names[static_cast<std::size_t>(i)] == name) return i;
  return -1;
}

LabelSpace LabelSpace::binary() { return {{"stress", "no_stress"}}; }

LabelSpace LabelSpace::styles() {
  LabelSpace ls;
  for (int i = 0; i < kNumSpeakingStyles; ++i)
    ls.names.emplace_back(to_string(static_cast<SpeakingStyle>(i)));
  return ls;
}

LabelSpace LabelSpace::for_axis(ClassAxis axis) {
  return axis == ClassAxis::Style ? styles() : binary();
}

FeatureMap pad_or_crop(const FeatureMap& fm, int max_frames) {
  if (fm.frames == max_frames) return fm;
  FeatureMap out = fm;
  out.frames = max_frames;
  out.values.assign(std::size_t(max_frames) * fm.coeffs, 0.0);
  if (fm.frames > max_frames) {
    const int start = (fm.frames - max_frames) / 2;
    for (int f = 0; f < max_frames; ++f)
      for (int c = 0; c < fm.coeffs; ++c) out.at(f, c) = fm.at(start + f, c);
  } else {
    const std::vector<double> floor = fm.floor_row();
    for (int f = 0; f < max_frames; ++f)
      for (int c = 0; c < fm.coeffs; ++c)
        out.at(f, c) = f < fm.frames ? fm.at(f, c) : floor[static_cast<std::size_t>(c)];
  }
  return out;
}

namespace {

struct Sample {
  Tensor input;
  int label;
};

std::vector<Sample> load_samples(const Manifest& manifest, const FeatureStore& features,
                                 const LabelSpace& labels, int max_frames, const char* what) {
  if (manifest.utterances.empty()) throw DataError(std::string(what) + ": empty manifest");
  std::vector<Sample> out;
  out.reserve(manifest.size());
  std::optional<FeatureKind> kind;
  std::optional<std::uint64_t> fingerprint;
  for (const auto& u : manifest.utterances) {
    const int label = labels.index_of(u);
    if (label < 0)
      throw DataError(std::string(what) + ": utterance '" + u.id +
                      "' has no label in the task's class set");
    const FeatureMap& fm = features.get(u.id);
    if (kind && fm.kind != *kind)
      throw ConfigError(std::string(what) + ": mixed feature kinds in manifest");
    if (fingerprint && fm.config_fingerprint != *fingerprint)
      throw ConfigError(std::string(what) + ": feature files for '" + u.id +
                        "' were extracted with a different preprocessing config");
    kind = fm.kind;
    fingerprint = fm.config_fingerprint;
    out.push_back({feature_to_tensor(pad_or_crop(fm, max_frames)), label});
  }
  return out;
}

double global_grad_norm(const std::vector<NamedParam>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (const double g : p.tensor->grad) sq += g * g;
  return std::sqrt(sq);
}

}  // namespace

TrainHistory train(Network& net, const Manifest& train_manifest, const Manifest& val_manifest,
                   const FeatureStore& features, const LabelSpace& labels,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (labels.size() != net.config.n_classes)
    throw ConfigError("train: network has " + std::to_string(net.config.n_classes) +
                      " classes but the task defines " + std::to_string(labels.size()));

  auto train_set = load_samples(train_manifest, features, labels, cfg.max_frames, "train");
  auto val_set = load_samples(val_manifest, features, labels, cfg.max_frames, "train(val)");
  if (net.input_coeffs != train_set.front().input.dim(2))
    throw ConfigError("train: network expects " + std::to_string(net.input_coeffs) +
                      " coefficients, features have " +
                      std::to_string(train_set.front().input.dim(2)));

  // Per-coefficient normalization statistics from the training set.
  if (InputNorm* norm = net.input_norm()) {
    const int c = net.input_coeffs;
    std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
    std::vector<double> var(static_cast<std::size_t>(c), 0.0);
    std::size_t rows = 0;
    for (const auto& s : train_set) {
      const int t = s.input.dim(1);
      for (int f = 0; f < t; ++f)
        for (int i = 0; i < c; ++i) mean[static_cast<std::size_t>(i)] += s.input.at(0, f, i);
      rows += static_cast<std::size_t>(t);
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (const auto& s : train_set) {
      const int t = s.input.dim(1);
      for (int f = 0; f < t; ++f)
        for (int i = 0; i < c; ++i) {
          const double d = s.input.at(0, f, i) - mean[static_cast<std::size_t>(i)];
          var[static_cast<std::size_t>(i)] += d * d;
        }
    }
    std::vector<double> stddev(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i)
      stddev[static_cast<std::size_t>(i)] =
          std::sqrt(var[static_cast<std::size_t>(i)] / static_cast<double>(rows));
    norm->set_stats(mean, stddev);
  }

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  auto params = net.parameters();
  AdamOptimizer opt(params, adam_cfg);
  net.reseed_dropout(Rng::mix(cfg.seed, 0xD120));

  TrainHistory history;
  std::vector<double> best_params = net.snapshot_parameters();
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(cfg.seed, 0xE90C + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    net.set_train(true);
    double loss_sum = 0.0;
    long correct = 0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end = std::min(cursor + static_cast<std::size_t>(cfg.batch_size),
                                             order.size());
      const double inv = 1.0 / static_cast<double>(batch_end - cursor);
      net.zero_grad();
      for (std::size_t b = cursor; b < batch_end; ++b) {
        const Sample& s = train_set[order[b]];
        const Tensor logits = net.forward(s.input);
        const LossGrad lg = softmax_cross_entropy(logits.values, s.label);
        if (!std::isfinite(lg.loss))
          throw Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch + 1));
        loss_sum += lg.loss;
        const auto pred = std::distance(
            logits.values.begin(), std::max_element(logits.values.begin(), logits.values.end()));
        if (static_cast<int>(pred) == s.label) ++correct;

        Tensor grad = Tensor::zeros(logits.shape);
        for (std::size_t i = 0; i < grad.values.size(); ++i) grad.values[i] = lg.grad[i] * inv;
        net.backward(grad);
      }
      if (cfg.grad_clip_norm > 0.0) {
        const double norm = global_grad_norm(params);
        if (norm > cfg.grad_clip_norm) {
          const double scale = cfg.grad_clip_norm / norm;
          for (auto& p : params)
            for (auto& g : p.tensor->grad) g *= scale;
        }
      }
      opt.step();
      cursor = batch_end;
    }

    net.set_train(false);
    long val_correct = 0;
    for (const auto& s : val_set) {
      const Tensor logits = net.forward(s.input);
      const auto pred = std::distance(
          logits.values.begin(), std::max_element(logits.values.begin(), logits.values.end()));
      if (static_cast<int>(pred) == s.label) ++val_correct;
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    stats.val_accuracy = static_cast<double>(val_correct) / static_cast<double>(val_set.size());
    history.epochs.push_back(stats);

    if (history.best_epoch < 0 || stats.val_accuracy > history.best_val_accuracy) {
      history.best_epoch = epoch;
      history.best_val_accuracy = stats.val_accuracy;
      best_params = net.snapshot_parameters();
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }

  net.restore_parameters(best_params);
  net.set_train(false);
  net.trained_max_frames = cfg.max_frames;
  return history;
}

Metrics evaluate(Network& net, const Manifest& manifest, const FeatureStore& features,
                 const LabelSpace& labels, int max_frames) {
  if (labels.size() != net.config.n_classes)
    throw ConfigError("evaluate: network has " + std::to_string(net.config.n_classes) +
                      " classes but the task defines " + std::to_string(labels.size()));
  const auto samples = load_samples(manifest, features, labels, max_frames, "evaluate");

  net.set_train(false);
  Metrics m;
  m.k = labels.size();
  m.confusion.assign(std::size_t(m.k) * m.k, 0);
  for (const auto& s : samples) {
    const Tensor logits = net.forward(s.input);
    const auto pred = std::distance(logits.values.begin(),
                                    std::max_element(logits.values.begin(), logits.values.end()));
    ++m.at(s.label, static_cast<int>(pred));
  }
  m.total = static_cast<long>(samples.size());
  long trace = 0;
  for (int i = 0; i < m.k; ++i) trace += m.at(i, i);
  m.accuracy = m.total > 0 ? static_cast<double>(trace) / static_cast<double>(m.total) : 0.0;
  return m;
}

RunSummary summarize(std::span<const double> accuracies) {
  RunSummary s;
  s.accuracies.assign(accuracies.begin(), accuracies.end());
  if (accuracies.empty()) return s;
  s.mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
           static_cast<double>(accuracies.size());
  if (accuracies.size() >= 2) {
    double sq = 0.0;
    for (const double a : accuracies) sq += (a - s.mean) * (a - s.mean);
    s.std_dev = std::sqrt(sq / static_cast<double>(accuracies.size()));  // population std
    s.std_defined = true;
  }
  return s;
}

RepeatResult repeat_runs(const std::function<Network()>& make_network,
                         const Manifest& train_manifest, const Manifest& val_manifest,
                         const Manifest& test_manifest, const FeatureStore& features,
                         const LabelSpace& labels, const TrainConfig& base,
                         std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("repeat_runs: at least one seed required");

  RepeatResult result;
  std::vector<double> accuracies;
  std::vector<std::uint64_t> ok_seeds;
  for (const std::uint64_t seed : seeds) {
    try {
      Network net = make_network();
      TrainConfig cfg = base;
      cfg.seed = seed;
      train(net, train_manifest, val_manifest, features, labels, cfg);
      const Metrics m = evaluate(net, test_manifest, features, labels, base.max_frames);
      accuracies.push_back(m.accuracy);
      ok_seeds.push_back(seed);
      result.per_seed.push_back(m);
      result.parameter_snapshots.push_back(net.snapshot_parameters());
      if (result.best_seed_index < 0 ||
          m.accuracy > result.per_seed[static_cast<std::size_t>(result.best_seed_index)].accuracy)
        result.best_seed_index = static_cast<int>(result.per_seed.size()) - 1;
    } catch (const Error&) {
      result.summary.failed_seeds.push_back(seed);
    }
  }
  const auto failed = result.summary.failed_seeds;
  result.summary = summarize(accuracies);
  result.summary.seeds = ok_seeds;
  result.summary.failed_seeds = failed;
  return result;
}

std::vector<CrossDomainRow> cross_domain(Network& trained_on_raw, Network& trained_on_anon,
                                         const DomainSide& a_raw, const DomainSide& a_anon,
                                         const DomainSide& b_raw, const DomainSide& b_anon,
                                         const LabelSpace& labels, int max_frames) {
  if (trained_on_raw.feature_kind != trained_on_anon.feature_kind)
    throw ConfigError("cross_domain: the two models use different feature kinds");

  const auto run = [&](Network& net, const DomainSide& side, bool train_anon) {
    CrossDomainRow row;
    row.train_anonymized = train_anon;
    row.test_corpus = side.corpus;
    row.test_anonymized = side.anonymized;
    const int frames = net.trained_max_frames > 0 ? net.trained_max_frames : max_frames;
    row.metrics = evaluate(net, *side.test_manifest, *side.features, labels, frames);
    return row;
  };

  // Same-corpus swapped-anonymization rows first, then the four cross-corpus
  // combinations.
  std::vector<CrossDomainRow> rows;
  rows.push_back(run(trained_on_raw, a_anon, false));
  rows.push_back(run(trained_on_anon, a_raw, true));
  rows.push_back(run(trained_on_raw, b_raw, false));
  rows.push_back(run(trained_on_anon, b_raw, true));
  rows.push_back(run(trained_on_raw, b_anon, false));
  rows.push_back(run(trained_on_anon, b_anon, true));
  return rows;
}

// --- Reporting ----------------------------------------------------------------

void write_metrics_json(const RunRecord& record, const std::filesystem::path& path) {
  ordered_json j;
  j["task"] = record.task;
  j["corpus"] = record.corpus;
  j["feature_kind"] = to_string(record.feature_kind);
  j["architecture"] = to_string(record.architecture);
  j["anonymized_train"] = record.anonymized_train;
  j["anonymized_test"] = record.anonymized_test;
  j["seeds"] = record.seeds;
  j["accuracies"] = record.accuracies;
  j["mean"] = record.mean;
  j["std"] = record.std_dev;
  j["confusion_csv_path"] = record.confusion_csv_path;
  j["checkpoint_path"] = record.checkpoint_path;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

RunRecord read_metrics_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics: " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metrics " + path.string() + ": " + e.what());
  }
  RunRecord r;
  r.task = j.at("task").get<std::string>();
  r.corpus = j.at("corpus").get<std::string>();
  r.feature_kind = feature_kind_from_string(j.at("feature_kind").get<std::string>());
  r.architecture = architecture_from_string(j.at("architecture").get<std::string>());
  r.anonymized_train = j.at("anonymized_train").get<bool>();
  r.anonymized_test = j.at("anonymized_test").get<bool>();
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.accuracies = j.at("accuracies").get<std::vector<double>>();
  r.mean = j.at("mean").get<double>();
  r.std_dev = j.at("std").get<double>();
  r.confusion_csv_path = j.at("confusion_csv_path").get<std::string>();
  r.checkpoint_path = j.at("checkpoint_path").get<std::string>();
  return r;
}

void write_confusion_csv(const Metrics& metrics, const std::vector<std::string>& class_names,
                         const std::filesystem::path& path) {
  if (static_cast<int>(class_names.size()) != metrics.k)
    throw ShapeError("confusion csv: class name count != k");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "true\\pred";
  for (const auto& n : class_names) out << "," << n;
  out << "\n";
  for (int i = 0; i < metrics.k; ++i) {
    out << class_names[static_cast<std::size_t>(i)];
    for (int j = 0; j < metrics.k; ++j) out << "," << metrics.at(i, j);
    out << "\n";
  }
}

std::string format_accuracy(double mean, double std_dev) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f%% [%.3f]", mean * 100.0, std_dev);
  return buf;
}

std::string render_report(const std::vector<RunRecord>& records) {
  if (records.empty()) throw DataError("report: no metrics records given");
  std::string out;
  out += "task        corpus        anon(train/test)  feature  architecture     accuracy\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%-11s %-13s %-3s / %-10s %-8s %-16s %s\n",
                  r.task.c_str(), r.corpus.c_str(), r.anonymized_train ? "yes" : "no",
                  r.anonymized_test ? "yes" : "no", to_string(r.feature_kind),
                  to_string(r.architecture), format_accuracy(r.mean, r.std_dev).c_str());
    out += line;
  }
  return out;
}

}  // namespace stresskit
