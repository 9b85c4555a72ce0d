// Command-line front end: wires the corpus, anonymization, augmentation,
// feature, training and reporting stages together. Every stage reads and
// writes manifests on disk so pipelines stay inspectable step by step.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"
#include "stresskit/errors.hpp"

namespace fs = std::filesystem;
using namespace stresskit;
using cli::RunConfig;

namespace {

RunConfig resolve_config(const std::string& config_path) {
  if (config_path.empty()) return cli::default_run_config();
  return cli::load_run_config(config_path);
}

std::vector<std::pair<std::string, long>> parse_class_counts(const std::string& spec) {
  std::vector<std::pair<std::string, long>> out;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    const std::size_t comma = spec.find(',', pos);
    const std::string item =
        spec.substr(pos, comma == std::string::npos ? comma : comma - pos);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("--classes entries must look like name:count, got '" + item + "'");
    long count = 0;
    try {
      count = std::stol(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad count in --classes entry '" + item + "'");
    }
    out.emplace_back(item.substr(0, colon), count);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("--classes is empty");
  return out;
}

fs::path audio_tree_dir(const fs::path& out_dir, const Utterance& u) {
  return out_dir / (u.split ? to_string(*u.split) : "all");
}

Manifest subset_split(const Manifest& m, std::optional<Split> split) {
  if (!split) return m;
  Manifest out = m;
  out.utterances.clear();
  for (const auto& u : m.utterances)
    if (u.split == *split) out.utterances.push_back(u);
  return out;
}

LabelSpace labels_for_task(const std::string& task) {
  if (task == "stress") return LabelSpace::binary();
  if (task == "style") return LabelSpace::styles();
  throw ConfigError("--task must be 'stress' or 'style'");
}

// --- synth -------------------------------------------------------------------

int cmd_synth(const RunConfig&, const std::string& classes, bool susas_shape,
              std::uint64_t seed, const std::string& out, int sample_rate,
              const std::string& domain, const std::string& name, bool manifest_only) {
  SynthSpec spec;
  if (susas_shape) {
    for (int i = 0; i < kNumSpeakingStyles; ++i) {
      const auto style = static_cast<SpeakingStyle>(i);
      spec.class_counts.emplace_back(to_string(style),
                                     style == SpeakingStyle::Neutral ? 631 : 630);
    }
  } else {
    if (classes.empty())
      throw ConfigError("synth requires --classes name:count[,name:count...] or --susas-shape");
    spec.class_counts = parse_class_counts(classes);
  }
  spec.sample_rate_hz = sample_rate;
  spec.seed = seed;
  spec.domain = domain_from_string(domain);
  spec.corpus_name = name;
  spec.materialize_audio = !manifest_only;

  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  const Manifest m = synth_corpus(spec, out_dir);
  const fs::path manifest = out_dir / "manifest.jsonl";
  write_manifest(m, manifest);
  std::cout << manifest.string() << "\n";
  return 0;
}

// --- anonymize ---------------------------------------------------------------

int cmd_anonymize(const RunConfig& cfg, const std::string& manifest_path,
                  const std::string& out) {
  const Manifest m = read_manifest(manifest_path);
  const fs::path out_dir(out);
  Manifest result = m;
  result.utterances.clear();
  std::vector<std::string> errors;

  for (const auto& u : m.utterances) {
    try {
      if (u.audio_path.empty()) throw DataError("utterance '" + u.id + "' has no audio");
      const AudioClip clip = read_wav(u.audio_path);
      AnonymizationProfile profile = profile_for(u.gender, cfg.gender_table);
      profile.wsola = cfg.wsola;
      const AudioClip anon = anonymize(clip, profile);

      Utterance copy = u;
      copy.anonymized = true;
      const fs::path dir = audio_tree_dir(out_dir, u);
      fs::create_directories(dir);
      const fs::path wav = dir / (u.id + ".wav");
      write_wav(anon, wav);
      copy.audio_path = wav.string();
      result.utterances.push_back(std::move(copy));
    } catch (const Error& e) {
      errors.push_back(u.id + ": " + e.what());
    }
  }

  const fs::path manifest = out_dir / "manifest.jsonl";
  write_manifest(result, manifest);
  std::cout << manifest.string() << "\n";
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
    return 1;
  }
  return 0;
}

// --- augment -----------------------------------------------------------------

int cmd_augment(const RunConfig& cfg, const std::string& manifest_path, const std::string& out,
                const std::string& plan_name, std::uint64_t seed,
                const std::string& minority_name) {
  if (plan_name != "table1")
    throw ConfigError("unknown plan '" + plan_name + "' (available: table1)");
  const Manifest m = read_manifest(manifest_path);
  const StressLabel minority = stress_from_string(minority_name);
  const auto counts = count_by_class_and_split(m);
  const AugmentationPlan plan = build_plan(counts, minority, cfg.copies_per_method);

  bool materialize = !m.utterances.empty();
  for (const auto& u : m.utterances)
    if (u.audio_path.empty()) materialize = false;

  AugmentationSpec spec = cfg.augment;
  spec.rng_seed = seed;
  const fs::path out_dir(out);
  const Manifest result = execute_plan(m, plan, spec, seed, out_dir, cfg.preprocess, materialize);

  const fs::path manifest = out_dir / "manifest.jsonl";
  write_manifest(result, manifest);
  std::cout << manifest.string() << "\n";
  return 0;
}

// --- features ----------------------------------------------------------------

int cmd_features(const RunConfig& cfg, const std::string& manifest_path, const std::string& out,
                 const std::string& kind_str, bool csv) {
  const FeatureKind kind = feature_kind_from_string(kind_str);
  const Manifest m = read_manifest(manifest_path);
  const fs::path out_dir(out);
  fs::create_directories(out_dir);

  std::vector<std::string> errors;
  for (const auto& u : m.utterances) {
    try {
      if (u.audio_path.empty()) throw DataError("utterance '" + u.id + "' has no audio");
      const AudioClip clip = read_wav(u.audio_path);
      const FeatureMap fm = extract_features(clip, kind, cfg.preprocess);
      write_features(fm, out_dir / (u.id + ".skft"));
      if (csv) write_features_csv(fm, out_dir / (u.id + ".csv"));
    } catch (const Error& e) {
      errors.push_back(u.id + ": " + e.what());
    }
  }
  std::cout << out_dir.string() << "\n";
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
    return 1;
  }
  return 0;
}

// --- split -------------------------------------------------------------------

int cmd_split(const RunConfig& cfg, const std::string& manifest_path, const std::string& out,
              const std::string& axis_str, std::uint64_t seed) {
  ClassAxis axis = cfg.split_axis;
  if (axis_str == "stress")
    axis = ClassAxis::Stress;
  else if (axis_str == "style")
    axis = ClassAxis::Style;
  else if (!axis_str.empty())
    throw ConfigError("--axis must be 'stress' or 'style'");

  const Manifest m = read_manifest(manifest_path);
  const Manifest result = split_manifest(m, seed, axis);
  write_manifest(result, out);

  std::map<std::string, std::map<Split, long>> table;
  for (const auto& u : result.utterances) {
    const std::string cls =
        axis == ClassAxis::Style ? to_string(*u.style) : to_string(*u.effective_stress());
    ++table[cls][*u.split];
  }
  for (const auto& [cls, row] : table) {
    std::printf("%-12s train %5ld  val %5ld  test %5ld\n", cls.c_str(),
                row.count(Split::Train) ? row.at(Split::Train) : 0,
                row.count(Split::Val) ? row.at(Split::Val) : 0,
                row.count(Split::Test) ? row.at(Split::Test) : 0);
  }
  std::cout << out << "\n";
  return 0;
}

// --- train -------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::string& manifest_path,
              const std::string& features_dir, const std::string& arch_str,
              const std::string& out, const std::string& task,
              const std::vector<std::uint64_t>& seeds_flag) {
  const Architecture arch = architecture_from_string(arch_str);
  const LabelSpace labels = labels_for_task(task);
  const Manifest m = read_manifest(manifest_path);

  const Manifest train_m = subset_split(m, Split::Train);
  const Manifest val_m = subset_split(m, Split::Val);
  const Manifest test_m = subset_split(m, Split::Test);
  if (train_m.utterances.empty() || val_m.utterances.empty() || test_m.utterances.empty())
    throw DataError("train: manifest must carry train/val/test splits (run `split` first)");

  const FeatureStore store{fs::path(features_dir)};
  const FeatureMap& probe = store.get(m.utterances.front().id);

  ModelConfig model_cfg = cfg.model;
  model_cfg.n_classes = labels.size();
  const FeatureKind kind = probe.kind;
  const int coeffs = probe.coeffs;
  const auto make_network = [&]() { return build_network(arch, kind, model_cfg, coeffs); };

  const std::vector<std::uint64_t> seeds = seeds_flag.empty() ? cfg.seeds : seeds_flag;
  const RepeatResult result =
      repeat_runs(make_network, train_m, val_m, test_m, store, labels, cfg.train, seeds);
  for (const auto seed : result.summary.failed_seeds)
    std::cerr << "error: run with seed " << seed << " failed\n";
  if (result.summary.accuracies.empty()) {
    std::cerr << "error: every run failed\n";
    return 1;
  }

  const fs::path out_dir(out);
  fs::create_directories(out_dir);

  Network best = make_network();
  best.restore_parameters(
      result.parameter_snapshots[static_cast<std::size_t>(result.best_seed_index)]);
  best.trained_max_frames = cfg.train.max_frames;
  const fs::path ckpt = out_dir / "checkpoint.skcp";
  save_checkpoint(best, ckpt);

  const fs::path conf_csv = out_dir / "confusion.csv";
  write_confusion_csv(result.per_seed[static_cast<std::size_t>(result.best_seed_index)],
                      labels.names, conf_csv);

  RunRecord record;
  record.task = task;
  record.corpus = m.corpus_name;
  record.feature_kind = kind;
  record.architecture = arch;
  record.anonymized_train = !m.utterances.empty() && m.utterances.front().anonymized;
  record.anonymized_test = record.anonymized_train;
  record.seeds = result.summary.seeds;
  record.accuracies = result.summary.accuracies;
  record.mean = result.summary.mean;
  record.std_dev = result.summary.std_dev;
  record.confusion_csv_path = conf_csv.string();
  record.checkpoint_path = ckpt.string();
  write_metrics_json(record, out_dir / "metrics.json");

  std::cout << to_string(arch) << " " << to_string(kind) << " test accuracy "
            << format_accuracy(record.mean, record.std_dev) << "\n";
  std::cout << (out_dir / "metrics.json").string() << "\n";
  return result.summary.failed_seeds.empty() ? 0 : 1;
}

// --- eval --------------------------------------------------------------------

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
             const std::string& manifest_path, const std::string& features_dir,
             const std::string& split_sel, const std::string& task,
             const std::string& out_json) {
  Network net = load_checkpoint(checkpoint);
  const LabelSpace labels = labels_for_task(task);
  if (labels.size() != net.config.n_classes)
    throw ConfigError("checkpoint was trained for " + std::to_string(net.config.n_classes) +
                      " classes; task '" + task + "' defines " + std::to_string(labels.size()));

  const Manifest m = read_manifest(manifest_path);
  std::optional<Split> split;
  if (split_sel != "all") split = split_from_string(split_sel);
  const Manifest subset = subset_split(m, split);
  if (subset.utterances.empty()) throw DataError("eval: selected split is empty");

  const FeatureStore store{fs::path(features_dir)};
  const int frames = net.trained_max_frames > 0 ? net.trained_max_frames : cfg.train.max_frames;
  const Metrics metrics = evaluate(net, subset, store, labels, frames);
  std::printf("accuracy %.4f over %ld utterances\n", metrics.accuracy, metrics.total);

  if (!out_json.empty()) {
    RunRecord record;
    record.task = task;
    record.corpus = m.corpus_name;
    record.feature_kind = net.feature_kind;
    record.architecture = net.architecture;
    record.anonymized_test = !subset.utterances.empty() && subset.utterances.front().anonymized;
    record.accuracies = {metrics.accuracy};
    record.mean = metrics.accuracy;
    const fs::path csv = fs::path(out_json).parent_path() / "confusion_eval.csv";
    write_confusion_csv(metrics, labels.names, csv);
    record.confusion_csv_path = csv.string();
    record.checkpoint_path = checkpoint;
    write_metrics_json(record, out_json);
    std::cout << out_json << "\n";
  }
  return 0;
}

// --- crosseval ---------------------------------------------------------------

struct SideArgs {
  std::string manifest;
  std::string features;
};

int cmd_crosseval(const RunConfig& cfg, const std::string& ckpt_raw, const std::string& ckpt_anon,
                  const SideArgs& a_raw, const SideArgs& a_anon, const SideArgs& b_raw,
                  const SideArgs& b_anon, const std::string& task, const std::string& out) {
  Network net_raw = load_checkpoint(ckpt_raw);
  Network net_anon = load_checkpoint(ckpt_anon);
  const LabelSpace labels = labels_for_task(task);

  struct Loaded {
    Manifest manifest;
    FeatureStore store;
    std::string corpus;
  };
  const auto load_side = [&](const SideArgs& args) {
    const Manifest m = read_manifest(args.manifest);
    Loaded side{subset_split(m, Split::Test), FeatureStore{fs::path(args.features)},
                m.corpus_name};
    if (side.manifest.utterances.empty())
      throw DataError("crosseval: test split of " + args.manifest + " is empty");
    return side;
  };
  const Loaded la_raw = load_side(a_raw), la_anon = load_side(a_anon),
               lb_raw = load_side(b_raw), lb_anon = load_side(b_anon);

  const auto rows = cross_domain(
      net_raw, net_anon, DomainSide{la_raw.corpus, false, &la_raw.manifest, &la_raw.store},
      DomainSide{la_anon.corpus, true, &la_anon.manifest, &la_anon.store},
      DomainSide{lb_raw.corpus, false, &lb_raw.manifest, &lb_raw.store},
      DomainSide{lb_anon.corpus, true, &lb_anon.manifest, &lb_anon.store}, labels,
      cfg.train.max_frames);

  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  nlohmann::ordered_json grid = nlohmann::ordered_json::array();
  const std::string train_corpus = la_raw.corpus;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    std::printf("trained on %s%s  tested on %s%s  accuracy %.4f\n", train_corpus.c_str(),
                row.train_anonymized ? " (anonymized)" : "", row.test_corpus.c_str(),
                row.test_anonymized ? " (anonymized)" : "", row.metrics.accuracy);
    const fs::path csv = out_dir / ("confusion_row" + std::to_string(i) + ".csv");
    write_confusion_csv(row.metrics, labels.names, csv);
    nlohmann::ordered_json entry;
    entry["trained_on"] = train_corpus;
    entry["train_anonymized"] = row.train_anonymized;
    entry["tested_on"] = row.test_corpus;
    entry["test_anonymized"] = row.test_anonymized;
    entry["accuracy"] = row.metrics.accuracy;
    entry["confusion_csv_path"] = csv.string();
    grid.push_back(entry);
  }
  std::ofstream f(out_dir / "crosseval.json", std::ios::trunc);
  f << grid.dump(2) << "\n";
  std::cout << (out_dir / "crosseval.json").string() << "\n";
  return 0;
}

// --- params ------------------------------------------------------------------

int cmd_params(const RunConfig& cfg) {
  const int mfcc_width = cfg.preprocess.n_mfcc;
  const int lms_width = cfg.preprocess.n_mels;
  const Architecture archs[] = {Architecture::Cnn, Architecture::Crnn,
                                Architecture::CrnnAttention};
  long counts[3][2];
  for (int a = 0; a < 3; ++a) {
    Network mf = build_network(archs[a], FeatureKind::MFCC, cfg.model, mfcc_width);
    Network lm = build_network(archs[a], FeatureKind::LMS, cfg.model, lms_width);
    counts[a][0] = count_parameters(mf);
    counts[a][1] = count_parameters(lm);
  }
  std::printf("%-16s %14s %14s\n", "architecture", "mfcc", "lms");
  for (int a = 0; a < 3; ++a)
    std::printf("%-16s %14ld %14ld\n", to_string(archs[a]), counts[a][0], counts[a][1]);
  std::printf("%-16s %14ld %14ld\n", "crnn - cnn", counts[1][0] - counts[0][0],
              counts[1][1] - counts[0][1]);
  std::printf("%-16s %14ld %14ld\n", "attn - crnn", counts[2][0] - counts[1][0],
              counts[2][1] - counts[1][1]);
  std::printf("%-16s %14ld %14ld %14ld\n", "lms - mfcc", counts[0][1] - counts[0][0],
              counts[1][1] - counts[1][0], counts[2][1] - counts[2][0]);
  return 0;
}

// --- report ------------------------------------------------------------------

int cmd_report(const RunConfig&, const std::vector<std::string>& metrics_files,
               const std::string& out) {
  std::vector<RunRecord> records;
  for (const auto& f : metrics_files) records.push_back(read_metrics_json(f));
  const std::string text = render_report(records);
  std::cout << text;
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + out);
    f << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech stress detection toolkit: synthetic corpora, WSOLA voice anonymization, "
               "class-balancing augmentation, spectral features and CNN/CRNN/attention training"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override file values");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic styled-speech corpus");
  std::string sy_classes, sy_out = "workspace/synth", sy_domain = "synthetic",
              sy_name = "synthetic";
  std::uint64_t sy_seed = 0;
  int sy_rate = 8000;
  bool sy_manifest_only = false, sy_susas = false;
  synth->add_option("--classes", sy_classes,
                    "per-class counts, e.g. stress:200,nostress:200 or anger:630,...");
  synth->add_flag("--susas-shape", sy_susas, "preset: 630 per style, 631 neutral");
  synth->add_option("--seed", sy_seed, "generation seed");
  synth->add_option("--out", sy_out, "output directory");
  synth->add_option("--sample-rate", sy_rate, "sample rate in Hz");
  synth->add_option("--domain", sy_domain, "synthetic | susas_like | atc_like");
  synth->add_option("--name", sy_name, "corpus name recorded in the manifest");
  synth->add_flag("--manifest-only", sy_manifest_only, "skip WAV materialization");

  // anonymize
  auto* anon = app.add_subcommand("anonymize",
                                  "anonymize every utterance with the per-gender stretch "
                                  "factors (config keys anonymize.{male,female,default}.a)");
  std::string an_manifest, an_out = "workspace/anonymized";
  anon->add_option("--manifest", an_manifest, "input manifest")->required();
  anon->add_option("--out", an_out, "output directory for WAV tree + manifest");

  // augment
  auto* aug = app.add_subcommand("augment",
                                 "class-balancing augmentation (config keys augment.*: "
                                 "copies_per_method, vtlp_warp_low/high, noise_snr_db; "
                                 "preprocess.* for the warp analysis)");
  std::string ag_manifest, ag_out = "workspace/augmented", ag_plan = "table1",
              ag_minority = "stress";
  std::uint64_t ag_seed = 1;
  aug->add_option("--manifest", ag_manifest, "split manifest")->required();
  aug->add_option("--out", ag_out, "output directory");
  aug->add_option("--plan", ag_plan,
                  "plan name; table1 = minority kept + N copies per method, majority "
                  "rebalanced once per sample");
  aug->add_option("--seed", ag_seed, "assignment and augmentation seed");
  aug->add_option("--minority", ag_minority, "minority class label (stress | no_stress)");

  // features
  auto* feat =
      app.add_subcommand("features", "extract LMS/MFCC features (config keys preprocess.*)");
  std::string fe_manifest, fe_out = "workspace/features", fe_kind = "lms";
  bool fe_csv = false;
  feat->add_option("--manifest", fe_manifest, "input manifest")->required();
  feat->add_option("--out", fe_out, "output directory for .skft files");
  feat->add_option("--kind", fe_kind, "lms | mfcc");
  feat->add_flag("--csv", fe_csv, "also write CSV next to each feature file");

  // split
  auto* spl = app.add_subcommand("split",
                                 "assign stratified train/val/test splits (config keys "
                                 "split.axis, split.seed)");
  std::string sp_manifest, sp_out = "workspace/split.jsonl", sp_axis;
  std::uint64_t sp_seed = 0;
  bool sp_seed_set = false;
  spl->add_option("--manifest", sp_manifest, "input manifest")->required();
  spl->add_option("--out", sp_out, "output manifest path");
  spl->add_option("--axis", sp_axis, "stress | style (default from config)");
  spl->add_option("--seed", sp_seed, "split seed (default from config)")
      ->each([&](const std::string&) { sp_seed_set = true; });

  // train
  auto* tr = app.add_subcommand("train",
                                "train one architecture once per seed (config keys train.*, "
                                "model.*, experiment.seeds)");
  std::string tr_manifest, tr_features, tr_arch = "crnn_attention", tr_out = "workspace/run",
              tr_task = "stress";
  std::vector<std::uint64_t> tr_seeds;
  tr->add_option("--manifest", tr_manifest, "split manifest")->required();
  tr->add_option("--features", tr_features, "feature directory")->required();
  tr->add_option("--arch", tr_arch, "cnn | crnn | crnn_attention");
  tr->add_option("--out", tr_out, "output directory (checkpoint, metrics.json, confusion.csv)");
  tr->add_option("--task", tr_task, "stress | style");
  tr->add_option("--seeds", tr_seeds, "e.g. --seeds 1,2,3 (default experiment.seeds)")
      ->delimiter(',');

  // eval
  auto* ev = app.add_subcommand(
      "eval", "evaluate a checkpoint on a manifest split (config key train.max_frames)");
  std::string ev_ckpt, ev_manifest, ev_features, ev_split = "test", ev_task = "stress", ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--manifest", ev_manifest, "manifest to evaluate")->required();
  ev->add_option("--features", ev_features, "feature directory")->required();
  ev->add_option("--split", ev_split, "train | val | test | all");
  ev->add_option("--task", ev_task, "stress | style");
  ev->add_option("--out", ev_out, "optional metrics.json path");

  // crosseval
  auto* cx = app.add_subcommand("crosseval",
                                "six-row cross-domain grid from two checkpoints and two "
                                "corpora, raw + anonymized variants each (config key "
                                "train.max_frames)");
  std::string cx_raw, cx_anon, cx_task = "stress", cx_out = "workspace/crosseval";
  SideArgs cx_a_raw, cx_a_anon, cx_b_raw, cx_b_anon;
  cx->add_option("--checkpoint-raw", cx_raw, "model trained on corpus A, raw")->required();
  cx->add_option("--checkpoint-anon", cx_anon, "model trained on corpus A, anonymized")
      ->required();
  cx->add_option("--a-raw-manifest", cx_a_raw.manifest, "corpus A raw split manifest")
      ->required();
  cx->add_option("--a-raw-features", cx_a_raw.features, "corpus A raw features")->required();
  cx->add_option("--a-anon-manifest", cx_a_anon.manifest, "corpus A anonymized manifest")
      ->required();
  cx->add_option("--a-anon-features", cx_a_anon.features, "corpus A anonymized features")
      ->required();
  cx->add_option("--b-raw-manifest", cx_b_raw.manifest, "corpus B raw manifest")->required();
  cx->add_option("--b-raw-features", cx_b_raw.features, "corpus B raw features")->required();
  cx->add_option("--b-anon-manifest", cx_b_anon.manifest, "corpus B anonymized manifest")
      ->required();
  cx->add_option("--b-anon-features", cx_b_anon.features, "corpus B anonymized features")
      ->required();
  cx->add_option("--task", cx_task, "stress | style");
  cx->add_option("--out", cx_out, "output directory");

  // params
  auto* pa = app.add_subcommand("params",
                                "print trainable-parameter counts per architecture and "
                                "feature kind (config keys model.*, preprocess.n_mels/n_mfcc)");

  // report
  auto* re = app.add_subcommand("report", "render collected metrics.json files as a table");
  std::vector<std::string> re_files;
  std::string re_out;
  re->add_option("--metrics", re_files, "metrics.json files")->required()->delimiter(',');
  re->add_option("--out", re_out, "also write the table to this file");

  try {
    app.parse(argc, argv);
    const RunConfig cfg = resolve_config(config_path);
    if (*synth)
      return cmd_synth(cfg, sy_classes, sy_susas, sy_seed, sy_out, sy_rate, sy_domain, sy_name,
                       sy_manifest_only);
    if (*anon) return cmd_anonymize(cfg, an_manifest, an_out);
    if (*aug) return cmd_augment(cfg, ag_manifest, ag_out, ag_plan, ag_seed, ag_minority);
    if (*feat) return cmd_features(cfg, fe_manifest, fe_out, fe_kind, fe_csv);
    if (*spl)
      return cmd_split(cfg, sp_manifest, sp_out, sp_axis, sp_seed_set ? sp_seed : cfg.split_seed);
    if (*tr) return cmd_train(cfg, tr_manifest, tr_features, tr_arch, tr_out, tr_task, tr_seeds);
    if (*ev) return cmd_eval(cfg, ev_ckpt, ev_manifest, ev_features, ev_split, ev_task, ev_out);
    if (*cx)
      return cmd_crosseval(cfg, cx_raw, cx_anon, cx_a_raw, cx_a_anon, cx_b_raw, cx_b_anon,
                           cx_task, cx_out);
    if (*pa) return cmd_params(cfg);
    if (*re) return cmd_report(cfg, re_files, re_out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
