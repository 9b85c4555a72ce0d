#include "run_config.hpp"

#include <fstream>
#include <json.hpp>

#include "stresskit/errors.hpp"

namespace stresskit::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known)
      throw ConfigError("config: unknown key '" + it.key() + "' in " + context);
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }

  RunConfig cfg;
  check_keys(j, {"preprocess", "anonymize", "augment", "split", "model", "train", "experiment",
                 "paths"},
             "top level");

  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    check_keys(p, {"window_ms", "hop_ms", "fft_size", "preemphasis_alpha", "n_mels", "n_mfcc",
                   "log_epsilon", "wiener"},
               "preprocess");
    maybe(p, "window_ms", cfg.preprocess.window_ms);
    maybe(p, "hop_ms", cfg.preprocess.hop_ms);
    maybe(p, "fft_size", cfg.preprocess.fft_size);
    maybe(p, "preemphasis_alpha", cfg.preprocess.preemphasis_alpha);
    maybe(p, "n_mels", cfg.preprocess.n_mels);
    maybe(p, "n_mfcc", cfg.preprocess.n_mfcc);
    maybe(p, "log_epsilon", cfg.preprocess.log_epsilon);
    if (p.contains("wiener")) {
      const auto& w = p.at("wiener");
      check_keys(w, {"noise_frame_fraction", "gain_floor"}, "preprocess.wiener");
      maybe(w, "noise_frame_fraction", cfg.preprocess.wiener.noise_frame_fraction);
      maybe(w, "gain_floor", cfg.preprocess.wiener.gain_floor);
    }
  }

  if (j.contains("anonymize")) {
    const auto& a = j.at("anonymize");
    check_keys(a, {"male", "female", "default", "wsola"}, "anonymize");
    const auto read_a = [&](const char* who, double& slot) {
      if (!a.contains(who)) return;
      const auto& g = a.at(who);
      check_keys(g, {"a"}, std::string("anonymize.") + who);
      maybe(g, "a", slot);
    };
    read_a("male", cfg.gender_table.male);
    read_a("female", cfg.gender_table.female);
    read_a("default", cfg.gender_table.unspecified);
    if (a.contains("wsola")) {
      const auto& w = a.at("wsola");
      check_keys(w, {"frame_ms", "overlap_fraction", "search_ms"}, "anonymize.wsola");
      maybe(w, "frame_ms", cfg.wsola.frame_ms);
      maybe(w, "overlap_fraction", cfg.wsola.overlap_fraction);
      maybe(w, "search_ms", cfg.wsola.search_ms);
    }
  }

  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    check_keys(a, {"copies_per_method", "vtlp_warp_low", "vtlp_warp_high", "vtlp_cutoff_fraction",
                   "noise_snr_db"},
               "augment");
    maybe(a, "copies_per_method", cfg.copies_per_method);
    maybe(a, "vtlp_warp_low", cfg.augment.vtlp_warp_low);
    maybe(a, "vtlp_warp_high", cfg.augment.vtlp_warp_high);
    maybe(a, "vtlp_cutoff_fraction", cfg.augment.vtlp_cutoff_fraction);
    maybe(a, "noise_snr_db", cfg.augment.noise_snr_db);
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, {"axis", "seed"}, "split");
    if (s.contains("axis")) {
      const auto axis = s.at("axis").get<std::string>();
      if (axis == "stress")
        cfg.split_axis = ClassAxis::Stress;
      else if (axis == "style")
        cfg.split_axis = ClassAxis::Style;
      else
        throw ConfigError("config: split.axis must be 'stress' or 'style'");
    }
    maybe(s, "seed", cfg.split_seed);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, {"conv_stack", "proj_dim", "lstm_hidden", "attention_heads", "dense_hidden",
                   "n_classes", "dropout_rate", "init_seed"},
               "model");
    if (m.contains("conv_stack")) {
      cfg.model.conv_stack.clear();
      for (const auto& l : m.at("conv_stack")) {
        check_keys(l, {"out_channels", "kernel_h", "kernel_w", "stride", "pool_h", "pool_w"},
                   "model.conv_stack[]");
        ConvLayerSpec c;
        maybe(l, "out_channels", c.out_channels);
        maybe(l, "kernel_h", c.kernel_h);
        maybe(l, "kernel_w", c.kernel_w);
        maybe(l, "stride", c.stride);
        maybe(l, "pool_h", c.pool_h);
        maybe(l, "pool_w", c.pool_w);
        cfg.model.conv_stack.push_back(c);
      }
    }
    maybe(m, "proj_dim", cfg.model.proj_dim);
    maybe(m, "lstm_hidden", cfg.model.lstm_hidden);
    maybe(m, "attention_heads", cfg.model.attention_heads);
    maybe(m, "dense_hidden", cfg.model.dense_hidden);
    maybe(m, "n_classes", cfg.model.n_classes);
    maybe(m, "dropout_rate", cfg.model.dropout_rate);
    maybe(m, "init_seed", cfg.model.init_seed);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, {"epochs", "batch_size", "learning_rate", "seed", "early_stop_patience",
                   "max_frames", "grad_clip_norm"},
               "train");
    maybe(t, "epochs", cfg.train.epochs);
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "learning_rate", cfg.train.learning_rate);
    maybe(t, "seed", cfg.train.seed);
    maybe(t, "early_stop_patience", cfg.train.early_stop_patience);
    maybe(t, "max_frames", cfg.train.max_frames);
    maybe(t, "grad_clip_norm", cfg.train.grad_clip_norm);
  }

  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    check_keys(e, {"seeds"}, "experiment");
    maybe(e, "seeds", cfg.seeds);
  }

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, {"workspace"}, "paths");
    maybe(p, "workspace", cfg.workspace);
  }

  return cfg;
}

}  // namespace stresskit::cli
