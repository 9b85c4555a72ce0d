#include "stresskit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "stresskit/errors.hpp"
#include "stresskit/rng.hpp"

namespace stresskit {

using ordered_json = nlohmann::ordered_json;

// --- Label taxonomies -------------------------------------------------------

const char* to_string(SpeakingStyle s) {
  switch (s) {
    case SpeakingStyle::Anger: return "anger";
    case SpeakingStyle::Fast: return "fast";
    case SpeakingStyle::Lombard: return "lombard";
    case SpeakingStyle::Loud: return "loud";
    case SpeakingStyle::Clear: return "clear";
    case SpeakingStyle::Neutral: return "neutral";
    case SpeakingStyle::Slow: return "slow";
    case SpeakingStyle::Soft: return "soft";
    case SpeakingStyle::Question: return "question";
  }
  return "?";
}

const char* to_string(IsaLevel l) {
  switch (l) {
    case IsaLevel::Boring: return "boring";
    case IsaLevel::Relaxed: return "relaxed";
    case IsaLevel::Comfortable: return "comfortable";
    case IsaLevel::High: return "high";
    case IsaLevel::Excessive: return "excessive";
  }
  return "?";
}

const char* to_string(StressLabel s) {
  return s == StressLabel::Stress ? "stress" : "no_stress";
}

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

const char* to_string(Domain d) {
  switch (d) {
    case Domain::SusasLike: return "susas_like";
    case Domain::AtcLike: return "atc_like";
    case Domain::Synthetic: return "synthetic";
  }
  return "?";
}

SpeakingStyle style_from_string(std::string_view s) {
  for (int i = 0; i < kNumSpeakingStyles; ++i) {
    const auto st = static_cast<SpeakingStyle>(i);
    if (s == to_string(st)) return st;
  }
  throw ParseError("unknown speaking style: " + std::string(s));
}

IsaLevel isa_from_string(std::string_view s) {
  for (int i = 0; i < kNumIsaLevels; ++i) {
    const auto l = static_cast<IsaLevel>(i);
    if (s == to_string(l)) return l;
  }
  throw ParseError("unknown ISA level: " + std::string(s));
}

StressLabel stress_from_string(std::string_view s) {
  if (s == "stress") return StressLabel::Stress;
  if (s == "no_stress" || s == "nostress") return StressLabel::NoStress;
  throw ParseError("unknown stress label: " + std::string(s));
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ParseError("unknown split: " + std::string(s));
}

Domain domain_from_string(std::string_view s) {
  if (s == "susas_like") return Domain::SusasLike;
  if (s == "atc_like") return Domain::AtcLike;
  if (s == "synthetic") return Domain::Synthetic;
  throw ParseError("unknown domain: " + std::string(s));
}

StyleGroup group_style(SpeakingStyle style) {
  switch (style) {
    case SpeakingStyle::Anger:
    case SpeakingStyle::Fast:
    case SpeakingStyle::Lombard:
    case SpeakingStyle::Loud:
      return StyleGroup::Stress;
    case SpeakingStyle::Clear:
    case SpeakingStyle::Neutral:
    case SpeakingStyle::Slow:
    case SpeakingStyle::Soft:
      return StyleGroup::NoStress;
    case SpeakingStyle::Question:
      return StyleGroup::Excluded;
  }
  return StyleGroup::Excluded;
}

StressLabel group_isa(IsaLevel level) {
  switch (level) {
    case IsaLevel::High:
    case IsaLevel::Excessive:
      return StressLabel::Stress;
    default:
      return StressLabel::NoStress;
  }
}

std::optional<StressLabel> Utterance::effective_stress() const {
  if (stress) return stress;
  if (style) {
    switch (group_style(*style)) {
      case StyleGroup::Stress: return StressLabel::Stress;
      case StyleGroup::NoStress: return StressLabel::NoStress;
      case StyleGroup::Excluded: return std::nullopt;
    }
  }
  if (isa) return group_isa(*isa);
  return std::nullopt;
}

// --- Manifest I/O -----------------------------------------------------------

namespace {

const char* const kKnownFields[] = {"id",        "audio_path",     "speaker_id", "gender",
                                    "domain",    "style",          "isa",        "stress",
                                    "split",     "anonymized",     "augment_method",
                                    "source_id", "copy_index"};

bool is_known_field(const std::string& key) {
  for (const char* f : kKnownFields)
    if (key == f) return true;
  return false;
}

Utterance utterance_from_json(const ordered_json& j, int line_no) {
  const auto fail = [line_no](const std::string& msg) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": " + msg);
  };
  if (!j.is_object()) fail("expected a JSON object");
  if (!j.contains("id") || !j.at("id").is_string()) fail("missing required field 'id'");

  Utterance u;
  u.id = j.at("id").get<std::string>();
  if (j.contains("audio_path")) u.audio_path = j.at("audio_path").get<std::string>();
  if (j.contains("speaker_id")) u.speaker_id = j.at("speaker_id").get<std::string>();
  try {
    if (j.contains("gender")) u.gender = gender_from_string(j.at("gender").get<std::string>());
    if (j.contains("domain")) u.domain = domain_from_string(j.at("domain").get<std::string>());
    if (j.contains("style")) u.style = style_from_string(j.at("style").get<std::string>());
    if (j.contains("isa")) u.isa = isa_from_string(j.at("isa").get<std::string>());
    if (j.contains("stress")) u.stress = stress_from_string(j.at("stress").get<std::string>());
    if (j.contains("split")) u.split = split_from_string(j.at("split").get<std::string>());
  } catch (const Error& e) {
    fail(e.what());
  }
  if (j.contains("anonymized")) u.anonymized = j.at("anonymized").get<bool>();
  if (j.contains("augment_method")) u.augment_method = j.at("augment_method").get<std::string>();
  if (j.contains("source_id")) u.source_id = j.at("source_id").get<std::string>();
  if (j.contains("copy_index")) u.copy_index = j.at("copy_index").get<int>();

  ordered_json extra = ordered_json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!is_known_field(it.key())) extra[it.key()] = it.value();
  }
  if (!extra.empty()) u.extra_json = extra.dump();
  return u;
}

ordered_json utterance_to_json(const Utterance& u) {
  ordered_json j = ordered_json::object();
  j["id"] = u.id;
  j["audio_path"] = u.audio_path;
  j["speaker_id"] = u.speaker_id;
  j["gender"] = to_string(u.gender);
  j["domain"] = to_string(u.domain);
  if (u.style) j["style"] = to_string(*u.style);
  if (u.isa) j["isa"] = to_string(*u.isa);
  if (u.stress) j["stress"] = to_string(*u.stress);
  if (u.split) j["split"] = to_string(*u.split);
  j["anonymized"] = u.anonymized;
  if (u.augment_method) j["augment_method"] = *u.augment_method;
  if (u.source_id) j["source_id"] = *u.source_id;
  if (u.copy_index) j["copy_index"] = *u.copy_index;
  if (!u.extra_json.empty()) {
    const ordered_json extra = ordered_json::parse(u.extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  }
  return j;
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());

  Manifest m;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (first && j.is_object() && j.contains("manifest_meta")) {
      const auto& meta = j.at("manifest_meta");
      if (meta.contains("corpus_name")) m.corpus_name = meta.at("corpus_name").get<std::string>();
      if (meta.contains("sample_rate_hz")) m.sample_rate_hz = meta.at("sample_rate_hz").get<int>();
      if (meta.contains("creation_seed"))
        m.creation_seed = meta.at("creation_seed").get<std::uint64_t>();
      first = false;
      continue;
    }
    first = false;
    m.utterances.push_back(utterance_from_json(j, line_no));
  }

  // ids must be unique
  std::vector<std::string> ids;
  ids.reserve(m.utterances.size());
  for (const auto& u : m.utterances) ids.push_back(u.id);
  std::sort(ids.begin(), ids.end());
  const auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end()) throw ParseError("duplicate utterance id: " + *dup);
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  ordered_json meta = ordered_json::object();
  meta["corpus_name"] = manifest.corpus_name;
  meta["sample_rate_hz"] = manifest.sample_rate_hz;
  meta["creation_seed"] = manifest.creation_seed;
  ordered_json head = ordered_json::object();
  head["manifest_meta"] = meta;
  out << head.dump() << "\n";

  for (const auto& u : manifest.utterances) out << utterance_to_json(u).dump() << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

// --- Splitting --------------------------------------------------------------

SplitCounts split_sizes(long n) {
  SplitCounts c;
  c.test = n / 5;
  c.val = (n - c.test) / 5;
  c.train = n - c.test - c.val;
  return c;
}

Manifest split_manifest(const Manifest& manifest, std::uint64_t seed, ClassAxis axis) {
  Manifest out = manifest;

  // class key -> indices in manifest order
  std::map<std::string, std::vector<std::size_t>> by_class;
  std::vector<bool> keep(out.utterances.size(), false);
  for (std::size_t i = 0; i < out.utterances.size(); ++i) {
    auto& u = out.utterances[i];
    if (axis == ClassAxis::Style) {
      if (!u.style) throw DataError("split: utterance '" + u.id + "' has no style label");
      by_class[to_string(*u.style)].push_back(i);
      keep[i] = true;
    } else {
      const auto label = u.effective_stress();
      if (!label) {
        if (u.style && group_style(*u.style) == StyleGroup::Excluded) continue;  // question: drop
        throw DataError("split: utterance '" + u.id + "' has no stress-derivable label");
      }
      u.stress = label;
      by_class[to_string(*label)].push_back(i);
      keep[i] = true;
    }
  }
  if (by_class.empty()) throw DataError("split: manifest has no labeled utterances");

  for (auto& [name, indices] : by_class) {
    const long n = static_cast<long>(indices.size());
    if (n < 3)
      throw DataError("split: class '" + name + "' has " + std::to_string(n) +
                      " samples, need at least 3");
    const SplitCounts sizes = split_sizes(n);
    Rng rng(Rng::mix(seed, Rng::hash_string(name)));
    rng.shuffle(indices);
    for (long i = 0; i < n; ++i) {
      Split s = Split::Train;
      if (i < sizes.test)
        s = Split::Test;
      else if (i < sizes.test + sizes.val)
        s = Split::Val;
      out.utterances[indices[static_cast<std::size_t>(i)]].split = s;
    }
  }

  // Drop excluded rows, preserving manifest order for the rest.
  std::vector<Utterance> kept;
  kept.reserve(out.utterances.size());
  for (std::size_t i = 0; i < out.utterances.size(); ++i)
    if (keep[i]) kept.push_back(std::move(out.utterances[i]));
  out.utterances = std::move(kept);
  return out;
}

// --- Corpus shape validation ------------------------------------------------

SusasShapeReport validate_susas_shape(const Manifest& manifest) {
  SusasShapeReport r;
  for (int i = 0; i < kNumSpeakingStyles; ++i) r.per_style[static_cast<SpeakingStyle>(i)] = 0;
  for (const auto& u : manifest.utterances) {
    if (u.style) ++r.per_style[*u.style];
    ++r.total;
  }
  for (const auto& [style, count] : r.per_style) {
    const long expected = style == SpeakingStyle::Neutral ? 631 : 630;
    if (count != expected)
      r.violations.push_back(std::string("style '") + to_string(style) + "' has " +
                             std::to_string(count) + " samples, expected " +
                             std::to_string(expected));
    if (style != SpeakingStyle::Question) r.binary_total += count;
  }
  if (r.total != 5671)
    r.violations.push_back("total is " + std::to_string(r.total) + ", expected 5671");
  if (r.binary_total != 5041)
    r.violations.push_back("binary subset is " + std::to_string(r.binary_total) +
                           ", expected 5041");
  r.ok = r.violations.empty();
  return r;
}

// --- Synthetic corpus -------------------------------------------------------

namespace {

constexpr double kPi = 3.14159265358979323846;

struct StyleKnobs {
  double rate_mult = 1.0;   // syllable rate multiplier
  double gain_db = 0.0;     // level offset
  double pitch_mult = 1.0;  // fundamental multiplier
  double pitch_rise = 0.0;  // extra multiplier reached at the end of the clip
  double jitter = 0.0;      // random per-syllable pitch deviation (fraction)
  double babble_db = -300.0;  // babble-band noise level relative to voice
};

StyleKnobs knobs_for(SpeakingStyle style) {
  StyleKnobs k;
  switch (style) {
    case SpeakingStyle::Anger:   k.gain_db = 7.0; k.jitter = 0.06; k.pitch_mult = 1.08; break;
    case SpeakingStyle::Fast:    k.rate_mult = 1.8; break;
    case SpeakingStyle::Lombard: k.gain_db = 6.0; k.pitch_mult = 1.25; k.babble_db = -8.0; break;
    case SpeakingStyle::Loud:    k.gain_db = 12.0; break;
    case SpeakingStyle::Clear:   k.rate_mult = 0.9; break;
    case SpeakingStyle::Neutral: break;
    case SpeakingStyle::Slow:    k.rate_mult = 0.55; break;
    case SpeakingStyle::Soft:    k.gain_db = -12.0; break;
    case SpeakingStyle::Question: k.pitch_rise = 0.35; break;
  }
  return k;
}

// Mild resonance bumps so harmonics get a vowel-like envelope.
double formant_boost(double f_hz) {
  const double a = (f_hz - 550.0) / 250.0;
  const double b = (f_hz - 1650.0) / 400.0;
  return 1.0 + 0.8 * std::exp(-a * a) + 0.5 * std::exp(-b * b);
}

SpeakingStyle draw_style_from_group(StressLabel label, Rng& rng) {
  static const SpeakingStyle stress_styles[] = {SpeakingStyle::Anger, SpeakingStyle::Fast,
                                                SpeakingStyle::Lombard, SpeakingStyle::Loud};
  static const SpeakingStyle calm_styles[] = {SpeakingStyle::Clear, SpeakingStyle::Neutral,
                                              SpeakingStyle::Slow, SpeakingStyle::Soft};
  const auto i = static_cast<std::size_t>(rng.uniform_int(0, 3));
  return label == StressLabel::Stress ? stress_styles[i] : calm_styles[i];
}

IsaLevel draw_isa_from_label(StressLabel label, Rng& rng) {
  if (label == StressLabel::Stress)
    return rng.uniform() < 0.5 ? IsaLevel::High : IsaLevel::Excessive;
  const double u = rng.uniform();
  if (u < 1.0 / 3.0) return IsaLevel::Boring;
  if (u < 2.0 / 3.0) return IsaLevel::Relaxed;
  return IsaLevel::Comfortable;
}

}  // namespace

AudioClip render_styled_utterance(SpeakingStyle style, Gender gender, int sample_rate_hz,
                                  double duration_s, std::uint64_t seed) {
  const StyleKnobs k = knobs_for(style);
  Rng rng(seed);

  const double f0_base = (gender == Gender::Female) ? rng.uniform(192.0, 222.0)
                                                    : rng.uniform(112.0, 132.0);
  const double rate_hz = rng.uniform(3.6, 4.4) * k.rate_mult;
  const double gain_db = k.gain_db + rng.uniform(-1.0, 1.0);
  const double amp = 0.06 * std::pow(10.0, gain_db / 20.0);

  const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate_hz));
  AudioClip clip;
  clip.sample_rate_hz = sample_rate_hz;
  clip.samples.assign(n, 0.0);

  // Per-syllable pitch deviations (anger jitter).
  const double syllable_period = 1.0 / rate_hz;
  std::vector<double> syllable_jitter(static_cast<std::size_t>(duration_s * rate_hz) + 2, 0.0);
  for (auto& j : syllable_jitter) j = 1.0 + k.jitter * (2.0 * rng.uniform() - 1.0);

  constexpr int kHarmonics = 5;
  double phase[kHarmonics] = {0, 0, 0, 0, 0};
  double babble_lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    const double progress = duration_s > 0 ? t / duration_s : 0.0;
    const auto syl = static_cast<std::size_t>(t / syllable_period);
    const double f0 = f0_base * k.pitch_mult * (1.0 + k.pitch_rise * progress) *
                      syllable_jitter[std::min(syl, syllable_jitter.size() - 1)];

    // Raised-cosine syllable gate with a small leak so silence is not exact.
    const double s = t - static_cast<double>(syl) * syllable_period;
    const double duty = 0.62 * syllable_period;
    double env = 0.02;
    if (s < duty) {
      const double g = std::sin(kPi * s / duty);
      env = 0.02 + 0.98 * g * g;
    }

    double v = 0.0;
    for (int h = 0; h < kHarmonics; ++h) {
      const double fh = f0 * (h + 1);
      if (fh >= 0.5 * sample_rate_hz * 0.95) break;
      phase[h] += 2.0 * kPi * fh / sample_rate_hz;
      v += std::sin(phase[h]) * formant_boost(fh) / (h + 1);
    }
    double sample = amp * env * v;
    if (k.babble_db > -200.0) {
      // Lombard babble: noise shaped by a one-pole lowpass.
      babble_lp = 0.85 * babble_lp + 0.15 * rng.gaussian();
      sample += amp * std::pow(10.0, k.babble_db / 20.0) * babble_lp * 4.0;
    }
    clip.samples[i] = sample;
  }

  double peak = 0.0;
  for (const double v : clip.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.98) {
    const double scale = 0.98 / peak;
    for (auto& v : clip.samples) v *= scale;
  }
  return clip;
}

Manifest synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.class_counts.empty()) throw ConfigError("synth: no classes requested");
  for (const auto& [name, count] : spec.class_counts)
    if (count < 1) throw ConfigError("synth: class '" + name + "' count must be >= 1");

  Manifest m;
  m.corpus_name = spec.corpus_name;
  m.sample_rate_hz = spec.sample_rate_hz;
  m.creation_seed = spec.seed;

  const std::filesystem::path audio_dir = out_dir / "all";
  if (spec.materialize_audio) std::filesystem::create_directories(audio_dir);

  long index = 0;
  for (const auto& [class_name, count] : spec.class_counts) {
    // Class key is either a style name or a binary label.
    std::optional<SpeakingStyle> style_key;
    std::optional<StressLabel> stress_key;
    try {
      style_key = style_from_string(class_name);
    } catch (const ParseError&) {
      stress_key = stress_from_string(class_name);
    }

    for (long i = 0; i < count; ++i, ++index) {
      const std::uint64_t useed = Rng::mix(spec.seed, static_cast<std::uint64_t>(index));
      Rng rng(Rng::mix(useed, 0xA11CE));

      Utterance u;
      char idbuf[64];
      std::snprintf(idbuf, sizeof(idbuf), "%s-%06ld", m.corpus_name.c_str(), index);
      u.id = idbuf;
      const int speaker = static_cast<int>(index % spec.n_speakers);
      std::snprintf(idbuf, sizeof(idbuf), "spk%02d", speaker);
      u.speaker_id = idbuf;
      u.gender = (speaker % 2 == 0) ? Gender::Male : Gender::Female;
      u.domain = spec.domain;

      SpeakingStyle render_style;
      if (style_key) {
        render_style = *style_key;
        u.style = render_style;
      } else {
        render_style = draw_style_from_group(*stress_key, rng);
        if (spec.domain == Domain::AtcLike) {
          u.isa = draw_isa_from_label(*stress_key, rng);
        } else {
          u.style = render_style;
        }
      }

      if (spec.materialize_audio) {
        const double dur = rng.uniform(spec.min_duration_s, spec.max_duration_s);
        const AudioClip clip =
            render_styled_utterance(render_style, u.gender, spec.sample_rate_hz, dur, useed);
        const std::filesystem::path wav = audio_dir / (u.id + ".wav");
        write_wav(clip, wav);
        u.audio_path = wav.string();
      }
      m.utterances.push_back(std::move(u));
    }
  }
  return m;
}

}  // namespace stresskit
