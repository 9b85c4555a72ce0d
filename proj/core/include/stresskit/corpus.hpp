#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stresskit/anonymize.hpp"
#include "stresskit/audio.hpp"

namespace stresskit {

// --- Label taxonomies -------------------------------------------------------

enum class SpeakingStyle { Anger, Fast, Lombard, Loud, Clear, Neutral, Slow, Soft, Question };
inline constexpr int kNumSpeakingStyles = 9;

enum class IsaLevel { Boring, Relaxed, Comfortable, High, Excessive };
inline constexpr int kNumIsaLevels = 5;

enum class StressLabel { Stress, NoStress };

enum class Split { Train, Val, Test };

enum class Domain { SusasLike, AtcLike, Synthetic };

const char* to_string(SpeakingStyle s);
const char* to_string(IsaLevel l);
const char* to_string(StressLabel s);
const char* to_string(Split s);
const char* to_string(Domain d);
SpeakingStyle style_from_string(std::string_view s);
IsaLevel isa_from_string(std::string_view s);
StressLabel stress_from_string(std::string_view s);
Split split_from_string(std::string_view s);
Domain domain_from_string(std::string_view s);

/// Binary grouping of the nine speaking styles; Question belongs to
/// neither class and is excluded from binary tasks.
enum class StyleGroup { Stress, NoStress, Excluded };
StyleGroup group_style(SpeakingStyle style);

/// Binary grouping of the five workload self-assessment levels.
StressLabel group_isa(IsaLevel level);

// --- Manifest ---------------------------------------------------------------

struct Utterance {
  std::string id;
  std::string audio_path;
  std::string speaker_id;
  Gender gender = Gender::Unspecified;
  Domain domain = Domain::Synthetic;
  std::optional<SpeakingStyle> style;
  std::optional<IsaLevel> isa;
  std::optional<StressLabel> stress;
  std::optional<Split> split;
  bool anonymized = false;
  std::optional<std::string> augment_method;
  std::optional<std::string> source_id;
  std::optional<int> copy_index;
  /// Unknown manifest fields, preserved verbatim as a JSON object string.
  std::string extra_json;

  /// Stress label: explicit field if set, else derived from style or ISA.
  /// Empty for style Question (excluded from the binary task).
  std::optional<StressLabel> effective_stress() const;
};

struct Manifest {
  std::vector<Utterance> utterances;
  std::string corpus_name;
  int sample_rate_hz = 0;
  std::uint64_t creation_seed = 0;

  std::size_t size() const { return utterances.size(); }
};

/// JSON Lines, one utterance per line. A leading manifest_meta line carries
/// the corpus-level fields and is optional on read.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// --- Splitting --------------------------------------------------------------

enum class ClassAxis { Style, Stress };

struct SplitCounts {
  long train = 0;
  long val = 0;
  long test = 0;
};

/// Hold-out-first floor rule: test = floor(0.2 n), then val = floor(0.2 of
/// the remainder), train = rest.
SplitCounts split_sizes(long n);

/// Stratified 64/16/20 split, deterministic per seed. Utterances whose
/// class is undefined on the chosen axis (style Question under the stress
/// axis, unlabeled rows) are dropped from the result.
Manifest split_manifest(const Manifest& manifest, std::uint64_t seed,
                        ClassAxis axis = ClassAxis::Stress);

// --- Corpus shape validation ------------------------------------------------

struct SusasShapeReport {
  bool ok = false;
  long total = 0;
  long binary_total = 0;
  std::map<SpeakingStyle, long> per_style;
  std::vector<std::string> violations;
};

/// Checks the expected style distribution: 630 samples per style, 631 for
/// neutral, 5671 in total and 5041 once question is excluded.
SusasShapeReport validate_susas_shape(const Manifest& manifest);

// --- Synthetic corpus -------------------------------------------------------

struct SynthSpec {
  /// Class name -> utterance count. Names are either the nine styles or
  /// the binary labels ("stress" / "no_stress"; "nostress" is accepted).
  std::vector<std::pair<std::string, long>> class_counts;
  int sample_rate_hz = 8000;
  std::uint64_t seed = 0;
  Domain domain = Domain::Synthetic;
  std::string corpus_name = "synthetic";
  int n_speakers = 8;
  double min_duration_s = 0.9;
  double max_duration_s = 1.3;
  /// When false only the manifest is produced (audio_path left empty);
  /// useful for shape-level checks at large counts.
  bool materialize_audio = true;
};

/// Harmonic-complex utterances whose loudness, syllable rate, pitch and
/// noise knobs follow the style semantics, so the style groups are
/// separable by design. WAVs land under out_dir/<split-or-root>/<id>.wav.
Manifest synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Single styled utterance; exposed so tests can probe the per-style cues.
AudioClip render_styled_utterance(SpeakingStyle style, Gender gender, int sample_rate_hz,
                                  double duration_s, std::uint64_t seed);

}  // namespace stresskit
