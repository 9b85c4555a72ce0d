#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string_view>
#include <utility>

#include "stresskit/audio.hpp"
#include "stresskit/corpus.hpp"
#include "stresskit/dsp.hpp"

namespace stresskit {

enum class AugmentMethod { None, Vtlp, WhiteNoise };

const char* to_string(AugmentMethod m);
AugmentMethod augment_method_from_string(std::string_view s);

/// Knobs for the two augmentation methods plus the seed that derives every
/// per-copy generator.
struct AugmentationSpec {
  double vtlp_warp_low = 0.9;
  double vtlp_warp_high = 1.1;
  double vtlp_cutoff_fraction = 0.8;  // warp anchor as a fraction of Nyquist
  double noise_snr_db = 20.0;
  std::uint64_t rng_seed = 0;
};

/// Spectral vocal-tract-length warp: piecewise-linear frequency map with
/// slope `warp` below the cutoff, anchored at DC and Nyquist. Length
/// preserving.
AudioClip vtlp(const AudioClip& clip, double warp, const PreprocessConfig& cfg,
               double cutoff_fraction = 0.8);

/// Add Gaussian noise scaled for an exact signal-to-noise ratio. An
/// infinite snr_db is the identity. Deterministic per seed.
AudioClip add_white_noise(const AudioClip& clip, double snr_db, std::uint64_t seed);

/// Output counts for one (class, split) cell.
struct PlanCounts {
  long clean = 0;  // samples that appear untouched
  long vtlp = 0;   // utterances produced by the spectral warp
  long noise = 0;  // utterances produced by noise addition
  long total() const { return clean + vtlp + noise; }
};

/// Class-balancing augmentation table. The minority class keeps every
/// clean sample and gains copies_per_method copies per sample per method;
/// the majority class is partitioned so it contributes exactly as many
/// augmented utterances per method as the minority does, each source
/// appearing exactly once overall.
struct AugmentationPlan {
  int copies_per_method = 5;
  std::map<std::pair<StressLabel, Split>, PlanCounts> cells;
};

AugmentationPlan build_plan(
    const std::map<std::pair<StressLabel, Split>, long>& class_counts, StressLabel minority,
    int copies_per_method = 5);

/// Convenience: derive the per-cell source counts from a split manifest.
std::map<std::pair<StressLabel, Split>, long> count_by_class_and_split(const Manifest& manifest);

/// Materialize a plan: emits exactly the planned number of utterances per
/// cell, tags copies with augment_method / source_id / copy_index, and
/// inherits each copy's split from its source. Audio for the copies is
/// written under out_audio_dir/<split>/<id>.wav.
Manifest execute_plan(const Manifest& manifest, const AugmentationPlan& plan,
                      const AugmentationSpec& spec, std::uint64_t seed,
                      const std::filesystem::path& out_audio_dir, const PreprocessConfig& pcfg,
                      bool materialize_audio = true);

}  // namespace stresskit
