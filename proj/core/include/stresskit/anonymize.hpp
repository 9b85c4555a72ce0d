#pragma once

#include <string_view>

#include "stresskit/audio.hpp"

namespace stresskit {

enum class Gender { Male, Female, Unspecified };

const char* to_string(Gender g);
Gender gender_from_string(std::string_view s);

/// Waveform-similarity overlap-add settings. The search window bounds how
/// far each synthesis segment may deviate from its natural progression
/// point when maximizing cross-correlation.
struct WsolaConfig {
  double frame_ms = 25.0;
  double overlap_fraction = 0.5;  // fraction of each frame overlapped with the next
  double search_ms = 7.5;

  void validate() const;
};

/// Per-speaker stretch profile. Factor a stretches duration; the follow-up
/// rate conversion turns that into a pitch/formant shift of the same factor
/// at unchanged length. a = 1 leaves the signal untouched.
struct AnonymizationProfile {
  double stretch_factor_a = 1.0;
  Gender gender = Gender::Unspecified;
  WsolaConfig wsola;
};

/// Configured per-gender stretch factors. The values are deliberately plain
/// config, not constants: they move male voices up and female voices down,
/// and anything unspecified still gets modified.
struct GenderStretchTable {
  double male = 1.20;
  double female = 0.85;
  double unspecified = 1.15;
};

/// Time-stretch by factor a at constant pitch. Output length is exactly
/// round(a * len); requires at least one frame of input.
AudioClip wsola_stretch(const AudioClip& clip, double a, const WsolaConfig& cfg);

/// WSOLA stretch by a, then playback-rate compression by a: equal-length
/// output with every frequency scaled by a (content pushed past Nyquist is
/// attenuated by the anti-alias filter).
AudioClip anonymize(const AudioClip& clip, const AnonymizationProfile& profile);

/// Profile lookup by gender (falls back to the table's unspecified entry).
AnonymizationProfile profile_for(Gender gender, const GenderStretchTable& table = {});

}  // namespace stresskit
