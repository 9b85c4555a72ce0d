#include "stresskit/anonymize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stresskit/errors.hpp"

namespace stresskit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Periodic Hann: sums to a constant at 50% overlap.
std::vector<double> hann_periodic(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

double normalized_correlation(const double* a, const double* b, int n) {
  double num = 0.0, ea = 0.0, eb = 0.0;
  for (int i = 0; i < n; ++i) {
    num += a[i] * b[i];
    ea += a[i] * a[i];
    eb += b[i] * b[i];
  }
  return num / (std::sqrt(ea * eb) + 1e-12);
}

}  // namespace

const char* to_string(Gender g) {
  switch (g) {
    case Gender::Male: return "male";
    case Gender::Female: return "female";
    default: return "unspecified";
  }
}

Gender gender_from_string(std::string_view s) {
  if (s == "male" || s == "m") return Gender::Male;
  if (s == "female" || s == "f") return Gender::Female;
  if (s == "unspecified" || s.empty()) return Gender::Unspecified;
  throw ConfigError("unknown gender: " + std::string(s));
}

void WsolaConfig::validate() const {
  if (frame_ms <= 0.0) throw ConfigError("wsola frame_ms must be positive");
  if (overlap_fraction <= 0.0 || overlap_fraction >= 1.0)
    throw ConfigError("wsola overlap_fraction must be in (0, 1)");
  if (search_ms < 0.0) throw ConfigError("wsola search_ms must be nonnegative");
  if (frame_ms <= 2.0 * search_ms)
    throw ConfigError("wsola frame_ms must exceed twice the search window");
}

AudioClip wsola_stretch(const AudioClip& clip, double a, const WsolaConfig& cfg) {
  cfg.validate();
  if (a <= 0.0) throw DomainError("wsola stretch factor must be positive");
  const int sr = clip.sample_rate_hz;
  if (sr <= 0) throw DomainError("wsola: clip has invalid sample rate");

  int frame = static_cast<int>(std::lround(cfg.frame_ms * sr / 1000.0));
  frame -= frame % 2;  // even length keeps the 50% hop exact
  const int hop = std::max(1, static_cast<int>(std::lround(frame * (1.0 - cfg.overlap_fraction))));
  const int search = static_cast<int>(std::lround(cfg.search_ms * sr / 1000.0));
  const auto n = static_cast<std::ptrdiff_t>(clip.samples.size());
  if (n < frame)
    throw InsufficientInputError("wsola_stretch: clip shorter than one frame");

  const auto out_len = static_cast<std::ptrdiff_t>(std::llround(a * static_cast<double>(n)));
  const std::vector<double> win = hann_periodic(frame);
  const int overlap = frame - hop;

  std::vector<double> acc(static_cast<std::size_t>(out_len) + frame, 0.0);
  std::vector<double> wsum(acc.size(), 0.0);

  const double* x = clip.samples.data();
  std::ptrdiff_t prev_start = -1;
  for (std::ptrdiff_t t = 0; t < out_len; t += hop) {
    // Natural progression point: the input position this output time maps to.
    std::ptrdiff_t natural = static_cast<std::ptrdiff_t>(std::llround(t / a));
    natural = std::clamp<std::ptrdiff_t>(natural, 0, n - frame);

    std::ptrdiff_t start = natural;
    if (prev_start >= 0 && search > 0 && overlap > 0) {
      // The previous segment, advanced by one hop, is what the overlap
      // region should look like; pick the candidate that matches it best.
      const std::ptrdiff_t ref = std::min(prev_start + hop, n - overlap);
      double best = -2.0;
      std::ptrdiff_t best_delta = 0;
      for (std::ptrdiff_t delta = -search; delta <= search; ++delta) {
        const std::ptrdiff_t s = natural + delta;
        if (s < 0 || s + frame > n) continue;
        const double c = normalized_correlation(x + s, x + ref, overlap);
        if (c > best + 1e-12 ||
            (std::abs(c - best) <= 1e-12 && std::llabs(delta) < std::llabs(best_delta))) {
          best = c;
          best_delta = delta;
        }
      }
      start = natural + best_delta;
    }

    for (int i = 0; i < frame; ++i) {
      acc[static_cast<std::size_t>(t + i)] += x[start + i] * win[static_cast<std::size_t>(i)];
      wsum[static_cast<std::size_t>(t + i)] += win[static_cast<std::size_t>(i)];
    }
    prev_start = start;
  }

  AudioClip out;
  out.sample_rate_hz = sr;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::ptrdiff_t i = 0; i < out_len; ++i) {
    const double w = wsum[static_cast<std::size_t>(i)];
    out.samples[static_cast<std::size_t>(i)] = w > 1e-9 ? acc[static_cast<std::size_t>(i)] / w : 0.0;
  }
  return out;
}

AudioClip anonymize(const AudioClip& clip, const AnonymizationProfile& profile) {
  const double a = profile.stretch_factor_a;
  if (a <= 0.0) throw DomainError("anonymize: stretch factor must be positive");

  const AudioClip stretched = wsola_stretch(clip, a, profile.wsola);
  // Reinterpret the stretched signal at an a-times faster rate and convert
  // back: duration returns to the original, frequencies scale by a.
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples = resample_by_ratio(stretched.samples, a);
  return out;
}

AnonymizationProfile profile_for(Gender gender, const GenderStretchTable& table) {
  AnonymizationProfile p;
  p.gender = gender;
  switch (gender) {
    case Gender::Male: p.stretch_factor_a = table.male; break;
    case Gender::Female: p.stretch_factor_a = table.female; break;
    default: p.stretch_factor_a = table.unspecified; break;
  }
  return p;
}

}  // namespace stresskit
