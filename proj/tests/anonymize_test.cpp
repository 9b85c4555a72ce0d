#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stresskit/anonymize.hpp"
#include "stresskit/errors.hpp"
#include "stresskit/rng.hpp"
#include "test_helpers.hpp"

using namespace stresskit;

namespace {

AudioClip clip_of(std::vector<double> samples, int rate = 8000) {
  AudioClip c;
  c.sample_rate_hz = rate;
  c.samples = std::move(samples);
  return c;
}

int frame_samples(const WsolaConfig& cfg, int sr) {
  int f = static_cast<int>(std::lround(cfg.frame_ms * sr / 1000.0));
  return f - f % 2;
}

}  // namespace

TEST_CASE("wsola_stretch: identity factor reproduces the input") {
  const AudioClip clip = clip_of(testutil::make_harmonic(220.0, 8000, 8000));
  const AudioClip out = wsola_stretch(clip, 1.0, {});
  CHECK(out.samples.size() == clip.samples.size());
  CHECK(testutil::correlation(clip.samples, out.samples) >= 0.99);
}

TEST_CASE("wsola_stretch: length contract") {
  const AudioClip clip = clip_of(testutil::make_tone(220.0, 8000, 8000));
  const WsolaConfig cfg;
  const int frame = frame_samples(cfg, 8000);
  for (const double a : {1.5, 0.85, 1.2, 2.0}) {
    const AudioClip out = wsola_stretch(clip, a, cfg);
    const auto want = static_cast<long>(std::llround(a * 8000.0));
    CHECK(std::abs(static_cast<long>(out.samples.size()) - want) <= frame);
  }
}

TEST_CASE("wsola_stretch: pure-tone pitch is preserved") {
  const AudioClip clip = clip_of(testutil::make_tone(220.0, 8000, 8000));
  for (const double a : {1.5, 0.85}) {
    const AudioClip out = wsola_stretch(clip, a, {});
    const double peak = testutil::dominant_freq_hz(out.samples, 8000, 100.0, 500.0);
    CHECK(std::abs(peak - 220.0) / 220.0 <= 0.02);
  }
}

TEST_CASE("wsola_stretch: too-short clip is rejected") {
  const AudioClip clip = clip_of(std::vector<double>(50, 0.1));
  CHECK_THROWS_AS(wsola_stretch(clip, 1.2, {}), InsufficientInputError);
}

TEST_CASE("wsola config validation") {
  WsolaConfig bad;
  bad.search_ms = 15.0;  // frame must exceed twice the search window
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.overlap_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("anonymize: identity profile keeps the signal") {
  const AudioClip clip = clip_of(testutil::make_harmonic(180.0, 8000, 8000));
  AnonymizationProfile p;
  p.stretch_factor_a = 1.0;
  const AudioClip out = anonymize(clip, p);
  CHECK(out.samples.size() == clip.samples.size());
  CHECK(testutil::correlation(clip.samples, out.samples) >= 0.99);
}

TEST_CASE("anonymize: pure tone scales to a*f") {
  const AudioClip clip = clip_of(testutil::make_tone(220.0, 8000, 8000));
  const WsolaConfig wcfg;
  const int frame = frame_samples(wcfg, 8000);
  for (const double a : {0.85, 1.0, 1.2}) {
    AnonymizationProfile p;
    p.stretch_factor_a = a;
    const AudioClip out = anonymize(clip, p);
    CHECK(std::abs(static_cast<long>(out.samples.size()) - 8000L) <= frame);
    const double peak = testutil::dominant_freq_hz(out.samples, 8000, 100.0, 500.0);
    CHECK(std::abs(peak - a * 220.0) / (a * 220.0) <= 0.03);
  }
}

TEST_CASE("anonymize: length preserved within a frame over 100 random clips") {
  Rng rng(42);
  const WsolaConfig wcfg;
  const int frame = frame_samples(wcfg, 8000);
  for (int i = 0; i < 100; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2 * frame, 12000));
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-0.5, 0.5);
    AnonymizationProfile p;
    p.stretch_factor_a = rng.uniform(0.8, 1.3);
    const AudioClip out = anonymize(clip_of(std::move(x)), p);
    CHECK(std::abs(static_cast<long>(out.samples.size()) - static_cast<long>(n)) <= frame);
    for (const double v : out.samples) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("anonymize: deterministic") {
  const AudioClip clip = clip_of(testutil::make_harmonic(190.0, 8000, 6000));
  AnonymizationProfile p;
  p.stretch_factor_a = 1.2;
  const AudioClip a = anonymize(clip, p);
  const AudioClip b = anonymize(clip, p);
  CHECK(a.samples == b.samples);
}

TEST_CASE("anonymize: non-identity for a != 1 on a multi-harmonic signal") {
  const AudioClip clip = clip_of(testutil::make_harmonic(170.0, 8000, 8000, 5));
  AnonymizationProfile p;
  p.stretch_factor_a = 1.2;
  const AudioClip out = anonymize(clip, p);
  const std::size_t n = std::min(clip.samples.size(), out.samples.size());
  CHECK(std::abs(testutil::correlation({clip.samples.data(), n}, {out.samples.data(), n})) < 0.9);
}

TEST_CASE("anonymize: content pushed past Nyquist is attenuated, not an error") {
  const AudioClip clip = clip_of(testutil::make_tone(3600.0, 8000, 8000));
  AnonymizationProfile p;
  p.stretch_factor_a = 1.3;  // 4680 Hz > Nyquist
  const AudioClip out = anonymize(clip, p);
  CHECK(out.samples.size() == 8000);
  CHECK(testutil::rms(out.samples) < 0.5 * testutil::rms(clip.samples));
}

TEST_CASE("profile_for: gender table lookups") {
  const GenderStretchTable table;
  CHECK(profile_for(Gender::Male, table).stretch_factor_a == doctest::Approx(1.20));
  CHECK(profile_for(Gender::Female, table).stretch_factor_a == doctest::Approx(0.85));
  const auto p = profile_for(Gender::Unspecified, table);
  CHECK(p.stretch_factor_a == doctest::Approx(1.15));
  CHECK(p.stretch_factor_a != 1.0);  // anonymization must actually modify

  GenderStretchTable custom;
  custom.male = 1.05;
  CHECK(profile_for(Gender::Male, custom).stretch_factor_a == doctest::Approx(1.05));
}
