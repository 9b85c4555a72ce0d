#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "stresskit/dsp.hpp"
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

PreprocessConfig default_cfg() { return PreprocessConfig{}; }

}  // namespace

TEST_CASE("fft matches the brute-force DFT") {
  Rng rng(11);
  std::vector<std::complex<double>> x(256);
  for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  auto a = x;
  fft_inplace(a, false);
  const auto ref = testutil::naive_dft(x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(a[i] - ref[i]) < 1e-9);

  fft_inplace(a, true);  // inverse round trip
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(a[i] - x[i]) < 1e-12);

  std::vector<std::complex<double>> bad(100);
  CHECK_THROWS_AS(fft_inplace(bad, false), DomainError);
}

TEST_CASE("pre_emphasis: formula cases") {
  const AudioClip ones = clip_of({1.0, 1.0, 1.0});
  const AudioClip y = pre_emphasis(ones, 0.97);
  CHECK(y.samples[0] == doctest::Approx(1.0));
  CHECK(y.samples[1] == doctest::Approx(0.03));
  CHECK(y.samples[2] == doctest::Approx(0.03));

  const AudioClip imp = clip_of({1.0, 0.0, 0.0});
  const AudioClip yi = pre_emphasis(imp, 0.97);
  CHECK(yi.samples[0] == doctest::Approx(1.0));
  CHECK(yi.samples[1] == doctest::Approx(-0.97));
  CHECK(yi.samples[2] == doctest::Approx(0.0));

  const AudioClip same = pre_emphasis(ones, 0.0);
  CHECK(same.samples == ones.samples);
  CHECK_THROWS_AS(pre_emphasis(ones, 1.0), DomainError);
}

TEST_CASE("pre_emphasis: Nyquist-to-DC response ratio is (1+a)/(1-a)") {
  const double alpha = 0.97;
  const int sr = 8000;
  // |H| changes steeply near the band edges, so the probes must sit within
  // a few Hz of DC and Nyquist; 4 s of signal keeps whole cycles of both.
  const auto low = testutil::make_tone(2.0, sr, 32000);
  const auto high = testutil::make_tone(3998.0, sr, 32000);
  const AudioClip ylow = pre_emphasis(clip_of(low), alpha);
  const AudioClip yhigh = pre_emphasis(clip_of(high), alpha);
  const double gain_low = testutil::rms(ylow.samples) / testutil::rms(low);
  const double gain_high = testutil::rms(yhigh.samples) / testutil::rms(high);
  CHECK(gain_high / gain_low == doctest::Approx((1 + alpha) / (1 - alpha)).epsilon(0.02));
}

TEST_CASE("stft: frame-count formula") {
  PreprocessConfig cfg = default_cfg();
  AudioClip clip = clip_of(std::vector<double>(8000, 0.1));
  const ComplexSpectrogram spec = stft(clip, cfg);
  CHECK(spec.frames == 98);  // 1 + (8000 - 200) / 80
  CHECK(spec.bins == 129);
  CHECK(spec.window_samples == 200);
  CHECK(spec.hop_samples == 80);

  // property over random geometry
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int window = static_cast<int>(rng.uniform_int(32, 400));
    const int hop = static_cast<int>(rng.uniform_int(1, window));
    const int n = static_cast<int>(rng.uniform_int(window, 6000));
    PreprocessConfig c;
    c.window_ms = window * 1000.0 / 8000.0;
    c.hop_ms = hop * 1000.0 / 8000.0;
    c.n_mels = 8;
    c.n_mfcc = 4;
    const auto s = stft(clip_of(std::vector<double>(static_cast<std::size_t>(n), 0.0)), c);
    CHECK(s.frames == 1 + (n - window) / hop);
  }
}

TEST_CASE("stft: zero signal gives all-zero magnitudes") {
  const auto spec = stft(clip_of(std::vector<double>(1000, 0.0)), default_cfg());
  for (const auto& v : spec.values) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("stft: 1000 Hz tone at 8 kHz peaks at bin 32 of a 256-point FFT") {
  PreprocessConfig cfg = default_cfg();
  cfg.fft_size = 256;
  const auto spec = stft(clip_of(testutil::make_tone(1000.0, 8000, 8000)), cfg);
  for (int f = 0; f < spec.frames; ++f) {
    int argmax = 0;
    double best = -1.0;
    for (int b = 0; b < spec.bins; ++b) {
      if (std::abs(spec.at(f, b)) > best) {
        best = std::abs(spec.at(f, b));
        argmax = b;
      }
    }
    CHECK(argmax == 32);
  }
}

TEST_CASE("stft: clip shorter than a window is rejected") {
  CHECK_THROWS_AS(stft(clip_of(std::vector<double>(100, 0.0)), default_cfg()),
                  InsufficientInputError);
}

TEST_CASE("log_amplitude: unit, zero and e entries") {
  ComplexSpectrogram spec;
  spec.frames = 1;
  spec.bins = 3;
  spec.values = {{1.0, 0.0}, {0.0, 0.0}, {std::exp(1.0), 0.0}};
  const RealMatrix m = log_amplitude(spec, 1e-10);
  CHECK(m.at(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(m.at(0, 1) == doctest::Approx(std::log(1e-10)));
  CHECK(m.at(0, 2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("hz_to_mel: anchor values and inverse") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(0.01 / 781.17));
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-6));
  CHECK_THROWS_AS(hz_to_mel(-1.0), DomainError);

  double prev = -1.0;
  for (double f = 0.0; f <= 4000.0; f += 10.0) {
    const double m = hz_to_mel(f);
    CHECK(m > prev);
    prev = m;
  }
}

TEST_CASE("build_mel_filterbank: 128 filters, positive rows, increasing centers") {
  PreprocessConfig cfg = default_cfg();
  const MelFilterbank fb = build_mel_filterbank(cfg, 8000);
  CHECK(fb.n_mels == 128);
  CHECK(fb.bins == 129);
  for (int m = 0; m < fb.n_mels; ++m) {
    double sum = 0.0;
    for (int b = 0; b < fb.bins; ++b) {
      CHECK(fb.at(m, b) >= 0.0);
      sum += fb.at(m, b);
    }
    CHECK(sum > 0.0);
  }
  for (int m = 1; m < fb.n_mels; ++m) CHECK(fb.center_hz[m] > fb.center_hz[m - 1]);
}

TEST_CASE("build_mel_filterbank: n_mels above bin count is a config error") {
  PreprocessConfig cfg = default_cfg();
  cfg.fft_size = 128;  // 65 bins < 128 mels
  CHECK_THROWS_AS(build_mel_filterbank(cfg, 8000), ConfigError);
}

TEST_CASE("mel_spectrogram: shape and coefficient ratio") {
  PreprocessConfig cfg = default_cfg();
  const auto spec = stft(clip_of(testutil::make_tone(500.0, 8000, 8000)), cfg);
  const auto fb = build_mel_filterbank(cfg, 8000);
  const FeatureMap lms = log_mel_features(spec, fb, cfg.log_epsilon);
  CHECK(lms.frames == 98);
  CHECK(lms.coeffs == 128);
  CHECK(static_cast<double>(lms.coeffs) / cfg.n_mfcc == doctest::Approx(6.4));

  // zero input -> constant log epsilon
  const auto zspec = stft(clip_of(std::vector<double>(8000, 0.0)), cfg);
  const FeatureMap zl = log_mel_features(zspec, fb, cfg.log_epsilon);
  for (const double v : zl.values) CHECK(v == doctest::Approx(std::log(1e-10)));
}

TEST_CASE("mel_spectrogram: bin mismatch raises") {
  PreprocessConfig cfg = default_cfg();
  const auto spec = stft(clip_of(std::vector<double>(4000, 0.1)), cfg);
  PreprocessConfig other = cfg;
  other.fft_size = 512;
  const auto fb = build_mel_filterbank(other, 8000);
  CHECK_THROWS_AS(mel_spectrogram(spec, fb), ShapeError);
}

TEST_CASE("dct: orthonormal within 1e-6") {
  const int n = 128;
  const RealMatrix d = dct_matrix(n);
  Rng rng(2);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = rng.uniform(-3.0, 3.0);
  // y = D x, then z = D^T y must reconstruct x
  std::vector<double> y(static_cast<std::size_t>(n), 0.0), z(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) y[k] += d.at(k, i) * x[i];
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) z[i] += d.at(k, i) * y[k];
  for (int i = 0; i < n; ++i) CHECK(z[i] == doctest::Approx(x[i]).epsilon(1e-6));

  // Parseval: energy preserved
  double ex = 0.0, ey = 0.0;
  for (int i = 0; i < n; ++i) {
    ex += x[i] * x[i];
    ey += y[i] * y[i];
  }
  CHECK(ey == doctest::Approx(ex).epsilon(1e-6));
}

TEST_CASE("mfcc: coefficient count, constant row, wrong kind") {
  FeatureMap lms;
  lms.kind = FeatureKind::LMS;
  lms.frames = 2;
  lms.coeffs = 128;
  lms.sample_rate_hz = 8000;
  lms.values.assign(2 * 128, -4.2);
  const FeatureMap mf = mfcc(lms, 20);
  CHECK(mf.kind == FeatureKind::MFCC);
  CHECK(mf.coeffs == 20);
  CHECK(mf.frames == 2);
  // constant row: all energy in coefficient 0
  CHECK(mf.at(0, 0) == doctest::Approx(-4.2 * std::sqrt(128.0)).epsilon(1e-9));
  for (int c = 1; c < 20; ++c) CHECK(std::abs(mf.at(0, c)) < 1e-9);

  FeatureMap wrong = mf;
  CHECK_THROWS_AS(mfcc(wrong, 10), DomainError);
}

TEST_CASE("wiener_filter: zero clip stays zero") {
  PreprocessConfig cfg = default_cfg();
  const AudioClip out = wiener_filter(clip_of(std::vector<double>(8000, 0.0)), cfg.wiener, cfg);
  CHECK(out.samples.size() == 8000);
  for (const double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("wiener_filter: clean tone passes nearly unchanged") {
  PreprocessConfig cfg = default_cfg();
  const auto tone = testutil::make_tone(440.0, 8000, 8000);
  const AudioClip out = wiener_filter(clip_of(tone), cfg.wiener, cfg);
  CHECK(out.samples.size() == tone.size());
  CHECK(testutil::correlation(tone, out.samples) >= 0.95);
}

TEST_CASE("wiener_filter: improves SNR on a gated tone in white noise") {
  PreprocessConfig cfg = default_cfg();
  const int sr = 8000;
  // speech-like signal: tone active for the first 60%, silent pause after
  std::vector<double> clean = testutil::make_tone(440.0, sr, 8000);
  for (std::size_t i = 4800; i < clean.size(); ++i) clean[i] = 0.0;
  for (std::size_t i = 4600; i < 4800; ++i)  // short fade to avoid a click
    clean[i] *= 0.5 + 0.5 * std::cos(testutil::kPi * (static_cast<double>(i) - 4600.0) / 200.0);

  Rng rng(1);
  double ps = 0.0;
  for (const double v : clean) ps += v * v;
  std::vector<double> noisy = clean;
  const double sigma = std::sqrt(ps / clean.size() / std::pow(10.0, 5.0 / 10.0));
  for (auto& v : noisy) v += sigma * rng.gaussian();

  const double snr_in = testutil::snr_db_against(clean, noisy);
  const AudioClip out = wiener_filter(clip_of(noisy), cfg.wiener, cfg);
  const double snr_out = testutil::snr_db_against(clean, out.samples);
  CHECK(snr_in == doctest::Approx(5.0).epsilon(0.15));
  CHECK(snr_out >= 5.0);
  CHECK(snr_out >= snr_in);
}

TEST_CASE("wiener_filter: clip shorter than a window is rejected") {
  PreprocessConfig cfg = default_cfg();
  CHECK_THROWS_AS(wiener_filter(clip_of(std::vector<double>(50, 0.1)), cfg.wiener, cfg),
                  InsufficientInputError);
}

TEST_CASE("extract_features: LMS and MFCC share geometry, differ in width") {
  PreprocessConfig cfg = default_cfg();
  const AudioClip clip = clip_of(testutil::make_harmonic(180.0, 8000, 8000));
  const FeatureMap lms = extract_features(clip, FeatureKind::LMS, cfg);
  const FeatureMap mf = extract_features(clip, FeatureKind::MFCC, cfg);
  CHECK(lms.frames == mf.frames);
  CHECK(lms.coeffs == 128);
  CHECK(mf.coeffs == 20);
  CHECK(lms.config_fingerprint == mf.config_fingerprint);

  const FeatureMap again = extract_features(clip, FeatureKind::LMS, cfg);
  CHECK(again.values == lms.values);  // bit-identical

  // silence: finite, constant
  const FeatureMap silent =
      extract_features(clip_of(std::vector<double>(4000, 0.0)), FeatureKind::LMS, cfg);
  for (const double v : silent.values) {
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(silent.values[0]));
  }
}

TEST_CASE("extract_features: finite output for arbitrary finite input") {
  PreprocessConfig cfg = default_cfg();
  Rng rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(220, 6000));
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    if (trial % 3 == 0)
      for (auto& v : x) v *= 1e-8;  // near-silence
    const FeatureMap fm = extract_features(clip_of(std::move(x)),
                                           trial % 2 ? FeatureKind::MFCC : FeatureKind::LMS, cfg);
    for (const double v : fm.values) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("feature files: binary round trip and csv header") {
  const auto dir = testutil::fresh_dir("features");
  PreprocessConfig cfg = default_cfg();
  const FeatureMap fm =
      extract_features(clip_of(testutil::make_harmonic(200.0, 8000, 4000)), FeatureKind::MFCC, cfg);
  const auto p = dir / "x.skft";
  write_features(fm, p);
  const FeatureMap back = read_features(p);
  CHECK(back.kind == fm.kind);
  CHECK(back.frames == fm.frames);
  CHECK(back.coeffs == fm.coeffs);
  CHECK(back.sample_rate_hz == fm.sample_rate_hz);
  CHECK(back.config_fingerprint == fm.config_fingerprint);
  for (std::size_t i = 0; i < fm.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(fm.values[i]).epsilon(1e-6));

  write_features_csv(fm, dir / "x.csv");
  std::ifstream csv(dir / "x.csv");
  std::string first;
  std::getline(csv, first);
  CHECK(first.find("kind=mfcc") != std::string::npos);

  CHECK_THROWS_AS(read_features(dir / "missing.skft"), IoError);
  std::ofstream bad(dir / "bad.skft", std::ios::binary);
  bad << "NOPE";
  bad.close();
  CHECK_THROWS_AS(read_features(dir / "bad.skft"), FormatError);
}

TEST_CASE("PreprocessConfig validation") {
  PreprocessConfig cfg = default_cfg();
  CHECK(cfg.fft_size_for(8000) == 256);
  CHECK(cfg.fft_size_for(16000) == 512);
  cfg.hop_ms = 30.0;
  CHECK_THROWS_AS(cfg.validate(8000), ConfigError);
  cfg = default_cfg();
  cfg.n_mfcc = 200;
  CHECK_THROWS_AS(cfg.validate(8000), ConfigError);
  cfg = default_cfg();
  cfg.fft_size = 100;  // not a power of two
  CHECK_THROWS_AS(cfg.validate(8000), ConfigError);
}
