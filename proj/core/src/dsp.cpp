#include "stresskit/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "stresskit/errors.hpp"
#include "stresskit/rng.hpp"
#include "stft_frames.hpp"

namespace stresskit {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int next_power_of_two(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

// --- PreprocessConfig -------------------------------------------------------

int PreprocessConfig::window_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(window_ms * sample_rate_hz / 1000.0));
}

int PreprocessConfig::hop_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(hop_ms * sample_rate_hz / 1000.0));
}

int PreprocessConfig::fft_size_for(int sample_rate_hz) const {
  if (fft_size > 0) return fft_size;
  return next_power_of_two(window_samples(sample_rate_hz));
}

std::uint64_t PreprocessConfig::fingerprint(int sample_rate_hz) const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "sr=%d;win=%.6f;hop=%.6f;fft=%d;alpha=%.6f;mels=%d;mfcc=%d;eps=%.3e;"
                "wnf=%.6f;wgf=%.6f",
                sample_rate_hz, window_ms, hop_ms, fft_size_for(sample_rate_hz),
                preemphasis_alpha, n_mels, n_mfcc, log_epsilon,
                wiener.noise_frame_fraction, wiener.gain_floor);
  return Rng::hash_string(buf);
}

void PreprocessConfig::validate(int sample_rate_hz) const {
  if (sample_rate_hz <= 0) throw ConfigError("sample rate must be positive");
  if (window_ms <= 0 || hop_ms <= 0) throw ConfigError("window_ms and hop_ms must be positive");
  if (hop_ms > window_ms) throw ConfigError("hop_ms must not exceed window_ms");
  const int win = window_samples(sample_rate_hz);
  const int fft = fft_size_for(sample_rate_hz);
  if (!is_power_of_two(fft)) throw ConfigError("fft_size must be a power of two");
  if (fft < win) throw ConfigError("fft_size must be >= window samples");
  if (preemphasis_alpha < 0.0 || preemphasis_alpha >= 1.0)
    throw ConfigError("preemphasis_alpha must be in [0, 1)");
  if (n_mels < 2) throw ConfigError("n_mels must be >= 2");
  if (n_mfcc < 1 || n_mfcc > n_mels) throw ConfigError("n_mfcc must be in [1, n_mels]");
  if (log_epsilon <= 0.0) throw ConfigError("log_epsilon must be positive");
  if (wiener.noise_frame_fraction <= 0.0 || wiener.noise_frame_fraction > 1.0)
    throw ConfigError("noise_frame_fraction must be in (0, 1]");
  if (wiener.gain_floor <= 0.0 || wiener.gain_floor >= 1.0)
    throw ConfigError("gain_floor must be in (0, 1)");
}

// --- FFT --------------------------------------------------------------------

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) throw DomainError("fft size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& v : a) v /= static_cast<double>(n);
  }
}

std::vector<std::complex<double>> rfft(std::span<const double> x, int n) {
  std::vector<std::complex<double>> a(static_cast<std::size_t>(n));
  const std::size_t m = std::min<std::size_t>(x.size(), static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < m; ++i) a[i] = x[i];
  fft_inplace(a, false);
  a.resize(static_cast<std::size_t>(n / 2 + 1));
  return a;
}

// --- Spectral chain ---------------------------------------------------------

AudioClip pre_emphasis(const AudioClip& clip, double alpha) {
  if (alpha < 0.0 || alpha >= 1.0) throw DomainError("pre-emphasis alpha must be in [0, 1)");
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.resize(clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    out.samples[i] = i == 0 ? clip.samples[0] : clip.samples[i] - alpha * clip.samples[i - 1];
  return out;
}

ComplexSpectrogram stft(const AudioClip& clip, const PreprocessConfig& cfg) {
  cfg.validate(clip.sample_rate_hz);
  const int window = cfg.window_samples(clip.sample_rate_hz);
  const int hop = cfg.hop_samples(clip.sample_rate_hz);
  const int fft = cfg.fft_size_for(clip.sample_rate_hz);
  const auto n = static_cast<std::ptrdiff_t>(clip.samples.size());
  if (n < window)
    throw InsufficientInputError("stft: clip shorter than one analysis window");

  ComplexSpectrogram out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.window_samples = window;
  out.hop_samples = hop;
  out.fft_size = fft;
  out.bins = fft / 2 + 1;
  out.frames = 1 + static_cast<int>((n - window) / hop);
  out.values.resize(std::size_t(out.frames) * out.bins);

  const std::vector<double> win = detail::hamming_window(window);
  std::vector<double> buf(static_cast<std::size_t>(window));
  for (int f = 0; f < out.frames; ++f) {
    const std::size_t start = std::size_t(f) * hop;
    for (int i = 0; i < window; ++i)
      buf[static_cast<std::size_t>(i)] = clip.samples[start + i] * win[static_cast<std::size_t>(i)];
    auto spec = rfft(buf, fft);
    std::copy(spec.begin(), spec.end(), out.values.begin() + std::size_t(f) * out.bins);
  }
  return out;
}

AudioClip wiener_filter(const AudioClip& clip, const WienerConfig& cfg,
                        const PreprocessConfig& pcfg) {
  PreprocessConfig p = pcfg;
  p.wiener = cfg;
  p.validate(clip.sample_rate_hz);
  const int window = p.window_samples(clip.sample_rate_hz);
  const int hop = p.hop_samples(clip.sample_rate_hz);
  const int fft = p.fft_size_for(clip.sample_rate_hz);
  if (static_cast<std::ptrdiff_t>(clip.samples.size()) < window)
    throw InsufficientInputError("wiener_filter: clip shorter than one analysis window");

  auto stack = detail::analyze_covering(clip.samples, window, hop, fft);

  // Noise PSD from the lowest-energy fraction of frames.
  std::vector<double> energy(static_cast<std::size_t>(stack.frames), 0.0);
  for (int f = 0; f < stack.frames; ++f) {
    double e = 0.0;
    for (int b = 0; b < stack.bins; ++b) e += std::norm(stack.at(f, b));
    energy[static_cast<std::size_t>(f)] = e;
  }
  std::vector<int> order(static_cast<std::size_t>(stack.frames));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return energy[static_cast<std::size_t>(a)] < energy[static_cast<std::size_t>(b)];
  });
  const int k = std::max(1, static_cast<int>(std::ceil(cfg.noise_frame_fraction * stack.frames)));

  std::vector<double> noise_psd(static_cast<std::size_t>(stack.bins), 0.0);
  for (int i = 0; i < k; ++i)
    for (int b = 0; b < stack.bins; ++b)
      noise_psd[static_cast<std::size_t>(b)] += std::norm(stack.at(order[static_cast<std::size_t>(i)], b));
  for (auto& v : noise_psd) v /= k;

  for (int f = 0; f < stack.frames; ++f) {
    for (int b = 0; b < stack.bins; ++b) {
      const double power = std::norm(stack.at(f, b));
      double gain = cfg.gain_floor;
      if (power > 0.0)
        gain = std::max((power - noise_psd[static_cast<std::size_t>(b)]) / power, cfg.gain_floor);
      stack.at(f, b) *= gain;
    }
  }

  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples = detail::synthesize_ola(stack, clip.samples.size());
  return out;
}

RealMatrix log_amplitude(const ComplexSpectrogram& spec, double epsilon) {
  RealMatrix out = RealMatrix::zeros(spec.frames, spec.bins);
  for (int f = 0; f < spec.frames; ++f)
    for (int b = 0; b < spec.bins; ++b) out.at(f, b) = std::log(std::abs(spec.at(f, b)) + epsilon);
  return out;
}

double hz_to_mel(double f_hz) {
  if (f_hz < 0.0) throw DomainError("hz_to_mel: frequency must be nonnegative");
  return 2595.0 * std::log10(1.0 + f_hz / 700.0);
}

double mel_to_hz(double mel) {
  if (mel < 0.0) throw DomainError("mel_to_hz: mel value must be nonnegative");
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank build_mel_filterbank(const PreprocessConfig& cfg, int sample_rate_hz) {
  cfg.validate(sample_rate_hz);
  const int fft = cfg.fft_size_for(sample_rate_hz);
  const int bins = fft / 2 + 1;
  if (cfg.n_mels > bins)
    throw ConfigError("n_mels exceeds spectrogram bins; increase fft_size");

  const double mel_max = hz_to_mel(sample_rate_hz / 2.0);
  const double bin_hz = static_cast<double>(sample_rate_hz) / fft;

  MelFilterbank fb;
  fb.n_mels = cfg.n_mels;
  fb.bins = bins;
  fb.weights.assign(std::size_t(cfg.n_mels) * bins, 0.0);
  fb.center_hz.resize(static_cast<std::size_t>(cfg.n_mels));

  // n_mels + 2 edge points equispaced on the mel axis; triangle m spans
  // [point m-1, point m+1] with its peak at point m, all in continuous
  // FFT-bin units.
  std::vector<double> point_bin(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    const double hz = mel_to_hz(mel_max * i / (cfg.n_mels + 1));
    point_bin[static_cast<std::size_t>(i)] = hz / bin_hz;
    if (i >= 1 && i <= cfg.n_mels) fb.center_hz[static_cast<std::size_t>(i - 1)] = hz;
  }

  for (int m = 0; m < cfg.n_mels; ++m) {
    const double c = point_bin[static_cast<std::size_t>(m) + 1];
    // Half-widths floored at one bin spacing so very narrow low-frequency
    // triangles still cover at least one FFT bin.
    const double l = std::min(point_bin[static_cast<std::size_t>(m)], c - 1.0);
    const double r = std::max(point_bin[static_cast<std::size_t>(m) + 2], c + 1.0);
    const int b_lo = std::max(0, static_cast<int>(std::ceil(l)));
    const int b_hi = std::min(bins - 1, static_cast<int>(std::floor(r)));
    for (int b = b_lo; b <= b_hi; ++b) {
      const double up = (b - l) / (c - l);
      const double down = (r - b) / (r - c);
      const double w = std::max(0.0, std::min(up, down));
      fb.weights[std::size_t(m) * bins + b] = w;
    }
  }
  return fb;
}

RealMatrix mel_spectrogram(const ComplexSpectrogram& spec, const MelFilterbank& fb) {
  if (fb.bins != spec.bins)
    throw ShapeError("mel_spectrogram: filterbank bins " + std::to_string(fb.bins) +
                     " != spectrogram bins " + std::to_string(spec.bins));
  RealMatrix out = RealMatrix::zeros(spec.frames, fb.n_mels);
  std::vector<double> power(static_cast<std::size_t>(spec.bins));
  for (int f = 0; f < spec.frames; ++f) {
    for (int b = 0; b < spec.bins; ++b) power[static_cast<std::size_t>(b)] = std::norm(spec.at(f, b));
    for (int m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      for (int b = 0; b < spec.bins; ++b) acc += fb.at(m, b) * power[static_cast<std::size_t>(b)];
      out.at(f, m) = acc;
    }
  }
  return out;
}

FeatureMap log_mel_features(const ComplexSpectrogram& spec, const MelFilterbank& fb,
                            double epsilon) {
  const RealMatrix ms = mel_spectrogram(spec, fb);
  FeatureMap fm;
  fm.kind = FeatureKind::LMS;
  fm.frames = ms.rows;
  fm.coeffs = ms.cols;
  fm.sample_rate_hz = spec.sample_rate_hz;
  fm.values.resize(ms.values.size());
  for (std::size_t i = 0; i < ms.values.size(); ++i) fm.values[i] = std::log(ms.values[i] + epsilon);
  return fm;
}

RealMatrix dct_matrix(int n) {
  RealMatrix d = RealMatrix::zeros(n, n);
  const double scale = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    const double row_scale = (k == 0) ? scale / std::sqrt(2.0) : scale;
    for (int i = 0; i < n; ++i)
      d.at(k, i) = row_scale * std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * n));
  }
  return d;
}

FeatureMap mfcc(const FeatureMap& lms, int n_mfcc) {
  if (lms.kind != FeatureKind::LMS)
    throw DomainError("mfcc: input feature map must be of kind LMS");
  if (n_mfcc < 1 || n_mfcc > lms.coeffs)
    throw ConfigError("mfcc: n_mfcc must be in [1, coeffs]");

  const RealMatrix d = dct_matrix(lms.coeffs);
  FeatureMap out;
  out.kind = FeatureKind::MFCC;
  out.frames = lms.frames;
  out.coeffs = n_mfcc;
  out.sample_rate_hz = lms.sample_rate_hz;
  out.config_fingerprint = lms.config_fingerprint;
  out.values.resize(std::size_t(lms.frames) * n_mfcc);
  for (int f = 0; f < lms.frames; ++f) {
    for (int k = 0; k < n_mfcc; ++k) {
      double acc = 0.0;
      for (int i = 0; i < lms.coeffs; ++i) acc += d.at(k, i) * lms.at(f, i);
      out.at(f, k) = acc;
    }
  }
  return out;
}

FeatureMap extract_features(const AudioClip& clip, FeatureKind kind,
                            const PreprocessConfig& cfg) {
  cfg.validate(clip.sample_rate_hz);
  const AudioClip denoised = wiener_filter(clip, cfg.wiener, cfg);
  const AudioClip emphasized = pre_emphasis(denoised, cfg.preemphasis_alpha);
  const ComplexSpectrogram spec = stft(emphasized, cfg);
  const MelFilterbank fb = build_mel_filterbank(cfg, clip.sample_rate_hz);
  FeatureMap fm = log_mel_features(spec, fb, cfg.log_epsilon);
  fm.config_fingerprint = cfg.fingerprint(clip.sample_rate_hz);
  if (kind == FeatureKind::MFCC) fm = mfcc(fm, cfg.n_mfcc);
  for (const double v : fm.values) {
    if (!std::isfinite(v)) throw DomainError("extract_features: non-finite feature value");
  }
  return fm;
}

std::vector<double> FeatureMap::floor_row(double) const {
  // Per-column minimum: a silence-like row for padding purposes.
  std::vector<double> row(static_cast<std::size_t>(coeffs), 0.0);
  if (frames == 0) return row;
  for (int c = 0; c < coeffs; ++c) {
    double lo = at(0, c);
    for (int f = 1; f < frames; ++f) lo = std::min(lo, at(f, c));
    row[static_cast<std::size_t>(c)] = lo;
  }
  return row;
}

// --- Feature file I/O -------------------------------------------------------

namespace {

constexpr char kFeatureMagic[4] = {'S', 'K', 'F', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw FormatError(std::string("feature file truncated reading ") + what);
  return v;
}

}  // namespace

const char* to_string(FeatureKind kind) {
  return kind == FeatureKind::LMS ? "lms" : "mfcc";
}

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "lms" || s == "LMS") return FeatureKind::LMS;
  if (s == "mfcc" || s == "MFCC") return FeatureKind::MFCC;
  throw ConfigError("unknown feature kind: " + std::string(s));
}

void write_features(const FeatureMap& fm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kFeatureMagic, 4);
  write_raw(out, kFeatureVersion);
  write_raw(out, static_cast<std::uint8_t>(fm.kind == FeatureKind::LMS ? 0 : 1));
  write_raw(out, static_cast<std::uint32_t>(fm.frames));
  write_raw(out, static_cast<std::uint32_t>(fm.coeffs));
  write_raw(out, static_cast<std::uint32_t>(fm.sample_rate_hz));
  write_raw(out, fm.config_fingerprint);
  for (const double v : fm.values) write_raw(out, static_cast<float>(v));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureMap read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw FormatError("bad feature file magic: " + path.string());
  const auto version = read_raw<std::uint32_t>(in, "version");
  if (version != kFeatureVersion)
    throw UnsupportedError("unsupported feature file version: " + std::to_string(version));
  const auto kind = read_raw<std::uint8_t>(in, "kind");
  if (kind > 1) throw FormatError("bad feature kind byte");

  FeatureMap fm;
  fm.kind = kind == 0 ? FeatureKind::LMS : FeatureKind::MFCC;
  fm.frames = static_cast<int>(read_raw<std::uint32_t>(in, "frames"));
  fm.coeffs = static_cast<int>(read_raw<std::uint32_t>(in, "coeffs"));
  fm.sample_rate_hz = static_cast<int>(read_raw<std::uint32_t>(in, "sample_rate"));
  fm.config_fingerprint = read_raw<std::uint64_t>(in, "fingerprint");
  fm.values.resize(std::size_t(fm.frames) * fm.coeffs);
  for (auto& v : fm.values) v = read_raw<float>(in, "data");
  return fm;
}

void write_features_csv(const FeatureMap& fm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "# kind=" << to_string(fm.kind) << " frames=" << fm.frames << " coeffs=" << fm.coeffs
      << " sample_rate=" << fm.sample_rate_hz << "\n";
  char buf[32];
  for (int f = 0; f < fm.frames; ++f) {
    for (int c = 0; c < fm.coeffs; ++c) {
      std::snprintf(buf, sizeof(buf), "%.6g", fm.at(f, c));
      out << buf << (c + 1 == fm.coeffs ? "\n" : ",");
    }
  }
}

}  // namespace stresskit
