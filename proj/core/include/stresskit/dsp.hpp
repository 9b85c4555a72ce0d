#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stresskit/audio.hpp"

namespace stresskit {

/// Spectral-gain denoiser settings. The noise spectrum is estimated from
/// the lowest-energy fraction of analysis frames, so the input is expected
/// to contain some near-silent frames (speech pauses).
struct WienerConfig {
  double noise_frame_fraction = 0.10;  // fraction of frames used as noise estimate
  double gain_floor = 0.01;            // minimum spectral gain
};

/// Front-end analysis settings shared by every spectral stage.
struct PreprocessConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 0;  // 0 selects the next power of two >= window samples
  double preemphasis_alpha = 0.97;
  int n_mels = 128;
  int n_mfcc = 20;
  double log_epsilon = 1e-10;
  WienerConfig wiener;

  int window_samples(int sample_rate_hz) const;
  int hop_samples(int sample_rate_hz) const;
  int fft_size_for(int sample_rate_hz) const;

  /// Stable fingerprint of every field (plus the sample rate), embedded in
  /// feature files so mixed-config features are detectable.
  std::uint64_t fingerprint(int sample_rate_hz) const;

  void validate(int sample_rate_hz) const;
};

/// Dense row-major real matrix, the working type between spectral stages.
struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  static RealMatrix zeros(int r, int c) { return {r, c, std::vector<double>(std::size_t(r) * c, 0.0)}; }
  double& at(int r, int c) { return values[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return values[std::size_t(r) * cols + c]; }
};

/// STFT output: frames x bins complex values with the geometry that
/// produced them.
struct ComplexSpectrogram {
  int frames = 0;
  int bins = 0;  // fft_size / 2 + 1
  std::vector<std::complex<double>> values;
  int sample_rate_hz = 0;
  int window_samples = 0;
  int hop_samples = 0;
  int fft_size = 0;

  std::complex<double>& at(int f, int b) { return values[std::size_t(f) * bins + b]; }
  std::complex<double> at(int f, int b) const { return values[std::size_t(f) * bins + b]; }
};

enum class FeatureKind { LMS, MFCC };

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view s);

/// Time x coefficient feature matrix (128-band log-mel or its first
/// n_mfcc cepstral coefficients).
struct FeatureMap {
  FeatureKind kind = FeatureKind::LMS;
  int frames = 0;
  int coeffs = 0;
  int sample_rate_hz = 0;
  std::uint64_t config_fingerprint = 0;
  std::vector<double> values;  // row-major frames x coeffs

  double& at(int f, int c) { return values[std::size_t(f) * coeffs + c]; }
  double at(int f, int c) const { return values[std::size_t(f) * coeffs + c]; }

  /// Row a silent input would produce; used when padding to a fixed length.
  std::vector<double> floor_row(double log_epsilon = 1e-10) const;
};

/// Triangular mel filterbank sampled on FFT bins.
struct MelFilterbank {
  int n_mels = 0;
  int bins = 0;
  std::vector<double> weights;  // n_mels x bins, nonnegative
  std::vector<double> center_hz;

  double at(int m, int b) const { return weights[std::size_t(m) * bins + b]; }
};

// --- Spectral chain -------------------------------------------------------

/// Spectral-gain noise reduction; preserves length and phase.
AudioClip wiener_filter(const AudioClip& clip, const WienerConfig& cfg,
                        const PreprocessConfig& pcfg);

/// y[n] = x[n] - alpha * x[n-1] (y[0] = x[0]).
AudioClip pre_emphasis(const AudioClip& clip, double alpha);

/// Hamming-windowed short-time Fourier transform.
/// frames = 1 + floor((N - window) / hop); requires N >= window.
ComplexSpectrogram stft(const AudioClip& clip, const PreprocessConfig& cfg);

/// log(|X| + epsilon), element-wise.
RealMatrix log_amplitude(const ComplexSpectrogram& spec, double epsilon = 1e-10);

/// mel = 2595 * log10(1 + f / 700), and its inverse.
double hz_to_mel(double f_hz);
double mel_to_hz(double mel);

/// n_mels triangular filters with centers equally spaced on the mel axis
/// between 0 and sample_rate / 2.
MelFilterbank build_mel_filterbank(const PreprocessConfig& cfg, int sample_rate_hz);

/// Power mel spectrogram: MS[f][m] = sum_b |X[f][b]|^2 * W[m][b].
RealMatrix mel_spectrogram(const ComplexSpectrogram& spec, const MelFilterbank& fb);

/// log(MS + epsilon) as a FeatureMap of kind LMS.
FeatureMap log_mel_features(const ComplexSpectrogram& spec, const MelFilterbank& fb,
                            double epsilon);

/// Orthonormal DCT-II along the coefficient axis, truncated to n_mfcc.
FeatureMap mfcc(const FeatureMap& lms, int n_mfcc);

/// Full chain in order: Wiener -> pre-emphasis -> STFT -> mel -> log
/// (-> DCT for MFCC).
FeatureMap extract_features(const AudioClip& clip, FeatureKind kind,
                            const PreprocessConfig& cfg);

// --- Feature file I/O -----------------------------------------------------

/// Binary container: magic, version, kind, frames, coeffs, sample rate,
/// config fingerprint, then row-major 32-bit floats.
void write_features(const FeatureMap& fm, const std::filesystem::path& path);
FeatureMap read_features(const std::filesystem::path& path);

/// Plain CSV (one frame per row) for inspection.
void write_features_csv(const FeatureMap& fm, const std::filesystem::path& path);

// --- FFT ------------------------------------------------------------------

/// In-place radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

/// Real-input FFT returning the n/2 + 1 nonredundant bins; x is zero-padded
/// or truncated to n.
std::vector<std::complex<double>> rfft(std::span<const double> x, int n);

/// Orthonormal DCT-II matrix of size n x n (rows = output coefficients).
RealMatrix dct_matrix(int n);

}  // namespace stresskit
