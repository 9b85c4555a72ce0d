#pragma once

// Internal analysis/synthesis helpers for the filter-and-reconstruct paths
// (noise reduction, spectral warping). Not part of the public API.

#include <complex>
#include <span>
#include <vector>

namespace stresskit::detail {

struct FrameStack {
  int frames = 0;
  int bins = 0;
  int window = 0;
  int hop = 0;
  int fft_size = 0;
  std::vector<std::complex<double>> values;  // frames x bins

  std::complex<double>& at(int f, int b) { return values[std::size_t(f) * bins + b]; }
  std::complex<double> at(int f, int b) const { return values[std::size_t(f) * bins + b]; }
};

std::vector<double> hamming_window(int n);

/// Windowed FFT frames over the signal zero-padded at the tail so every
/// input sample is covered by at least one frame.
FrameStack analyze_covering(std::span<const double> x, int window, int hop, int fft_size);

/// Weighted overlap-add inverse of analyze_covering, normalized by the
/// accumulated squared window; returns exactly out_len samples.
std::vector<double> synthesize_ola(const FrameStack& stack, std::size_t out_len);

}  // namespace stresskit::detail
