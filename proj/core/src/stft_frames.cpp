#include "stft_frames.hpp"

#include <algorithm>
#include <cmath>

#include "stresskit/dsp.hpp"

namespace stresskit::detail {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<double> hamming_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (n - 1));
  return w;
}

FrameStack analyze_covering(std::span<const double> x, int window, int hop, int fft_size) {
  FrameStack out;
  out.window = window;
  out.hop = hop;
  out.fft_size = fft_size;
  out.bins = fft_size / 2 + 1;

  const auto n = static_cast<std::ptrdiff_t>(x.size());
  // Tail-padded frame count: last frame start is the first multiple of hop
  // at or past n, so sample n-1 always falls inside some frame.
  out.frames = 1 + static_cast<int>(n / hop);
  out.values.resize(std::size_t(out.frames) * out.bins);

  const std::vector<double> win = hamming_window(window);
  std::vector<double> buf(static_cast<std::size_t>(window));
  for (int f = 0; f < out.frames; ++f) {
    const std::ptrdiff_t start = std::ptrdiff_t(f) * hop;
    for (int i = 0; i < window; ++i) {
      const std::ptrdiff_t src = start + i;
      buf[static_cast<std::size_t>(i)] =
          (src < n) ? x[static_cast<std::size_t>(src)] * win[static_cast<std::size_t>(i)] : 0.0;
    }
    auto spec = rfft(buf, fft_size);
    std::copy(spec.begin(), spec.end(), out.values.begin() + std::size_t(f) * out.bins);
  }
  return out;
}

std::vector<double> synthesize_ola(const FrameStack& stack, std::size_t out_len) {
  const int window = stack.window;
  const std::vector<double> win = hamming_window(window);

  const std::size_t span = std::size_t(stack.frames - 1) * stack.hop + window;
  std::vector<double> acc(span, 0.0);
  std::vector<double> wsum(span, 0.0);

  std::vector<std::complex<double>> frame(static_cast<std::size_t>(stack.fft_size));
  for (int f = 0; f < stack.frames; ++f) {
    // Rebuild the full conjugate-symmetric spectrum and invert.
    for (int b = 0; b < stack.bins; ++b) frame[static_cast<std::size_t>(b)] = stack.at(f, b);
    for (int b = stack.bins; b < stack.fft_size; ++b)
      frame[static_cast<std::size_t>(b)] = std::conj(stack.at(f, stack.fft_size - b));
    fft_inplace(frame, true);

    const std::size_t start = std::size_t(f) * stack.hop;
    for (int i = 0; i < window; ++i) {
      acc[start + i] += frame[static_cast<std::size_t>(i)].real() * win[static_cast<std::size_t>(i)];
      wsum[start + i] += win[static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];
    }
  }

  std::vector<double> y(out_len, 0.0);
  const std::size_t m = std::min(out_len, span);
  for (std::size_t i = 0; i < m; ++i) y[i] = wsum[i] > 1e-12 ? acc[i] / wsum[i] : 0.0;
  return y;
}

}  // namespace stresskit::detail
