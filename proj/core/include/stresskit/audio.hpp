#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace stresskit {

/// Mono waveform plus its sample rate. Samples are normalized amplitudes
/// in [-1, 1]; the unit every DSP stage operates on.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

/// Read a PCM RIFF/WAV file (8- or 16-bit, mono or stereo). 16-bit values
/// map to [-1, 1) by division by 32768; stereo is downmixed by channel mean.
AudioClip read_wav(const std::filesystem::path& path);

/// Write a clip as 16-bit mono PCM. Samples are clamped to [-1, 1] and
/// quantized, so a read-back differs by at most one quantization step.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Band-limited sample-rate conversion (windowed-sinc, Hann, 32 taps per
/// side). Output length is round(len * new_rate / old_rate).
AudioClip resample(const AudioClip& clip, int new_rate_hz);

/// Core interpolation kernel shared with the anonymizer: output[m] is the
/// band-limited evaluation of the input at position m * ratio, so ratio > 1
/// plays the signal faster (output is shorter) and applies the matching
/// anti-alias lowpass. Output length is round(len / ratio).
std::vector<double> resample_by_ratio(std::span<const double> x, double ratio);

}  // namespace stresskit
