#include "stresskit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "stresskit/errors.hpp"

namespace stresskit {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | p[1] << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();

  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::uint32_t chunk_len = read_u32(p + pos + 4);
    const unsigned char* body = p + pos + 8;
    if (pos + 8 + chunk_len > n)
      throw FormatError("truncated chunk in WAV file: " + path.string());
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw FormatError("fmt chunk too short: " + path.string());
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
      have_data = true;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || !have_data)
    throw FormatError("missing fmt or data chunk: " + path.string());
  if (format != 1) throw UnsupportedError("only PCM WAV is supported");
  if (bits != 8 && bits != 16) throw UnsupportedError("only 8/16-bit PCM is supported");
  if (channels != 1 && channels != 2) throw UnsupportedError("only mono/stereo is supported");
  if (rate == 0) throw FormatError("zero sample rate in WAV header");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_len / frame_bytes;

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = data + i * frame_bytes + c * bytes_per_sample;
      if (bits == 16) {
        const auto v = static_cast<std::int16_t>(read_u16(s));
        acc += v / 32768.0;
      } else {
        acc += (int(s[0]) - 128) / 128.0;
      }
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_len = n * 2;

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.append("data");
  put_u32(out, data_len);
  for (const double s : clip.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    auto q = static_cast<long>(std::lround(clamped * 32768.0));
    q = std::clamp(q, -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<double> resample_by_ratio(std::span<const double> x, double ratio) {
  constexpr int kTaps = 32;  // taps per side
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto out_len = static_cast<std::ptrdiff_t>(std::llround(n / ratio));
  std::vector<double> y(static_cast<std::size_t>(std::max<std::ptrdiff_t>(out_len, 0)));
  if (n == 0 || out_len <= 0) return y;

  // Anti-alias cutoff relative to the input Nyquist; < 1 only when the
  // output grid is coarser than the input grid.
  const double cutoff = std::min(1.0, 1.0 / ratio);
  for (std::ptrdiff_t m = 0; m < out_len; ++m) {
    const double center = m * ratio;
    const auto base = static_cast<std::ptrdiff_t>(std::floor(center));
    double acc = 0.0;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(base - kTaps + 1, 0);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(base + kTaps, n - 1);
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double t = center - static_cast<double>(i);
      const double u = t / kTaps;
      const double hann = 0.5 + 0.5 * std::cos(kPi * u);
      double sinc;
      if (std::abs(t) < 1e-12) {
        sinc = cutoff;
      } else {
        sinc = std::sin(kPi * cutoff * t) / (kPi * t);
      }
      acc += x[static_cast<std::size_t>(i)] * sinc * hann;
    }
    y[static_cast<std::size_t>(m)] = acc;
  }
  return y;
}

AudioClip resample(const AudioClip& clip, int new_rate_hz) {
  if (new_rate_hz <= 0) throw DomainError("resample: new rate must be positive");
  if (clip.sample_rate_hz <= 0) throw DomainError("resample: clip has invalid sample rate");
  if (new_rate_hz == clip.sample_rate_hz) return clip;

  AudioClip out;
  out.sample_rate_hz = new_rate_hz;
  out.samples = resample_by_ratio(clip.samples,
                                  static_cast<double>(clip.sample_rate_hz) / new_rate_hz);
  return out;
}

}  // namespace stresskit
