#include "stresskit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stresskit/errors.hpp"
#include "stresskit/rng.hpp"
#include "stft_frames.hpp"

namespace stresskit {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* to_string(AugmentMethod m) {
  switch (m) {
    case AugmentMethod::None: return "none";
    case AugmentMethod::Vtlp: return "vtlp";
    case AugmentMethod::WhiteNoise: return "white_noise";
  }
  return "?";
}

AugmentMethod augment_method_from_string(std::string_view s) {
  if (s == "none") return AugmentMethod::None;
  if (s == "vtlp") return AugmentMethod::Vtlp;
  if (s == "white_noise" || s == "noise") return AugmentMethod::WhiteNoise;
  throw ConfigError("unknown augmentation method: " + std::string(s));
}

AudioClip vtlp(const AudioClip& clip, double warp, const PreprocessConfig& cfg,
               double cutoff_fraction) {
  if (warp <= 0.0) throw DomainError("vtlp: warp factor must be positive");
  if (cutoff_fraction <= 0.0 || cutoff_fraction >= 1.0)
    throw ConfigError("vtlp: cutoff fraction must be in (0, 1)");
  cfg.validate(clip.sample_rate_hz);

  const int sr = clip.sample_rate_hz;
  const int window = cfg.window_samples(sr);
  const int hop = cfg.hop_samples(sr);
  const int fft = cfg.fft_size_for(sr);
  if (static_cast<std::ptrdiff_t>(clip.samples.size()) < window)
    throw InsufficientInputError("vtlp: clip shorter than one analysis window");

  const auto stack = detail::analyze_covering(clip.samples, window, hop, fft);
  detail::FrameStack out = stack;

  const double nyquist = sr / 2.0;
  const double f_hi = cutoff_fraction * nyquist;
  // Breakpoint chosen so the warped knee never crosses Nyquist.
  const double f_break = f_hi * std::min(warp, 1.0) / warp;
  const double knee = warp * f_break;

  const double bin_hz = static_cast<double>(sr) / fft;
  for (int b = 0; b < stack.bins; ++b) {
    const double f_out = b * bin_hz;
    // Inverse of the piecewise-linear warp: which source frequency lands here.
    double f_src;
    if (f_out <= knee) {
      f_src = f_out / warp;
    } else {
      f_src = f_break + (f_out - knee) * (nyquist - f_break) / (nyquist - knee);
    }
    const double src_bin = f_src / bin_hz;
    const int lo = static_cast<int>(std::floor(src_bin));
    const double frac = src_bin - lo;
    // Frame-to-frame phase must advance at the shifted frequency, not the
    // source frequency, or overlapped frames cancel; this rotation supplies
    // the difference.
    const double dphi = 2.0 * kPi * (f_out - f_src) * hop / sr;
    for (int f = 0; f < stack.frames; ++f) {
      std::complex<double> v;
      if (lo >= stack.bins - 1) {
        v = stack.at(f, stack.bins - 1);
      } else if (lo < 0) {
        v = stack.at(f, 0);
      } else {
        v = (1.0 - frac) * stack.at(f, lo) + frac * stack.at(f, lo + 1);
      }
      const double theta = dphi * f;
      out.at(f, b) = v * std::complex<double>(std::cos(theta), std::sin(theta));
    }
  }

  AudioClip result;
  result.sample_rate_hz = sr;
  result.samples = detail::synthesize_ola(out, clip.samples.size());
  return result;
}

AudioClip add_white_noise(const AudioClip& clip, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return clip;  // method-None sentinel
  if (!std::isfinite(snr_db)) throw DomainError("add_white_noise: snr_db must be finite");

  double power = 0.0;
  for (const double v : clip.samples) power += v * v;
  if (clip.samples.empty() || power <= 0.0)
    throw DataError("add_white_noise: silent clip has undefined SNR");
  power /= static_cast<double>(clip.samples.size());

  const double noise_power = power / std::pow(10.0, snr_db / 10.0);
  const double sigma = std::sqrt(noise_power);

  Rng rng(seed);
  AudioClip out = clip;
  for (auto& v : out.samples) v += sigma * rng.gaussian();
  return out;
}

std::map<std::pair<StressLabel, Split>, long> count_by_class_and_split(const Manifest& manifest) {
  std::map<std::pair<StressLabel, Split>, long> counts;
  for (const auto& u : manifest.utterances) {
    const auto label = u.effective_stress();
    if (!label) continue;
    if (!u.split) throw DataError("augment: utterance '" + u.id + "' has no split");
    ++counts[{*label, *u.split}];
  }
  return counts;
}

AugmentationPlan build_plan(const std::map<std::pair<StressLabel, Split>, long>& class_counts,
                            StressLabel minority, int copies_per_method) {
  if (copies_per_method < 0) throw ConfigError("build_plan: copies_per_method must be >= 0");
  const StressLabel majority =
      minority == StressLabel::Stress ? StressLabel::NoStress : StressLabel::Stress;

  std::map<Split, long> minority_n, majority_n;
  for (const auto& [key, n] : class_counts) {
    if (n <= 0) throw DataError("build_plan: empty class cell");
    (key.first == minority ? minority_n : majority_n)[key.second] += n;
  }
  if (minority_n.empty() || majority_n.empty())
    throw DataError("build_plan: both classes must be present");

  AugmentationPlan plan;
  plan.copies_per_method = copies_per_method;
  for (const auto& [split, n] : minority_n) {
    PlanCounts c;
    c.clean = n;
    c.vtlp = static_cast<long>(copies_per_method) * n;
    c.noise = static_cast<long>(copies_per_method) * n;
    plan.cells[{minority, split}] = c;
  }
  for (const auto& [split, n] : majority_n) {
    // The majority contributes the same number of augmented utterances per
    // method as the minority, each source used exactly once.
    const long m = minority_n.count(split) ? copies_per_method * minority_n.at(split) : 0;
    if (n < 2 * m)
      throw DataError("build_plan: majority class too small in split '" +
                      std::string(to_string(split)) + "' (" + std::to_string(n) + " < " +
                      std::to_string(2 * m) + ")");
    PlanCounts c;
    c.clean = n - 2 * m;
    c.vtlp = m;
    c.noise = m;
    plan.cells[{majority, split}] = c;
  }
  return plan;
}

namespace {

struct CellAssignment {
  std::vector<std::size_t> clean, vtlp, noise;  // indices into the manifest
  int vtlp_per_sample = 0;  // keep-all mode: copies per source
  int noise_per_sample = 0;
  bool keep_all = false;
};

std::string cell_name(StressLabel label, Split split) {
  return std::string(to_string(label)) + "/" + to_string(split);
}

}  // namespace

Manifest execute_plan(const Manifest& manifest, const AugmentationPlan& plan,
                      const AugmentationSpec& spec, std::uint64_t seed,
                      const std::filesystem::path& out_audio_dir, const PreprocessConfig& pcfg,
                      bool materialize_audio) {
  // Collect sources per cell.
  std::map<std::pair<StressLabel, Split>, std::vector<std::size_t>> sources;
  for (std::size_t i = 0; i < manifest.utterances.size(); ++i) {
    const auto& u = manifest.utterances[i];
    const auto label = u.effective_stress();
    if (!label) continue;
    if (!u.split) throw DataError("execute_plan: utterance '" + u.id + "' has no split");
    sources[{*label, *u.split}].push_back(i);
  }

  // Validate counts and derive per-cell assignments.
  std::map<std::pair<StressLabel, Split>, CellAssignment> assignment;
  for (const auto& [key, cell] : plan.cells) {
    const auto it = sources.find(key);
    const long n = it == sources.end() ? 0 : static_cast<long>(it->second.size());
    const std::string where = cell_name(key.first, key.second);
    if (n == 0) throw DataError("execute_plan: plan names cell " + where + " with no sources");

    CellAssignment a;
    if (cell.clean == n && cell.vtlp % n == 0 && cell.noise % n == 0) {
      a.keep_all = true;
      a.vtlp_per_sample = static_cast<int>(cell.vtlp / n);
      a.noise_per_sample = static_cast<int>(cell.noise / n);
      a.clean = it->second;
    } else if (cell.total() == n) {
      std::vector<std::size_t> shuffled = it->second;
      Rng rng(Rng::mix(seed, Rng::hash_string(where)));
      rng.shuffle(shuffled);
      a.clean.assign(shuffled.begin(), shuffled.begin() + cell.clean);
      a.vtlp.assign(shuffled.begin() + cell.clean, shuffled.begin() + cell.clean + cell.vtlp);
      a.noise.assign(shuffled.begin() + cell.clean + cell.vtlp, shuffled.end());
    } else {
      throw DataError("execute_plan: plan for " + where + " (" + std::to_string(cell.clean) +
                      "+" + std::to_string(cell.vtlp) + "+" + std::to_string(cell.noise) +
                      ") is inconsistent with " + std::to_string(n) + " sources");
    }
    assignment[key] = std::move(a);
  }
  for (const auto& [key, src] : sources) {
    if (!plan.cells.count(key))
      throw DataError("execute_plan: sources in unplanned cell " + cell_name(key.first, key.second));
  }

  // Per-source role lookup for partition cells.
  std::map<std::size_t, AugmentMethod> converted;
  for (const auto& [key, a] : assignment) {
    if (a.keep_all) continue;
    for (const auto i : a.vtlp) converted[i] = AugmentMethod::Vtlp;
    for (const auto i : a.noise) converted[i] = AugmentMethod::WhiteNoise;
  }
  std::map<std::size_t, const CellAssignment*> cell_of;
  for (const auto& [key, a] : assignment)
    for (const auto* list : {&a.clean, &a.vtlp, &a.noise})
      for (const auto i : *list) cell_of[i] = &assignment.at(key);

  const auto make_copy = [&](const Utterance& src, AugmentMethod method,
                             int copy_index) -> Utterance {
    Utterance copy = src;
    copy.id = src.id + "-" + to_string(method) + std::to_string(copy_index);
    copy.augment_method = to_string(method);
    copy.source_id = src.id;
    copy.copy_index = copy_index;
    copy.audio_path.clear();
    if (materialize_audio) {
      if (src.audio_path.empty())
        throw DataError("execute_plan: source '" + src.id + "' has no audio");
      const AudioClip clip = read_wav(src.audio_path);
      const std::uint64_t cseed =
          Rng::mix(Rng::mix(spec.rng_seed ? spec.rng_seed : seed, Rng::hash_string(src.id)),
                   (static_cast<std::uint64_t>(method) << 32) |
                       static_cast<std::uint32_t>(copy_index));
      AudioClip produced;
      if (method == AugmentMethod::Vtlp) {
        Rng rng(cseed);
        const double warp = rng.uniform(spec.vtlp_warp_low, spec.vtlp_warp_high);
        produced = vtlp(clip, warp, pcfg, spec.vtlp_cutoff_fraction);
      } else {
        produced = add_white_noise(clip, spec.noise_snr_db, cseed);
      }
      const std::filesystem::path dir =
          out_audio_dir / (src.split ? to_string(*src.split) : "all");
      std::filesystem::create_directories(dir);
      const std::filesystem::path wav = dir / (copy.id + ".wav");
      write_wav(produced, wav);
      copy.audio_path = wav.string();
    }
    return copy;
  };

  Manifest out;
  out.corpus_name = manifest.corpus_name;
  out.sample_rate_hz = manifest.sample_rate_hz;
  out.creation_seed = seed;

  for (std::size_t i = 0; i < manifest.utterances.size(); ++i) {
    const auto& src = manifest.utterances[i];
    if (!cell_of.count(i)) {
      out.utterances.push_back(src);  // unlabeled rows pass through untouched
      continue;
    }
    const CellAssignment& a = *cell_of.at(i);
    if (a.keep_all) {
      out.utterances.push_back(src);
      for (int c = 0; c < a.vtlp_per_sample; ++c)
        out.utterances.push_back(make_copy(src, AugmentMethod::Vtlp, c));
      for (int c = 0; c < a.noise_per_sample; ++c)
        out.utterances.push_back(make_copy(src, AugmentMethod::WhiteNoise, c));
    } else {
      const auto conv = converted.find(i);
      if (conv == converted.end()) {
        out.utterances.push_back(src);  // kept clean
      } else {
        out.utterances.push_back(make_copy(src, conv->second, 0));
      }
    }
  }
  return out;
}

}  // namespace stresskit
