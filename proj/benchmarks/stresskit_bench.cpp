#include <benchmark/benchmark.h>

#include <cmath>

#include "stresskit/anonymize.hpp"
#include "stresskit/augment.hpp"
#include "stresskit/dsp.hpp"
#include "stresskit/neural/network.hpp"

namespace {

using namespace stresskit;

AudioClip one_second_voice(int sr = 8000) {
  AudioClip clip;
  clip.sample_rate_hz = sr;
  clip.samples.resize(static_cast<std::size_t>(sr));
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double t = static_cast<double>(i) / sr;
    double v = 0.0;
    for (int h = 1; h <= 4; ++h) v += std::sin(2.0 * 3.14159265358979 * 170.0 * h * t) / h;
    clip.samples[i] = 0.2 * v * (0.5 - 0.5 * std::cos(2.0 * 3.14159265358979 * 4.0 * t));
  }
  return clip;
}

void BM_ExtractLms(benchmark::State& state) {
  const AudioClip clip = one_second_voice();
  const PreprocessConfig cfg;
  for (auto _ : state) {
    auto fm = extract_features(clip, FeatureKind::LMS, cfg);
    benchmark::DoNotOptimize(fm.values.data());
  }
}
BENCHMARK(BM_ExtractLms);

void BM_ExtractMfcc(benchmark::State& state) {
  const AudioClip clip = one_second_voice();
  const PreprocessConfig cfg;
  for (auto _ : state) {
    auto fm = extract_features(clip, FeatureKind::MFCC, cfg);
    benchmark::DoNotOptimize(fm.values.data());
  }
}
BENCHMARK(BM_ExtractMfcc);

void BM_WsolaStretch(benchmark::State& state) {
  const AudioClip clip = one_second_voice();
  const double a = static_cast<double>(state.range(0)) / 100.0;
  for (auto _ : state) {
    auto out = wsola_stretch(clip, a, {});
    benchmark::DoNotOptimize(out.samples.data());
  }
}
BENCHMARK(BM_WsolaStretch)->Arg(85)->Arg(120);

void BM_Anonymize(benchmark::State& state) {
  const AudioClip clip = one_second_voice();
  const AnonymizationProfile profile = profile_for(Gender::Male);
  for (auto _ : state) {
    auto out = anonymize(clip, profile);
    benchmark::DoNotOptimize(out.samples.data());
  }
}
BENCHMARK(BM_Anonymize);

void BM_Vtlp(benchmark::State& state) {
  const AudioClip clip = one_second_voice();
  const PreprocessConfig cfg;
  for (auto _ : state) {
    auto out = vtlp(clip, 1.1, cfg);
    benchmark::DoNotOptimize(out.samples.data());
  }
}
BENCHMARK(BM_Vtlp);

void BM_ForwardBackward(benchmark::State& state) {
  ModelConfig cfg = ModelConfig::small(2);
  Network net = build_network(Architecture::CrnnAttention, FeatureKind::MFCC, cfg, 20);
  net.set_train(true);
  Tensor x = Tensor::zeros({1, static_cast<int>(state.range(0)), 20});
  for (std::size_t i = 0; i < x.values.size(); ++i) x.values[i] = std::sin(0.01 * static_cast<double>(i));
  for (auto _ : state) {
    Tensor logits = net.forward(x);
    Tensor grad = Tensor::zeros(logits.shape);
    grad.values[0] = 1.0;
    grad.values[1] = -1.0;
    net.backward(grad);
    net.zero_grad();
    benchmark::DoNotOptimize(logits.values.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(132);

}  // namespace

BENCHMARK_MAIN();
