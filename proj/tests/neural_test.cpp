#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "grad_check.hpp"
#include "stresskit/errors.hpp"
#include "stresskit/neural/network.hpp"
#include "test_helpers.hpp"

using namespace stresskit;

TEST_CASE("parameter counts: conv, dense, bilstm, attention") {
  Conv2d conv(1, 64, 3, 3);
  CHECK(conv.parameter_count() == 640);  // 64 * 9 + 64

  Dense dense(10, 5);
  std::vector<NamedParam> p;
  dense.collect_parameters("d", p);
  long dn = 0;
  for (const auto& np : p) dn += static_cast<long>(np.tensor->size());
  CHECK(dn == 55);

  BiLstm lstm(512, 256);
  CHECK(lstm.parameter_count() == 1576960);  // 2 * 4 * (512*256 + 256^2 + 2*256)

  MultiHeadAttention attn(512, 4);
  CHECK(attn.parameter_count() == 1050624);  // 4 * (512^2 + 512)
}

TEST_CASE("maxpool2d: 2x2 over distinct values picks the four maxima") {
  MaxPool2d pool(2, 2);
  Tensor x = Tensor::zeros({1, 4, 4});
  int v = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) x.at(0, i, j) = (v++ * 7) % 16;  // distinct 0..15 scrambled
  const Tensor y = pool.forward(x);
  REQUIRE(y.shape == std::vector<int>{1, 2, 2});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double want = -1e300;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) want = std::max(want, x.at(0, 2 * i + a, 2 * j + b));
      CHECK(y.at(0, i, j) == want);
    }
}

TEST_CASE("gradient checks: conv2d") {
  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Conv2d conv(3, 4, 3, 3);
    testutil::randomize_params(conv, seed);
    auto report = testutil::grad_check_layer(conv, testutil::random_tensor({3, 5, 7}, seed + 10));
    CHECK(report.max_rel_error <= 1e-4);
  }
  // strided variant
  Conv2d strided(2, 3, 3, 3, 2);
  testutil::randomize_params(strided, 9);
  CHECK(testutil::grad_check_layer(strided, testutil::random_tensor({2, 7, 9}, 19)).max_rel_error <=
        1e-4);
}

TEST_CASE("gradient checks: maxpool2d on a gapped grid") {
  for (const std::uint64_t seed : {4ULL, 5ULL, 6ULL}) {
    MaxPool2d pool(2, 2);
    // values on a 0.01 grid: every pairwise gap far exceeds the fd step
    Tensor x = Tensor::zeros({2, 4, 6});
    std::vector<double> grid(x.size());
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.01 * static_cast<double>(i);
    Rng rng(seed);
    rng.shuffle(grid);
    x.values = grid;
    CHECK(testutil::grad_check_layer(pool, x, seed).max_rel_error <= 1e-4);
  }
}

TEST_CASE("gradient checks: dense") {
  for (const std::uint64_t seed : {7ULL, 8ULL, 9ULL}) {
    Dense dense(6, 4);
    testutil::randomize_params(dense, seed);
    CHECK(testutil::grad_check_layer(dense, testutil::random_tensor({5, 6}, seed + 20))
              .max_rel_error <= 1e-4);
  }
}

TEST_CASE("gradient checks: relu away from the kink") {
  for (const std::uint64_t seed : {10ULL, 11ULL, 12ULL}) {
    Relu relu;
    Tensor x = testutil::random_tensor({3, 7}, seed, 0.05, 1.0);
    Rng rng(seed + 99);
    for (auto& v : x.values)
      if (rng.uniform() < 0.5) v = -v;  // both signs, magnitude >= 0.05
    CHECK(testutil::grad_check_layer(relu, x, seed).max_rel_error <= 1e-4);
  }
}

TEST_CASE("gradient checks: bilstm") {
  for (const std::uint64_t seed : {13ULL, 14ULL, 15ULL}) {
    BiLstm lstm(6, 5);
    testutil::randomize_params(lstm, seed);
    CHECK(testutil::grad_check_layer(lstm, testutil::random_tensor({4, 6}, seed + 30))
              .max_rel_error <= 1e-4);
  }
}

TEST_CASE("gradient checks: multi-head attention") {
  for (const std::uint64_t seed : {16ULL, 17ULL, 18ULL}) {
    MultiHeadAttention attn(8, 2);
    testutil::randomize_params(attn, seed);
    CHECK(testutil::grad_check_layer(attn, testutil::random_tensor({3, 8}, seed + 40))
              .max_rel_error <= 1e-4);
  }
}

TEST_CASE("gradient check: four heads, the reference head count") {
  MultiHeadAttention attn(8, 4);
  testutil::randomize_params(attn, 77);
  CHECK(testutil::grad_check_layer(attn, testutil::random_tensor({5, 8}, 78)).max_rel_error <=
        1e-4);
}

TEST_CASE("bilstm: zero parameters and zero input give zero output") {
  BiLstm lstm(3, 4);
  const Tensor y = lstm.forward(Tensor::zeros({5, 3}));
  for (const double v : y.values) CHECK(v == 0.0);
}

TEST_CASE("bilstm: reversed input with swapped directions mirrors the output") {
  BiLstm a(3, 4), b(3, 4);
  testutil::randomize_params(a, 21);
  // b.fw <- a.bw, b.bw <- a.fw
  std::vector<NamedParam> pa, pb;
  a.collect_parameters("a", pa);
  b.collect_parameters("b", pb);
  REQUIRE(pa.size() == 8);
  for (int i = 0; i < 4; ++i) {
    pb[static_cast<std::size_t>(i)].tensor->values =
        pa[static_cast<std::size_t>(i + 4)].tensor->values;
    pb[static_cast<std::size_t>(i + 4)].tensor->values =
        pa[static_cast<std::size_t>(i)].tensor->values;
  }

  const int t_steps = 6;
  const Tensor x = testutil::random_tensor({t_steps, 3}, 22);
  Tensor xr = Tensor::zeros({t_steps, 3});
  for (int t = 0; t < t_steps; ++t)
    for (int c = 0; c < 3; ++c) xr.at(t, c) = x.at(t_steps - 1 - t, c);

  const Tensor ya = a.forward(x);
  const Tensor yb = b.forward(xr);
  for (int t = 0; t < t_steps; ++t) {
    for (int j = 0; j < 4; ++j) {
      CHECK(yb.at(t, j) == doctest::Approx(ya.at(t_steps - 1 - t, 4 + j)).epsilon(1e-12));
      CHECK(yb.at(t, 4 + j) == doctest::Approx(ya.at(t_steps - 1 - t, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention: rows are probability distributions") {
  MultiHeadAttention attn(8, 4);
  testutil::randomize_params(attn, 30);
  attn.forward(testutil::random_tensor({6, 8}, 31));
  const auto& w = attn.last_attention();
  REQUIRE(w.size() == 4 * 6 * 6);
  for (std::size_t row = 0; row < 4 * 6; ++row) {
    double sum = 0.0;
    for (int j = 0; j < 6; ++j) {
      CHECK(w[row * 6 + j] >= 0.0);
      sum += w[row * 6 + j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("softmax: -inf scores get exactly zero weight") {
  const std::vector<double> logits = {1.0, -std::numeric_limits<double>::infinity(), 0.5};
  const auto p = softmax(logits);
  CHECK(p[1] == 0.0);
  CHECK(p[0] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy: uniform logits, saturation, fd gradient") {
  for (const int k : {2, 9}) {
    const std::vector<double> logits(static_cast<std::size_t>(k), 0.7);
    const auto lg = softmax_cross_entropy(logits, 0);
    CHECK(lg.loss == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
  }

  const auto sat = softmax_cross_entropy(std::vector<double>{30.0, -30.0}, 0);
  CHECK(sat.loss <= 1e-9);

  Rng rng(40);
  std::vector<double> logits(9);
  for (auto& v : logits) v = rng.uniform(-2.0, 2.0);
  const int label = 4;
  const auto lg = softmax_cross_entropy(logits, label);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto up = logits, down = logits;
    up[i] += eps;
    down[i] -= eps;
    const double fd = (softmax_cross_entropy(up, label).loss -
                       softmax_cross_entropy(down, label).loss) /
                      (2.0 * eps);
    CHECK(testutil::rel_err(lg.grad[i], fd) <= 1e-6);
  }

  CHECK_THROWS_AS(softmax_cross_entropy(logits, 9), DomainError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<double> theta = {1.5, -2.0}, g = {0.0, 0.0}, m = {0.0, 0.0}, v = {0.0, 0.0};
  adam_update(theta, g, m, v, 1, {});
  CHECK(theta[0] == 1.5);
  CHECK(theta[1] == -2.0);
}

TEST_CASE("adam: bias-corrected first step is approximately lr * sign") {
  std::vector<double> theta = {1.0}, g = {1.0}, m = {0.0}, v = {0.0};
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_update(theta, g, m, v, 1, cfg);
  CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("adam: drives theta^2 to near zero, matching an independent recurrence") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  std::vector<double> theta = {3.0}, m = {0.0}, v = {0.0};
  // independent scalar recurrence written out longhand
  double rt = 3.0, rm = 0.0, rv = 0.0;
  for (long t = 1; t <= 200; ++t) {
    std::vector<double> g = {2.0 * theta[0]};
    adam_update(theta, g, m, v, t, cfg);

    const double rg = 2.0 * rt;
    rm = 0.9 * rm + 0.1 * rg;
    rv = 0.999 * rv + 0.001 * rg * rg;
    rt -= 0.1 * (rm / (1.0 - std::pow(0.9, static_cast<double>(t)))) /
          (std::sqrt(rv / (1.0 - std::pow(0.999, static_cast<double>(t)))) + 1e-8);
    CHECK(theta[0] == doctest::Approx(rt).epsilon(1e-12));
  }
  CHECK(std::abs(theta[0]) < 0.1);
}

TEST_CASE("build_network: architecture deltas match for both feature kinds") {
  const ModelConfig cfg;  // reference configuration
  const auto params_of = [&](Architecture arch, FeatureKind kind, int coeffs) {
    Network net = build_network(arch, kind, cfg, coeffs);
    return count_parameters(net);
  };

  const long cnn_mfcc = params_of(Architecture::Cnn, FeatureKind::MFCC, 20);
  const long crnn_mfcc = params_of(Architecture::Crnn, FeatureKind::MFCC, 20);
  const long attn_mfcc = params_of(Architecture::CrnnAttention, FeatureKind::MFCC, 20);
  const long cnn_lms = params_of(Architecture::Cnn, FeatureKind::LMS, 128);
  const long crnn_lms = params_of(Architecture::Crnn, FeatureKind::LMS, 128);
  const long attn_lms = params_of(Architecture::CrnnAttention, FeatureKind::LMS, 128);

  CHECK(crnn_mfcc - cnn_mfcc == 1576960);
  CHECK(crnn_lms - cnn_lms == 1576960);
  CHECK(attn_mfcc - crnn_mfcc == 1050624);
  CHECK(attn_lms - crnn_lms == 1050624);
  CHECK(attn_mfcc - cnn_mfcc == 2627584);

  // the LMS - MFCC difference is one constant across all three architectures
  const long d_cnn = cnn_lms - cnn_mfcc;
  CHECK(crnn_lms - crnn_mfcc == d_cnn);
  CHECK(attn_lms - attn_mfcc == d_cnn);
  CHECK(d_cnn > 0);
}

TEST_CASE("count_parameters: empty network is zero") {
  Network net;
  CHECK(count_parameters(net) == 0);
}

TEST_CASE("network forward: deterministic in eval mode, dropout varies in train mode") {
  ModelConfig cfg = ModelConfig::small(2);
  Network net = build_network(Architecture::CrnnAttention, FeatureKind::MFCC, cfg, 20);
  const Tensor x = testutil::random_tensor({1, 24, 20}, 50);

  net.set_train(false);
  const Tensor y1 = net.forward(x);
  const Tensor y2 = net.forward(x);
  CHECK(y1.values == y2.values);
  REQUIRE(y1.shape == std::vector<int>{2});

  net.set_train(true);
  net.reseed_dropout(123);
  const Tensor t1 = net.forward(x);
  const Tensor t2 = net.forward(x);  // rng advanced, masks differ
  CHECK(t1.values != t2.values);
  net.reseed_dropout(123);
  const Tensor t3 = net.forward(x);
  CHECK(t1.values == t3.values);
}

TEST_CASE("model config validation") {
  ModelConfig cfg;
  cfg.proj_dim = 500;  // not 2 * lstm_hidden
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.attention_heads = 3;  // 512 % 3 != 0
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.conv_stack.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  // conv stack that eats the whole coefficient axis
  cfg = ModelConfig::small(2);
  cfg.conv_stack = {{8, 3, 3, 1, 2, 8}, {8, 3, 3, 1, 2, 8}};
  CHECK_THROWS_AS(build_network(Architecture::Cnn, FeatureKind::MFCC, cfg, 20), ConfigError);
}

TEST_CASE("checkpoint: save/load round trip and mismatch rejection") {
  const auto dir = testutil::fresh_dir("ckpt");
  ModelConfig cfg = ModelConfig::small(2);
  Network net = build_network(Architecture::Crnn, FeatureKind::MFCC, cfg, 20);
  net.trained_max_frames = 40;
  const Tensor x = testutil::random_tensor({1, 16, 20}, 60);
  net.set_train(false);
  const Tensor y = net.forward(x);

  const auto p = dir / "net.skcp";
  save_checkpoint(net, p);
  Network back = load_checkpoint(p);
  CHECK(back.architecture == Architecture::Crnn);
  CHECK(back.feature_kind == FeatureKind::MFCC);
  CHECK(back.input_coeffs == 20);
  CHECK(back.trained_max_frames == 40);
  back.set_train(false);
  const Tensor yb = back.forward(x);
  // parameters round-trip through 32-bit floats
  for (std::size_t i = 0; i < y.values.size(); ++i)
    CHECK(yb.values[i] == doctest::Approx(y.values[i]).epsilon(1e-4));

  Network again = load_checkpoint(p);
  again.set_train(false);
  CHECK(again.forward(x).values == yb.values);  // loads are bit-stable

  // truncated file is rejected
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(dir / "trunc.skcp", std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.skcp"), Error);
}
