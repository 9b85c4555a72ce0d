#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stresskit/neural/tensor.hpp"
#include "stresskit/rng.hpp"

namespace stresskit {

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

/// One differentiable stage. forward() caches what backward() needs, so a
/// layer instance serves one sample at a time; backward() accumulates
/// parameter gradients and returns the input gradient.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_parameters(const std::string&, std::vector<NamedParam>&) {}
  /// Non-trainable state (normalization statistics); saved in checkpoints.
  virtual void collect_buffers(const std::string&, std::vector<NamedParam>&) {}
  virtual void set_train(bool) {}
  virtual const char* kind() const = 0;
};

/// Fixed per-coefficient affine normalization applied to [1, T, C] input.
class InputNorm : public Layer {
 public:
  explicit InputNorm(int coeffs);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_buffers(const std::string& prefix, std::vector<NamedParam>& out) override;
  const char* kind() const override { return "input_norm"; }

  void set_stats(std::span<const double> mean, std::span<const double> stddev);

 private:
  Tensor mean_, stddev_;
};

/// 2-D convolution over [C_in, H, W]; zero padding keeps H and W when
/// stride is 1 and the kernel is odd.
class Conv2d : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride = 1);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) override;
  const char* kind() const override { return "conv2d"; }

  long parameter_count() const;

 private:
  int in_ch_, out_ch_, kh_, kw_, stride_, pad_h_, pad_w_;
  Tensor weight_;  // [out, in, kh, kw]
  Tensor bias_;    // [out]
  Tensor input_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int pool_h, int pool_w);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  const char* kind() const override { return "maxpool2d"; }

 private:
  int ph_, pw_;
  std::vector<int> argmax_;
  std::vector<int> in_shape_;
};

class Relu : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  const char* kind() const override { return "relu"; }

 private:
  Tensor input_;
};

/// Fully connected y = xW + b on the last axis; leading axes are treated
/// as rows (time-distributed when the input is a sequence).
class Dense : public Layer {
 public:
  Dense(int in_features, int out_features);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) override;
  const char* kind() const override { return "dense"; }

 private:
  int in_, out_;
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [out]
  Tensor input_;
};

/// Inverted dropout; identity in eval mode.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate, Rng* rng);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void set_train(bool train) override { train_ = train; }
  const char* kind() const override { return "dropout"; }

 private:
  double rate_;
  Rng* rng_;
  bool train_ = false;
  std::vector<double> mask_;
};

/// [C, T, W] -> [T, C * W]: turns the convolutional feature volume into a
/// per-frame vector sequence.
class FlattenToSequence : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  const char* kind() const override { return "flatten_seq"; }

 private:
  std::vector<int> in_shape_;
};

/// Bidirectional LSTM, [T, D] -> [T, 2H]. Dual-bias convention: separate
/// input-side and recurrent-side bias per gate, so each direction carries
/// 4 (D H + H^2 + 2H) parameters.
class BiLstm : public Layer {
 public:
  BiLstm(int input_dim, int hidden);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) override;
  const char* kind() const override { return "bilstm"; }

  long parameter_count() const;

  struct Direction {
    Tensor w_ih;  // [4H, D]
    Tensor w_hh;  // [4H, H]
    Tensor b_ih;  // [4H]
    Tensor b_hh;  // [4H]
    // caches (per step)
    std::vector<double> gate_i, gate_f, gate_g, gate_o, cell, tanh_cell, hidden;
  };
  Direction& direction(int i) { return i == 0 ? fw_ : bw_; }

 private:
  void run_direction(Direction& d, const Tensor& x, bool reverse, int t_steps);
  void backprop_direction(Direction& d, const Tensor& x, const Tensor& grad_out, int offset,
                          bool reverse, int t_steps, Tensor& grad_in);

  int in_, hidden_;
  Direction fw_, bw_;
  Tensor input_;
};

/// Multi-head scaled dot-product self-attention on [T, D]; four D x D
/// projections (Q, K, V, output), each with bias.
class MultiHeadAttention : public Layer {
 public:
  MultiHeadAttention(int dim, int heads);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) override;
  const char* kind() const override { return "attention"; }

  long parameter_count() const;

  /// Attention weights of the last forward pass, heads x T x T; rows are
  /// probability distributions.
  const std::vector<double>& last_attention() const { return attn_; }

 private:
  int dim_, heads_, head_dim_;
  Tensor wq_, wk_, wv_, wo_;  // [D, D]
  Tensor bq_, bk_, bv_, bo_;  // [D]
  Tensor input_, q_, k_, v_, concat_;
  std::vector<double> attn_;  // heads x T x T
};

/// Mean over the time axis, [T, D] -> [D].
class TemporalMeanPool : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  const char* kind() const override { return "mean_pool"; }

 private:
  int t_ = 0, d_ = 0;
};

// --- Loss -------------------------------------------------------------------

/// Numerically stabilized softmax (max subtraction). Entries of -inf get
/// exactly zero weight.
std::vector<double> softmax(std::span<const double> logits);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Cross-entropy of softmax(logits) against a class index; the gradient is
/// softmax - onehot.
LossGrad softmax_cross_entropy(std::span<const double> logits, int label);

// --- Optimizer --------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected update over a single parameter buffer; t is the
/// 1-based step count.
void adam_update(std::span<double> values, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, long t, const AdamConfig& cfg);

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<NamedParam> params, AdamConfig cfg);
  void step();
  void zero_grad();
  long step_count() const { return t_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

/// Deterministic fan-in uniform init for every parameter of a layer stack.
void init_parameters(std::vector<NamedParam>& params, std::uint64_t seed);

}  // namespace stresskit
