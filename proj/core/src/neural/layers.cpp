#include "stresskit/neural/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stresskit/errors.hpp"

namespace stresskit {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y[rows x cols] = x[rows x inner] * w[inner x cols]
void matmul(const double* x, const double* w, double* y, int rows, int inner, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* yr = y + std::size_t(r) * cols;
    std::fill(yr, yr + cols, 0.0);
    const double* xr = x + std::size_t(r) * inner;
    for (int i = 0; i < inner; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      const double* wr = w + std::size_t(i) * cols;
      for (int c = 0; c < cols; ++c) yr[c] += xv * wr[c];
    }
  }
}

}  // namespace

// --- InputNorm ---------------------------------------------------------------

InputNorm::InputNorm(int coeffs) {
  mean_ = Tensor::zeros({coeffs});
  stddev_ = Tensor::zeros({coeffs});
  std::fill(stddev_.values.begin(), stddev_.values.end(), 1.0);
}

void InputNorm::set_stats(std::span<const double> mean, std::span<const double> stddev) {
  if (mean.size() != mean_.size() || stddev.size() != stddev_.size())
    throw ShapeError("input_norm: statistics size mismatch");
  std::copy(mean.begin(), mean.end(), mean_.values.begin());
  for (std::size_t i = 0; i < stddev.size(); ++i)
    stddev_.values[i] = std::max(stddev[i], 1e-6);
}

Tensor InputNorm::forward(const Tensor& x) {
  if (x.ndim() != 3 || x.dim(2) != mean_.dim(0))
    throw ShapeError("input_norm: expected [1, T, " + std::to_string(mean_.dim(0)) +
                     "], got " + shape_string(x.shape));
  Tensor y = x;
  const int c = mean_.dim(0);
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const std::size_t j = i % static_cast<std::size_t>(c);
    y.values[i] = (y.values[i] - mean_.values[j]) / stddev_.values[j];
  }
  return y;
}

Tensor InputNorm::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  const int c = mean_.dim(0);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    g.values[i] /= stddev_.values[i % static_cast<std::size_t>(c)];
  return g;
}

void InputNorm::collect_buffers(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".mean", &mean_});
  out.push_back({prefix + ".stddev", &stddev_});
}

// --- Conv2d ------------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride)
    : in_ch_(in_channels),
      out_ch_(out_channels),
      kh_(kernel_h),
      kw_(kernel_w),
      stride_(stride),
      pad_h_((kernel_h - 1) / 2),
      pad_w_((kernel_w - 1) / 2) {
  if (in_channels < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1 || stride < 1)
    throw ConfigError("conv2d: channels, kernel and stride must be positive");
  weight_ = Tensor::zeros({out_ch_, in_ch_, kh_, kw_}, true);
  bias_ = Tensor::zeros({out_ch_}, true);
}

long Conv2d::parameter_count() const {
  return static_cast<long>(weight_.size() + bias_.size());
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.ndim() != 3 || x.dim(0) != in_ch_)
    throw ShapeError("conv2d: expected [" + std::to_string(in_ch_) + ", H, W], got " +
                     shape_string(x.shape));
  input_ = x;
  const int h = x.dim(1), w = x.dim(2);
  const int oh = (h + 2 * pad_h_ - kh_) / stride_ + 1;
  const int ow = (w + 2 * pad_w_ - kw_) / stride_ + 1;
  if (oh < 1 || ow < 1)
    throw ShapeError("conv2d: input " + shape_string(x.shape) + " too small for kernel");

  Tensor y = Tensor::zeros({out_ch_, oh, ow});
  for (int o = 0; o < out_ch_; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias_.at(o);
        for (int i = 0; i < in_ch_; ++i) {
          for (int ky = 0; ky < kh_; ++ky) {
            const int sy = oy * stride_ + ky - pad_h_;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < kw_; ++kx) {
              const int sx = ox * stride_ + kx - pad_w_;
              if (sx < 0 || sx >= w) continue;
              acc += weight_.values[((std::size_t(o) * in_ch_ + i) * kh_ + ky) * kw_ + kx] *
                     x.at(i, sy, sx);
            }
          }
        }
        y.at(o, oy, ox) = acc;
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const int h = input_.dim(1), w = input_.dim(2);
  const int oh = grad_out.dim(1), ow = grad_out.dim(2);
  weight_.ensure_grad();
  bias_.ensure_grad();
  Tensor gx = Tensor::zeros(input_.shape);

  for (int o = 0; o < out_ch_; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double g = grad_out.at(o, oy, ox);
        if (g == 0.0) continue;
        bias_.grad[static_cast<std::size_t>(o)] += g;
        for (int i = 0; i < in_ch_; ++i) {
          for (int ky = 0; ky < kh_; ++ky) {
            const int sy = oy * stride_ + ky - pad_h_;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < kw_; ++kx) {
              const int sx = ox * stride_ + kx - pad_w_;
              if (sx < 0 || sx >= w) continue;
              const std::size_t wi = ((std::size_t(o) * in_ch_ + i) * kh_ + ky) * kw_ + kx;
              weight_.grad[wi] += g * input_.at(i, sy, sx);
              gx.at(i, sy, sx) += g * weight_.values[wi];
            }
          }
        }
      }
    }
  }
  return gx;
}

void Conv2d::collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", &weight_});
  out.push_back({prefix + ".bias", &bias_});
}

// --- MaxPool2d ---------------------------------------------------------------

MaxPool2d::MaxPool2d(int pool_h, int pool_w) : ph_(pool_h), pw_(pool_w) {
  if (pool_h < 1 || pool_w < 1) throw ConfigError("maxpool2d: pool size must be positive");
}

Tensor MaxPool2d::forward(const Tensor& x) {
  if (x.ndim() != 3) throw ShapeError("maxpool2d: expected [C, H, W], got " + shape_string(x.shape));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = h / ph_, ow = w / pw_;
  if (oh < 1 || ow < 1)
    throw ShapeError("maxpool2d: input " + shape_string(x.shape) + " smaller than pool window");
  in_shape_ = x.shape;
  Tensor y = Tensor::zeros({c, oh, ow});
  argmax_.assign(y.size(), 0);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = 0;
        for (int py = 0; py < ph_; ++py) {
          for (int px = 0; px < pw_; ++px) {
            const int sy = oy * ph_ + py, sx = ox * pw_ + px;
            const double v = x.at(ch, sy, sx);
            if (v > best) {
              best = v;
              best_idx = (ch * h + sy) * w + sx;
            }
          }
        }
        y.at(ch, oy, ox) = best;
        argmax_[(std::size_t(ch) * oh + oy) * ow + ox] = best_idx;
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor gx = Tensor::zeros(in_shape_);
  for (std::size_t i = 0; i < grad_out.values.size(); ++i)
    gx.values[static_cast<std::size_t>(argmax_[i])] += grad_out.values[i];
  return gx;
}

// --- Relu ----------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  input_ = x;
  Tensor y = x;
  for (auto& v : y.values) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) {
  Tensor gx = grad_out;
  for (std::size_t i = 0; i < gx.values.size(); ++i)
    if (input_.values[i] <= 0.0) gx.values[i] = 0.0;
  return gx;
}

// --- Dense ---------------------------------------------------------------------

Dense::Dense(int in_features, int out_features) : in_(in_features), out_(out_features) {
  if (in_features < 1 || out_features < 1) throw ConfigError("dense: features must be positive");
  weight_ = Tensor::zeros({in_, out_}, true);
  bias_ = Tensor::zeros({out_}, true);
}

Tensor Dense::forward(const Tensor& x) {
  if (x.ndim() < 1 || x.shape.back() != in_)
    throw ShapeError("dense: expected last axis " + std::to_string(in_) + ", got " +
                     shape_string(x.shape));
  input_ = x;
  const int rows = static_cast<int>(x.size()) / in_;
  std::vector<int> out_shape = x.shape;
  out_shape.back() = out_;
  Tensor y = Tensor::zeros(out_shape);
  matmul(x.values.data(), weight_.values.data(), y.values.data(), rows, in_, out_);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < out_; ++c) y.values[std::size_t(r) * out_ + c] += bias_.at(c);
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  const int rows = static_cast<int>(input_.size()) / in_;
  weight_.ensure_grad();
  bias_.ensure_grad();

  // dW = x^T g, db = column sums of g, dx = g W^T
  for (int r = 0; r < rows; ++r) {
    const double* xr = input_.values.data() + std::size_t(r) * in_;
    const double* gr = grad_out.values.data() + std::size_t(r) * out_;
    for (int i = 0; i < in_; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      double* wg = weight_.grad.data() + std::size_t(i) * out_;
      for (int c = 0; c < out_; ++c) wg[c] += xv * gr[c];
    }
    for (int c = 0; c < out_; ++c) bias_.grad[static_cast<std::size_t>(c)] += gr[c];
  }

  Tensor gx = Tensor::zeros(input_.shape);
  for (int r = 0; r < rows; ++r) {
    const double* gr = grad_out.values.data() + std::size_t(r) * out_;
    double* xr = gx.values.data() + std::size_t(r) * in_;
    for (int i = 0; i < in_; ++i) {
      const double* wr = weight_.values.data() + std::size_t(i) * out_;
      double acc = 0.0;
      for (int c = 0; c < out_; ++c) acc += gr[c] * wr[c];
      xr[i] = acc;
    }
  }
  return gx;
}

void Dense::collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", &weight_});
  out.push_back({prefix + ".bias", &bias_});
}

// --- Dropout ---------------------------------------------------------------------

Dropout::Dropout(double rate, Rng* rng) : rate_(rate), rng_(rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x) {
  if (!train_ || rate_ == 0.0) {
    mask_.clear();
    return x;
  }
  mask_.resize(x.size());
  const double keep = 1.0 - rate_;
  Tensor y = x;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    mask_[i] = rng_->uniform() < rate_ ? 0.0 : 1.0 / keep;
    y.values[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (mask_.empty()) return grad_out;
  Tensor gx = grad_out;
  for (std::size_t i = 0; i < gx.values.size(); ++i) gx.values[i] *= mask_[i];
  return gx;
}

// --- FlattenToSequence -------------------------------------------------------------

Tensor FlattenToSequence::forward(const Tensor& x) {
  if (x.ndim() != 3)
    throw ShapeError("flatten_seq: expected [C, T, W], got " + shape_string(x.shape));
  in_shape_ = x.shape;
  const int c = x.dim(0), t = x.dim(1), w = x.dim(2);
  Tensor y = Tensor::zeros({t, c * w});
  for (int ch = 0; ch < c; ++ch)
    for (int ti = 0; ti < t; ++ti)
      for (int wi = 0; wi < w; ++wi) y.at(ti, ch * w + wi) = x.at(ch, ti, wi);
  return y;
}

Tensor FlattenToSequence::backward(const Tensor& grad_out) {
  const int c = in_shape_[0], t = in_shape_[1], w = in_shape_[2];
  Tensor gx = Tensor::zeros(in_shape_);
  for (int ch = 0; ch < c; ++ch)
    for (int ti = 0; ti < t; ++ti)
      for (int wi = 0; wi < w; ++wi) gx.at(ch, ti, wi) = grad_out.at(ti, ch * w + wi);
  return gx;
}

// --- BiLstm ---------------------------------------------------------------------

BiLstm::BiLstm(int input_dim, int hidden) : in_(input_dim), hidden_(hidden) {
  if (input_dim < 1 || hidden < 1) throw ConfigError("bilstm: dims must be positive");
  for (Direction* d : {&fw_, &bw_}) {
    d->w_ih = Tensor::zeros({4 * hidden_, in_}, true);
    d->w_hh = Tensor::zeros({4 * hidden_, hidden_}, true);
    d->b_ih = Tensor::zeros({4 * hidden_}, true);
    d->b_hh = Tensor::zeros({4 * hidden_}, true);
  }
}

long BiLstm::parameter_count() const {
  return 2L * (fw_.w_ih.size() + fw_.w_hh.size() + fw_.b_ih.size() + fw_.b_hh.size());
}

void BiLstm::run_direction(Direction& d, const Tensor& x, bool reverse, int t_steps) {
  const int h = hidden_;
  const std::size_t hs = static_cast<std::size_t>(h);
  d.gate_i.assign(std::size_t(t_steps) * hs, 0.0);
  d.gate_f.assign(std::size_t(t_steps) * hs, 0.0);
  d.gate_g.assign(std::size_t(t_steps) * hs, 0.0);
  d.gate_o.assign(std::size_t(t_steps) * hs, 0.0);
  d.cell.assign(std::size_t(t_steps) * hs, 0.0);
  d.tanh_cell.assign(std::size_t(t_steps) * hs, 0.0);
  d.hidden.assign(std::size_t(t_steps) * hs, 0.0);

  std::vector<double> z(4 * hs);
  std::vector<double> h_prev(hs, 0.0), c_prev(hs, 0.0);
  for (int step = 0; step < t_steps; ++step) {
    const int t = reverse ? t_steps - 1 - step : step;
    const double* xt = x.values.data() + std::size_t(t) * in_;

    for (int j = 0; j < 4 * h; ++j) {
      double acc = d.b_ih.at(j) + d.b_hh.at(j);
      const double* wi = d.w_ih.values.data() + std::size_t(j) * in_;
      for (int i = 0; i < in_; ++i) acc += wi[i] * xt[i];
      const double* wh = d.w_hh.values.data() + std::size_t(j) * h;
      for (int i = 0; i < h; ++i) acc += wh[i] * h_prev[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(j)] = acc;
    }

    const std::size_t base = std::size_t(step) * hs;
    for (int j = 0; j < h; ++j) {
      const double gi = sigmoid(z[static_cast<std::size_t>(j)]);
      const double gf = sigmoid(z[hs + j]);
      const double gg = std::tanh(z[2 * hs + j]);
      const double go = sigmoid(z[3 * hs + j]);
      const double c = gf * c_prev[static_cast<std::size_t>(j)] + gi * gg;
      const double tc = std::tanh(c);
      d.gate_i[base + j] = gi;
      d.gate_f[base + j] = gf;
      d.gate_g[base + j] = gg;
      d.gate_o[base + j] = go;
      d.cell[base + j] = c;
      d.tanh_cell[base + j] = tc;
      d.hidden[base + j] = go * tc;
      c_prev[static_cast<std::size_t>(j)] = c;
      h_prev[static_cast<std::size_t>(j)] = go * tc;
    }
  }
}

Tensor BiLstm::forward(const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != in_)
    throw ShapeError("bilstm: expected [T, " + std::to_string(in_) + "], got " +
                     shape_string(x.shape));
  input_ = x;
  const int t_steps = x.dim(0);
  run_direction(fw_, x, false, t_steps);
  run_direction(bw_, x, true, t_steps);

  Tensor y = Tensor::zeros({t_steps, 2 * hidden_});
  for (int t = 0; t < t_steps; ++t) {
    for (int j = 0; j < hidden_; ++j) {
      y.at(t, j) = fw_.hidden[std::size_t(t) * hidden_ + j];
      // backward direction stores step s = t_steps-1-t at slot s
      y.at(t, hidden_ + j) = bw_.hidden[std::size_t(t_steps - 1 - t) * hidden_ + j];
    }
  }
  return y;
}

void BiLstm::backprop_direction(Direction& d, const Tensor& x, const Tensor& grad_out,
                                int offset, bool reverse, int t_steps, Tensor& grad_in) {
  const int h = hidden_;
  const std::size_t hs = static_cast<std::size_t>(h);
  d.w_ih.ensure_grad();
  d.w_hh.ensure_grad();
  d.b_ih.ensure_grad();
  d.b_hh.ensure_grad();

  std::vector<double> dh_carry(hs, 0.0), dc_carry(hs, 0.0), dz(4 * hs);
  for (int step = t_steps - 1; step >= 0; --step) {
    const int t = reverse ? t_steps - 1 - step : step;
    const std::size_t base = std::size_t(step) * hs;
    const double* h_prev = step > 0 ? d.hidden.data() + (base - hs) : nullptr;
    const double* c_prev = step > 0 ? d.cell.data() + (base - hs) : nullptr;

    for (int j = 0; j < h; ++j) {
      const double dh = grad_out.at(t, offset + j) + dh_carry[static_cast<std::size_t>(j)];
      const double go = d.gate_o[base + j];
      const double tc = d.tanh_cell[base + j];
      double dc = dh * go * (1.0 - tc * tc) + dc_carry[static_cast<std::size_t>(j)];

      const double gi = d.gate_i[base + j];
      const double gf = d.gate_f[base + j];
      const double gg = d.gate_g[base + j];
      const double cp = c_prev ? c_prev[j] : 0.0;

      dz[static_cast<std::size_t>(j)] = dc * gg * gi * (1.0 - gi);          // input gate
      dz[hs + j] = dc * cp * gf * (1.0 - gf);                               // forget gate
      dz[2 * hs + j] = dc * gi * (1.0 - gg * gg);                           // candidate
      dz[3 * hs + j] = dh * tc * go * (1.0 - go);                           // output gate
      dc_carry[static_cast<std::size_t>(j)] = dc * gf;
    }

    const double* xt = x.values.data() + std::size_t(t) * in_;
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    for (int j = 0; j < 4 * h; ++j) {
      const double g = dz[static_cast<std::size_t>(j)];
      if (g == 0.0) continue;
      d.b_ih.grad[static_cast<std::size_t>(j)] += g;
      d.b_hh.grad[static_cast<std::size_t>(j)] += g;
      double* wig = d.w_ih.grad.data() + std::size_t(j) * in_;
      for (int i = 0; i < in_; ++i) wig[i] += g * xt[i];
      const double* wi = d.w_ih.values.data() + std::size_t(j) * in_;
      double* gxr = grad_in.values.data() + std::size_t(t) * in_;
      for (int i = 0; i < in_; ++i) gxr[i] += g * wi[i];
      if (h_prev) {
        double* whg = d.w_hh.grad.data() + std::size_t(j) * h;
        for (int i = 0; i < h; ++i) whg[i] += g * h_prev[i];
      }
      const double* wh = d.w_hh.values.data() + std::size_t(j) * h;
      for (int i = 0; i < h; ++i) dh_carry[static_cast<std::size_t>(i)] += g * wh[i];
    }
  }
}

Tensor BiLstm::backward(const Tensor& grad_out) {
  const int t_steps = input_.dim(0);
  Tensor gx = Tensor::zeros(input_.shape);
  backprop_direction(fw_, input_, grad_out, 0, false, t_steps, gx);
  backprop_direction(bw_, input_, grad_out, hidden_, true, t_steps, gx);
  return gx;
}

void BiLstm::collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".fw.w_ih", &fw_.w_ih});
  out.push_back({prefix + ".fw.w_hh", &fw_.w_hh});
  out.push_back({prefix + ".fw.b_ih", &fw_.b_ih});
  out.push_back({prefix + ".fw.b_hh", &fw_.b_hh});
  out.push_back({prefix + ".bw.w_ih", &bw_.w_ih});
  out.push_back({prefix + ".bw.w_hh", &bw_.w_hh});
  out.push_back({prefix + ".bw.b_ih", &bw_.b_ih});
  out.push_back({prefix + ".bw.b_hh", &bw_.b_hh});
}

// --- MultiHeadAttention --------------------------------------------------------

MultiHeadAttention::MultiHeadAttention(int dim, int heads)
    : dim_(dim), heads_(heads), head_dim_(dim / heads) {
  if (heads < 1) throw ConfigError("attention: heads must be positive");
  if (dim % heads != 0)
    throw ConfigError("attention: dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  for (Tensor* w : {&wq_, &wk_, &wv_, &wo_}) *w = Tensor::zeros({dim_, dim_}, true);
  for (Tensor* b : {&bq_, &bk_, &bv_, &bo_}) *b = Tensor::zeros({dim_}, true);
}

long MultiHeadAttention::parameter_count() const {
  return 4L * (static_cast<long>(dim_) * dim_ + dim_);
}

Tensor MultiHeadAttention::forward(const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != dim_)
    throw ShapeError("attention: expected [T, " + std::to_string(dim_) + "], got " +
                     shape_string(x.shape));
  input_ = x;
  const int t = x.dim(0);

  const auto project = [&](const Tensor& w, const Tensor& b) {
    Tensor y = Tensor::zeros({t, dim_});
    matmul(x.values.data(), w.values.data(), y.values.data(), t, dim_, dim_);
    for (int r = 0; r < t; ++r)
      for (int c = 0; c < dim_; ++c) y.at(r, c) += b.at(c);
    return y;
  };
  q_ = project(wq_, bq_);
  k_ = project(wk_, bk_);
  v_ = project(wv_, bv_);

  attn_.assign(std::size_t(heads_) * t * t, 0.0);
  concat_ = Tensor::zeros({t, dim_});
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

  std::vector<double> row(static_cast<std::size_t>(t));
  for (int h = 0; h < heads_; ++h) {
    const int off = h * head_dim_;
    for (int i = 0; i < t; ++i) {
      for (int j = 0; j < t; ++j) {
        double acc = 0.0;
        for (int d = 0; d < head_dim_; ++d) acc += q_.at(i, off + d) * k_.at(j, off + d);
        row[static_cast<std::size_t>(j)] = acc * scale;
      }
      const std::vector<double> weights = softmax(row);
      double* arow = attn_.data() + (std::size_t(h) * t + i) * t;
      std::copy(weights.begin(), weights.end(), arow);
      for (int d = 0; d < head_dim_; ++d) {
        double acc = 0.0;
        for (int j = 0; j < t; ++j) acc += arow[j] * v_.at(j, off + d);
        concat_.at(i, off + d) = acc;
      }
    }
  }

  Tensor y = Tensor::zeros({t, dim_});
  matmul(concat_.values.data(), wo_.values.data(), y.values.data(), t, dim_, dim_);
  for (int r = 0; r < t; ++r)
    for (int c = 0; c < dim_; ++c) y.at(r, c) += bo_.at(c);
  return y;
}

Tensor MultiHeadAttention::backward(const Tensor& grad_out) {
  const int t = input_.dim(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  for (Tensor* w : {&wq_, &wk_, &wv_, &wo_}) w->ensure_grad();
  for (Tensor* b : {&bq_, &bk_, &bv_, &bo_}) b->ensure_grad();

  // Output projection.
  Tensor d_concat = Tensor::zeros({t, dim_});
  for (int r = 0; r < t; ++r) {
    const double* gr = grad_out.values.data() + std::size_t(r) * dim_;
    const double* cr = concat_.values.data() + std::size_t(r) * dim_;
    for (int c = 0; c < dim_; ++c) bo_.grad[static_cast<std::size_t>(c)] += gr[c];
    for (int i = 0; i < dim_; ++i) {
      double* wg = wo_.grad.data() + std::size_t(i) * dim_;
      for (int c = 0; c < dim_; ++c) wg[c] += cr[i] * gr[c];
      const double* wr = wo_.values.data() + std::size_t(i) * dim_;
      double acc = 0.0;
      for (int c = 0; c < dim_; ++c) acc += gr[c] * wr[c];
      d_concat.at(r, i) = acc;
    }
  }

  Tensor dq = Tensor::zeros({t, dim_}), dk = Tensor::zeros({t, dim_}), dv = Tensor::zeros({t, dim_});
  std::vector<double> d_attn(static_cast<std::size_t>(t));
  for (int h = 0; h < heads_; ++h) {
    const int off = h * head_dim_;
    for (int i = 0; i < t; ++i) {
      const double* arow = attn_.data() + (std::size_t(h) * t + i) * t;
      // dA = dC V^T, then softmax backward within the row.
      for (int j = 0; j < t; ++j) {
        double acc = 0.0;
        for (int d = 0; d < head_dim_; ++d) acc += d_concat.at(i, off + d) * v_.at(j, off + d);
        d_attn[static_cast<std::size_t>(j)] = acc;
      }
      double dot = 0.0;
      for (int j = 0; j < t; ++j) dot += d_attn[static_cast<std::size_t>(j)] * arow[j];
      for (int j = 0; j < t; ++j) {
        const double ds = arow[j] * (d_attn[static_cast<std::size_t>(j)] - dot) * scale;
        for (int d = 0; d < head_dim_; ++d) {
          dq.at(i, off + d) += ds * k_.at(j, off + d);
          dk.at(j, off + d) += ds * q_.at(i, off + d);
        }
      }
      for (int j = 0; j < t; ++j) {
        const double a = arow[j];
        if (a == 0.0) continue;
        for (int d = 0; d < head_dim_; ++d) dv.at(j, off + d) += a * d_concat.at(i, off + d);
      }
    }
  }

  // Q/K/V projections share the same input.
  Tensor gx = Tensor::zeros({t, dim_});
  const auto backproject = [&](const Tensor& d_proj, Tensor& w, Tensor& b) {
    for (int r = 0; r < t; ++r) {
      const double* gr = d_proj.values.data() + std::size_t(r) * dim_;
      const double* xr = input_.values.data() + std::size_t(r) * dim_;
      for (int c = 0; c < dim_; ++c) b.grad[static_cast<std::size_t>(c)] += gr[c];
      for (int i = 0; i < dim_; ++i) {
        double* wg = w.grad.data() + std::size_t(i) * dim_;
        for (int c = 0; c < dim_; ++c) wg[c] += xr[i] * gr[c];
        const double* wr = w.values.data() + std::size_t(i) * dim_;
        double acc = 0.0;
        for (int c = 0; c < dim_; ++c) acc += gr[c] * wr[c];
        gx.at(r, i) += acc;
      }
    }
  };
  backproject(dq, wq_, bq_);
  backproject(dk, wk_, bk_);
  backproject(dv, wv_, bv_);
  return gx;
}

void MultiHeadAttention::collect_parameters(const std::string& prefix,
                                            std::vector<NamedParam>& out) {
  out.push_back({prefix + ".wq", &wq_});
  out.push_back({prefix + ".bq", &bq_});
  out.push_back({prefix + ".wk", &wk_});
  out.push_back({prefix + ".bk", &bk_});
  out.push_back({prefix + ".wv", &wv_});
  out.push_back({prefix + ".bv", &bv_});
  out.push_back({prefix + ".wo", &wo_});
  out.push_back({prefix + ".bo", &bo_});
}

// --- TemporalMeanPool ------------------------------------------------------------

Tensor TemporalMeanPool::forward(const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("mean_pool: expected [T, D], got " + shape_string(x.shape));
  t_ = x.dim(0);
  d_ = x.dim(1);
  Tensor y = Tensor::zeros({d_});
  for (int t = 0; t < t_; ++t)
    for (int d = 0; d < d_; ++d) y.at(d) += x.at(t, d);
  for (auto& v : y.values) v /= t_;
  return y;
}

Tensor TemporalMeanPool::backward(const Tensor& grad_out) {
  Tensor gx = Tensor::zeros({t_, d_});
  for (int t = 0; t < t_; ++t)
    for (int d = 0; d < d_; ++d) gx.at(t, d) = grad_out.at(d) / t_;
  return gx;
}

// --- Loss -------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (const double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double e = std::isinf(logits[i]) && logits[i] < 0 ? 0.0 : std::exp(logits[i] - mx);
    out[i] = e;
    sum += e;
  }
  for (auto& v : out) v /= sum;
  return out;
}

LossGrad softmax_cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw DomainError("softmax_cross_entropy: label out of range");
  LossGrad lg;
  lg.grad = softmax(logits);
  // loss = -log p[label], computed from the stabilized logits directly
  double mx = -std::numeric_limits<double>::infinity();
  for (const double v : logits) mx = std::max(mx, v);
  double lse = 0.0;
  for (const double v : logits) lse += std::exp(v - mx);
  lg.loss = std::log(lse) + mx - logits[static_cast<std::size_t>(label)];
  lg.grad[static_cast<std::size_t>(label)] -= 1.0;
  return lg;
}

// --- Optimizer ----------------------------------------------------------------------

void adam_update(std::span<double> values, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, long t, const AdamConfig& cfg) {
  if (values.size() != grads.size() || m.size() != values.size() || v.size() != values.size())
    throw ShapeError("adam_update: buffer size mismatch");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < values.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

AdamOptimizer::AdamOptimizer(std::vector<NamedParam> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    p.tensor->ensure_grad();
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = *params_[i].tensor;
    adam_update(t.values, t.grad, m_[i], v_[i], t_, cfg_);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p.tensor->zero_grad();
}

// --- Init ---------------------------------------------------------------------------

void init_parameters(std::vector<NamedParam>& params, std::uint64_t seed) {
  std::uint64_t ordinal = 0;
  for (auto& p : params) {
    Tensor& t = *p.tensor;
    Rng rng(Rng::mix(seed, ordinal++));
    const bool is_bias = t.ndim() == 1;
    if (is_bias) {
      std::fill(t.values.begin(), t.values.end(), 0.0);
      // forget-gate bias starts at 1 so early training does not flush memory
      if (p.name.find(".b_ih") != std::string::npos) {
        const std::size_t h = t.size() / 4;
        for (std::size_t i = h; i < 2 * h; ++i) t.values[i] = 1.0;
      }
      continue;
    }
    std::size_t fan_in = 1;
    for (int i = t.ndim() - 1; i >= 1; --i) fan_in *= static_cast<std::size_t>(t.dim(i));
    if (t.ndim() == 2) {
      // Dense weights are stored [in, out]; recurrent and attention
      // matrices are stored [out, in].
      fan_in = static_cast<std::size_t>(p.name.find(".weight") != std::string::npos ? t.dim(0)
                                                                                    : t.dim(1));
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.values) v = rng.uniform(-bound, bound);
  }
}

}  // namespace stresskit
