#include "nab/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "nab/errors.hpp"

namespace nab::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias, Rng& rng)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      has_bias_(bias),
      weight_("conv.weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_("conv.bias", bias ? static_cast<std::size_t>(out_channels) : 0) {
  // Kaiming normal, fan-in mode.
  const double std = std::sqrt(2.0 / (in_channels * kernel * kernel));
  for (auto& w : weight_.value) w = static_cast<float>(std * rng.normal());
}

Tensor Conv2d::run(const Tensor& x, FloatBuffer* col_cache) const {
  if (x.c != in_) throw ArgumentError("conv: expected " + std::to_string(in_) + " input channels");
  const int ho = (x.h + 2 * pad_ - k_) / stride_ + 1;
  const int wo = (x.w + 2 * pad_ - k_) / stride_ + 1;
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  const std::size_t rows = static_cast<std::size_t>(in_) * k_ * k_;
  const std::size_t cols = static_cast<std::size_t>(x.n) * plane;

  FloatBuffer local;
  FloatBuffer& col = col_cache != nullptr ? *col_cache : local;
  col.assign(rows * cols, 0.0f);
  for (int ci = 0; ci < in_; ++ci) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        float* dst_row = col.data() + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * cols;
        for (int n = 0; n < x.n; ++n) {
          const float* src = x.sample(n) + static_cast<std::size_t>(ci) * x.h * x.w;
          float* dst = dst_row + static_cast<std::size_t>(n) * plane;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= x.h) continue;
            const float* src_row = src + static_cast<std::size_t>(iy) * x.w;
            float* d = dst + static_cast<std::size_t>(oy) * wo;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < x.w) d[ox] = src_row[ix];
            }
          }
        }
      }
    }
  }

  RowMat y = ConstMatMap(weight_.value.data(), out_, static_cast<Eigen::Index>(rows)) *
             ConstMatMap(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Tensor out(x.n, out_, ho, wo);
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < out_; ++co) {
      const float b = has_bias_ ? bias_.value[static_cast<std::size_t>(co)] : 0.0f;
      const float* src = y.data() + static_cast<std::size_t>(co) * cols + static_cast<std::size_t>(n) * plane;
      float* dst = out.sample(n) + static_cast<std::size_t>(co) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] + b;
    }
  }
  return out;
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
  in_n_ = x.n;
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor out = run(x, &cols_);
  out_h_ = out.h;
  out_w_ = out.w;
  return out;
}

Tensor Conv2d::infer(const Tensor& x) const { return run(x, nullptr); }

Tensor Conv2d::backward(const Tensor& g) {
  const std::size_t plane = static_cast<std::size_t>(out_h_) * out_w_;
  const std::size_t rows = static_cast<std::size_t>(in_) * k_ * k_;
  const std::size_t cols = static_cast<std::size_t>(in_n_) * plane;

  RowMat dy(out_, static_cast<Eigen::Index>(cols));
  for (int n = 0; n < in_n_; ++n) {
    for (int co = 0; co < out_; ++co) {
      const float* src = g.sample(n) + static_cast<std::size_t>(co) * plane;
      float* dst = dy.data() + static_cast<std::size_t>(co) * cols + static_cast<std::size_t>(n) * plane;
      std::copy(src, src + plane, dst);
    }
  }
  ConstMatMap col(cols_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  MatMap(weight_.grad.data(), out_, static_cast<Eigen::Index>(rows)).noalias() += dy * col.transpose();
  if (has_bias_) {
    for (int co = 0; co < out_; ++co) bias_.grad[static_cast<std::size_t>(co)] += dy.row(co).sum();
  }
  RowMat dcol = ConstMatMap(weight_.value.data(), out_, static_cast<Eigen::Index>(rows)).transpose() * dy;

  Tensor dx(in_n_, in_, in_h_, in_w_);
  for (int ci = 0; ci < in_; ++ci) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const float* src_row = dcol.data() + ((static_cast<std::size_t>(ci) * k_ + ky) * k_ + kx) * cols;
        for (int n = 0; n < in_n_; ++n) {
          float* dst = dx.sample(n) + static_cast<std::size_t>(ci) * in_h_ * in_w_;
          const float* src = src_row + static_cast<std::size_t>(n) * plane;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) continue;
            float* d = dst + static_cast<std::size_t>(iy) * in_w_;
            const float* s = src + static_cast<std::size_t>(oy) * out_w_;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < in_w_) d[ix] += s[ox];
            }
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, float momentum, float eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_("bn.weight", static_cast<std::size_t>(channels)),
      beta_("bn.bias", static_cast<std::size_t>(channels)),
      running_mean_(static_cast<std::size_t>(channels), 0.0f),
      running_var_(static_cast<std::size_t>(channels), 1.0f) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  mode_ = mode;
  if (mode == Mode::kEvalGrad) {
    xhat_ = Tensor(x.n, x.c, x.h, x.w);
    inv_std_.assign(static_cast<std::size_t>(channels_), 0.0f);
    for (int c = 0; c < channels_; ++c) inv_std_[c] = 1.0f / std::sqrt(running_var_[c] + eps_);
    Tensor out(x.n, x.c, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < x.c; ++c) {
        const float* s = x.sample(n) + c * plane;
        float* xh = xhat_.sample(n) + c * plane;
        float* o = out.sample(n) + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          xh[p] = (s[p] - running_mean_[c]) * inv_std_[c];
          o[p] = gamma_.value[c] * xh[p] + beta_.value[c];
        }
      }
    return out;
  }

  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  const double m = static_cast<double>(x.n) * static_cast<double>(plane);
  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  inv_std_.assign(static_cast<std::size_t>(channels_), 0.0f);
  Tensor out(x.n, x.c, x.h, x.w);
  for (int c = 0; c < channels_; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int n = 0; n < x.n; ++n) {
      const float* s = x.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) sum += s[p];
    }
    const double mean = sum / m;
    for (int n = 0; n < x.n; ++n) {
      const float* s = x.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = s[p] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv;
    const float fm = static_cast<float>(mean);
    for (int n = 0; n < x.n; ++n) {
      const float* s = x.sample(n) + c * plane;
      float* xh = xhat_.sample(n) + c * plane;
      float* o = out.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        xh[p] = (s[p] - fm) * inv;
        o[p] = gamma_.value[c] * xh[p] + beta_.value[c];
      }
    }
    running_mean_[c] = (1.0f - momentum_) * running_mean_[c] + momentum_ * fm;
    const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
    running_var_[c] = (1.0f - momentum_) * running_var_[c] + momentum_ * static_cast<float>(unbiased);
  }
  return out;
}

Tensor BatchNorm2d::infer(const Tensor& x) const {
  Tensor out(x.n, x.c, x.h, x.w);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  for (int c = 0; c < channels_; ++c) {
    const float inv = 1.0f / std::sqrt(running_var_[c] + eps_);
    const float scale = gamma_.value[c] * inv;
    const float shift = beta_.value[c] - running_mean_[c] * scale;
    for (int n = 0; n < x.n; ++n) {
      const float* s = x.sample(n) + c * plane;
      float* o = out.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) o[p] = s[p] * scale + shift;
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& g) {
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  const double m = static_cast<double>(g.n) * static_cast<double>(plane);
  Tensor dx(g.n, g.c, g.h, g.w);
  for (int c = 0; c < channels_; ++c) {
    double dgamma = 0.0, dbeta = 0.0;
    for (int n = 0; n < g.n; ++n) {
      const float* gs = g.sample(n) + c * plane;
      const float* xh = xhat_.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        dgamma += static_cast<double>(gs[p]) * xh[p];
        dbeta += gs[p];
      }
    }
    gamma_.grad[c] += static_cast<float>(dgamma);
    beta_.grad[c] += static_cast<float>(dbeta);
    const float gam = gamma_.value[c];
    const float inv = inv_std_[c];
    if (mode_ == Mode::kEvalGrad) {
      for (int n = 0; n < g.n; ++n) {
        const float* gs = g.sample(n) + c * plane;
        float* d = dx.sample(n) + c * plane;
        for (std::size_t p = 0; p < plane; ++p) d[p] = gs[p] * gam * inv;
      }
      continue;
    }
    const float k = static_cast<float>(gam * inv / m);
    const float mb = static_cast<float>(dbeta);
    const float mg = static_cast<float>(dgamma);
    const float fm = static_cast<float>(m);
    for (int n = 0; n < g.n; ++n) {
      const float* gs = g.sample(n) + c * plane;
      const float* xh = xhat_.sample(n) + c * plane;
      float* d = dx.sample(n) + c * plane;
      for (std::size_t p = 0; p < plane; ++p) d[p] = k * (fm * gs[p] - mb - xh[p] * mg);
    }
  }
  return dx;
}

void BatchNorm2d::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<FloatBuffer*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ---------------------------------------------------------------------------
// ReLU, pooling

Tensor ReLU::forward(const Tensor& x, Mode) {
  out_ = infer(x);
  return out_;
}

Tensor ReLU::infer(const Tensor& x) const {
  Tensor out = x;
  for (auto& v : out.data) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor ReLU::backward(const Tensor& g) {
  Tensor dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (out_.data[i] <= 0.0f) dx.data[i] = 0.0f;
  }
  return dx;
}

Tensor MaxPool2d::run(const Tensor& x, std::vector<std::uint32_t>* argmax) const {
  const int ho = x.h / 2, wo = x.w / 2;
  Tensor out(x.n, x.c, ho, wo);
  if (argmax != nullptr) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.sample(n) + static_cast<std::size_t>(c) * x.h * x.w;
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox, ++o) {
          std::uint32_t best = static_cast<std::uint32_t>((2 * oy) * x.w + 2 * ox);
          float bv = plane[best];
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx = static_cast<std::uint32_t>((2 * oy + dy) * x.w + 2 * ox + dx);
              if (plane[idx] > bv) {
                bv = plane[idx];
                best = idx;
              }
            }
          out.data[o] = bv;
          if (argmax != nullptr) (*argmax)[o] = best;
        }
    }
  return out;
}

Tensor MaxPool2d::forward(const Tensor& x, Mode) {
  in_n_ = x.n;
  in_c_ = x.c;
  in_h_ = x.h;
  in_w_ = x.w;
  return run(x, &argmax_);
}

Tensor MaxPool2d::infer(const Tensor& x) const { return run(x, nullptr); }

Tensor MaxPool2d::backward(const Tensor& g) {
  Tensor dx(in_n_, in_c_, in_h_, in_w_);
  const std::size_t in_plane = static_cast<std::size_t>(in_h_) * in_w_;
  const std::size_t out_plane = static_cast<std::size_t>(g.h) * g.w;
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c) {
      const std::size_t base_out = (static_cast<std::size_t>(n) * g.c + c) * out_plane;
      float* plane = dx.sample(n) + c * in_plane;
      for (std::size_t p = 0; p < out_plane; ++p) plane[argmax_[base_out + p]] += g.data[base_out + p];
    }
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Mode) {
  in_h_ = x.h;
  in_w_ = x.w;
  return infer(x);
}

Tensor GlobalAvgPool::infer(const Tensor& x) const {
  Tensor out(x.n, x.c, 1, 1);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const float* s = x.sample(n) + c * plane;
      double sum = 0.0;
      for (std::size_t p = 0; p < plane; ++p) sum += s[p];
      out.data[static_cast<std::size_t>(n) * x.c + c] = static_cast<float>(sum / plane);
    }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& g) {
  Tensor dx(g.n, g.c, in_h_, in_w_);
  const std::size_t plane = static_cast<std::size_t>(in_h_) * in_w_;
  const float scale = 1.0f / static_cast<float>(plane);
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c) {
      const float v = g.data[static_cast<std::size_t>(n) * g.c + c] * scale;
      float* d = dx.sample(n) + c * plane;
      std::fill(d, d + plane, v);
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features, Rng& rng)
    : in_(in_features),
      out_(out_features),
      weight_("linear.weight", static_cast<std::size_t>(in_features) * out_features),
      bias_("linear.bias", static_cast<std::size_t>(out_features)) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  for (auto& w : weight_.value) w = static_cast<float>(rng.uniform(-bound, bound));
  for (auto& b : bias_.value) b = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor Linear::infer(const Tensor& x) const {
  if (static_cast<int>(x.sample_size()) != in_) {
    throw ArgumentError("linear: expected " + std::to_string(in_) + " input features, got " +
                        std::to_string(x.sample_size()));
  }
  Tensor out(x.n, out_, 1, 1);
  MatMap y(out.data.data(), x.n, out_);
  y.noalias() = ConstMatMap(x.data.data(), x.n, in_) * ConstMatMap(weight_.value.data(), out_, in_).transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.value.data(), out_);
  return out;
}

Tensor Linear::forward(const Tensor& x, Mode) {
  input_ = x;
  in_c_ = x.c;
  in_h_ = x.h;
  in_w_ = x.w;
  return infer(x);
}

Tensor Linear::backward(const Tensor& g) {
  ConstMatMap gy(g.data.data(), g.n, out_);
  ConstMatMap x(input_.data.data(), input_.n, in_);
  MatMap(weight_.grad.data(), out_, in_).noalias() += gy.transpose() * x;
  Eigen::Map<Eigen::RowVectorXf>(bias_.grad.data(), out_) += gy.colwise().sum();
  Tensor dx(g.n, in_c_, in_h_, in_w_);
  MatMap(dx.data.data(), g.n, in_).noalias() = gy * ConstMatMap(weight_.value.data(), out_, in_);
  return dx;
}

void Linear::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// Containers

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential tmp(other);
    layers_ = std::move(tmp.layers_);
  }
  return *this;
}

Tensor Sequential::forward(const Tensor& x, Mode mode) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, mode);
  return cur;
}

Tensor Sequential::infer(const Tensor& x) const {
  Tensor cur = x;
  for (const auto& l : layers_) cur = l->infer(cur);
  return cur;
}

Tensor Sequential::backward(const Tensor& g) {
  Tensor cur = g;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_parameters(std::vector<Parameter*>& out) {
  for (auto& l : layers_) l->collect_parameters(out);
}

void Sequential::collect_buffers(std::vector<FloatBuffer*>& out) {
  for (auto& l : layers_) l->collect_buffers(out);
}

Tensor Residual::forward(const Tensor& x, Mode mode) {
  Tensor m = main_.forward(x, mode);
  Tensor s = shortcut_.empty() ? x : shortcut_.forward(x, mode);
  if (!m.same_shape(s)) throw ArgumentError("residual: branch shapes differ");
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = std::max(0.0f, m.data[i] + s.data[i]);
  out_ = m;
  return m;
}

Tensor Residual::infer(const Tensor& x) const {
  Tensor m = main_.infer(x);
  Tensor s = shortcut_.empty() ? x : shortcut_.infer(x);
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = std::max(0.0f, m.data[i] + s.data[i]);
  return m;
}

Tensor Residual::backward(const Tensor& g) {
  Tensor gm = g;
  for (std::size_t i = 0; i < gm.size(); ++i) {
    if (out_.data[i] <= 0.0f) gm.data[i] = 0.0f;
  }
  Tensor dx = main_.backward(gm);
  if (shortcut_.empty()) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += gm.data[i];
  } else {
    Tensor ds = shortcut_.backward(gm);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += ds.data[i];
  }
  return dx;
}

void Residual::collect_parameters(std::vector<Parameter*>& out) {
  main_.collect_parameters(out);
  shortcut_.collect_parameters(out);
}

void Residual::collect_buffers(std::vector<FloatBuffer*>& out) {
  main_.collect_buffers(out);
  shortcut_.collect_buffers(out);
}

}  // namespace nab::nn
