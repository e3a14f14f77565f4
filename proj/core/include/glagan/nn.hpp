#pragma once

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "glagan/tensor.hpp"

namespace glagan {

// Named handle to a learnable (or persistent) tensor, used by the optimizer
// and the checkpoint writer. Persistent-but-frozen buffers (batch-norm
// running statistics) carry trainable = false.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;  // nullptr for non-trainable buffers
  bool trainable;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

enum class Act { leaky_relu, relu, sigmoid };

constexpr float kLeakySlope = 0.2f;
constexpr float kSigmoidLogitClamp = 15.f;  // keeps outputs strictly inside (0,1) in fp32

template <typename T>
inline void act_forward(Act a, const Tensor<T>& x, Tensor<T>& y) {
  y.shape = x.shape;
  y.data.resize(x.data.size());
  const T* in = x.ptr();
  T* out = y.ptr();
  int64_t n = x.numel();
  switch (a) {
    case Act::leaky_relu:
      for (int64_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(kLeakySlope) * in[i];
      break;
    case Act::relu:
      for (int64_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
      break;
    case Act::sigmoid:
      for (int64_t i = 0; i < n; ++i) {
        T z = std::clamp(in[i], T(-kSigmoidLogitClamp), T(kSigmoidLogitClamp));
        out[i] = T(1) / (T(1) + std::exp(-z));
      }
      break;
  }
}

// gx = gy * f'(x), derived from the stored output.
template <typename T>
inline void act_backward(Act a, const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>& gx) {
  gx.shape = gy.shape;
  gx.data.resize(gy.data.size());
  const T* out = y.ptr();
  const T* g = gy.ptr();
  T* r = gx.ptr();
  int64_t n = gy.numel();
  switch (a) {
    case Act::leaky_relu:
      for (int64_t i = 0; i < n; ++i) r[i] = out[i] > T(0) ? g[i] : T(kLeakySlope) * g[i];
      break;
    case Act::relu:
      for (int64_t i = 0; i < n; ++i) r[i] = out[i] > T(0) ? g[i] : T(0);
      break;
    case Act::sigmoid:
      for (int64_t i = 0; i < n; ++i) r[i] = g[i] * out[i] * (T(1) - out[i]);
      break;
  }
}

// ---------------------------------------------------------------------------
// 3D convolution, NCDHW, cubic kernel, shared per-axis stride/padding.
// Forward/backward run GEMMs on one output-z slab at a time via im2col over a
// physically padded copy of each sample. When an input axis is smaller than
// the kernel, the trailing pad grows so at least one window fits (keeps the
// discriminator well-defined on tiny probe volumes).
// ---------------------------------------------------------------------------
template <typename T>
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(int in_ch, int out_ch, int k, int stride, int pad_lo, int pad_hi, bool bias)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_lo_(pad_lo), pad_hi_(pad_hi),
        has_bias_(bias) {
    int64_t klen = static_cast<int64_t>(in_ch) * k * k * k;
    w_ = Tensor<T>({out_ch, klen});
    gw_ = Tensor<T>({out_ch, klen}, T(0));
    if (has_bias_) {
      b_ = Tensor<T>({out_ch}, T(0));
      gb_ = Tensor<T>({out_ch}, T(0));
    }
  }

  void init(std::mt19937_64& rng, T std_dev = T(0.02)) {
    std::normal_distribution<double> n(0.0, static_cast<double>(std_dev));
    for (auto& v : w_.data) v = static_cast<T>(n(rng));
    if (has_bias_) b_.zero();
  }

  int out_channels() const { return out_ch_; }
  int in_channels() const { return in_ch_; }

  std::array<int64_t, 3> out_dims(const std::array<int64_t, 3>& in) const {
    std::array<int64_t, 3> od{};
    for (int a = 0; a < 3; ++a) {
      int64_t lo = pad_lo_, hi = pad_hi_;
      if (in[a] + lo + hi < k_) hi = k_ - in[a] - lo;
      od[a] = (in[a] + lo + hi - k_) / stride_ + 1;
    }
    return od;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto [N, dims, od, pd, phi] = plan(x);
    Tensor<T> y({N, out_ch_, od[0], od[1], od[2]});
    std::vector<T> padded(static_cast<size_t>(in_ch_) * pd[0] * pd[1] * pd[2]);
    std::vector<T> cols(static_cast<size_t>(klen()) * od[1] * od[2]);
    int64_t slab = od[1] * od[2];
    int64_t chan_stride = od[0] * slab;  // ldc: channel rows of y[n,:,oz,:,:] are strided
    for (int64_t n = 0; n < N; ++n) {
      fill_padded(x, n, dims, pd, phi, padded.data());
      for (int64_t oz = 0; oz < od[0]; ++oz) {
        im2col_slab(padded.data(), pd, od, oz, cols.data());
        T* out = y.ptr() + (n * out_ch_ * od[0] + oz) * slab;
        gemm(false, false, out_ch_, slab, klen(), T(1), w_.ptr(), klen(), cols.data(), slab,
             T(0), out, chan_stride);
        if (has_bias_)
          for (int c = 0; c < out_ch_; ++c) {
            T bias = b_.data[static_cast<size_t>(c)];
            T* dst = out + c * chan_stride;
            for (int64_t i = 0; i < slab; ++i) dst[i] += bias;
          }
      }
    }
    return y;
  }

  // Accumulates gw/gb; returns gx when want_input_grad.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy, bool want_input_grad = true) {
    auto [N, dims, od, pd, phi] = plan(x);
    int64_t slab = od[1] * od[2];
    int64_t chan_stride = od[0] * slab;
    Tensor<T> gx;
    if (want_input_grad) gx = Tensor<T>(x.shape, T(0));
    std::vector<T> padded(static_cast<size_t>(in_ch_) * pd[0] * pd[1] * pd[2]);
    std::vector<T> gpadded;
    if (want_input_grad) gpadded.resize(padded.size());
    std::vector<T> cols(static_cast<size_t>(klen()) * slab);
    std::vector<T> dcols;
    if (want_input_grad) dcols.resize(static_cast<size_t>(klen()) * slab);

    for (int64_t n = 0; n < N; ++n) {
      fill_padded(x, n, dims, pd, phi, padded.data());
      if (want_input_grad) std::fill(gpadded.begin(), gpadded.end(), T(0));
      for (int64_t oz = 0; oz < od[0]; ++oz) {
        im2col_slab(padded.data(), pd, od, oz, cols.data());
        const T* gslab = gy.ptr() + (n * out_ch_ * od[0] + oz) * slab;
        // dW += gy[n,:,oz,:,:] @ cols^T
        gemm(false, true, out_ch_, klen(), slab, T(1), gslab, chan_stride, cols.data(), slab,
             T(1), gw_.ptr(), klen());
        if (has_bias_)
          for (int c = 0; c < out_ch_; ++c) {
            T acc = T(0);
            const T* g = gslab + c * chan_stride;
            for (int64_t i = 0; i < slab; ++i) acc += g[i];
            gb_.data[static_cast<size_t>(c)] += acc;
          }
        if (want_input_grad) {
          // dcols = W^T @ gy slab, then scatter back into the padded grad image.
          gemm(true, false, klen(), slab, out_ch_, T(1), w_.ptr(), klen(), gslab, chan_stride,
               T(0), dcols.data(), slab);
          col2im_slab(dcols.data(), pd, od, oz, gpadded.data());
        }
      }
      if (want_input_grad) crop_padded(gpadded.data(), n, dims, pd, phi, gx);
    }
    return gx;
  }

  void zero_grad() {
    gw_.zero();
    if (has_bias_) gb_.zero();
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + "/w", &w_, &gw_, true});
    if (has_bias_) out.push_back({prefix + "/b", &b_, &gb_, true});
  }

  Tensor<T>& weight() { return w_; }
  Tensor<T>& bias() { return b_; }

 private:
  int in_ch_ = 0, out_ch_ = 0, k_ = 3, stride_ = 1, pad_lo_ = 1, pad_hi_ = 1;
  bool has_bias_ = false;
  Tensor<T> w_, b_, gw_, gb_;

  int64_t klen() const { return static_cast<int64_t>(in_ch_) * k_ * k_ * k_; }

  struct Plan {
    int64_t N;
    std::array<int64_t, 3> dims, od, pd, phi;
  };

  Plan plan(const Tensor<T>& x) const {
    if (x.rank() != 5 || x.dim(1) != in_ch_)
      throw shape_error("conv3d: expected (n," + std::to_string(in_ch_) + ",d,h,w) input");
    Plan p;
    p.N = x.dim(0);
    p.dims = {x.dim(2), x.dim(3), x.dim(4)};
    for (int a = 0; a < 3; ++a) {
      int64_t lo = pad_lo_, hi = pad_hi_;
      if (p.dims[a] + lo + hi < k_) hi = k_ - p.dims[a] - lo;
      p.phi[a] = hi;
      p.pd[a] = p.dims[a] + lo + hi;
      p.od[a] = (p.pd[a] - k_) / stride_ + 1;
    }
    return p;
  }

  void fill_padded(const Tensor<T>& x, int64_t n, const std::array<int64_t, 3>& dims,
                   const std::array<int64_t, 3>& pd, const std::array<int64_t, 3>&, T* padded) const {
    std::fill(padded, padded + static_cast<size_t>(in_ch_) * pd[0] * pd[1] * pd[2], T(0));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in_ch_; ++c) {
      const T* src = x.ptr() + ((n * in_ch_ + c) * dims[0]) * dims[1] * dims[2];
      T* dstc = padded + static_cast<size_t>(c) * pd[0] * pd[1] * pd[2];
      for (int64_t z = 0; z < dims[0]; ++z)
        for (int64_t y = 0; y < dims[1]; ++y)
          std::memcpy(dstc + ((z + pad_lo_) * pd[1] + (y + pad_lo_)) * pd[2] + pad_lo_,
                      src + (z * dims[1] + y) * dims[2], sizeof(T) * static_cast<size_t>(dims[2]));
    }
  }

  void crop_padded(const T* gpadded, int64_t n, const std::array<int64_t, 3>& dims,
                   const std::array<int64_t, 3>& pd, const std::array<int64_t, 3>&,
                   Tensor<T>& gx) const {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in_ch_; ++c) {
      T* dst = gx.ptr() + ((n * in_ch_ + c) * dims[0]) * dims[1] * dims[2];
      const T* srcc = gpadded + static_cast<size_t>(c) * pd[0] * pd[1] * pd[2];
      for (int64_t z = 0; z < dims[0]; ++z)
        for (int64_t y = 0; y < dims[1]; ++y)
          std::memcpy(dst + (z * dims[1] + y) * dims[2],
                      srcc + ((z + pad_lo_) * pd[1] + (y + pad_lo_)) * pd[2] + pad_lo_,
                      sizeof(T) * static_cast<size_t>(dims[2]));
    }
  }

  // cols[(c,kz,ky,kx), (oy,ox)] = padded[c, oz*s+kz, oy*s+ky, ox*s+kx]
  void im2col_slab(const T* padded, const std::array<int64_t, 3>& pd,
                   const std::array<int64_t, 3>& od, int64_t oz, T* cols) const {
    int64_t slab = od[1] * od[2];
    int64_t rows = klen();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
      int64_t kx = r % k_, ky = (r / k_) % k_, kz = (r / (k_ * k_)) % k_, c = r / (k_ * k_ * k_);
      const T* base = padded + ((c * pd[0] + oz * stride_ + kz) * pd[1] + ky) * pd[2] + kx;
      T* dst = cols + r * slab;
      if (stride_ == 1) {
        for (int64_t oy = 0; oy < od[1]; ++oy)
          std::memcpy(dst + oy * od[2], base + oy * pd[2], sizeof(T) * static_cast<size_t>(od[2]));
      } else {
        for (int64_t oy = 0; oy < od[1]; ++oy) {
          const T* srow = base + oy * stride_ * pd[2];
          T* drow = dst + oy * od[2];
          for (int64_t ox = 0; ox < od[2]; ++ox) drow[ox] = srow[ox * stride_];
        }
      }
    }
  }

  void col2im_slab(const T* dcols, const std::array<int64_t, 3>& pd,
                   const std::array<int64_t, 3>& od, int64_t oz, T* gpadded) const {
    int64_t slab = od[1] * od[2];
    // Rows of a given input channel scatter into disjoint output channels of
    // gpadded only per c, so parallelize across channels.
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in_ch_; ++c) {
      for (int kz = 0; kz < k_; ++kz)
        for (int ky = 0; ky < k_; ++ky)
          for (int kx = 0; kx < k_; ++kx) {
            int64_t r = ((static_cast<int64_t>(c) * k_ + kz) * k_ + ky) * k_ + kx;
            const T* src = dcols + r * slab;
            T* base = gpadded + ((static_cast<int64_t>(c) * pd[0] + oz * stride_ + kz) * pd[1] + ky) * pd[2] + kx;
            if (stride_ == 1) {
              for (int64_t oy = 0; oy < od[1]; ++oy) {
                T* drow = base + oy * pd[2];
                const T* srow = src + oy * od[2];
                for (int64_t ox = 0; ox < od[2]; ++ox) drow[ox] += srow[ox];
              }
            } else {
              for (int64_t oy = 0; oy < od[1]; ++oy) {
                T* drow = base + oy * stride_ * pd[2];
                const T* srow = src + oy * od[2];
                for (int64_t ox = 0; ox < od[2]; ++ox) drow[ox * stride_] += srow[ox];
              }
            }
          }
    }
  }
};

// ---------------------------------------------------------------------------
// Per-channel batch normalization over (n, d, h, w). Training mode uses batch
// statistics (biased variance) and maintains running averages for inference.
// ---------------------------------------------------------------------------
template <typename T>
class BatchNorm3d {
 public:
  BatchNorm3d() = default;
  explicit BatchNorm3d(int channels, T momentum = T(0.1), T eps = T(1e-5))
      : ch_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = Tensor<T>({channels}, T(1));
    beta_ = Tensor<T>({channels}, T(0));
    ggamma_ = Tensor<T>({channels}, T(0));
    gbeta_ = Tensor<T>({channels}, T(0));
    running_mean_ = Tensor<T>({channels}, T(0));
    running_var_ = Tensor<T>({channels}, T(1));
  }

  struct Cache {
    std::vector<T> mean, invstd;
    bool train = false;
  };

  Tensor<T> forward(const Tensor<T>& x, bool train, Cache* cache) const {
    check(x);
    int64_t N = x.dim(0), spatial = x.dim(2) * x.dim(3) * x.dim(4);
    int64_t m = N * spatial;
    Tensor<T> y(x.shape);
    std::vector<T> mean(static_cast<size_t>(ch_)), invstd(static_cast<size_t>(ch_));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ch_; ++c) {
      double mu, var;
      if (train) {
        double s = 0, s2 = 0;
        for (int64_t n = 0; n < N; ++n) {
          const T* p = x.ptr() + ((n * ch_ + c) * spatial);
          for (int64_t i = 0; i < spatial; ++i) {
            double v = static_cast<double>(p[i]);
            s += v;
            s2 += v * v;
          }
        }
        mu = s / static_cast<double>(m);
        var = std::max(0.0, s2 / static_cast<double>(m) - mu * mu);
      } else {
        mu = static_cast<double>(running_mean_.data[static_cast<size_t>(c)]);
        var = static_cast<double>(running_var_.data[static_cast<size_t>(c)]);
      }
      double is = 1.0 / std::sqrt(var + static_cast<double>(eps_));
      mean[static_cast<size_t>(c)] = static_cast<T>(mu);
      invstd[static_cast<size_t>(c)] = static_cast<T>(is);
      T g = gamma_.data[static_cast<size_t>(c)], bb = beta_.data[static_cast<size_t>(c)];
      T a = static_cast<T>(is) * g;
      T shift = bb - static_cast<T>(mu) * a;
      for (int64_t n = 0; n < N; ++n) {
        const T* p = x.ptr() + ((n * ch_ + c) * spatial);
        T* q = y.ptr() + ((n * ch_ + c) * spatial);
        for (int64_t i = 0; i < spatial; ++i) q[i] = p[i] * a + shift;
      }
    }
    if (train) {
      for (int c = 0; c < ch_; ++c) {
        double mu = static_cast<double>(mean[static_cast<size_t>(c)]);
        double is = static_cast<double>(invstd[static_cast<size_t>(c)]);
        double var = 1.0 / (is * is) - static_cast<double>(eps_);
        auto& rm = running_mean_.data[static_cast<size_t>(c)];
        auto& rv = running_var_.data[static_cast<size_t>(c)];
        rm = static_cast<T>((1.0 - static_cast<double>(momentum_)) * static_cast<double>(rm) +
                            static_cast<double>(momentum_) * mu);
        rv = static_cast<T>((1.0 - static_cast<double>(momentum_)) * static_cast<double>(rv) +
                            static_cast<double>(momentum_) * var);
      }
    }
    if (cache) {
      cache->mean = std::move(mean);
      cache->invstd = std::move(invstd);
      cache->train = train;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy, const Cache& cache) {
    check(x);
    int64_t N = x.dim(0), spatial = x.dim(2) * x.dim(3) * x.dim(4);
    int64_t m = N * spatial;
    Tensor<T> gx(x.shape);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ch_; ++c) {
      double mu = static_cast<double>(cache.mean[static_cast<size_t>(c)]);
      double is = static_cast<double>(cache.invstd[static_cast<size_t>(c)]);
      double g = static_cast<double>(gamma_.data[static_cast<size_t>(c)]);
      double sum_gy = 0, sum_gy_xhat = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* xp = x.ptr() + ((n * ch_ + c) * spatial);
        const T* gp = gy.ptr() + ((n * ch_ + c) * spatial);
        for (int64_t i = 0; i < spatial; ++i) {
          double xhat = (static_cast<double>(xp[i]) - mu) * is;
          sum_gy += static_cast<double>(gp[i]);
          sum_gy_xhat += static_cast<double>(gp[i]) * xhat;
        }
      }
      ggamma_.data[static_cast<size_t>(c)] += static_cast<T>(sum_gy_xhat);
      gbeta_.data[static_cast<size_t>(c)] += static_cast<T>(sum_gy);
      if (cache.train) {
        double inv_m = 1.0 / static_cast<double>(m);
        for (int64_t n = 0; n < N; ++n) {
          const T* xp = x.ptr() + ((n * ch_ + c) * spatial);
          const T* gp = gy.ptr() + ((n * ch_ + c) * spatial);
          T* rp = gx.ptr() + ((n * ch_ + c) * spatial);
          for (int64_t i = 0; i < spatial; ++i) {
            double xhat = (static_cast<double>(xp[i]) - mu) * is;
            double v = g * is * (static_cast<double>(gp[i]) - inv_m * (sum_gy + xhat * sum_gy_xhat));
            rp[i] = static_cast<T>(v);
          }
        }
      } else {
        for (int64_t n = 0; n < N; ++n) {
          const T* gp = gy.ptr() + ((n * ch_ + c) * spatial);
          T* rp = gx.ptr() + ((n * ch_ + c) * spatial);
          for (int64_t i = 0; i < spatial; ++i) rp[i] = static_cast<T>(g * is * static_cast<double>(gp[i]));
        }
      }
    }
    return gx;
  }

  void zero_grad() {
    ggamma_.zero();
    gbeta_.zero();
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + "/gamma", &gamma_, &ggamma_, true});
    out.push_back({prefix + "/beta", &beta_, &gbeta_, true});
    out.push_back({prefix + "/running_mean", &running_mean_, nullptr, false});
    out.push_back({prefix + "/running_var", &running_var_, nullptr, false});
  }

 private:
  int ch_ = 0;
  T momentum_ = T(0.1), eps_ = T(1e-5);
  Tensor<T> gamma_, beta_, ggamma_, gbeta_;
  mutable Tensor<T> running_mean_, running_var_;

  void check(const Tensor<T>& x) const {
    if (x.rank() != 5 || x.dim(1) != ch_) throw shape_error("batchnorm: channel mismatch");
  }
};

// Conv -> BN -> activation.
template <typename T>
struct ConvBNAct {
  Conv3d<T> conv;
  BatchNorm3d<T> bn;
  Act act;

  ConvBNAct() = default;
  ConvBNAct(int in_ch, int out_ch, Act a, int k = 3, int stride = 1, int pad_lo = 1, int pad_hi = 1)
      : conv(in_ch, out_ch, k, stride, pad_lo, pad_hi, /*bias=*/false), bn(out_ch), act(a) {}

  struct Cache {
    Tensor<T> conv_out;
    typename BatchNorm3d<T>::Cache bn;
    Tensor<T> act_out;
  };

  Tensor<T> forward(const Tensor<T>& x, bool train, Cache* c) {
    Tensor<T> z = conv.forward(x);
    Tensor<T> h = bn.forward(z, train, c ? &c->bn : nullptr);
    Tensor<T> y;
    act_forward(act, h, y);
    if (c) {
      c->conv_out = std::move(z);
      c->act_out = y;  // copy retained for the backward mask / next layer input
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, Cache& c, const Tensor<T>& gy, bool want_input_grad) {
    Tensor<T> ga;
    act_backward(act, c.act_out, gy, ga);
    Tensor<T> gz = bn.backward(c.conv_out, ga, c.bn);
    return conv.backward(x, gz, want_input_grad);
  }

  void zero_grad() {
    conv.zero_grad();
    bn.zero_grad();
  }
  void init(std::mt19937_64& rng) { conv.init(rng); }
  void collect(const std::string& prefix, ParamList<T>& out) {
    conv.collect(prefix + "/conv", out);
    bn.collect(prefix + "/bn", out);
  }
};

// conv-bn-relu-conv-bn + skip, post-activation ReLU.
template <typename T>
struct ResBlock {
  ConvBNAct<T> a;
  Conv3d<T> conv_b;
  BatchNorm3d<T> bn_b;

  ResBlock() = default;
  explicit ResBlock(int ch)
      : a(ch, ch, Act::relu), conv_b(ch, ch, 3, 1, 1, 1, /*bias=*/false), bn_b(ch) {}

  struct Cache {
    typename ConvBNAct<T>::Cache a;
    Tensor<T> convb_out;
    typename BatchNorm3d<T>::Cache bn_b;
    Tensor<T> out;
  };

  Tensor<T> forward(const Tensor<T>& x, bool train, Cache* c) {
    Tensor<T> h = a.forward(x, train, c ? &c->a : nullptr);
    Tensor<T> z = conv_b.forward(h);
    Tensor<T> s = bn_b.forward(z, train, c ? &c->bn_b : nullptr);
    if (c) c->convb_out = std::move(z);
    Tensor<T> y(s.shape);
    const T* sp = s.ptr();
    const T* xp = x.ptr();
    T* yp = y.ptr();
    for (int64_t i = 0; i < y.numel(); ++i) {
      T v = sp[i] + xp[i];
      yp[i] = v > T(0) ? v : T(0);
    }
    if (c) c->out = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, Cache& c, const Tensor<T>& gy) {
    Tensor<T> gsum(gy.shape);
    const T* op = c.out.ptr();
    const T* gp = gy.ptr();
    T* sp = gsum.ptr();
    for (int64_t i = 0; i < gy.numel(); ++i) sp[i] = op[i] > T(0) ? gp[i] : T(0);
    Tensor<T> gz = bn_b.backward(c.convb_out, gsum, c.bn_b);
    Tensor<T> gh = conv_b.backward(c.a.act_out, gz, true);
    Tensor<T> gx = a.backward(x, c.a, gh, true);
    T* gxp = gx.ptr();
    for (int64_t i = 0; i < gx.numel(); ++i) gxp[i] += sp[i];  // skip-path gradient
    return gx;
  }

  void zero_grad() {
    a.zero_grad();
    conv_b.zero_grad();
    bn_b.zero_grad();
  }
  void init(std::mt19937_64& rng) {
    a.init(rng);
    conv_b.init(rng);
  }
  void collect(const std::string& prefix, ParamList<T>& out) {
    a.collect(prefix + "/conv_a", out);
    conv_b.collect(prefix + "/conv_b/conv", out);
    bn_b.collect(prefix + "/conv_b/bn", out);
  }
};

// The shared sub-network recipe of the global module and each local module:
// four conv layers (leaky ReLU) followed by four residual blocks.
template <typename T>
struct PathNet {
  std::array<ConvBNAct<T>, 4> convs;
  std::array<ResBlock<T>, 4> blocks;

  PathNet() = default;
  explicit PathNet(const std::array<int, 4>& filters) {
    int in = 1;
    for (int i = 0; i < 4; ++i) {
      convs[static_cast<size_t>(i)] = ConvBNAct<T>(in, filters[static_cast<size_t>(i)], Act::leaky_relu);
      in = filters[static_cast<size_t>(i)];
    }
    for (auto& b : blocks) b = ResBlock<T>(filters[3]);
  }

  struct Cache {
    std::array<typename ConvBNAct<T>::Cache, 4> convs;
    std::array<typename ResBlock<T>::Cache, 4> blocks;
  };

  Tensor<T> forward(const Tensor<T>& x, bool train, Cache* c) {
    Tensor<T> h = convs[0].forward(x, train, c ? &c->convs[0] : nullptr);
    for (int i = 1; i < 4; ++i)
      h = convs[static_cast<size_t>(i)].forward(h, train, c ? &c->convs[static_cast<size_t>(i)] : nullptr);
    for (int i = 0; i < 4; ++i)
      h = blocks[static_cast<size_t>(i)].forward(h, train, c ? &c->blocks[static_cast<size_t>(i)] : nullptr);
    return h;
  }

  // Inputs to each stage come from the previous stage's retained activation.
  Tensor<T> backward(const Tensor<T>& x, Cache& c, const Tensor<T>& gy) {
    Tensor<T> g = gy;
    for (int i = 3; i >= 0; --i) {
      const Tensor<T>& in = i == 0 ? c.convs[3].act_out : c.blocks[static_cast<size_t>(i - 1)].out;
      g = blocks[static_cast<size_t>(i)].backward(in, c.blocks[static_cast<size_t>(i)], g);
    }
    for (int i = 3; i >= 1; --i)
      g = convs[static_cast<size_t>(i)].backward(c.convs[static_cast<size_t>(i - 1)].act_out,
                                                 c.convs[static_cast<size_t>(i)], g, true);
    return convs[0].backward(x, c.convs[0], g, false);
  }

  void zero_grad() {
    for (auto& l : convs) l.zero_grad();
    for (auto& b : blocks) b.zero_grad();
  }
  void init(std::mt19937_64& rng) {
    for (auto& l : convs) l.init(rng);
    for (auto& b : blocks) b.init(rng);
  }
  void collect(const std::string& prefix, ParamList<T>& out) {
    for (int i = 0; i < 4; ++i) convs[static_cast<size_t>(i)].collect(prefix + "/conv" + std::to_string(i + 1), out);
    for (int i = 0; i < 4; ++i) blocks[static_cast<size_t>(i)].collect(prefix + "/res" + std::to_string(i + 1), out);
  }
};

}  // namespace glagan
