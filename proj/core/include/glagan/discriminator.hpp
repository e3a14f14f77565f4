#pragma once

#include "glagan/nn.hpp"

namespace glagan {

// Six-layer volume critic: 4^3 kernels with stride 2 for layers 1-4, 2^3
// kernels with stride 1 for layers 5-6 (trailing pad only, size-preserving),
// batch norm + leaky ReLU after layers 1-5, spatial mean pooling and a
// sigmoid after layer 6. One probability per input volume.
template <typename T>
class Discriminator {
 public:
  static constexpr std::array<int, 6> kFilters{64, 128, 256, 512, 64, 1};

  Discriminator() {
    int in = 1;
    for (int i = 0; i < 4; ++i) {
      layers_[static_cast<size_t>(i)] =
          ConvBNAct<T>(in, kFilters[static_cast<size_t>(i)], Act::leaky_relu, /*k=*/4, /*stride=*/2,
                       /*pad_lo=*/1, /*pad_hi=*/1);
      in = kFilters[static_cast<size_t>(i)];
    }
    layers_[4] = ConvBNAct<T>(in, kFilters[4], Act::leaky_relu, /*k=*/2, /*stride=*/1,
                              /*pad_lo=*/1, /*pad_hi=*/0);
    final_ = Conv3d<T>(kFilters[4], 1, 2, 1, 1, 0, /*bias=*/true);
  }

  struct Ctx {
    Tensor<T> input;  // retained copy (the fake volume is reused across steps)
    std::array<typename ConvBNAct<T>::Cache, 5> layers;
    Tensor<T> final_out;  // pre-pool logits
    std::vector<T> probs;
  };

  void init(std::mt19937_64& rng) {
    for (auto& l : layers_) l.init(rng);
    final_.init(rng);
  }

  // y: (n,1,d,h,w) in [0,1]; returns per-sample probabilities in (0,1).
  std::vector<T> forward(const Tensor<T>& y, bool train, Ctx* ctx) {
    if (y.rank() != 5 || y.dim(1) != 1) throw shape_error("discriminator: expected (n,1,d,h,w) input");
    Tensor<T> h = y;
    for (int i = 0; i < 5; ++i)
      h = layers_[static_cast<size_t>(i)].forward(h, train, ctx ? &ctx->layers[static_cast<size_t>(i)] : nullptr);
    Tensor<T> logits = final_.forward(h);
    int64_t N = logits.dim(0);
    int64_t spatial = logits.dim(2) * logits.dim(3) * logits.dim(4);
    std::vector<T> probs(static_cast<size_t>(N));
    for (int64_t n = 0; n < N; ++n) {
      double acc = 0;
      const T* p = logits.ptr() + n * spatial;
      for (int64_t i = 0; i < spatial; ++i) acc += static_cast<double>(p[i]);
      double z = std::clamp(acc / static_cast<double>(spatial),
                            -static_cast<double>(kSigmoidLogitClamp),
                            static_cast<double>(kSigmoidLogitClamp));
      probs[static_cast<size_t>(n)] = static_cast<T>(1.0 / (1.0 + std::exp(-z)));
    }
    if (ctx) {
      ctx->input = y;
      ctx->final_out = std::move(logits);
      ctx->probs = probs;
    }
    return probs;
  }

  // gprob: dLoss/dprob per sample. Accumulates parameter gradients; returns
  // dLoss/dinput when requested.
  Tensor<T> backward(Ctx& ctx, const std::vector<T>& gprob, bool want_input_grad) {
    int64_t N = ctx.final_out.dim(0);
    int64_t spatial = ctx.final_out.dim(2) * ctx.final_out.dim(3) * ctx.final_out.dim(4);
    Tensor<T> glogits(ctx.final_out.shape);
    for (int64_t n = 0; n < N; ++n) {
      T p = ctx.probs[static_cast<size_t>(n)];
      T g = gprob[static_cast<size_t>(n)] * p * (T(1) - p) / static_cast<T>(spatial);
      T* dst = glogits.ptr() + n * spatial;
      for (int64_t i = 0; i < spatial; ++i) dst[i] = g;
    }
    Tensor<T> g = final_.backward(ctx.layers[4].act_out, glogits, true);
    for (int i = 4; i >= 1; --i)
      g = layers_[static_cast<size_t>(i)].backward(ctx.layers[static_cast<size_t>(i - 1)].act_out,
                                                   ctx.layers[static_cast<size_t>(i)], g, true);
    return layers_[0].backward(ctx.input, ctx.layers[0], g, want_input_grad);
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
    final_.zero_grad();
  }

  ParamList<T> params() {
    ParamList<T> out;
    for (int i = 0; i < 5; ++i)
      layers_[static_cast<size_t>(i)].collect("discriminator/conv" + std::to_string(i + 1), out);
    final_.collect("discriminator/conv6", out);
    return out;
  }

 private:
  std::array<ConvBNAct<T>, 5> layers_;
  Conv3d<T> final_;
};

}  // namespace glagan
