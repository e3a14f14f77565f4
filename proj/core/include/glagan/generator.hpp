#pragma once

#include <memory>

#include "glagan/nn.hpp"
#include "glagan/volume.hpp"

namespace glagan {

struct GeneratorConfig {
  int k_patches = 4;
  std::array<int, 4> filters{64, 64, 128, 64};  // conv-layer filter counts per path
  int fusion_channels = 64;                     // width of the first fusion conv

  int feature_channels() const { return filters[3]; }  // f_g == f_l
};

// Tile a (n,1,D,H,W) tensor into grid.k patch tensors; grid split axes
// (s1,s2,s3) act on volume axes (x,y,z) = tensor dims (w,h,d). Patch order
// matches tile_patches: x-split index fastest, then y, then z.
template <typename T>
std::vector<Tensor<T>> tile_tensor(const Tensor<T>& x, const PatchGrid& grid) {
  int64_t N = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  const auto& s = grid.splits;
  if (D % s[2] || H % s[1] || W % s[0]) throw shape_error("tile_tensor: indivisible shape");
  int64_t pd = D / s[2], ph = H / s[1], pw = W / s[0];
  std::vector<Tensor<T>> out;
  out.reserve(static_cast<size_t>(grid.k));
  for (int gz = 0; gz < s[2]; ++gz)
    for (int gy = 0; gy < s[1]; ++gy)
      for (int gx = 0; gx < s[0]; ++gx) {
        Tensor<T> p({N, C, pd, ph, pw});
        for (int64_t n = 0; n < N; ++n)
          for (int64_t c = 0; c < C; ++c)
            for (int64_t z = 0; z < pd; ++z)
              for (int64_t y = 0; y < ph; ++y) {
                const T* src = x.ptr() + (((n * C + c) * D + gz * pd + z) * H + gy * ph + y) * W + gx * pw;
                T* dst = p.ptr() + (((n * C + c) * pd + z) * ph + y) * pw;
                std::memcpy(dst, src, sizeof(T) * static_cast<size_t>(pw));
              }
        out.push_back(std::move(p));
      }
  return out;
}

// Inverse of tile_tensor (channel count may differ from the tiled input's).
template <typename T>
Tensor<T> fuse_tensor(const std::vector<Tensor<T>>& patches, const PatchGrid& grid) {
  const auto& s = grid.splits;
  if (static_cast<int>(patches.size()) != grid.k) throw shape_error("fuse_tensor: patch count mismatch");
  const auto& p0 = patches.front();
  int64_t N = p0.dim(0), C = p0.dim(1), pd = p0.dim(2), ph = p0.dim(3), pw = p0.dim(4);
  Tensor<T> out({N, C, pd * s[2], ph * s[1], pw * s[0]});
  int64_t D = out.dim(2), H = out.dim(3), W = out.dim(4);
  size_t idx = 0;
  for (int gz = 0; gz < s[2]; ++gz)
    for (int gy = 0; gy < s[1]; ++gy)
      for (int gx = 0; gx < s[0]; ++gx) {
        const Tensor<T>& p = patches[idx++];
        if (p.shape != p0.shape) throw shape_error("fuse_tensor: inconsistent patch shapes");
        for (int64_t n = 0; n < N; ++n)
          for (int64_t c = 0; c < C; ++c)
            for (int64_t z = 0; z < pd; ++z)
              for (int64_t y = 0; y < ph; ++y) {
                const T* src = p.ptr() + (((n * C + c) * pd + z) * ph + y) * pw;
                T* dst = out.ptr() + (((n * C + c) * D + gz * pd + z) * H + gy * ph + y) * W + gx * pw;
                std::memcpy(dst, src, sizeof(T) * static_cast<size_t>(pw));
              }
      }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  int64_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  int64_t spatial = a.dim(2) * a.dim(3) * a.dim(4);
  Tensor<T> out({N, Ca + Cb, a.dim(2), a.dim(3), a.dim(4)});
  for (int64_t n = 0; n < N; ++n) {
    std::memcpy(out.ptr() + n * (Ca + Cb) * spatial, a.ptr() + n * Ca * spatial,
                sizeof(T) * static_cast<size_t>(Ca * spatial));
    std::memcpy(out.ptr() + (n * (Ca + Cb) + Ca) * spatial, b.ptr() + n * Cb * spatial,
                sizeof(T) * static_cast<size_t>(Cb * spatial));
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int64_t ca) {
  int64_t N = x.dim(0), C = x.dim(1), cb = C - ca;
  int64_t spatial = x.dim(2) * x.dim(3) * x.dim(4);
  Tensor<T> a({N, ca, x.dim(2), x.dim(3), x.dim(4)});
  Tensor<T> b({N, cb, x.dim(2), x.dim(3), x.dim(4)});
  for (int64_t n = 0; n < N; ++n) {
    std::memcpy(a.ptr() + n * ca * spatial, x.ptr() + n * C * spatial,
                sizeof(T) * static_cast<size_t>(ca * spatial));
    std::memcpy(b.ptr() + n * cb * spatial, x.ptr() + (n * C + ca) * spatial,
                sizeof(T) * static_cast<size_t>(cb * spatial));
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// GLA generator: a global path over the whole volume, k_patches independent
// local paths over disjoint patches fused back to full extent, channel-wise
// concatenation (global features first), and a two-conv fusion head ending in
// a sigmoid that regresses target intensities.
// ---------------------------------------------------------------------------
template <typename T>
class Generator {
 public:
  Generator() = default;
  explicit Generator(const GeneratorConfig& cfg)
      : cfg_(cfg),
        grid_(PatchGrid::for_k(cfg.k_patches)),
        global_(cfg.filters),
        fusion1_(2 * cfg.feature_channels(), cfg.fusion_channels, Act::leaky_relu),
        fusion2_(cfg.fusion_channels, 1, 3, 1, 1, 1, /*bias=*/true) {
    locals_.reserve(static_cast<size_t>(cfg.k_patches));
    for (int i = 0; i < cfg.k_patches; ++i) locals_.emplace_back(cfg.filters);
  }

  const GeneratorConfig& config() const { return cfg_; }
  const PatchGrid& grid() const { return grid_; }

  struct Ctx {
    typename PathNet<T>::Cache global;
    std::vector<typename PathNet<T>::Cache> locals;
    std::vector<Tensor<T>> patches;        // local path inputs
    Tensor<T> concat;                      // fusion head input
    typename ConvBNAct<T>::Cache fusion1;
    Tensor<T> fusion2_out;                 // pre-sigmoid logits (unused in bwd)
    Tensor<T> out;                         // sigmoid output (backward mask)
  };

  void init(std::mt19937_64& rng) {
    global_.init(rng);
    for (auto& l : locals_) l.init(rng);
    fusion1_.init(rng);
    fusion2_.init(rng);
  }

  // x: (n,1,D,H,W) in [0,1]. Returns (n,1,D,H,W) strictly inside (0,1).
  Tensor<T> forward(const Tensor<T>& x, bool train, Ctx* ctx) {
    if (x.rank() != 5 || x.dim(1) != 1) throw shape_error("generator: expected (n,1,d,h,w) input");
    Tensor<T> fg = global_.forward(x, train, ctx ? &ctx->global : nullptr);

    auto patches = tile_tensor(x, grid_);
    std::vector<Tensor<T>> feats;
    feats.reserve(patches.size());
    if (ctx) ctx->locals.resize(patches.size());
    for (size_t i = 0; i < patches.size(); ++i)
      feats.push_back(locals_[i].forward(patches[i], train, ctx ? &ctx->locals[i] : nullptr));
    Tensor<T> fl = fuse_tensor(feats, grid_);

    Tensor<T> cat = concat_channels(fg, fl);  // global features first
    Tensor<T> h = fusion1_.forward(cat, train, ctx ? &ctx->fusion1 : nullptr);
    Tensor<T> logits = fusion2_.forward(h);
    Tensor<T> y;
    act_forward(Act::sigmoid, logits, y);
    if (ctx) {
      ctx->patches = std::move(patches);
      ctx->concat = std::move(cat);
      ctx->fusion2_out = std::move(logits);
      ctx->out = y;
    }
    return y;
  }

  // x must be the same tensor the matching forward saw.
  void backward(Ctx& ctx, const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> glogits;
    act_backward(Act::sigmoid, ctx.out, gy, glogits);
    Tensor<T> gh = fusion2_.backward(ctx.fusion1.act_out, glogits, true);
    Tensor<T> gcat = fusion1_.backward(ctx.concat, ctx.fusion1, gh, true);
    auto [gfg, gfl] = split_channels(gcat, cfg_.feature_channels());

    auto gfeats = tile_tensor(gfl, grid_);
    for (size_t i = 0; i < locals_.size(); ++i)
      locals_[i].backward(ctx.patches[i], ctx.locals[i], gfeats[i]);
    global_.backward(x, ctx.global, gfg);
  }

  // Spec surface: full-extent feature grids of the two modules (inference mode).
  Tensor<T> global_features(const Tensor<T>& x) { return global_.forward(x, false, nullptr); }
  Tensor<T> local_features(const std::vector<Tensor<T>>& patches) {
    if (static_cast<int>(patches.size()) != cfg_.k_patches)
      throw shape_error("local_features: expected " + std::to_string(cfg_.k_patches) + " patches");
    std::vector<Tensor<T>> feats;
    feats.reserve(patches.size());
    for (size_t i = 0; i < patches.size(); ++i)
      feats.push_back(locals_[i].forward(patches[i], false, nullptr));
    return fuse_tensor(feats, grid_);
  }

  // Named intermediate activation of the global path, inference mode.
  // layer_id: "conv1".."conv4" or "res1".."res4".
  Tensor<T> global_activation(const Tensor<T>& x, const std::string& layer_id) {
    typename PathNet<T>::Cache cache;
    global_.forward(x, false, &cache);
    for (int i = 0; i < 4; ++i)
      if (layer_id == "conv" + std::to_string(i + 1)) return cache.convs[static_cast<size_t>(i)].act_out;
    for (int i = 0; i < 4; ++i)
      if (layer_id == "res" + std::to_string(i + 1)) return cache.blocks[static_cast<size_t>(i)].out;
    throw config_error("unknown layer id: " + layer_id);
  }

  void zero_grad() {
    global_.zero_grad();
    for (auto& l : locals_) l.zero_grad();
    fusion1_.zero_grad();
    fusion2_.zero_grad();
  }

  ParamList<T> params() {
    ParamList<T> out;
    global_.collect("global", out);
    for (size_t i = 0; i < locals_.size(); ++i)
      locals_[i].collect("local/" + std::to_string(i), out);
    fusion1_.collect("fusion/conv1", out);
    fusion2_.collect("fusion/out", out);
    return out;
  }

  Tensor<T>& output_bias() { return fusion2_.bias(); }

 private:
  GeneratorConfig cfg_;
  PatchGrid grid_;
  PathNet<T> global_;
  std::vector<PathNet<T>> locals_;
  ConvBNAct<T> fusion1_;
  Conv3d<T> fusion2_;
};

}  // namespace glagan
