// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Trainable half of the mono-to-multi-view feature adapter: multi-scale
// fusion of the frozen features and a windowed cross-view transformer.
#pragma once

#include <vector>

#include "monosplat/numerics/nn.hpp"

namespace MONOSPLAT_NS {

struct DptConfig {
    std::int64_t in_channels = 16; // C_enc
    int num_scales = 4;
    std::int64_t out_channels = 64; // C
};

/// Coarse-to-fine fusion: the coarsest map is projected, then each finer
/// stage adds the bilinearly upsampled running map to its own projection and
/// applies a residual block.
class DptFuse {
  public:
    static DptFuse make(ParamStore &store, const std::string &name, const DptConfig &cfg, std::uint64_t seed);
    /// `scales` fine to coarse; output at the finest scale's resolution.
    Var operator()(Tape &t, const std::vector<Var> &scales) const;
    /// Fusion disabled: project only the coarsest map and upsample it.
    Var coarsest_only(Tape &t, const std::vector<Var> &scales) const;
    const DptConfig &config() const { return cfg_; }

  private:
    void check(const std::vector<Var> &scales) const;

    DptConfig cfg_;
    std::vector<Conv2d> proj_;
    std::vector<ResBlock> fuse_;
};

struct CrossViewConfig {
    std::int64_t in_channels = 64; // C
    std::int64_t channels = 64;    // C_mv
    int blocks = 3;
    int window = 8;
    int heads = 1;
    int max_views = 8;
};

struct CrossViewOutput {
    std::vector<Var> features; // per view [h, w, C_mv]
    bool self_attention_only = false;
    /// Post-softmax attention matrices, recorded when requested.
    std::vector<Tensor> weights;
};

/// Inclusive-exclusive window bounds (y0, y1, x0, x1). Windows at the right
/// and bottom edges are smaller when the extent is not a multiple of `window`.
std::vector<std::array<std::int64_t, 4>> attention_windows(std::int64_t h, std::int64_t w, int window);

/// Attention restricted to non-overlapping windows: queries in a window of
/// `q` attend only to keys and values in the same window of `kv`.
Var window_attention(Tape &t, const Attention &attn, Var q, Var kv, int window,
                     std::vector<Tensor> *weights = nullptr);

class CrossViewTransformer {
  public:
    static CrossViewTransformer make(ParamStore &store, const std::string &name, const CrossViewConfig &cfg,
                                     std::uint64_t seed);
    /// `neighbors[i]` lists the views that view i attends to. With
    /// `cross_attention` off, or no neighbors at all, blocks keep only their
    /// self-attention and MLP parts.
    CrossViewOutput operator()(Tape &t, const std::vector<Var> &fused, const std::vector<std::vector<int>> &neighbors,
                               bool cross_attention = true, bool record_weights = false) const;
    const CrossViewConfig &config() const { return cfg_; }

  private:
    struct Block {
        Attention self_attn;
        Attention cross_attn;
        Linear mlp1;
        Linear mlp2;
    };
    CrossViewConfig cfg_;
    std::optional<Linear> in_proj_;
    Parameter *view_embedding_ = nullptr; // [max_views, C_mv]
    std::vector<Block> blocks_;
};

} // namespace monosplat
