// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Network building blocks composed from the autodiff vocabulary.
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "monosplat/numerics/autodiff.hpp"

namespace MONOSPLAT_NS {

/// Named, insertion-ordered parameter storage. Addresses are stable.
class ParamStore {
  public:
    ParamStore() = default;
    ParamStore(const ParamStore &) = delete;
    ParamStore &operator=(const ParamStore &) = delete;

    Parameter &create(const std::string &name, Tensor init, bool trainable = true);
    Parameter &get(const std::string &name);
    const Parameter &get(const std::string &name) const;
    bool contains(const std::string &name) const { return index_.count(name) != 0; }

    std::vector<std::pair<std::string, Parameter *>> all();
    std::vector<std::pair<std::string, const Parameter *>> all() const;
    std::int64_t count(bool trainable) const;
    void zero_grad();

  private:
    std::deque<std::pair<std::string, Parameter>> params_;
    std::map<std::string, std::size_t> index_;
};

enum class Init { Uniform, Zero };

/// Deterministic initializer: centered uniform in +-1/sqrt(fan_in), seeded by
/// (seed, parameter name).
Tensor init_tensor(Shape shape, std::int64_t fan_in, Init init, std::uint64_t seed, const std::string &name);

struct Conv2d {
    Parameter *weight = nullptr; // [k, k, Ci, Co]
    Parameter *bias = nullptr;   // [Co]
    int stride = 1;
    int pad = 0;

    static Conv2d make(ParamStore &store, const std::string &name, std::int64_t ci, std::int64_t co, int k,
                       int stride, std::uint64_t seed, Init init = Init::Uniform);
    Var operator()(Tape &t, Var x) const;
    std::int64_t in_channels() const { return weight->value.dim(2); }
    std::int64_t out_channels() const { return weight->value.dim(3); }
};

struct Linear {
    Parameter *weight = nullptr; // [Ci, Co]
    Parameter *bias = nullptr;   // [Co]

    static Linear make(ParamStore &store, const std::string &name, std::int64_t ci, std::int64_t co,
                       std::uint64_t seed, Init init = Init::Uniform);
    Var operator()(Tape &t, Var x) const;
};

/// Pre-activation residual block: skip(x) + conv(silu(conv(silu(x)))).
struct ResBlock {
    Conv2d conv1;
    Conv2d conv2;
    std::optional<Conv2d> skip;

    static ResBlock make(ParamStore &store, const std::string &name, std::int64_t ci, std::int64_t co,
                         std::uint64_t seed);
    Var operator()(Tape &t, Var x) const;
};

/// Scaled dot-product attention over token matrices [N, C].
struct Attention {
    Linear q, k, v, out;
    int heads = 1;

    static Attention make(ParamStore &store, const std::string &name, std::int64_t channels, int heads,
                          std::uint64_t seed);
    /// Returns the attention update (no residual). When `weights` is given,
    /// the post-softmax matrix of every head is appended to it.
    Var operator()(Tape &t, Var queries, Var keys_values, std::vector<Tensor> *weights = nullptr) const;
};

struct UNetConfig {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t base = 32;
    std::vector<int> multipliers{1, 1, 1};
    int attention_level = -1; // level index that gets global self-attention, -1 for none
    int heads = 1;
    bool zero_init_output = false;
};

/// Encoder-decoder with stride-2 downsampling, bilinear upsampling and
/// concatenated skips. Level l runs at 1/2^l of the input resolution.
class UNet {
  public:
    static UNet make(ParamStore &store, const std::string &name, const UNetConfig &cfg, std::uint64_t seed);
    Var operator()(Tape &t, Var x) const;
    const UNetConfig &config() const { return cfg_; }

  private:
    UNetConfig cfg_;
    Conv2d in_;
    std::vector<ResBlock> enc_;
    std::vector<Conv2d> down_;
    std::optional<Attention> attn_;
    std::vector<ResBlock> dec_;
    Conv2d out_;
};

/// [H, W, C] -> [H*W, C] token view and back.
Var to_tokens(Var x);
Var from_tokens(Var tokens, std::int64_t h, std::int64_t w);

} // namespace monosplat
