// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Frozen feature backbones. Outputs are plain tensors and never enter the
// optimizer.
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

struct ProviderOutput {
    std::vector<Tensor> scales; // fine to coarse, scale s at ceil(H / (4 * 2^s)) x ceil(W / (4 * 2^s))
    Tensor mono;                // [H/4, W/4, C_mono]
};

/// Extent of feature scale `s` for an image extent.
std::int64_t feature_extent(std::int64_t image_extent, int s);

class FeatureProvider {
  public:
    virtual ~FeatureProvider() = default;
    virtual ProviderOutput extract(int view, const Tensor &image) const = 0;
    virtual std::string name() const = 0;
    /// Digest of everything that determines the provider's outputs.
    virtual std::string state_hash() const = 0;
    /// Frozen weights held by the provider itself.
    virtual std::int64_t parameter_count() const = 0;
};

struct SyntheticProviderConfig {
    int num_scales = 4;
    std::int64_t channels = 16;      // C_enc
    std::int64_t mono_channels = 32; // C_mono
    double gain = 2.0;
    std::uint64_t seed = 0;
};

/// Fixed random orthonormal projections of local patches (RGB plus gradient
/// magnitude), with weights symmetric under horizontal mirroring, followed
/// by tanh and average pooling.
class SyntheticProvider : public FeatureProvider {
  public:
    explicit SyntheticProvider(SyntheticProviderConfig cfg);
    ProviderOutput extract(int view, const Tensor &image) const override;
    std::string name() const override { return "synthetic"; }
    std::string state_hash() const override;
    std::int64_t parameter_count() const override;
    const SyntheticProviderConfig &config() const { return cfg_; }

  private:
    struct Projection {
        int radius = 1;
        Tensor weight; // [(2r+1)^2 * 4, C]
    };
    Tensor describe(const Tensor &image, const Projection &p, int pool) const;

    SyntheticProviderConfig cfg_;
    std::vector<Projection> scales_;
    Projection mono_;
};

/// Reads `view_<i>_scale_<s>.mtf` and `view_<i>_mono.mtf` from a directory.
class FileProvider : public FeatureProvider {
  public:
    explicit FileProvider(std::filesystem::path dir);
    ProviderOutput extract(int view, const Tensor &image) const override;
    std::string name() const override { return "dir:" + dir_.string(); }
    std::string state_hash() const override;
    std::int64_t parameter_count() const override { return 0; }
    int num_scales() const { return num_scales_; }

  private:
    std::filesystem::path dir_;
    int num_scales_ = 0;
};

/// "synthetic" or "dir:<path>".
std::unique_ptr<FeatureProvider> make_provider(const std::string &spec, const SyntheticProviderConfig &cfg);

void require_divisible_by_16(const Tensor &image);

} // namespace monosplat
