#pragma once

#include "mmcr/matrix.hpp"
#include "mmcr/rng.hpp"

#include <span>
#include <vector>

namespace mmcr {

struct DatasetConfig {
    std::size_t n_classes = 4;
    std::size_t n_per_class = 256;
    std::size_t ambient_dim = 64;
    std::size_t intrinsic_dim = 16;
    double coeff_std = 3.0;     // spread of in-subspace coefficients
    double offset_norm = 0.0;   // length of each class offset (placed inside the class subspace)
    double noise_sigma = 0.25;  // isotropic ambient noise
    /// Log-normal sigma of a per-scene factor on the coefficient vector.
    double radius_spread = 1.0;
    /// Divide every scene by the pooled per-coordinate standard deviation.
    bool standardize = true;

    bool operator==(const DatasetConfig&) const = default;
};

/// One class's generator: an orthonormal basis (ambient x intrinsic) and an offset.
struct ClassFrame {
    Matrix basis;
    std::vector<double> offset;
};

struct SceneDataset {
    DatasetConfig config;
    std::vector<ClassFrame> frames;
    Matrix x;                  // one scene per row
    std::vector<int> labels;
    double scale = 1.0;        // factor already applied to x and offsets

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t n_classes() const noexcept { return frames.size(); }
    /// Rows with the given indices, in order.
    Matrix rows(std::span<const std::size_t> idx) const;
    std::vector<int> labels_of(std::span<const std::size_t> idx) const;
};

/// Class subspaces are disjoint blocks of one random orthogonal matrix when
/// n_classes * intrinsic_dim <= ambient_dim (mutually orthogonal), otherwise
/// independent random frames. Throws ConfigError on bad dimensions.
SceneDataset make_dataset(const DatasetConfig& config, RngStream& rng);

struct DatasetSplit {
    std::vector<std::size_t> train, test;
};
/// Random split with round(test_fraction * size) test indices.
DatasetSplit split_dataset(const SceneDataset& ds, double test_fraction, RngStream& rng);

struct AugmentationSpec {
    double jitter_sigma = 0.1;
    double scale_lo = 0.8, scale_hi = 1.2;
    double mask_fraction = 0.125;
    double rotation_angle_max = 3.141592653589793;

    static AugmentationSpec identity() { return {0.0, 1.0, 1.0, 0.0, 0.0}; }
    bool operator==(const AugmentationSpec&) const = default;
};

/// K views of `x`, one per row. Each view: rotation by a uniform angle in
/// [-rotation_angle_max, rotation_angle_max] within a random 2-plane of the
/// class subspace (about the class offset), a uniform scale factor, additive
/// Gaussian jitter, then lround(mask_fraction * dim) coordinates zeroed.
/// Rotation needs the class frame; pass nullptr only when it is disabled.
Matrix augment(std::span<const double> x, std::size_t k, const AugmentationSpec& spec, RngStream& rng,
               const ClassFrame* frame = nullptr);

}  // namespace mmcr
