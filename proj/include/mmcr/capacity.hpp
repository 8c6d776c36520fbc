#pragma once

#include "mmcr/linalg.hpp"
#include "mmcr/matrix.hpp"
#include "mmcr/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmcr {

/// Samples from one manifold, one point per row.
struct PointManifold {
    Matrix points;
    std::optional<int> label;

    std::size_t m() const noexcept { return points.rows(); }
    std::size_t dim() const noexcept { return points.cols(); }
};

struct GeometryMeasures {
    double radius = 0.0;
    double dimension = 0.0;
    double effective_size = 0.0;  // radius * sqrt(dimension)
};

/// Radius and participation-ratio dimension from the spectrum of the
/// population covariance (1/M) of the centered points. Throws DegenerateInput
/// when every point coincides.
GeometryMeasures elliptical_measures(const PointManifold& m);
/// Same closed forms applied to the rows of `centered` as given (no re-centering).
GeometryMeasures spectral_measures(const Matrix& centered);

struct SupportValue {
    double value = 0.0;
    std::size_t index = 0;
};
/// min over points of v . s, with the first minimizing row.
SupportValue support_function(std::span<const double> v, const PointManifold& m);

struct KktResiduals {
    double stationarity = 0.0;    // || v - t - lambda * anchor ||
    double dual = 0.0;            // max(0, -min alpha_j)
    double primal = 0.0;          // max(0, kappa - g(v))
    double complementarity = 0.0; // max_j alpha_j * |s_j . v - kappa|
    double max() const;
};

struct AnchorSample {
    std::vector<double> t;
    std::vector<double> v;
    std::vector<double> anchor;        // empty when inactive
    std::vector<double> weights;       // convex-hull coefficients alpha_j (sum = lambda)
    std::size_t support_index = 0;     // argmin of the support function at v
    double lambda = 0.0;
    double f_value = 0.0;              // ||v - t||^2
    bool active = false;
    std::size_t iterations = 0;       // active-set changes
    KktResiduals kkt;
};

inline constexpr double kQpTolerance = 1e-8;
inline constexpr std::size_t kQpIterationCap = 100000;

/// min ||v - t||^2 subject to v . s_j >= kappa for every point s_j, solved
/// exactly in the dual over non-negative point weights by an active-set
/// (Lawson-Hanson) method. A constraint enters when violated by more than
/// 1e-3 * kQpTolerance relative to |t| * max|s_j| + |kappa|; throws
/// ConvergenceError after kQpIterationCap active-set changes.
AnchorSample solve_anchor_qp(std::span<const double> t, const PointManifold& m, double kappa = 0.0);

/// Points in the per-manifold analysis frame. Axis 0 is the centroid
/// direction; the remaining axes are an orthonormal basis of the centered
/// points with that direction projected out. All coordinates are divided by
/// the centroid norm, so the centroid maps to (1, 0, ..., 0).
struct ManifoldFrame {
    PointManifold framed;
    double centroid_norm = 0.0;
    std::size_t rank = 0;  // frame dimension minus one
};
ManifoldFrame manifold_frame(const PointManifold& m);

struct ManifoldCapacity {
    double alpha_inverse = 0.0;  // mean F
    double f_std = 0.0;          // sample std of F
    std::size_t active = 0;      // samples with a binding constraint
    GeometryMeasures mean_field; // anchor statistics
    GeometryMeasures anchor_spectral;  // closed forms on the anchor covariance
    std::size_t frame_dim = 0;
};

struct CapacityReport {
    double alpha = 0.0;
    double alpha_inverse = 0.0;
    double std_error = 0.0;                 // of alpha (delta method)
    double alpha_inverse_std_error = 0.0;
    std::size_t n_samples = 0;
    double kappa = 0.0;
    std::uint64_t seed = 0;
    std::vector<GeometryMeasures> per_manifold;  // mean-field radius / dimension
    std::vector<ManifoldCapacity> details;
    double mean_centroid_cosine = 0.0;      // reported only, not folded into alpha
    std::string frame = "centroid axis + centered span, scaled by 1/||centroid||";
};

/// Mean-field capacity from n_samples Gaussian fields per manifold. Sample i
/// of manifold m draws from RngStream(seed).derive(m).derive(i), so the
/// result does not depend on thread count.
CapacityReport mftma_capacity(const std::vector<PointManifold>& manifolds, std::size_t n_samples, double kappa,
                              std::uint64_t seed, Exec exec = Exec::parallel);

/// Fraction of `trials` random +-1 manifold dichotomies that are linearly
/// separable (with margin) after embedding every manifold's frame into R^d by
/// an independent random isometry.
double separability_fraction(const std::vector<PointManifold>& manifolds, std::size_t d, std::size_t trials,
                             RngStream& rng, Exec exec = Exec::parallel);

struct BruteForceResult {
    double capacity = 0.0;     // P / D*
    double critical_dim = 0.0; // interpolated 50% crossing
    std::vector<std::pair<std::size_t, double>> probes;  // (D, separable fraction)
};

/// Bisection over integer D for the 50% separability crossing, interpolated
/// linearly between the bracketing dimensions.
BruteForceResult bruteforce_capacity(const std::vector<PointManifold>& manifolds, std::size_t trials, RngStream& rng,
                                     Exec exec = Exec::parallel);

struct LayerSnapshot {
    std::string name;
    std::vector<PointManifold> manifolds;
};

struct LayerCapacity {
    std::string name;
    std::size_t original_dim = 0;
    std::size_t analysis_dim = 0;
    CapacityReport report;
};

/// One report per layer, all with the same sample count and seed. Layers wider
/// than `max_dim` are first mapped by a Gaussian random projection (entries
/// N(0, 1/max_dim)) drawn from `projection_seed`.
std::vector<LayerCapacity> layerwise_capacity(const std::vector<LayerSnapshot>& layers, std::size_t n_samples,
                                              double kappa, std::uint64_t seed, std::size_t max_dim,
                                              std::uint64_t projection_seed, Exec exec = Exec::parallel);

std::string capacity_report_json(const CapacityReport& r, int indent = 2);

// Synthetic manifolds for benchmarks and tests. Each is placed in a random
// orientation: a Haar frame supplies the centroid direction (scaled to
// `centroid_norm`) and the orthogonal spread directions.

/// `m` points spread uniformly on a `sphere_dim`-dimensional sphere of the given radius.
PointManifold sphere_manifold(RngStream& rng, std::size_t ambient_dim, std::size_t sphere_dim, std::size_t m,
                              double radius, double centroid_norm = 1.0);
/// `m` Gaussian points whose spread directions have the given variances.
PointManifold gaussian_manifold(RngStream& rng, std::size_t ambient_dim, const std::vector<double>& variances,
                                std::size_t m, double centroid_norm = 1.0);
/// `p` single-point manifolds on the unit sphere of R^d.
std::vector<PointManifold> point_manifolds(RngStream& rng, std::size_t p, std::size_t d);

}  // namespace mmcr
