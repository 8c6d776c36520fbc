#pragma once

#include "mmcr/linalg.hpp"
#include "mmcr/matrix.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace mmcr {

/// B manifolds x K views x d features, stored contiguously with d fastest.
class ManifoldBatch {
public:
    ManifoldBatch() = default;
    ManifoldBatch(std::size_t b, std::size_t k, std::size_t d);
    ManifoldBatch(std::size_t b, std::size_t k, std::size_t d, std::vector<double> z);
    /// Rows of `features` are views, grouped manifold-major (row = b*K + k).
    static ManifoldBatch from_rows(const Matrix& features, std::size_t b, std::size_t k);

    std::size_t b() const noexcept { return b_; }
    std::size_t k() const noexcept { return k_; }
    std::size_t d() const noexcept { return d_; }

    std::span<double> view(std::size_t bi, std::size_t ki) noexcept { return {z_.data() + (bi * k_ + ki) * d_, d_}; }
    std::span<const double> view(std::size_t bi, std::size_t ki) const noexcept
    {
        return {z_.data() + (bi * k_ + ki) * d_, d_};
    }
    std::span<double> values() noexcept { return z_; }
    std::span<const double> values() const noexcept { return z_; }

    /// Z_b as a d x K matrix (columns are views).
    Matrix manifold_matrix(std::size_t bi) const;
    /// All views as a (B*K) x d matrix.
    Matrix as_rows() const;

    friend bool operator==(const ManifoldBatch&, const ManifoldBatch&) = default;

private:
    std::size_t b_ = 0, k_ = 0, d_ = 0;
    std::vector<double> z_;
};

struct LossBreakdown {
    double total = 0.0;
    double centroid_term = 0.0;     // -||C||_*
    double compression_term = 0.0;  // mean_b ||Z_b||_*
    double lambda = 0.0;
};

struct LossAndGradient {
    LossBreakdown loss;
    ManifoldBatch grad;  // d loss / d raw features, same shape as the input
};

/// Scales every view to unit L2 norm. Throws DegenerateInput naming the
/// (b, k) index of any view with norm <= 1e-12.
ManifoldBatch sphere_normalize(const ManifoldBatch& raw);

/// d x B matrix whose column b is the mean of manifold b's views.
Matrix centroids(const ManifoldBatch& batch);

/// -||C||_* + lambda * mean_b ||Z_b||_* on an already normalized batch.
/// The compression term is skipped (reported as 0) when lambda == 0.
LossBreakdown mmcr_loss(const ManifoldBatch& batch, double lambda, Exec exec = Exec::parallel);
/// Always evaluates both terms; use when the compression term is monitored.
LossBreakdown mmcr_loss_full(const ManifoldBatch& batch, double lambda, Exec exec = Exec::parallel);

/// Loss and gradient with respect to PRE-normalization features. The centroid
/// subgradient reaches each view with weight 1/K, the compression subgradient
/// with weight lambda/B, and both pass through the sphere projection
/// Jacobian (I - z z^T) / ||raw||.
LossAndGradient mmcr_loss_and_grad(const ManifoldBatch& raw, double lambda, Exec exec = Exec::parallel);
ManifoldBatch mmcr_loss_grad(const ManifoldBatch& raw, double lambda, Exec exec = Exec::parallel);

// Monitored statistics on a normalized batch.
double mean_centroid_norm(const ManifoldBatch& batch);
/// Mean cosine similarity over distinct centroid pairs.
double mean_centroid_similarity(const ManifoldBatch& batch);
/// Mean cosine similarity over distinct view pairs within each manifold.
double mean_within_manifold_similarity(const ManifoldBatch& batch);

// Binary layout: u64 B, u64 K, u64 d, then B*K*d f64 (little-endian).
void write_batch(std::ostream& os, const ManifoldBatch& batch);
ManifoldBatch read_batch(std::istream& is);

}  // namespace mmcr
