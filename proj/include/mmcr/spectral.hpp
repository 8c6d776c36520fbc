#pragma once

#include "mmcr/linalg.hpp"
#include "mmcr/matrix.hpp"
#include "mmcr/rng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mmcr {

/// Normalized augmentation graph over n datapoints with k views each, in
/// view-grouped order (all views of datapoint 0, then datapoint 1, ...).
/// g is block diagonal with n blocks of k x k entries 1/k.
struct AugmentationGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    Matrix g;

    std::size_t size() const noexcept { return n * k; }
};

AugmentationGraph build_graph(std::size_t n, std::size_t k);

/// -||G Z||_* for an (n k) x d embedding.
double graph_loss(const AugmentationGraph& graph, const Matrix& z, Exec exec = Exec::parallel);

/// (||a b||_*, ||a [b, 0]||_*) for square a (N x N) and b (N x d) with d < N.
std::pair<double, double> zero_pad_nuclear_invariance(const Matrix& a, const Matrix& b);

/// Z* = Q_d diag(sigma) R^T from the top-d eigenvectors of G, with sigma
/// proportional to the top-d eigenvalues and sum sigma^2 = n k. Only the
/// Frobenius constraint is guaranteed; `unit_rows` records whether every row
/// also has unit norm (to 1e-9).
struct OptimalEmbedding {
    Matrix z;
    std::vector<double> sigma;
    double loss = 0.0;
    bool unit_rows = false;
    double max_row_norm_deviation = 0.0;
};

/// `r` is a d x d orthogonal matrix; identity when empty. Throws
/// ContractViolation when d exceeds n or r is not orthogonal.
OptimalEmbedding optimal_embedding(const AugmentationGraph& graph, std::size_t d, const Matrix& r = {});

/// Gaussian matrix rescaled onto the Frobenius sphere ||z||_F^2 = rows.
Matrix frobenius_sphere_sample(RngStream& rng, std::size_t rows, std::size_t cols);
/// Gaussian rows each normalized to unit length.
Matrix unit_row_sample(RngStream& rng, std::size_t rows, std::size_t cols);

/// Losses along the path from z to the optimum: z itself, z with its left
/// singular vectors replaced by the top eigenvectors of G, then with its
/// singular values replaced by the optimal ones as well.
std::vector<double> alignment_path(const AugmentationGraph& graph, const Matrix& z);

struct OptimalityReport {
    std::size_t n = 0, k = 0, d = 0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double optimum_loss = 0.0;
    double self_margin = 0.0;  // loss of Z* itself minus the optimum
    bool optimum_has_unit_rows = false;
    std::vector<double> frobenius_margins;  // trial loss minus optimum
    std::vector<double> unit_row_margins;
    std::size_t frobenius_violations = 0;   // margin < -1e-9
    std::size_t unit_row_violations = 0;
    double best_unit_row_gap = 0.0;         // smallest unit-row margin

    std::size_t violations() const noexcept { return frobenius_violations + unit_row_violations; }
};

/// `trials` random Frobenius-sphere embeddings and `trials` random unit-row
/// embeddings, each compared with the constructed optimum. Trial i draws
/// from RngStream(seed).derive(i).
OptimalityReport verify_optimality(const AugmentationGraph& graph, std::size_t d, std::size_t trials,
                                   std::uint64_t seed, Exec exec = Exec::parallel);

std::string optimality_report_json(const OptimalityReport& r, int indent = 2);

}  // namespace mmcr
