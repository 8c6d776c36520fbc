#pragma once

#include "mmcr/matrix.hpp"

#include <span>

namespace mmcr {

struct LpFeasibility {
    bool feasible = false;
    double phase1_objective = 0.0;  // 0 when the equality system has a non-negative solution
    std::size_t pivots = 0;
};

/// Phase-1 simplex for {x >= 0 : a x = b} (dense tableau, Dantzig pricing
/// with a lexicographic ratio test). Rows with negative b are negated first. Throws NumericalFailure if the pivot cap is hit.
LpFeasibility phase1_feasible(const Matrix& a, std::span<const double> b, double tol = 1e-9);

/// Whether some w satisfies rows(a) . w >= 1 for every row (strict linear
/// separability of the signed points in `a`). Decided on the Farkas
/// alternative: infeasible iff some lambda >= 0 with sum 1 has a^T lambda = 0.
bool margin_feasible(const Matrix& signed_points);

}  // namespace mmcr
