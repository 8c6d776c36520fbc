#include "mmcr/lp.hpp"

#include "mmcr/error.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mmcr {

LpFeasibility phase1_feasible(const Matrix& a, std::span<const double> b, double tol)
{
    const std::size_t m = a.rows(), n = a.cols();
    if (b.size() != m)
        throw ContractViolation("phase1_feasible: rhs length mismatch");

    // Tableau columns: n structural, m artificial, then rhs.
    const std::size_t w = n + m + 1;
    std::vector<double> t(m * w, 0.0);
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double sgn = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j)
            t[i * w + j] = sgn * a(i, j);
        t[i * w + n + i] = 1.0;
        t[i * w + n + m] = sgn * b[i];
        basis[i] = n + i;
    }
    // Reduced costs of the phase-1 objective (sum of artificials).
    std::vector<double> cost(w, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j)
            if (j < n || j == n + m)
                cost[j] -= t[i * w + j];

    LpFeasibility out;
    const std::size_t cap = 50 * (m + n) + 1000;
    while (true) {
        std::size_t enter = w;
        double best = -tol;
        for (std::size_t j = 0; j < n + m; ++j) {
            if (cost[j] < best) {
                enter = j;
                best = cost[j];
            }
        }
        if (enter == w)
            break;

        // Lexicographic ratio test: ties on the rhs ratio are broken by the
        // rows of the basis inverse (the artificial columns), which prevents
        // cycling and long degenerate stalls.
        std::size_t leave = m;
        double ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double p = t[i * w + enter];
            if (!(p > tol))
                continue;
            const double r = t[i * w + n + m] / p;
            bool better = r < ratio - 1e-12 * (1.0 + std::abs(ratio));
            if (!better && leave < m && r <= ratio + 1e-12 * (1.0 + std::abs(ratio))) {
                const double pl = t[leave * w + enter];
                for (std::size_t k = 0; k < m; ++k) {
                    const double a = t[i * w + n + k] / p, b2 = t[leave * w + n + k] / pl;
                    if (std::abs(a - b2) > 1e-12 * (1.0 + std::abs(b2))) {
                        better = a < b2;
                        break;
                    }
                }
            }
            if (leave == m || better) {
                ratio = r;
                leave = i;
            }
        }
        if (leave == m)
            break;  // unbounded direction cannot occur for a phase-1 problem; treat as optimal

        const double piv = t[leave * w + enter];
        for (std::size_t j = 0; j < w; ++j)
            t[leave * w + j] /= piv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == leave)
                continue;
            const double f = t[i * w + enter];
            if (f != 0.0)
                for (std::size_t j = 0; j < w; ++j)
                    t[i * w + j] -= f * t[leave * w + j];
        }
        const double f = cost[enter];
        for (std::size_t j = 0; j < w; ++j)
            cost[j] -= f * t[leave * w + j];
        basis[leave] = enter;

        if (++out.pivots > cap)
            throw NumericalFailure("phase1_feasible: pivot cap reached on " + std::to_string(m) + "x" +
                                   std::to_string(n) + " system");
    }
    out.phase1_objective = -cost[n + m];
    out.feasible = out.phase1_objective <= tol;
    return out;
}

bool margin_feasible(const Matrix& signed_points)
{
    const std::size_t p = signed_points.rows(), d = signed_points.cols();
    if (p == 0)
        return true;
    // [A^T; 1^T] lambda = [0; 1].
    Matrix sys(d + 1, p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < d; ++j)
            sys(j, i) = signed_points(i, j);
        sys(d, i) = 1.0;
    }
    std::vector<double> rhs(d + 1, 0.0);
    rhs[d] = 1.0;
    return !phase1_feasible(sys, rhs).feasible;
}

}  // namespace mmcr
