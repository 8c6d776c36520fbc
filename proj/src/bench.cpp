#include "mmcr/bench.hpp"

#include "mmcr/error.hpp"
#include "mmcr/objective.hpp"
#include "mmcr/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace mmcr {

namespace {

double median_loss_seconds(std::size_t b, std::size_t d, std::size_t k, const ScalingGrid& grid, Exec exec,
                           RngStream& rng)
{
    const auto batch = sphere_normalize(ManifoldBatch::from_rows(gaussian_matrix(rng, b * k, d), b, k));
    std::vector<double> t;
    volatile double sink = 0.0;
    for (std::size_t r = 0; r < grid.repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        sink = sink + mmcr_loss(batch, grid.lambda, exec).total;
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    return t[t.size() / 2];
}

}  // namespace

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw ContractViolation("fit_loglog_slope: need two or more paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0 || y[i] <= 0.0)
            throw ContractViolation("fit_loglog_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0)
        throw ContractViolation("fit_loglog_slope: x values are all equal");
    return sxy / sxx;
}

ScalingReport bench_loss_scaling(const ScalingGrid& grid, Exec exec)
{
    if (grid.b_grid.empty() || grid.d_grid.empty() || grid.k_grid.empty())
        throw ContractViolation("bench_loss_scaling: grids must be non-empty");
    if (grid.repeats == 0)
        throw ContractViolation("bench_loss_scaling: repeats must be positive");
    ScalingReport out;
    out.grid = grid;
    RngStream rng(derive_seed(0, "bench"));

    std::vector<double> xs, ts;
    for (std::size_t b : grid.b_grid) {
        const double t = median_loss_seconds(b, grid.fixed_d, grid.fixed_k, grid, exec, rng);
        out.rows.push_back({"B", b, grid.fixed_d, grid.fixed_k, t});
        xs.push_back(static_cast<double>(b));
        ts.push_back(t);
    }
    if (xs.size() >= 2)
        out.b_exponent = fit_loglog_slope(xs, ts);

    xs.clear();
    ts.clear();
    for (std::size_t d : grid.d_grid) {
        const double t = median_loss_seconds(grid.fixed_b, d, grid.fixed_k, grid, exec, rng);
        out.rows.push_back({"d", grid.fixed_b, d, grid.fixed_k, t});
        xs.push_back(static_cast<double>(d));
        ts.push_back(t);
    }
    if (xs.size() >= 2)
        out.d_exponent = fit_loglog_slope(xs, ts);

    double lo = 0.0, hi = 0.0;
    for (std::size_t k : grid.k_grid) {
        const double t = median_loss_seconds(grid.fixed_b, grid.fixed_d, k, grid, exec, rng);
        out.rows.push_back({"K", grid.fixed_b, grid.fixed_d, k, t});
        lo = lo == 0.0 ? t : std::min(lo, t);
        hi = std::max(hi, t);
    }
    out.k_ratio = hi / lo;
    return out;
}

void write_scaling_csv(std::ostream& os, const ScalingReport& r)
{
    os << "axis,B,d,K,median_seconds\n";
    for (const auto& row : r.rows)
        os << row.axis << ',' << row.b << ',' << row.d << ',' << row.k << ',' << row.median_seconds << '\n';
}

std::string scaling_report_json(const ScalingReport& r, int indent)
{
    nlohmann::ordered_json j;
    j["b_exponent"] = r.b_exponent;
    j["d_exponent"] = r.d_exponent;
    j["k_ratio"] = r.k_ratio;
    j["fixed_b"] = r.grid.fixed_b;
    j["fixed_d"] = r.grid.fixed_d;
    j["fixed_k"] = r.grid.fixed_k;
    j["repeats"] = r.grid.repeats;
    j["lambda"] = r.grid.lambda;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows)
        j["rows"].push_back({{"axis", row.axis}, {"B", row.b}, {"d", row.d}, {"K", row.k},
                             {"median_seconds", row.median_seconds}});
    return j.dump(indent);
}

}  // namespace mmcr
