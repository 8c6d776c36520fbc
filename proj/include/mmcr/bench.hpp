#pragma once

#include "mmcr/linalg.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace mmcr {

struct ScalingGrid {
    std::vector<std::size_t> b_grid{16, 32, 64, 128};
    std::vector<std::size_t> d_grid{16, 32, 64, 128};
    std::vector<std::size_t> k_grid{2, 4, 8, 16};
    // Held fixed along the other sweeps. The B sweep runs at d = fixed_d and
    // the d sweep at B = fixed_b, so both should exceed the swept values.
    std::size_t fixed_b = 256;
    std::size_t fixed_d = 256;
    std::size_t fixed_k = 4;
    std::size_t repeats = 5;
    double lambda = 0.0;

    bool operator==(const ScalingGrid&) const = default;
};

struct TimingRow {
    std::string axis;  // "B", "d" or "K"
    std::size_t b = 0, d = 0, k = 0;
    double median_seconds = 0.0;
};

struct ScalingReport {
    ScalingGrid grid;
    std::vector<TimingRow> rows;
    double b_exponent = 0.0;  // least-squares slope of log time on log B
    double d_exponent = 0.0;
    double k_ratio = 0.0;     // max / min median over the K sweep
};

/// Wall-time medians of mmcr_loss on fixed normalized random batches (the
/// encoder forward is not timed). Throws ContractViolation on an empty grid
/// or zero repeats.
ScalingReport bench_loss_scaling(const ScalingGrid& grid, Exec exec = Exec::serial);

/// Least-squares slope of log(y) on log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void write_scaling_csv(std::ostream& os, const ScalingReport& r);
std::string scaling_report_json(const ScalingReport& r, int indent = 2);

}  // namespace mmcr
