#pragma once

#include "mmcr/matrix.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mmcr {

/// Seeded random stream (xoshiro256** seeded through splitmix64).
///
/// All transforms (uniform, normal, integer ranges) are implemented here
/// rather than through <random> distributions, whose output is
/// implementation-defined; a given seed yields the same sequence on every
/// platform. A stream is single-owner: parallel code derives one stream per
/// work item with `derive(index)`.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t draws() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Marsaglia polar method).
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;
    /// +1 or -1 with equal probability.
    int sign() noexcept { return (next_u64() >> 63) ? 1 : -1; }

    /// Independent child stream keyed by `index`; does not advance this stream.
    RngStream derive(std::uint64_t index) const noexcept;

    template <class T>
    void shuffle(std::vector<T>& v) noexcept
    {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }
    /// `k` distinct indices from [0, n) in random order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;
/// Stable 64-bit mix of a seed and a text tag, for per-component streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;

/// i.i.d. N(0, 1) entries, row-major fill order.
Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols);
/// Haar-distributed orthogonal n x n matrix (QR of a Gaussian with sign fix).
Matrix random_orthogonal(RngStream& rng, std::size_t n);
/// Orthonormal n x k frame (first k columns of a Haar orthogonal matrix).
Matrix random_orthonormal_columns(RngStream& rng, std::size_t n, std::size_t k);

}  // namespace mmcr
