#include "mmcr/rng.hpp"

#include "mmcr/error.hpp"
#include "mmcr/linalg.hpp"

#include <cmath>
#include <numeric>

namespace mmcr {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept
{
    // FNV-1a over the tag, folded into the seed through splitmix.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::uint64_t state = seed ^ h;
    return splitmix64(state);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed)
{
    std::uint64_t state = seed;
    for (auto& w : s_)
        w = splitmix64(state);
}

std::uint64_t RngStream::next_u64() noexcept
{
    ++counter_;
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() noexcept
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept
{
    if (n <= 1)
        return 0;
    // Lemire-style rejection to remove modulo bias.
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

RngStream RngStream::derive(std::uint64_t index) const noexcept
{
    std::uint64_t state = seed_ ^ (0xD1B54A32D192ED03ull * (index + 1));
    return RngStream(splitmix64(state));
}

std::vector<std::size_t> RngStream::sample_indices(std::size_t n, std::size_t k)
{
    if (k > n)
        throw ContractViolation("sample_indices: k > n");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i)
        std::swap(idx[i], idx[i + below(n - i)]);
    idx.resize(k);
    return idx;
}

Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols)
{
    if (rows == 0 || cols == 0)
        throw ContractViolation("gaussian_matrix: rows and cols must be >= 1");
    Matrix m(rows, cols);
    for (double& v : m.data())
        v = rng.normal();
    return m;
}

Matrix random_orthogonal(RngStream& rng, std::size_t n) { return random_orthonormal_columns(rng, n, n); }

Matrix random_orthonormal_columns(RngStream& rng, std::size_t n, std::size_t k)
{
    if (k > n)
        throw ContractViolation("random_orthonormal_columns: k > n");
    // Modified Gram-Schmidt on Gaussian columns (twice for stability).
    Matrix g = gaussian_matrix(rng, n, k);
    for (std::size_t j = 0; j < k; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < j; ++i) {
                double p = 0.0;
                for (std::size_t r = 0; r < n; ++r)
                    p += g(r, i) * g(r, j);
                for (std::size_t r = 0; r < n; ++r)
                    g(r, j) -= p * g(r, i);
            }
        }
        double nrm = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            nrm += g(r, j) * g(r, j);
        nrm = std::sqrt(nrm);
        for (std::size_t r = 0; r < n; ++r)
            g(r, j) /= nrm;
    }
    return g;
}

}  // namespace mmcr
