#include "doctest.h"
#include "oracles.hpp"

#include "mmcr/error.hpp"
#include "mmcr/objective.hpp"
#include "mmcr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace mmcr;

namespace {

ManifoldBatch random_batch(RngStream& rng, std::size_t b, std::size_t k, std::size_t d)
{
    const Matrix g = gaussian_matrix(rng, b * k, d);
    return ManifoldBatch::from_rows(g, b, k);
}

// Stacks every manifold into one block matrix and evaluates both terms through
// the Gram-matrix oracle; shares no code with mmcr_loss beyond the container.
double reference_loss(const ManifoldBatch& z, double lambda)
{
    Matrix c(z.d(), z.b());
    double comp = 0.0;
    for (std::size_t b = 0; b < z.b(); ++b) {
        Matrix zb(z.d(), z.k());
        for (std::size_t k = 0; k < z.k(); ++k)
            for (std::size_t j = 0; j < z.d(); ++j) {
                zb(j, k) = z.view(b, k)[j];
                c(j, b) += z.view(b, k)[j] / static_cast<double>(z.k());
            }
        comp += oracle::nuclear_norm_via_gram(zb);
    }
    return -oracle::nuclear_norm_via_gram(c) + lambda * comp / static_cast<double>(z.b());
}

double max_rel_grad_error(const ManifoldBatch& raw, double lambda)
{
    const ManifoldBatch g = mmcr_loss_grad(raw, lambda);
    const auto f = [&](const std::vector<double>& x) {
        return mmcr_loss(sphere_normalize(ManifoldBatch(raw.b(), raw.k(), raw.d(), x)), lambda).total;
    };
    const auto fd = oracle::central_difference(f, {raw.values().begin(), raw.values().end()});
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        scale = std::max(scale, std::abs(fd[i]));
        err = std::max(err, std::abs(fd[i] - g.values()[i]));
    }
    return err / scale;
}

}  // namespace

TEST_CASE("sphere_normalize")
{
    const ManifoldBatch raw(1, 1, 2, {3.0, 4.0});
    const auto z = sphere_normalize(raw);
    CHECK(z.view(0, 0)[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(z.view(0, 0)[1] == doctest::Approx(0.8).epsilon(1e-15));

    RngStream rng(11);
    const auto once = sphere_normalize(random_batch(rng, 5, 3, 7));
    for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(std::abs(norm2(once.view(b, k)) - 1.0) <= 1e-12);
    const auto twice = sphere_normalize(once);
    for (std::size_t i = 0; i < once.values().size(); ++i)
        CHECK(std::abs(once.values()[i] - twice.values()[i]) <= 1e-15);
}

TEST_CASE("sphere_normalize names the degenerate view")
{
    ManifoldBatch raw(2, 3, 4);
    for (double& v : raw.values())
        v = 1.0;
    for (double& v : raw.view(1, 2))
        v = 0.0;
    try {
        sphere_normalize(raw);
        FAIL("expected DegenerateInput");
    } catch (const DegenerateInput& e) {
        CHECK(std::string(e.what()).find("(1, 2)") != std::string::npos);
    }
}

TEST_CASE("batch construction contract")
{
    CHECK_THROWS_AS(ManifoldBatch(0, 1, 2), ContractViolation);
    CHECK_THROWS_AS(ManifoldBatch(1, 1, 1), ContractViolation);
    CHECK_THROWS_AS(ManifoldBatch(1, 1, 2, {1.0}), ContractViolation);
}

TEST_CASE("centroids")
{
    ManifoldBatch z(1, 4, 3);
    for (std::size_t k = 0; k < 4; ++k)
        z.view(0, k)[1] = 1.0;
    auto c = centroids(z);
    CHECK(c(1, 0) == 1.0);
    CHECK(norm2(c.col(0)) == 1.0);

    ManifoldBatch anti(1, 2, 3, {1, 0, 0, -1, 0, 0});
    c = centroids(anti);
    CHECK(norm2(c.col(0)) == 0.0);
}

TEST_CASE("centroid norm identity over 1000 normalized batches")
{
    RngStream rng(3);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t nk = 1 + rng.below(8);
        const auto z = sphere_normalize(random_batch(rng, 3, nk, 2 + rng.below(10)));
        const Matrix c = centroids(z);
        for (std::size_t b = 0; b < z.b(); ++b) {
            double pair = 0.0;
            for (std::size_t k = 0; k < nk; ++k)
                for (std::size_t l = 0; l < k; ++l)
                    pair += dot(z.view(b, k), z.view(b, l));
            const double kk = static_cast<double>(nk);
            const double want = 1.0 / kk + 2.0 / (kk * kk) * pair;
            const double cn = norm2(c.col(b));
            CHECK(std::abs(cn * cn - want) <= 1e-12);
            CHECK(cn <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("mmcr_loss examples")
{
    // Orthonormal centroids, K = 1: centroid term is -B.
    ManifoldBatch z(4, 1, 4);
    for (std::size_t b = 0; b < 4; ++b)
        z.view(b, 0)[b] = 1.0;
    auto l = mmcr_loss(z, 0.0);
    CHECK(l.centroid_term == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(l.total == l.centroid_term);

    // One manifold, two views at inner product rho.
    const double rho = 0.3;
    ManifoldBatch pair(1, 2, 3, {1, 0, 0, rho, std::sqrt(1 - rho * rho), 0});
    l = mmcr_loss(pair, 1.0);
    CHECK(l.compression_term == doctest::Approx(std::sqrt(1 + rho) + std::sqrt(1 - rho)).epsilon(1e-12));
    CHECK(std::abs(l.total - (l.centroid_term + l.compression_term)) <= 1e-12);

    RngStream rng(8);
    const auto zr = sphere_normalize(random_batch(rng, 7, 5, 9));
    l = mmcr_loss(zr, 0.01);
    CHECK(std::abs(l.total - reference_loss(zr, 0.01)) <= 1e-9);
    CHECK(std::abs(l.total - (l.centroid_term + 0.01 * l.compression_term)) <= 1e-12);
}

TEST_CASE("mmcr_loss rejects unnormalized batches and negative lambda")
{
    ManifoldBatch z(1, 1, 2, {2.0, 0.0});
    CHECK_THROWS_AS(mmcr_loss(z, 0.0), ContractViolation);
    CHECK_THROWS_AS(mmcr_loss(sphere_normalize(z), -1.0), ContractViolation);
}

TEST_CASE("two-manifold, two-view centroid matrix matches the closed form")
{
    RngStream rng(21);
    for (int t = 0; t < 1000; ++t) {
        const auto z = sphere_normalize(random_batch(rng, 2, 2, 2 + rng.below(6)));
        const Matrix c = centroids(z);
        const auto [sp, sm] = two_column_singular_values(c.col(0), c.col(1));
        CHECK(std::abs(-mmcr_loss(z, 0.0).centroid_term - (sp + sm)) <= 1e-10);
    }
}

TEST_CASE("loss is invariant under rotation and permutations")
{
    RngStream rng(4);
    const auto z = sphere_normalize(random_batch(rng, 5, 4, 6));
    const auto base = mmcr_loss_full(z, 0.1);

    const Matrix q = random_orthogonal(rng, 6);
    const Matrix rotated_rows = matmul_nt(z.as_rows(), q);
    const auto rotated = mmcr_loss_full(ManifoldBatch::from_rows(rotated_rows, 5, 4), 0.1);
    CHECK(std::abs(rotated.total - base.total) <= 1e-9);
    CHECK(std::abs(rotated.compression_term - base.compression_term) <= 1e-9);

    ManifoldBatch perm(5, 4, 6);
    for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t k = 0; k < 4; ++k)
            std::ranges::copy(z.view((b + 2) % 5, 3 - k), perm.view(b, k).begin());
    const auto permuted = mmcr_loss_full(perm, 0.1);
    CHECK(std::abs(permuted.total - base.total) <= 1e-12);
}

TEST_CASE("gradient is tangent to the sphere")
{
    // Single manifold with K identical raw vectors.
    ManifoldBatch same(1, 3, 4);
    for (std::size_t k = 0; k < 3; ++k) {
        auto v = same.view(0, k);
        v[0] = 1.0, v[1] = 2.0, v[2] = -1.0, v[3] = 0.5;
    }
    auto g = mmcr_loss_grad(same, 0.0);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(std::abs(dot(g.view(0, k), same.view(0, k))) <= 1e-12);

    RngStream rng(6);
    const auto raw = random_batch(rng, 6, 4, 16);
    for (double lambda : {0.0, 0.05}) {
        g = mmcr_loss_grad(raw, lambda);
        const auto z = sphere_normalize(raw);
        for (std::size_t b = 0; b < 6; ++b)
            for (std::size_t k = 0; k < 4; ++k)
                CHECK(std::abs(dot(g.view(b, k), z.view(b, k))) <= 1e-9);
    }
}

TEST_CASE("gradient matches central differences")
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        RngStream rng(seed);
        const auto raw = random_batch(rng, 6, 4, 16);
        CHECK(max_rel_grad_error(raw, 0.0) <= 1e-5);
        CHECK(max_rel_grad_error(raw, 0.05) <= 1e-5);
    }
}

TEST_CASE("loss_and_grad reports the same loss as mmcr_loss")
{
    RngStream rng(9);
    const auto raw = random_batch(rng, 4, 3, 5);
    const auto lg = mmcr_loss_and_grad(raw, 0.2);
    const auto l = mmcr_loss(sphere_normalize(raw), 0.2);
    CHECK(std::abs(lg.loss.total - l.total) <= 1e-12);
}

TEST_CASE("parallel and serial loss agree bitwise")
{
    RngStream rng(10);
    const auto raw = random_batch(rng, 16, 8, 12);
    const auto a = mmcr_loss_and_grad(raw, 0.05, Exec::serial);
    const auto b = mmcr_loss_and_grad(raw, 0.05, Exec::parallel);
    CHECK(a.loss.total == b.loss.total);
    CHECK(a.grad == b.grad);
}

TEST_CASE("centroid orthogonality never decreases the objective for K = 1 pairs")
{
    // With K = 1 the loss is -(sigma+ + sigma-) = -(sqrt(1+|r|) + sqrt(1-|r|)).
    double prev = -1e300;
    for (int i = 0; i <= 100; ++i) {
        const double r = 1.0 - i / 100.0;
        ManifoldBatch z(2, 1, 2, {1.0, 0.0, r, std::sqrt(1 - r * r)});
        const double neg_loss = -mmcr_loss(z, 0.0).total;
        CHECK(neg_loss >= prev - 1e-12);
        prev = neg_loss;
    }
}

TEST_CASE("monitored statistics")
{
    ManifoldBatch z(2, 2, 2, {1, 0, 1, 0, 0, 1, 0, 1});
    CHECK(mean_centroid_norm(z) == 1.0);
    CHECK(mean_centroid_similarity(z) == 0.0);
    CHECK(mean_within_manifold_similarity(z) == 1.0);
}

TEST_CASE("batch binary round trip")
{
    RngStream rng(12);
    const auto z = random_batch(rng, 3, 2, 4);
    std::stringstream ss;
    write_batch(ss, z);
    CHECK(ss.str().size() == 24 + 8 * 24);
    CHECK(read_batch(ss) == z);
    std::stringstream truncated(ss.str().substr(0, 30));
    CHECK_THROWS_AS(read_batch(truncated), IoError);
}
