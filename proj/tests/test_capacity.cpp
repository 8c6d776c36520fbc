#include "doctest.h"
#include "oracles.hpp"

#include "mmcr/capacity.hpp"
#include "mmcr/error.hpp"
#include "mmcr/lp.hpp"

#include "json.hpp"

#include <cmath>
#include <limits>

using namespace mmcr;

namespace {

PointManifold from_rows(std::initializer_list<std::initializer_list<double>> rows)
{
    PointManifold m;
    m.points = Matrix(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (const auto& r : rows) {
        std::size_t j = 0;
        for (double x : r)
            m.points(i, j++) = x;
        ++i;
    }
    return m;
}

// Solves the small dense system g z = r by Gaussian elimination with partial
// pivoting; returns false when singular.
bool solve_dense(std::vector<std::vector<double>> g, std::vector<double> r, std::vector<double>& z)
{
    const std::size_t n = r.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t i = c + 1; i < n; ++i)
            if (std::abs(g[i][c]) > std::abs(g[p][c]))
                p = i;
        if (std::abs(g[p][c]) < 1e-12)
            return false;
        std::swap(g[p], g[c]);
        std::swap(r[p], r[c]);
        for (std::size_t i = c + 1; i < n; ++i) {
            const double f = g[i][c] / g[c][c];
            for (std::size_t k = c; k < n; ++k)
                g[i][k] -= f * g[c][k];
            r[i] -= f * r[c];
        }
    }
    z.assign(n, 0.0);
    for (std::size_t c = n; c-- > 0;) {
        double s = r[c];
        for (std::size_t k = c + 1; k < n; ++k)
            s -= g[c][k] * z[k];
        z[c] = s / g[c][c];
    }
    return true;
}

// Enumerates every subset of points as the active face, solves the face
// system, and keeps the best primal-feasible candidate with positive weights.
double enumeration_oracle(std::span<const double> t, const PointManifold& m)
{
    const std::size_t np = m.m(), n = m.dim();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 0; mask < (std::size_t{1} << np); ++mask) {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < np; ++j)
            if (mask >> j & 1)
                idx.push_back(j);
        std::vector<double> v(t.begin(), t.end());
        if (!idx.empty()) {
            std::vector<std::vector<double>> g(idx.size(), std::vector<double>(idx.size()));
            std::vector<double> r(idx.size()), z;
            for (std::size_t a = 0; a < idx.size(); ++a) {
                r[a] = -dot(m.points.row(idx[a]), t);
                for (std::size_t b = 0; b < idx.size(); ++b)
                    g[a][b] = dot(m.points.row(idx[a]), m.points.row(idx[b]));
            }
            if (!solve_dense(g, r, z))
                continue;
            bool ok = true;
            for (double x : z)
                ok = ok && x > 0.0;
            if (!ok)
                continue;
            for (std::size_t a = 0; a < idx.size(); ++a)
                for (std::size_t i = 0; i < n; ++i)
                    v[i] += z[a] * m.points(idx[a], i);
        }
        bool feasible = true;
        for (std::size_t j = 0; j < np; ++j)
            feasible = feasible && dot(m.points.row(j), v) >= -1e-10;
        if (!feasible)
            continue;
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            f += (v[i] - t[i]) * (v[i] - t[i]);
        best = std::min(best, f);
    }
    return best;
}

std::vector<double> normal_vector(RngStream& rng, std::size_t n)
{
    std::vector<double> v(n);
    for (double& x : v)
        x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("elliptical measures: points on one axis have dimension 1")
{
    PointManifold m;
    m.points = Matrix(50, 4);
    RngStream rng(1);
    for (std::size_t i = 0; i < 50; ++i)
        m.points(i, 0) = rng.normal();
    const auto g = elliptical_measures(m);
    CHECK(g.dimension == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.effective_size == doctest::Approx(g.radius));
}

TEST_CASE("elliptical measures: covariance spectrum (4, 1)")
{
    // Four points (+-2, 0), (0, +-1) have population covariance diag(2, 0.5);
    // scaling by sqrt(2) gives diag(4, 1).
    const double s = std::sqrt(2.0);
    const auto m = from_rows({{2 * s, 0}, {-2 * s, 0}, {0, s}, {0, -s}});
    const auto g = elliptical_measures(m);
    CHECK(g.radius == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
    CHECK(g.dimension == doctest::Approx(9.0 / 5.0).epsilon(1e-12));
}

TEST_CASE("elliptical measures: isotropic cloud in R^8 and scale behaviour")
{
    RngStream rng(2);
    PointManifold m;
    m.points = gaussian_matrix(rng, 10000, 8);
    const auto g = elliptical_measures(m);
    CHECK(std::abs(g.dimension - 8.0) / 8.0 < 0.05);

    PointManifold scaled = m;
    scaled.points *= 3.5;
    const auto h = elliptical_measures(scaled);
    CHECK(h.dimension == doctest::Approx(g.dimension).epsilon(1e-10));
    CHECK(h.radius == doctest::Approx(3.5 * g.radius).epsilon(1e-10));
}

TEST_CASE("elliptical measures: errors")
{
    CHECK_THROWS_AS(elliptical_measures(from_rows({{1, 2}, {1, 2}, {1, 2}})), DegenerateInput);
    CHECK_THROWS_AS(elliptical_measures(from_rows({{1, 2}})), ContractViolation);
}

TEST_CASE("support function examples")
{
    const auto pm = from_rows({{1, 0}, {-1, 0}});
    const std::vector<double> e1{1, 0}, e2{0, 1};
    const auto a = support_function(e1, pm);
    CHECK(a.value == -1.0);
    CHECK(a.index == 1);
    CHECK(support_function(e2, pm).value == 0.0);

    RngStream rng(3);
    PointManifold m;
    m.points = gaussian_matrix(rng, 40, 6);
    const auto v = normal_vector(rng, 6);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < 40; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 6; ++i)
            s += v[i] * m.points(j, i);
        if (s < best) {
            best = s;
            arg = j;
        }
    }
    const auto got = support_function(v, m);
    CHECK(got.value == best);
    CHECK(got.index == arg);
    CHECK_THROWS_AS(support_function(e1, from_rows({{1, 0, 0}})), ContractViolation);
}

TEST_CASE("anchor QP: feasible field is left alone")
{
    const auto m = from_rows({{1, 0.2}, {1, -0.2}});
    const std::vector<double> t{0.5, 0.1};
    const auto s = solve_anchor_qp(t, m);
    CHECK_FALSE(s.active);
    CHECK(s.f_value == 0.0);
    CHECK(s.v == s.t);
    CHECK(s.anchor.empty());
}

TEST_CASE("anchor QP: single point is a halfspace projection")
{
    const auto m = from_rows({{1, 2, -1}});
    const std::vector<double> t{-1.0, 0.5, 2.0};
    const double ts = -1.0 + 1.0 - 2.0, ss = 6.0;
    const auto s = solve_anchor_qp(t, m);
    REQUIRE(s.active);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s.v[i] == doctest::Approx(t[i] - ts / ss * m.points(0, i)).epsilon(1e-12));
        CHECK(s.anchor[i] == doctest::Approx(m.points(0, i)).epsilon(1e-12));
    }
    CHECK(s.f_value == doctest::Approx(ts * ts / ss).epsilon(1e-12));
}

TEST_CASE("anchor QP matches subset enumeration on 5-point manifolds in R^4")
{
    RngStream rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        PointManifold m;
        m.points = gaussian_matrix(rng, 5, 4);
        for (std::size_t j = 0; j < 5; ++j)
            m.points(j, 0) += 1.5;
        const auto t = normal_vector(rng, 4);
        const auto s = solve_anchor_qp(t, m);
        CHECK(std::abs(s.f_value - enumeration_oracle(t, m)) <= 1e-4);
        CHECK(s.kkt.max() < 1e-9);
    }
}

TEST_CASE("anchor QP: KKT residuals and anchor properties on Gaussian clouds")
{
    RngStream rng(5);
    for (double kappa : {0.0, 0.3}) {
        const auto raw = gaussian_manifold(rng, 12, {0.3, 0.2, 0.1, 0.05, 0.02}, 200);
        const auto frame = manifold_frame(raw);
        for (int i = 0; i < 300; ++i) {
            const auto t = normal_vector(rng, frame.rank + 1);
            const auto s = solve_anchor_qp(t, frame.framed, kappa);
            CHECK(s.kkt.max() < 1e-6);
            if (!s.active)
                continue;
            // v - t is parallel to the anchor and the constraint binds.
            const double lam = s.lambda;
            for (std::size_t k = 0; k < t.size(); ++k)
                CHECK(std::abs(s.v[k] - s.t[k] - lam * s.anchor[k]) < 1e-6);
            CHECK(std::abs(support_function(s.v, frame.framed).value - kappa) < 1e-6);
            CHECK(std::abs(dot(s.v, s.anchor) - kappa) < 1e-6);
        }
    }
}

TEST_CASE("anchor QP: contract errors")
{
    const auto m = from_rows({{1, 0}});
    const std::vector<double> bad{std::nan(""), 0.0};
    CHECK_THROWS_AS(solve_anchor_qp(bad, m), ContractViolation);
    const std::vector<double> short_t{1.0};
    CHECK_THROWS_AS(solve_anchor_qp(short_t, m), ContractViolation);
    const std::vector<double> t{-1.0, 0.0};
    CHECK_THROWS_AS(solve_anchor_qp(t, from_rows({{0, 0}}), 0.5), DegenerateInput);
}

TEST_CASE("manifold frame puts the centroid on axis 0")
{
    RngStream rng(6);
    const auto m = gaussian_manifold(rng, 20, {0.5, 0.25, 0.1}, 60, 2.0);
    const auto f = manifold_frame(m);
    CHECK(f.rank == 3);
    CHECK(f.centroid_norm == doctest::Approx(2.0).epsilon(0.1));
    std::vector<double> c(4, 0.0);
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t k = 0; k < 4; ++k)
            c[k] += f.framed.points(i, k) / 60.0;
    CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 1; k < 4; ++k)
        CHECK(std::abs(c[k]) < 1e-12);
    // Pairwise distances are preserved up to the 1/||c|| scale.
    for (std::size_t i = 0; i < 5; ++i) {
        double dr = 0.0, df = 0.0;
        for (std::size_t j = 0; j < 20; ++j)
            dr += std::pow(m.points(i, j) - m.points(i + 1, j), 2);
        for (std::size_t k = 0; k < 4; ++k)
            df += std::pow(f.framed.points(i, k) - f.framed.points(i + 1, k), 2);
        CHECK(std::sqrt(df) * f.centroid_norm == doctest::Approx(std::sqrt(dr)).epsilon(1e-10));
    }

    PointManifold centered = m;
    for (std::size_t j = 0; j < 20; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 60; ++i)
            mean += m.points(i, j) / 60.0;
        for (std::size_t i = 0; i < 60; ++i)
            centered.points(i, j) -= mean;
    }
    CHECK_THROWS_AS(manifold_frame(centered), DegenerateInput);
}

TEST_CASE("mean-field capacity of point manifolds is 2")
{
    RngStream rng(7);
    const auto ms = point_manifolds(rng, 40, 20);
    const auto r = mftma_capacity(ms, 500, 0.0, 11);
    CHECK(std::abs(r.alpha - 2.0) / 2.0 < 0.1);
    CHECK(r.alpha == doctest::Approx(1.0 / r.alpha_inverse));
    CHECK(r.n_samples == 500);
    CHECK(r.per_manifold.size() == 40);
}

TEST_CASE("mean-field capacity decreases with manifold scale")
{
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {0.1, 1.0, 10.0}) {
        RngStream rng(8);
        std::vector<PointManifold> ms;
        for (int p = 0; p < 10; ++p)
            ms.push_back(sphere_manifold(rng, 30, 3, 40, scale));
        const auto r = mftma_capacity(ms, 300, 0.0, 1);
        CHECK(r.alpha <= prev);
        prev = r.alpha;
    }
}

TEST_CASE("mean-field capacity: Monte-Carlo statistics")
{
    RngStream rng(9);
    std::vector<PointManifold> ms;
    for (int p = 0; p < 6; ++p)
        ms.push_back(sphere_manifold(rng, 20, 2, 30, 0.8));
    const auto a = mftma_capacity(ms, 1000, 0.0, 5);
    const auto b = mftma_capacity(ms, 2000, 0.0, 6);
    const double ratio = a.alpha_inverse_std_error / b.alpha_inverse_std_error;
    CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
    CHECK(std::abs(a.alpha - b.alpha) < 2.0 * std::hypot(a.std_error, b.std_error));
}

TEST_CASE("mean-field capacity is identical serial and parallel")
{
    RngStream rng(10);
    std::vector<PointManifold> ms;
    for (int p = 0; p < 4; ++p)
        ms.push_back(gaussian_manifold(rng, 16, {0.2, 0.1, 0.05}, 50));
    const auto s = mftma_capacity(ms, 200, 0.0, 3, Exec::serial);
    const auto q = mftma_capacity(ms, 200, 0.0, 3, Exec::parallel);
    CHECK(s.alpha == q.alpha);
    CHECK(s.std_error == q.std_error);
    CHECK(capacity_report_json(s) == capacity_report_json(q));
}

TEST_CASE("mean-field capacity: contract errors")
{
    RngStream rng(11);
    const auto ms = point_manifolds(rng, 3, 5);
    CHECK_THROWS_AS(mftma_capacity({}, 500, 0.0, 1), ContractViolation);
    CHECK_THROWS_AS(mftma_capacity(ms, 50, 0.0, 1), ContractViolation);
}

TEST_CASE("anchor statistics follow the elliptical closed forms")
{
    const std::vector<std::vector<double>> spectra{{2, 1}, {4, 2, 1}, {3, 2, 1, 0.5}};
    for (const auto& spec : spectra) {
        double total = 0.0;
        for (double x : spec)
            total += x;
        std::vector<double> var;
        for (double x : spec)
            var.push_back(x / total);
        RngStream rng(12);
        const auto m = gaussian_manifold(rng, 32, var, 200);
        const auto r = mftma_capacity({m}, 500, 0.0, 4);
        const auto& d = r.details[0];
        CAPTURE(spec.size());
        CHECK(std::abs(d.mean_field.radius - d.anchor_spectral.radius) / d.anchor_spectral.radius < 0.15);
        CHECK(std::abs(d.mean_field.dimension - d.anchor_spectral.dimension) / d.anchor_spectral.dimension < 0.15);
    }
}

TEST_CASE("margin LP examples")
{
    RngStream rng(13);
    // Two points in general position in R^2 with any labels.
    for (int i = 0; i < 20; ++i) {
        Matrix a = gaussian_matrix(rng, 2, 2);
        if (rng.sign() < 0)
            for (std::size_t j = 0; j < 2; ++j)
                a(0, j) = -a(0, j);
        CHECK(margin_feasible(a));
    }
    // A point and its negation with the same label cannot be separated.
    Matrix bad(2, 3);
    bad(0, 0) = 1;
    bad(1, 0) = -1;
    CHECK_FALSE(margin_feasible(bad));
}

TEST_CASE("brute-force separability: Cover regime")
{
    RngStream rng(14);
    const auto two = point_manifolds(rng, 2, 2);
    CHECK(separability_fraction(two, 2, 50, rng) == 1.0);
    const auto many = point_manifolds(rng, 40, 10);
    CHECK(separability_fraction(many, 10, 100, rng) < 0.5);
    CHECK_THROWS_AS(separability_fraction(many, 10, 0, rng), ContractViolation);
}

TEST_CASE("brute-force capacity: points near 2, decreasing in radius")
{
    RngStream rng(15);
    const auto pts = point_manifolds(rng, 30, 10);
    RngStream bf(16);
    const auto r = bruteforce_capacity(pts, 200, bf);
    CHECK(std::abs(r.capacity - 2.0) / 2.0 < 0.15);

    double prev = std::numeric_limits<double>::infinity();
    for (double radius : {0.25, 0.75, 1.5}) {
        RngStream g(17);
        std::vector<PointManifold> ms;
        for (int p = 0; p < 12; ++p)
            ms.push_back(sphere_manifold(g, 20, 2, 12, radius));
        RngStream b(18);
        const auto res = bruteforce_capacity(ms, 100, b);
        CHECK(res.capacity < prev);
        prev = res.capacity;
        CHECK(!res.probes.empty());
    }
}

TEST_CASE("mean-field and brute-force capacity agree on small spheres")
{
    RngStream rng(19);
    std::vector<PointManifold> ms;
    for (int p = 0; p < 16; ++p)
        ms.push_back(sphere_manifold(rng, 30, 2, 12, 0.5));
    const auto mf = mftma_capacity(ms, 500, 0.0, 20);
    RngStream b(21);
    const auto bf = bruteforce_capacity(ms, 100, b);
    CHECK(std::abs(mf.alpha - bf.capacity) / bf.capacity < 0.15);
}

TEST_CASE("layerwise capacity: smoke and projection invariance")
{
    RngStream rng(22);
    std::vector<PointManifold> wide, narrow;
    for (int p = 0; p < 6; ++p) {
        wide.push_back(sphere_manifold(rng, 80, 3, 40, 0.6));
        narrow.push_back(sphere_manifold(rng, 12, 3, 40, 0.6));
    }
    const std::vector<LayerSnapshot> layers{{"input", narrow}, {"output", wide}};
    const auto a = layerwise_capacity(layers, 400, 0.0, 1, 40, 100);
    REQUIRE(a.size() == 2);
    CHECK(a[0].name == "input");
    CHECK(a[0].analysis_dim == 12);
    CHECK(a[1].original_dim == 80);
    CHECK(a[1].analysis_dim == 40);
    for (const auto& l : a)
        CHECK(l.report.n_samples == 400);

    const auto b = layerwise_capacity(layers, 400, 0.0, 1, 40, 200);
    const double se = std::hypot(a[1].report.std_error, b[1].report.std_error);
    CHECK(std::abs(a[1].report.alpha - b[1].report.alpha) < 3.0 * se);
    CHECK(a[0].report.alpha == b[0].report.alpha);

    std::vector<LayerSnapshot> mixed{{"mixed", {narrow[0], wide[0]}}};
    CHECK_THROWS_AS(layerwise_capacity(mixed, 400, 0.0, 1, 40, 1), ContractViolation);
}

TEST_CASE("capacity report JSON records seed, samples and frame")
{
    RngStream rng(23);
    const auto r = mftma_capacity(point_manifolds(rng, 5, 6), 100, 0.0, 42);
    const auto j = nlohmann::json::parse(capacity_report_json(r));
    CHECK(j["seed"] == 42);
    CHECK(j["n_samples"] == 100);
    CHECK(j["alpha"].get<double>() == r.alpha);
    CHECK(j["per_manifold"].size() == 5);
    CHECK(j["frame"].get<std::string>().find("centroid") != std::string::npos);
}
