#include "doctest.h"
#include "oracles.hpp"

#include "mmcr/error.hpp"
#include "mmcr/evaluation.hpp"
#include "mmcr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

using namespace mmcr;

namespace {

// Gaussian blobs around well-separated class means.
void blobs(RngStream& rng, std::size_t n_per, std::size_t classes, std::size_t d, double spread, Matrix& x,
           std::vector<int>& y)
{
    const Matrix means = gaussian_matrix(rng, classes, d);
    x = Matrix(n_per * classes, d);
    y.clear();
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t i = 0; i < n_per; ++i) {
            for (std::size_t j = 0; j < d; ++j)
                x(c * n_per + i, j) = 4.0 * means(c, j) + spread * rng.normal();
            y.push_back(static_cast<int>(c));
        }
}

// Exhaustive cosine kNN with a plain vote count.
double knn_oracle(const Matrix& tr, const std::vector<int>& ytr, const Matrix& te, const std::vector<int>& yte,
                  std::size_t k)
{
    std::size_t correct = 0;
    for (std::size_t i = 0; i < te.rows(); ++i) {
        std::vector<std::pair<double, std::size_t>> sims;
        for (std::size_t j = 0; j < tr.rows(); ++j) {
            double d = 0.0, a = 0.0, b = 0.0;
            for (std::size_t c = 0; c < tr.cols(); ++c) {
                d += te(i, c) * tr(j, c);
                a += te(i, c) * te(i, c);
                b += tr(j, c) * tr(j, c);
            }
            sims.emplace_back(-d / std::sqrt(a * b), j);
        }
        std::sort(sims.begin(), sims.end());
        std::map<int, int> votes;
        for (std::size_t r = 0; r < k; ++r)
            ++votes[ytr[sims[r].second]];
        int best = -1, best_votes = -1;
        for (const auto& [label, v] : votes)
            if (v > best_votes) {
                best = label;
                best_votes = v;
            }
        correct += best == yte[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(te.rows());
}

LinearProbe random_probe(RngStream& rng, std::size_t classes, std::size_t d)
{
    LinearProbe p;
    p.weights = gaussian_matrix(rng, classes, d);
    for (std::size_t c = 0; c < classes; ++c)
        p.bias.push_back(0.3 * rng.normal());
    return p;
}

double sample_ce(const MlpEncoder& enc, const LinearProbe& probe, const std::vector<double>& row, int label)
{
    Matrix x(1, row.size(), row);
    return cross_entropy(probe, enc.encode(x, Exec::serial), {label});
}

}  // namespace

TEST_CASE("probe separates blobs and rejects a single class")
{
    RngStream rng(1);
    Matrix x;
    std::vector<int> y;
    blobs(rng, 50, 2, 5, 0.5, x, y);
    const auto p = fit_probe(x, y);
    CHECK(p.accuracy(x, y) == 1.0);
    CHECK(p.n_classes() == 2);
    CHECK_THROWS_AS(fit_probe(x, std::vector<int>(y.size(), 1)), ContractViolation);
}

TEST_CASE("probe on shuffled labels is at chance")
{
    RngStream rng(2);
    Matrix x;
    std::vector<int> y;
    blobs(rng, 400, 4, 8, 1.0, x, y);
    rng.shuffle(y);
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    Matrix tr(1200, 8), te(400, 8);
    std::vector<int> ytr, yte;
    for (std::size_t i = 0; i < 1600; ++i) {
        Matrix& dst = i < 1200 ? tr : te;
        const std::size_t r = i < 1200 ? i : i - 1200;
        for (std::size_t j = 0; j < 8; ++j)
            dst(r, j) = x(idx[i], j);
        (i < 1200 ? ytr : yte).push_back(y[idx[i]]);
    }
    const double acc = fit_probe(tr, ytr).accuracy(te, yte);
    CHECK(std::abs(acc - 0.25) <= 3.0 * std::sqrt(0.25 * 0.75 / 400.0));
}

TEST_CASE("probe training loss does not increase at a small learning rate")
{
    RngStream rng(3);
    Matrix x;
    std::vector<int> y;
    blobs(rng, 40, 3, 6, 2.0, x, y);
    std::vector<double> trace;
    fit_probe(x, y, 100, 0.1, &trace);
    REQUIRE(trace.size() == 101);
    for (std::size_t i = 1; i < trace.size(); ++i)
        CHECK(trace[i] <= trace[i - 1] + 1e-6);
}

TEST_CASE("kNN examples and exhaustive oracle")
{
    Matrix tr(3, 2, {1, 0, 0, 1, -1, 0});
    const std::vector<int> ytr{0, 1, 2};
    Matrix te(1, 2, {0, 1});
    CHECK(knn_monitor(tr, ytr, te, {1}, 1) == 1.0);

    RngStream rng(4);
    Matrix x;
    std::vector<int> y;
    blobs(rng, 30, 2, 4, 0.3, x, y);
    CHECK(knn_monitor(x, y, x, y, 5) == 1.0);

    Matrix a, b;
    std::vector<int> ya, yb;
    blobs(rng, 60, 4, 6, 3.0, a, ya);
    blobs(rng, 20, 4, 6, 3.0, b, yb);
    for (std::size_t k : {1, 5, 20})
        CHECK(knn_monitor(a, ya, b, yb, k) == doctest::Approx(knn_oracle(a, ya, b, yb, k)));
}

TEST_CASE("kNN ties go to the smaller class")
{
    Matrix tr(2, 2, {1, 0, 0, 1});
    Matrix te(1, 2, {1, 1});
    CHECK(knn_monitor(tr, {3, 1}, te, {1}, 2) == 1.0);
    CHECK(knn_monitor(tr, {3, 1}, te, {3}, 2) == 0.0);
}

TEST_CASE("probe and kNN accuracy are invariant to a global rotation")
{
    RngStream rng(5);
    Matrix a, b;
    std::vector<int> ya, yb;
    blobs(rng, 50, 4, 6, 3.0, a, ya);
    blobs(rng, 25, 4, 6, 3.0, b, yb);
    const Matrix q = random_orthogonal(rng, 6);
    const Matrix ar = matmul(a, q), br = matmul(b, q);
    CHECK(fit_probe(a, ya).accuracy(b, yb) == fit_probe(ar, ya).accuracy(br, yb));
    CHECK(knn_monitor(a, ya, b, yb, 10) == knn_monitor(ar, ya, br, yb, 10));
}

TEST_CASE("input gradient matches finite differences")
{
    RngStream rng(6);
    const MlpEncoder enc({5, 7, 3}, rng);
    const LinearProbe probe = random_probe(rng, 3, 3);
    const Matrix x = gaussian_matrix(rng, 4, 5);
    const std::vector<int> y{0, 2, 1, 2};
    const Matrix g = input_gradient(enc, probe, x, y);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto row = x.row(i);
        const auto fd = oracle::central_difference(
            [&](const std::vector<double>& v) { return sample_ce(enc, probe, v, y[i]); },
            std::vector<double>(row.begin(), row.end()));
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(oracle::grad_rel_err(g(i, j), fd[j]) < 1e-4);
    }
}

TEST_CASE("one PGD step on a linear pipeline is FGSM")
{
    RngStream rng(7);
    const MlpEncoder enc({6, 4}, rng);  // a single affine layer
    const LinearProbe probe = random_probe(rng, 3, 4);
    const Matrix x = gaussian_matrix(rng, 10, 6);
    std::vector<int> y;
    for (std::size_t i = 0; i < 10; ++i)
        y.push_back(static_cast<int>(i % 3));

    AttackConfig cfg;
    cfg.epsilon = 0.3;
    cfg.step_size = 0.3;
    cfg.iterations = 1;
    cfg.random_start = false;
    const Matrix adv = pgd_attack(enc, probe, x, y, cfg);

    // Closed form: dCE/dx = W_enc^T W_probe^T (softmax - onehot).
    const Matrix s = probe.scores(enc.encode(x));
    const Matrix& w = enc.weight(0);  // out x in
    for (std::size_t i = 0; i < 10; ++i) {
        double mx = -1e300;
        for (std::size_t c = 0; c < 3; ++c)
            mx = std::max(mx, s(i, c));
        std::vector<double> p(3);
        double z = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
            z += p[c] = std::exp(s(i, c) - mx);
        for (std::size_t c = 0; c < 3; ++c)
            p[c] = p[c] / z - (static_cast<int>(c) == y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < 6; ++j) {
            double g = 0.0;
            for (std::size_t h = 0; h < 4; ++h) {
                double back = 0.0;
                for (std::size_t c = 0; c < 3; ++c)
                    back += probe.weights(c, h) * p[c];
                g += w(h, j) * back;
            }
            const double want = x(i, j) + 0.3 * (g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0));
            CHECK(std::abs(adv(i, j) - want) <= 1e-9);
        }
    }
}

TEST_CASE("large-budget attack on a linear 2-class problem drops below chance")
{
    RngStream rng(8);
    Matrix x;
    std::vector<int> y;
    blobs(rng, 50, 2, 4, 0.5, x, y);
    const MlpEncoder enc({4, 4}, rng);
    const LinearProbe probe = fit_probe(enc.encode(x), y);
    AttackConfig cfg;
    cfg.epsilon = 20.0;
    const double robust = probe.accuracy(enc.encode(pgd_attack(enc, probe, x, y, cfg)), y);
    CHECK(robust <= 0.5);
}

TEST_CASE("PGD outputs stay inside the epsilon box and epsilon 0 is the identity")
{
    RngStream rng(9);
    const MlpEncoder enc({8, 16, 4}, rng);
    const LinearProbe probe = random_probe(rng, 4, 4);
    const Matrix x = gaussian_matrix(rng, 30, 8);
    std::vector<int> y;
    for (std::size_t i = 0; i < 30; ++i)
        y.push_back(static_cast<int>(i % 4));
    for (double eps : {0.013, 0.1, 0.7}) {
        AttackConfig cfg;
        cfg.epsilon = eps;
        cfg.seed = 3;
        const Matrix adv = pgd_attack(enc, probe, x, y, cfg);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, std::abs(adv.data()[i] - x.data()[i]));
        CHECK(worst <= eps);
    }
    AttackConfig zero;
    const Matrix same = pgd_attack(enc, probe, x, y, zero);
    CHECK(same == x);
    AttackConfig bad;
    bad.epsilon = -1.0;
    CHECK_THROWS_AS(pgd_attack(enc, probe, x, y, bad), ContractViolation);
    CHECK(AttackConfig{0.2, -1.0, 20}.effective_step() == doctest::Approx(0.025));
}

TEST_CASE("robustness curve: clean point, determinism, CSV")
{
    RngStream rng(10);
    Matrix x;
    std::vector<int> y;
    blobs(rng, 25, 4, 6, 1.5, x, y);
    const MlpEncoder enc({6, 12, 5}, rng);
    const LinearProbe probe = fit_probe(enc.encode(x), y);
    AttackConfig cfg;
    cfg.seed = 5;
    const auto one = robustness_curve(enc, probe, x, y, {0.0}, cfg);
    REQUIRE(one.size() == 1);
    CHECK(one[0].robust_acc == one[0].clean_acc);
    CHECK(one[0].n == 100);

    const std::vector<double> eps{0.0, 0.05, 0.1, 0.2};
    const auto a = robustness_curve(enc, probe, x, y, eps, cfg);
    const auto b = robustness_curve(enc, probe, x, y, eps, cfg, Exec::serial);
    for (std::size_t i = 0; i < eps.size(); ++i)
        CHECK(a[i].robust_acc == b[i].robust_acc);
    for (std::size_t i = 1; i < eps.size(); ++i)
        CHECK(a[i].robust_acc <= a[i - 1].robust_acc + 0.02);

    CHECK_THROWS_AS(robustness_curve(enc, probe, x, y, {0.1, 0.2}, cfg), ContractViolation);
    CHECK_THROWS_AS(robustness_curve(enc, probe, x, y, {0.0, 0.2, 0.1}, cfg), ContractViolation);

    cfg.epsilon = 0.1;
    const auto sweep = iteration_sweep(enc, probe, x, y, {1, 5, 20}, cfg);
    CHECK(sweep.size() == 3);
    CHECK(sweep[2].iterations == 20);

    std::ostringstream os;
    write_robustness_csv(os, a);
    const std::string csv = os.str();
    CHECK(csv.rfind("epsilon,iterations,n,clean_acc,robust_acc,seed\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
