#include "mmcr/evaluation.hpp"

#include "mmcr/error.hpp"
#include "mmcr/linalg.hpp"
#include "mmcr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

namespace mmcr {

namespace {

std::size_t class_count(const std::vector<int>& labels)
{
    int hi = -1;
    for (int l : labels) {
        if (l < 0)
            throw ContractViolation("labels must be non-negative");
        hi = std::max(hi, l);
    }
    return static_cast<std::size_t>(hi + 1);
}

// Row-wise softmax in place.
void softmax_rows(Matrix& s)
{
    for (std::size_t r = 0; r < s.rows(); ++r) {
        auto row = s.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            z += v;
        }
        for (double& v : row)
            v /= z;
    }
}

}  // namespace

Matrix LinearProbe::scores(const Matrix& features) const
{
    if (features.cols() != weights.cols())
        throw ContractViolation("probe: feature width mismatch");
    Matrix s = matmul_nt(features, weights);
    for (std::size_t r = 0; r < s.rows(); ++r)
        for (std::size_t c = 0; c < s.cols(); ++c)
            s(r, c) += bias[c];
    return s;
}

std::vector<int> LinearProbe::predict(const Matrix& features) const
{
    const Matrix s = scores(features);
    std::vector<int> out(s.rows());
    for (std::size_t r = 0; r < s.rows(); ++r) {
        const auto row = s.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double LinearProbe::accuracy(const Matrix& features, const std::vector<int>& labels) const
{
    if (labels.size() != features.rows())
        throw ContractViolation("probe: label count mismatch");
    if (labels.empty())
        return 0.0;
    const auto p = predict(features);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        hit += p[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double cross_entropy(const LinearProbe& probe, const Matrix& features, const std::vector<int>& labels)
{
    Matrix p = probe.scores(features);
    double loss = 0.0;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        const auto row = p.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row)
            z += std::exp(v - mx);
        loss += mx + std::log(z) - row[labels[r]];
    }
    return loss / static_cast<double>(p.rows());
}

LinearProbe fit_probe(const Matrix& features, const std::vector<int>& labels, std::size_t epochs, double lr,
                      std::vector<double>* loss_trace)
{
    const std::size_t n = features.rows(), d = features.cols();
    if (labels.size() != n || n == 0)
        throw ContractViolation("fit_probe: need one label per feature row");
    const std::size_t nc = class_count(labels);
    if (std::set<int>(labels.begin(), labels.end()).size() < 2)
        throw ContractViolation("fit_probe: at least 2 classes must be present");

    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j)
            mean[j] += features(r, j);
    for (double& m : mean)
        m /= static_cast<double>(n);
    Matrix f(n, d);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) {
            f(r, j) = features(r, j) - mean[j];
            ss += f(r, j) * f(r, j);
        }
    const double sd = std::sqrt(ss / static_cast<double>(n * d));
    const double inv_sd = sd > 0.0 ? 1.0 / sd : 1.0;
    f *= inv_sd;

    LinearProbe p{Matrix(nc, d), std::vector<double>(nc, 0.0)};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t e = 0; e <= epochs; ++e) {
        Matrix prob = p.scores(f);
        if (loss_trace) {
            double loss = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const auto row = prob.row(r);
                const double mx = *std::max_element(row.begin(), row.end());
                double z = 0.0;
                for (double v : row)
                    z += std::exp(v - mx);
                loss += mx + std::log(z) - row[labels[r]];
            }
            loss_trace->push_back(loss * inv_n);
        }
        if (e == epochs)
            break;
        softmax_rows(prob);
        for (std::size_t r = 0; r < n; ++r)
            prob(r, labels[r]) -= 1.0;
        const Matrix gw = matmul_tn(prob, f);  // nc x d
        for (std::size_t c = 0; c < nc; ++c) {
            double gb = 0.0;
            for (std::size_t r = 0; r < n; ++r)
                gb += prob(r, c);
            p.bias[c] -= lr * gb * inv_n;
            for (std::size_t j = 0; j < d; ++j)
                p.weights(c, j) -= lr * gw(c, j) * inv_n;
        }
    }

    // Fold the standardization into the affine map.
    for (std::size_t c = 0; c < nc; ++c) {
        double shift = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            p.weights(c, j) *= inv_sd;
            shift += p.weights(c, j) * mean[j];
        }
        p.bias[c] -= shift;
    }
    return p;
}

double knn_monitor(const Matrix& train_features, const std::vector<int>& train_labels, const Matrix& test_features,
                   const std::vector<int>& test_labels, std::size_t k)
{
    const std::size_t n = train_features.rows();
    if (k == 0 || k > n)
        throw ContractViolation("knn_monitor: k must be in [1, train size]");
    if (train_labels.size() != n || test_labels.size() != test_features.rows())
        throw ContractViolation("knn_monitor: label count mismatch");
    if (train_features.cols() != test_features.cols())
        throw ContractViolation("knn_monitor: feature width mismatch");
    if (test_labels.empty())
        return 0.0;
    const std::size_t nc = std::max(class_count(train_labels), class_count(test_labels));

    const auto unit_rows = [](const Matrix& m) {
        Matrix u = m;
        for (std::size_t r = 0; r < u.rows(); ++r) {
            auto row = u.row(r);
            const double nr = norm2(row);
            if (nr > 0.0)
                for (double& v : row)
                    v /= nr;
        }
        return u;
    };
    const Matrix sim = matmul_nt(unit_rows(test_features), unit_rows(train_features));

    std::size_t hit = 0;
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> votes(nc);
    for (std::size_t t = 0; t < sim.rows(); ++t) {
        const auto row = sim.row(t);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
        std::fill(votes.begin(), votes.end(), 0);
        for (std::size_t i = 0; i < k; ++i)
            ++votes[train_labels[order[i]]];
        const auto best = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        hit += best == test_labels[t];
    }
    return static_cast<double>(hit) / static_cast<double>(test_labels.size());
}

double AttackConfig::effective_step() const
{
    return step_size >= 0.0 ? step_size : 2.5 * epsilon / static_cast<double>(iterations);
}

Matrix input_gradient(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x, const std::vector<int>& y,
                      Exec exec)
{
    if (y.size() != x.rows())
        throw ContractViolation("input_gradient: label count mismatch");
    const ForwardCache cache = enc.forward(x, exec);
    Matrix prob = probe.scores(cache.output());
    softmax_rows(prob);
    for (std::size_t r = 0; r < prob.rows(); ++r)
        prob(r, y[r]) -= 1.0;
    // Per-sample loss (not the mean), so each row is that sample's own gradient.
    const Matrix d_feat = matmul(prob, probe.weights, exec);
    Matrix d_input;
    enc.backward(cache, d_feat, &d_input, exec);
    return d_input;
}

namespace {

// Clamp to [x - eps, x + eps] and make sure the stored difference does not
// exceed eps after rounding.
double project(double v, double x0, double eps)
{
    v = std::clamp(v, x0 - eps, x0 + eps);
    while (v - x0 > eps)
        v = std::nextafter(v, x0);
    while (x0 - v > eps)
        v = std::nextafter(v, x0);
    return v;
}

}  // namespace

Matrix pgd_attack(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x, const std::vector<int>& y,
                  const AttackConfig& cfg, Exec exec)
{
    if (!(cfg.epsilon >= 0.0) || cfg.iterations < 1)
        throw ContractViolation("pgd_attack: need epsilon >= 0 and iterations >= 1");
    Matrix adv = x;
    if (cfg.epsilon == 0.0)
        return adv;
    const double step = cfg.effective_step();
    if (cfg.random_start) {
        const RngStream base(cfg.seed);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            RngStream rng = base.derive(r);
            for (std::size_t j = 0; j < x.cols(); ++j)
                adv(r, j) = project(x(r, j) + rng.uniform(-cfg.epsilon, cfg.epsilon), x(r, j), cfg.epsilon);
        }
    }
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const Matrix g = input_gradient(enc, probe, adv, y, exec);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            const double s = g.data()[i] > 0.0 ? 1.0 : (g.data()[i] < 0.0 ? -1.0 : 0.0);
            adv.data()[i] = project(adv.data()[i] + step * s, x.data()[i], cfg.epsilon);
        }
    }
    return adv;
}

std::vector<RobustnessPoint> robustness_curve(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x,
                                              const std::vector<int>& y, const std::vector<double>& epsilons,
                                              const AttackConfig& cfg, Exec exec)
{
    if (epsilons.empty() || epsilons.front() != 0.0 || !std::is_sorted(epsilons.begin(), epsilons.end()))
        throw ContractViolation("robustness_curve: epsilons must be ascending and start at 0");
    const double clean = probe.accuracy(enc.encode(x, exec), y);
    std::vector<RobustnessPoint> out;
    for (double eps : epsilons) {
        AttackConfig c = cfg;
        c.epsilon = eps;
        const Matrix adv = pgd_attack(enc, probe, x, y, c, exec);
        out.push_back({eps, cfg.iterations, x.rows(), clean, probe.accuracy(enc.encode(adv, exec), y), cfg.seed});
    }
    return out;
}

std::vector<RobustnessPoint> iteration_sweep(const MlpEncoder& enc, const LinearProbe& probe, const Matrix& x,
                                             const std::vector<int>& y, const std::vector<std::size_t>& iterations,
                                             const AttackConfig& cfg, Exec exec)
{
    const double clean = probe.accuracy(enc.encode(x, exec), y);
    std::vector<RobustnessPoint> out;
    for (std::size_t it : iterations) {
        AttackConfig c = cfg;
        c.iterations = it;
        const Matrix adv = pgd_attack(enc, probe, x, y, c, exec);
        out.push_back({cfg.epsilon, it, x.rows(), clean, probe.accuracy(enc.encode(adv, exec), y), cfg.seed});
    }
    return out;
}

void write_robustness_csv(std::ostream& os, const std::vector<RobustnessPoint>& points)
{
    os << "epsilon,iterations,n,clean_acc,robust_acc,seed\n";
    os.precision(17);
    for (const auto& p : points)
        os << p.epsilon << ',' << p.iterations << ',' << p.n << ',' << p.clean_acc << ',' << p.robust_acc << ','
           << p.seed << '\n';
}

}  // namespace mmcr
