#include "mmcr/capacity.hpp"

#include "mmcr/error.hpp"
#include "mmcr/parallel.hpp"
#include "mmcr/lp.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace mmcr {

namespace {

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

}  // namespace

GeometryMeasures spectral_measures(const Matrix& centered)
{
    if (centered.rows() == 0)
        throw DegenerateInput("spectral_measures: no points");
    Matrix scaled = centered;
    scaled *= 1.0 / std::sqrt(static_cast<double>(centered.rows()));
    // Singular values of X / sqrt(M) are the square roots of the covariance eigenvalues.
    const auto lam = singular_values(scaled);
    double sum = 0.0, sum_sq = 0.0;
    for (double l : lam) {
        sum += l;
        sum_sq += l * l;
    }
    if (!(sum_sq > 0.0))
        throw DegenerateInput("manifold has zero variance (all points coincide)");
    GeometryMeasures g;
    g.radius = std::sqrt(sum_sq);
    g.dimension = sum * sum / sum_sq;
    g.effective_size = g.radius * std::sqrt(g.dimension);
    return g;
}

GeometryMeasures elliptical_measures(const PointManifold& m)
{
    if (m.m() < 2)
        throw ContractViolation("elliptical_measures: need at least 2 points");
    Matrix x = m.points;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i)
            mean += x(i, j);
        mean /= static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i)
            x(i, j) -= mean;
    }
    return spectral_measures(x);
}

SupportValue support_function(std::span<const double> v, const PointManifold& m)
{
    if (v.size() != m.dim())
        throw ContractViolation("support_function: dimension mismatch");
    if (m.m() == 0)
        throw ContractViolation("support_function: empty manifold");
    SupportValue out{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t j = 0; j < m.m(); ++j) {
        const double s = dot(v, m.points.row(j));
        if (s < out.value) {
            out.value = s;
            out.index = j;
        }
    }
    return out;
}

double KktResiduals::max() const { return std::max({stationarity, dual, primal, complementarity}); }

namespace {

// Minimizes the dual restricted to the passive set P with the weights free:
// (S_P S_P^T) z = kappa 1 - S_P t, solved by eigendecomposition so that a
// singular face falls back to the minimum-norm solution.
std::vector<double> solve_face(const PointManifold& m, const std::vector<std::size_t>& passive,
                               std::span<const double> t, double kappa)
{
    const std::size_t k = passive.size();
    Matrix g(k, k);
    std::vector<double> rhs(k);
    for (std::size_t a = 0; a < k; ++a) {
        const auto sa = m.points.row(passive[a]);
        rhs[a] = kappa - dot(sa, t);
        for (std::size_t b = 0; b <= a; ++b)
            g(a, b) = g(b, a) = dot(sa, m.points.row(passive[b]));
    }
    const EigResult e = symmetric_eig(g);
    const double cut = 1e-13 * std::max(e.values.front(), 0.0) * static_cast<double>(k);
    std::vector<double> z(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(e.values[i] > cut))
            continue;
        double c = 0.0;
        for (std::size_t a = 0; a < k; ++a)
            c += e.vectors(a, i) * rhs[a];
        c /= e.values[i];
        for (std::size_t a = 0; a < k; ++a)
            z[a] += c * e.vectors(a, i);
    }
    return z;
}

}  // namespace

AnchorSample solve_anchor_qp(std::span<const double> t, const PointManifold& m, double kappa)
{
    const std::size_t n = m.dim(), np = m.m();
    if (t.size() != n)
        throw ContractViolation("solve_anchor_qp: field dimension mismatch");
    for (double x : t)
        if (!std::isfinite(x))
            throw ContractViolation("solve_anchor_qp: non-finite field");

    AnchorSample out;
    out.t.assign(t.begin(), t.end());
    out.v = out.t;
    out.weights.assign(np, 0.0);

    double scale = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
        const double s = norm2(m.points.row(j));
        if (s == 0.0 && kappa > 0.0)
            throw DegenerateInput("solve_anchor_qp: zero point makes the margin constraint infeasible");
        scale = std::max(scale, s);
    }

    const auto start = support_function(t, m);
    out.support_index = start.index;
    if (start.value >= kappa)
        return out;  // constraint inactive

    std::vector<double>& alpha = out.weights;
    std::vector<double>& v = out.v;
    const double tol = kQpTolerance * 1e-3 * std::max(1.0, scale * norm2(t) + std::abs(kappa));
    std::vector<std::size_t> passive;
    std::vector<char> in_passive(np, 0), blocked(np, 0);

    const auto rebuild_v = [&] {
        v.assign(t.begin(), t.end());
        for (std::size_t j : passive) {
            const auto s = m.points.row(j);
            for (std::size_t i = 0; i < n; ++i)
                v[i] += alpha[j] * s[i];
        }
    };

    while (true) {
        // Most violated constraint outside the passive set.
        std::size_t best = np;
        double best_w = tol;
        for (std::size_t j = 0; j < np; ++j) {
            if (in_passive[j] || blocked[j])
                continue;
            const double w = kappa - dot(m.points.row(j), v);
            if (w > best_w) {
                best_w = w;
                best = j;
            }
        }
        if (best == np)
            break;
        if (++out.iterations > kQpIterationCap) {
            double violation = 0.0;
            for (std::size_t j = 0; j < np; ++j)
                violation = std::max(violation, kappa - dot(m.points.row(j), v));
            throw ConvergenceError("solve_anchor_qp: no convergence after " + std::to_string(kQpIterationCap) +
                                   " active-set iterations (objective " + fmt(dot(v, v) - 2 * dot(v, t) + dot(t, t)) +
                                   ", constraint violation " + fmt(violation) + ")");
        }
        passive.push_back(best);
        in_passive[best] = 1;

        bool first = true;
        while (true) {
            const auto z = solve_face(m, passive, t, kappa);
            if (first && z.back() <= 0.0) {
                // Round-off made the entering point useless; skip it until the set changes.
                passive.pop_back();
                in_passive[best] = 0;
                blocked[best] = 1;
                break;
            }
            first = false;
            bool positive = true;
            for (double x : z)
                positive = positive && x > 0.0;
            if (positive) {
                for (std::size_t a = 0; a < passive.size(); ++a)
                    alpha[passive[a]] = z[a];
                std::fill(blocked.begin(), blocked.end(), 0);
                break;
            }
            double theta = 1.0;
            std::size_t leaving = 0;
            for (std::size_t a = 0; a < passive.size(); ++a) {
                const double cur = alpha[passive[a]];
                if (z[a] <= 0.0 && cur / (cur - z[a]) < theta) {
                    theta = cur / (cur - z[a]);
                    leaving = a;
                }
            }
            std::vector<std::size_t> keep;
            for (std::size_t a = 0; a < passive.size(); ++a) {
                const std::size_t j = passive[a];
                alpha[j] += theta * (z[a] - alpha[j]);
                if (a != leaving && alpha[j] > 0.0) {
                    keep.push_back(j);
                } else {
                    alpha[j] = 0.0;
                    in_passive[j] = 0;
                }
            }
            passive.swap(keep);
            if (passive.empty())
                break;
        }
        rebuild_v();
    }

    out.lambda = 0.0;
    std::vector<double> sa(n, 0.0);
    for (std::size_t j : passive) {
        out.lambda += alpha[j];
        const auto s = m.points.row(j);
        for (std::size_t i = 0; i < n; ++i)
            sa[i] += alpha[j] * s[i];
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = t[i] + sa[i];
    out.f_value = dot(sa, sa);
    out.active = out.lambda > 0.0;
    if (out.active) {
        out.anchor.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out.anchor[i] = sa[i] / out.lambda;
    }

    const auto g = support_function(v, m);
    out.support_index = g.index;
    double stat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = v[i] - t[i] - (out.active ? out.lambda * out.anchor[i] : 0.0);
        stat += r * r;
    }
    out.kkt.stationarity = std::sqrt(stat);
    out.kkt.dual = std::max(0.0, -*std::min_element(alpha.begin(), alpha.end()));
    out.kkt.primal = std::max(0.0, kappa - g.value);
    for (std::size_t j = 0; j < np; ++j)
        if (alpha[j] > 0.0)
            out.kkt.complementarity =
                std::max(out.kkt.complementarity, alpha[j] * std::abs(dot(m.points.row(j), v) - kappa));
    return out;
}

ManifoldFrame manifold_frame(const PointManifold& m)
{
    const std::size_t np = m.m(), dim = m.dim();
    if (np == 0)
        throw ContractViolation("manifold_frame: empty manifold");
    std::vector<double> c(dim, 0.0);
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            c[j] += m.points(i, j);
    for (double& x : c)
        x /= static_cast<double>(np);
    const double cn = norm2(c);
    if (!(cn > 1e-12))
        throw DegenerateInput("manifold_frame: centroid at the origin");
    std::vector<double> chat = c;
    for (double& x : chat)
        x /= cn;

    // Centered points with the centroid direction removed, one per column.
    Matrix perp(dim, np);
    for (std::size_t i = 0; i < np; ++i) {
        double along = 0.0;
        for (std::size_t j = 0; j < dim; ++j)
            along += (m.points(i, j) - c[j]) * chat[j];
        for (std::size_t j = 0; j < dim; ++j)
            perp(j, i) = m.points(i, j) - c[j] - along * chat[j];
    }
    std::size_t rank = 0;
    Matrix basis;
    if (np > 1) {
        const SvdResult d = svd(perp);
        const double cut = std::max(1e-10 * d.s.front(), 1e-12 * cn * std::sqrt(static_cast<double>(np)));
        while (rank < d.s.size() && d.s[rank] > cut)
            ++rank;
        basis = d.u.left_cols(rank);
    }

    ManifoldFrame f;
    f.centroid_norm = cn;
    f.rank = rank;
    f.framed.label = m.label;
    f.framed.points = Matrix(np, rank + 1);
    for (std::size_t i = 0; i < np; ++i) {
        const auto p = m.points.row(i);
        f.framed.points(i, 0) = dot(p, chat) / cn;
        for (std::size_t k = 0; k < rank; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j)
                s += p[j] * basis(j, k);
            f.framed.points(i, k + 1) = s / cn;
        }
    }
    return f;
}

namespace {

ManifoldCapacity summarize(const ManifoldFrame& frame, const std::vector<AnchorSample>& samples)
{
    ManifoldCapacity mc;
    mc.frame_dim = frame.rank + 1;
    const auto n = static_cast<double>(samples.size());
    double sum = 0.0;
    for (const auto& s : samples)
        sum += s.f_value;
    mc.alpha_inverse = sum / n;
    double var = 0.0;
    for (const auto& s : samples)
        var += (s.f_value - mc.alpha_inverse) * (s.f_value - mc.alpha_inverse);
    mc.f_std = samples.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;

    // Anchor statistics use the coordinates orthogonal to the centroid axis.
    const std::size_t r = frame.rank;
    std::vector<const AnchorSample*> act;
    for (const auto& s : samples)
        if (s.active)
            act.push_back(&s);
    mc.active = act.size();
    if (act.empty() || r == 0)
        return mc;
    double r2 = 0.0, d = 0.0;
    std::size_t used = 0;
    Matrix w(act.size(), r);
    for (std::size_t a = 0; a < act.size(); ++a) {
        double nn = 0.0, ts = 0.0;
        for (std::size_t k = 0; k < r; ++k) {
            w(a, k) = act[a]->anchor[k + 1];
            nn += w(a, k) * w(a, k);
            ts += act[a]->t[k + 1] * w(a, k);
        }
        r2 += nn;
        if (nn > 0.0) {
            d += ts * ts / nn;
            ++used;
        }
    }
    mc.mean_field.radius = std::sqrt(r2 / static_cast<double>(act.size()));
    mc.mean_field.dimension = used ? d / static_cast<double>(used) : 0.0;
    mc.mean_field.effective_size = mc.mean_field.radius * std::sqrt(mc.mean_field.dimension);

    for (std::size_t k = 0; k < r; ++k) {
        double mean = 0.0;
        for (std::size_t a = 0; a < act.size(); ++a)
            mean += w(a, k);
        mean /= static_cast<double>(act.size());
        for (std::size_t a = 0; a < act.size(); ++a)
            w(a, k) -= mean;
    }
    if (act.size() > 1) {
        try {
            mc.anchor_spectral = spectral_measures(w);
        } catch (const DegenerateInput&) {
            mc.anchor_spectral = {};
        }
    }
    return mc;
}

double mean_centroid_cosine(const std::vector<PointManifold>& manifolds)
{
    if (manifolds.size() < 2)
        return 0.0;
    std::vector<std::vector<double>> c;
    for (const auto& m : manifolds) {
        std::vector<double> v(m.dim(), 0.0);
        for (std::size_t i = 0; i < m.m(); ++i)
            for (std::size_t j = 0; j < m.dim(); ++j)
                v[j] += m.points(i, j);
        const double n = norm2(v);
        for (double& x : v)
            x = n > 0.0 ? x / n : 0.0;
        c.push_back(std::move(v));
    }
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            s += dot(c[i], c[j]);
            ++cnt;
        }
    return s / static_cast<double>(cnt);
}

}  // namespace

CapacityReport mftma_capacity(const std::vector<PointManifold>& manifolds, std::size_t n_samples, double kappa,
                              std::uint64_t seed, Exec exec)
{
    if (manifolds.empty())
        throw ContractViolation("mftma_capacity: need at least one manifold");
    if (n_samples < 100)
        throw ContractViolation("mftma_capacity: n_samples must be >= 100");
    const std::size_t P = manifolds.size();
    std::vector<ManifoldFrame> frames;
    frames.reserve(P);
    for (const auto& m : manifolds)
        frames.push_back(manifold_frame(m));

    std::vector<std::vector<AnchorSample>> samples(P, std::vector<AnchorSample>(n_samples));
    const RngStream base(seed);
    parallel_for(P * n_samples, exec, [&](std::size_t task) {
        const std::size_t mi = task / n_samples, i = task % n_samples;
        RngStream rng = base.derive(mi).derive(i);
        std::vector<double> t(frames[mi].rank + 1);
        for (double& x : t)
            x = rng.normal();
        samples[mi][i] = solve_anchor_qp(t, frames[mi].framed, kappa);
    });

    CapacityReport r;
    r.n_samples = n_samples;
    r.kappa = kappa;
    r.seed = seed;
    double var_sum = 0.0;
    for (std::size_t mi = 0; mi < P; ++mi) {
        ManifoldCapacity mc = summarize(frames[mi], samples[mi]);
        r.alpha_inverse += mc.alpha_inverse;
        var_sum += mc.f_std * mc.f_std / static_cast<double>(n_samples);
        r.per_manifold.push_back(mc.mean_field);
        r.details.push_back(mc);
    }
    r.alpha_inverse /= static_cast<double>(P);
    r.alpha_inverse_std_error = std::sqrt(var_sum) / static_cast<double>(P);
    if (!(r.alpha_inverse > 0.0))
        throw NumericalFailure("mftma_capacity: zero inverse capacity");
    r.alpha = 1.0 / r.alpha_inverse;
    r.std_error = r.alpha * r.alpha * r.alpha_inverse_std_error;
    r.mean_centroid_cosine = mean_centroid_cosine(manifolds);
    return r;
}

namespace {

double fraction_for_frames(const std::vector<ManifoldFrame>& frames, std::size_t d, std::size_t trials,
                           std::uint64_t seed, Exec exec)
{
    std::size_t total_points = 0;
    for (const auto& f : frames) {
        if (f.rank + 1 > d)
            throw ContractViolation("separability: dimension " + std::to_string(d) +
                                    " is below a manifold frame dimension");
        total_points += f.framed.m();
    }
    std::vector<char> ok(trials, 0);
    const RngStream base(seed);
    parallel_for(trials, exec, [&](std::size_t trial) {
        RngStream rng = base.derive(trial);
        Matrix a(total_points, d);
        std::size_t row = 0;
        for (const auto& f : frames) {
            const Matrix q = random_orthonormal_columns(rng, d, f.rank + 1);
            const double y = rng.sign();
            const Matrix e = matmul_nt(f.framed.points, q, Exec::serial);
            for (std::size_t i = 0; i < e.rows(); ++i, ++row)
                for (std::size_t j = 0; j < d; ++j)
                    a(row, j) = y * e(i, j);
        }
        ok[trial] = margin_feasible(a) ? 1 : 0;
    });
    return static_cast<double>(std::accumulate(ok.begin(), ok.end(), std::size_t{0})) / static_cast<double>(trials);
}

std::vector<ManifoldFrame> frames_of(const std::vector<PointManifold>& manifolds)
{
    std::vector<ManifoldFrame> frames;
    for (const auto& m : manifolds)
        frames.push_back(manifold_frame(m));
    return frames;
}

}  // namespace

double separability_fraction(const std::vector<PointManifold>& manifolds, std::size_t d, std::size_t trials,
                             RngStream& rng, Exec exec)
{
    if (trials == 0)
        throw ContractViolation("separability_fraction: trials must be >= 1");
    return fraction_for_frames(frames_of(manifolds), d, trials, rng.next_u64(), exec);
}

BruteForceResult bruteforce_capacity(const std::vector<PointManifold>& manifolds, std::size_t trials, RngStream& rng,
                                     Exec exec)
{
    if (manifolds.empty() || trials == 0)
        throw ContractViolation("bruteforce_capacity: need manifolds and trials");
    const auto frames = frames_of(manifolds);
    const std::size_t P = manifolds.size();
    std::size_t lo = 1;
    for (const auto& f : frames)
        lo = std::max(lo, f.rank + 1);

    std::map<std::size_t, double> cache;
    const auto frac = [&](std::size_t d) {
        auto it = cache.find(d);
        if (it != cache.end())
            return it->second;
        const double f = fraction_for_frames(frames, d, trials, rng.next_u64(), exec);
        cache.emplace(d, f);
        return f;
    };

    BruteForceResult out;
    if (frac(lo) >= 0.5) {
        out.critical_dim = static_cast<double>(lo);
    } else {
        std::size_t hi = std::max(lo + 1, P / 2);
        while (frac(hi) < 0.5) {
            lo = hi;
            hi *= 2;
            if (hi > 64 * P + 64)
                throw NumericalFailure("bruteforce_capacity: no 50% crossing below D = " + std::to_string(hi));
        }
        while (hi - lo > 1) {
            const std::size_t mid = lo + (hi - lo) / 2;
            (frac(mid) >= 0.5 ? hi : lo) = mid;
        }
        const double fl = frac(lo), fh = frac(hi);
        out.critical_dim = static_cast<double>(lo) + (fh > fl ? (0.5 - fl) / (fh - fl) : 0.5);
    }
    out.capacity = static_cast<double>(P) / out.critical_dim;
    out.probes.assign(cache.begin(), cache.end());
    return out;
}

std::vector<LayerCapacity> layerwise_capacity(const std::vector<LayerSnapshot>& layers, std::size_t n_samples,
                                              double kappa, std::uint64_t seed, std::size_t max_dim,
                                              std::uint64_t projection_seed, Exec exec)
{
    if (max_dim == 0)
        throw ContractViolation("layerwise_capacity: max_dim must be >= 1");
    std::vector<LayerCapacity> out;
    const RngStream proj_base(projection_seed);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.manifolds.empty())
            throw ContractViolation("layerwise_capacity: layer '" + layer.name + "' has no manifolds");
        const std::size_t dim = layer.manifolds.front().dim();
        for (const auto& m : layer.manifolds)
            if (m.dim() != dim)
                throw ContractViolation("layerwise_capacity: layer '" + layer.name + "' mixes dimensions");
        LayerCapacity lc;
        lc.name = layer.name;
        lc.original_dim = dim;
        lc.analysis_dim = std::min(dim, max_dim);
        std::vector<PointManifold> ms = layer.manifolds;
        if (dim > max_dim) {
            RngStream rng = proj_base.derive(l);
            Matrix p = gaussian_matrix(rng, dim, max_dim);
            p *= 1.0 / std::sqrt(static_cast<double>(max_dim));
            for (auto& m : ms)
                m.points = matmul(m.points, p, exec);
        }
        lc.report = mftma_capacity(ms, n_samples, kappa, seed, exec);
        out.push_back(std::move(lc));
    }
    return out;
}

std::string capacity_report_json(const CapacityReport& r, int indent)
{
    nlohmann::ordered_json j;
    j["alpha"] = r.alpha;
    j["alpha_inverse"] = r.alpha_inverse;
    j["std_error"] = r.std_error;
    j["alpha_inverse_std_error"] = r.alpha_inverse_std_error;
    j["n_samples"] = r.n_samples;
    j["kappa"] = r.kappa;
    j["seed"] = r.seed;
    j["frame"] = r.frame;
    j["mean_centroid_cosine"] = r.mean_centroid_cosine;
    auto& pm = j["per_manifold"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.per_manifold.size(); ++i) {
        const auto& d = r.details[i];
        pm.push_back({{"radius", r.per_manifold[i].radius},
                      {"dimension", r.per_manifold[i].dimension},
                      {"effective_size", r.per_manifold[i].effective_size},
                      {"alpha_inverse", d.alpha_inverse},
                      {"active_samples", d.active},
                      {"frame_dim", d.frame_dim},
                      {"anchor_covariance_radius", d.anchor_spectral.radius},
                      {"anchor_covariance_dimension", d.anchor_spectral.dimension}});
    }
    return j.dump(indent);
}

namespace {

PointManifold place(RngStream& rng, std::size_t ambient_dim, const Matrix& local, double centroid_norm)
{
    const std::size_t k = local.cols();
    if (k + 1 > ambient_dim)
        throw ContractViolation("manifold needs " + std::to_string(k + 1) + " dimensions, ambient has " +
                                std::to_string(ambient_dim));
    const Matrix q = random_orthonormal_columns(rng, ambient_dim, k + 1);
    PointManifold m;
    m.points = Matrix(local.rows(), ambient_dim);
    for (std::size_t i = 0; i < local.rows(); ++i)
        for (std::size_t j = 0; j < ambient_dim; ++j) {
            double x = centroid_norm * q(j, 0);
            for (std::size_t a = 0; a < k; ++a)
                x += local(i, a) * q(j, a + 1);
            m.points(i, j) = x;
        }
    return m;
}

}  // namespace

PointManifold sphere_manifold(RngStream& rng, std::size_t ambient_dim, std::size_t sphere_dim, std::size_t m,
                              double radius, double centroid_norm)
{
    if (sphere_dim == 0 || m == 0)
        throw ContractViolation("sphere_manifold: need sphere_dim >= 1 and m >= 1");
    Matrix local(m, sphere_dim + 1);
    for (std::size_t i = 0; i < m; ++i) {
        auto row = local.row(i);
        for (double& x : row)
            x = rng.normal();
        const double n = norm2(row);
        for (double& x : row)
            x *= radius / n;
    }
    return place(rng, ambient_dim, local, centroid_norm);
}

PointManifold gaussian_manifold(RngStream& rng, std::size_t ambient_dim, const std::vector<double>& variances,
                                std::size_t m, double centroid_norm)
{
    if (variances.empty() || m == 0)
        throw ContractViolation("gaussian_manifold: need variances and m >= 1");
    Matrix local(m, variances.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < variances.size(); ++a)
            local(i, a) = rng.normal() * std::sqrt(variances[a]);
    return place(rng, ambient_dim, local, centroid_norm);
}

std::vector<PointManifold> point_manifolds(RngStream& rng, std::size_t p, std::size_t d)
{
    std::vector<PointManifold> out;
    for (std::size_t i = 0; i < p; ++i) {
        PointManifold m;
        m.points = gaussian_matrix(rng, 1, d);
        const double n = norm2(m.points.row(0));
        m.points *= 1.0 / n;
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace mmcr
