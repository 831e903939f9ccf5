#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "domain.hpp"
#include "errors.hpp"
#include "harmonic.hpp"
#include "kirchhoff_routh.hpp"
#include "parallel.hpp"

namespace krv {

struct SearchConfig {
    int starts = 200;
    double newton_tol = 1e-10;
    int max_iter = 100;
    double dedup_radius = 1e-6;
    double delta0 = 0.1;          // starts keep this distance from each other and from the boundary
    double interior_margin = 0.05; // extra boundary margin for starts
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::vector<VortexConfiguration> deflate; // known critical points to deflate away from

    void validate() const {
        if (starts < 1) throw InvalidArgument("starts must be positive");
        if (!(newton_tol > 0.0)) throw InvalidArgument("newton_tol must be positive");
        if (max_iter < 1) throw InvalidArgument("max_iter must be positive");
        if (!(dedup_radius > newton_tol)) throw InvalidArgument("dedup_radius must exceed newton_tol");
        if (!(delta0 > 0.0)) throw InvalidArgument("delta0 must be positive");
        if (!(interior_margin >= 0.0)) throw InvalidArgument("interior_margin must be nonnegative");
    }
};

/// Outcome of one multi-start run.
struct StartOutcome {
    bool converged = false;
    int iterations = 0;
    double initial_norm = 0.0;
    double final_norm = 0.0;
    std::string reason;
    VortexConfiguration final_configuration;
};

struct SearchResult {
    std::vector<CriticalPoint> points;
    std::vector<StartOutcome> starts;
    int converged_starts() const {
        return static_cast<int>(std::count_if(starts.begin(), starts.end(), [](const auto &s) { return s.converged; }));
    }
};

namespace detail {

// Uniform double in [0, 1) from 53 random bits; independent of the standard
// library's distribution implementations.
inline double unit_uniform(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::mt19937_64 start_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

inline Point2 sample_interior(const DomainModel &d, std::mt19937_64 &rng, double margin) {
    const Box b = d.bounding_box();
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const Point2 p{b.lo.x1 + b.width() * unit_uniform(rng), b.lo.x2 + b.height() * unit_uniform(rng)};
        if (d.contains(p) && d.boundary_distance(p) >= margin) return p;
    }
    throw InvalidArgument("start margin leaves no admissible interior");
}

inline VortexConfiguration sample_configuration(const DomainModel &d, const std::vector<double> &kappa,
                                                std::mt19937_64 &rng, double margin, double separation) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
        VortexConfiguration c;
        c.circulations = kappa;
        bool ok = true;
        for (std::size_t i = 0; i < kappa.size() && ok; ++i) {
            const Point2 p = sample_interior(d, rng, margin);
            for (const auto &q : c.points) ok = ok && distance(p, q) >= separation;
            c.points.push_back(p);
        }
        if (ok) return c;
    }
    throw InvalidArgument("cannot place the vortices with the requested separation");
}

// Positions relative to the domain center, rotated so the first off-center
// vortex lies on the positive x1-axis (disks only).
inline Eigen::VectorXd canonical(const DomainModel &d, const VortexConfiguration &c) {
    Eigen::VectorXd v = c.flatten();
    if (!d.rotationally_symmetric()) return v;
    const Point2 o = d.centroid();
    double angle = 0.0;
    for (const auto &p : c.points)
        if (distance(p, o) > 1e-8) {
            angle = std::atan2(p.x2 - o.x2, p.x1 - o.x1);
            break;
        }
    const double cs = std::cos(angle), sn = std::sin(angle);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double x = c.points[i].x1 - o.x1, y = c.points[i].x2 - o.x2;
        v[2 * i] = cs * x + sn * y;
        v[2 * i + 1] = -sn * x + cs * y;
    }
    return v;
}

// Permutations that only exchange vortices of equal circulation.
inline std::vector<std::vector<std::size_t>> equal_kappa_permutations(const std::vector<double> &kappa) {
    std::vector<std::size_t> perm(kappa.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<std::size_t>> out;
    if (kappa.size() > 6) return {perm};
    do {
        bool ok = true;
        for (std::size_t i = 0; i < perm.size(); ++i) ok = ok && kappa[perm[i]] == kappa[i];
        if (ok) out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

/// Distance between two configurations modulo disk rotations and relabelling of
/// equal circulations.
inline double configuration_distance(const DomainModel &d, const VortexConfiguration &a, const VortexConfiguration &b) {
    double best = std::numeric_limits<double>::infinity();
    const Eigen::VectorXd cb = canonical(d, b);
    for (const auto &perm : equal_kappa_permutations(a.circulations)) {
        VortexConfiguration p = a;
        for (std::size_t i = 0; i < perm.size(); ++i) p.points[i] = a.points[perm[i]];
        best = std::min(best, (canonical(d, p) - cb).norm());
    }
    return best;
}

// Deflation factor m(x) = prod (1/|x - x*|^2 + 1) and its gradient, where the
// distance to x* is taken to the nearest point of its symmetry orbit (envelope
// theorem gives the gradient as that of the distance to the aligned copy).
struct Deflation {
    double m = 1.0;
    Eigen::VectorXd grad_log_m;
};

inline Eigen::VectorXd nearest_orbit_point(const DomainModel &d, const VortexConfiguration &x,
                                           const VortexConfiguration &root) {
    const Eigen::VectorXd xv = x.flatten();
    Eigen::VectorXd best;
    double best_dist = std::numeric_limits<double>::infinity();
    const Point2 o = d.centroid();
    for (const auto &perm : equal_kappa_permutations(root.circulations)) {
        Eigen::VectorXd r(xv.size());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            r[2 * i] = root.points[perm[i]].x1;
            r[2 * i + 1] = root.points[perm[i]].x2;
        }
        if (d.rotationally_symmetric()) {
            // Procrustes rotation about the center: angle of sum conj(r_i) x_i
            Complex s{0.0};
            for (std::size_t i = 0; i < perm.size(); ++i)
                s += std::conj(Complex{r[2 * i] - o.x1, r[2 * i + 1] - o.x2}) *
                     Complex{xv[2 * i] - o.x1, xv[2 * i + 1] - o.x2};
            const Complex rot = std::abs(s) > 0.0 ? s / std::abs(s) : Complex{1.0};
            for (std::size_t i = 0; i < perm.size(); ++i) {
                const Complex z = rot * Complex{r[2 * i] - o.x1, r[2 * i + 1] - o.x2};
                r[2 * i] = z.real() + o.x1;
                r[2 * i + 1] = z.imag() + o.x2;
            }
        }
        const double dist = (xv - r).norm();
        if (dist < best_dist) {
            best_dist = dist;
            best = r;
        }
    }
    return best;
}

inline Deflation deflation(const DomainModel &d, const VortexConfiguration &x, const std::vector<VortexConfiguration> &roots) {
    Deflation out;
    const Eigen::VectorXd xv = x.flatten();
    out.grad_log_m = Eigen::VectorXd::Zero(xv.size());
    for (const auto &root : roots) {
        if (root.circulations != x.circulations) continue;
        const Eigen::VectorXd diff = xv - nearest_orbit_point(d, x, root);
        const double r2 = std::max(diff.squaredNorm(), 1e-300);
        const double factor = 1.0 / r2 + 1.0;
        out.m *= factor;
        // d/dx log(1/r2 + 1) = (-2 diff / r2^2) / (1/r2 + 1)
        out.grad_log_m += (-2.0 / (r2 * r2) / factor) * diff;
    }
    return out;
}

struct Admissible {
    double boundary_margin = 0.0;
    double separation = diagonal_guard * 10.0;
    bool operator()(const DomainModel &d, const VortexConfiguration &c) const {
        for (const auto &p : c.points)
            if (!d.contains(p) || (boundary_margin > 0.0 && d.boundary_distance(p) < boundary_margin)) return false;
        return c.size() < 2 || c.min_separation() >= separation;
    }
};

struct LmResult {
    VortexConfiguration configuration;
    double grad_norm = 0.0;
    double initial_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string reason;
};

/// Levenberg-Marquardt on the residual grad W with the finite-difference Hessian
/// as Jacobian. Steps leaving the admissible set are rejected. After five
/// consecutive rejections a backtracking gradient-descent step on |grad W|^2 is
/// tried instead. With roots to deflate, the accepted merit is m(x)|grad W| and
/// the step is the deflated Newton step.
inline LmResult levenberg_marquardt(const DomainModel &d, VortexConfiguration x, const HarmonicField &psi0,
                                    double tol, int max_iter, const Admissible &admissible,
                                    const std::vector<VortexConfiguration> &roots = {}) {
    LmResult r;
    auto residual = [&](const VortexConfiguration &c) { return flatten(kr_grad(d, c, psi0)); };
    auto merit = [&](const VortexConfiguration &c, double gnorm) {
        return roots.empty() ? gnorm : deflation(d, c, roots).m * gnorm;
    };

    Eigen::VectorXd g = residual(x);
    double gnorm = g.norm();
    double f = merit(x, gnorm);
    r.initial_norm = gnorm;
    double lambda = 1e-6;
    int rejections = 0;
    double best_window = f;
    int window_start = 0;

    int it = 0;
    for (; it < max_iter; ++it) {
        if (gnorm < tol) break;
        const Eigen::MatrixXd hess = kr_hessian(d, x, psi0);
        const Eigen::MatrixXd jtj = hess.transpose() * hess;
        const Eigen::VectorXd jtg = hess.transpose() * g;
        const double scale = std::max(jtj.diagonal().maxCoeff(), 1e-300);
        const Eigen::VectorXd xv = x.flatten();

        bool accepted = false;
        while (!accepted && rejections < 5) {
            Eigen::MatrixXd a = jtj;
            a.diagonal().array() += lambda * scale;
            Eigen::VectorXd step = -a.ldlt().solve(jtg);
            if (!roots.empty()) {
                const Deflation defl = deflation(d, x, roots);
                const double denom = 1.0 + defl.grad_log_m.dot(step);
                if (std::abs(denom) > 1e-12) step /= denom;
            }
            if (!step.allFinite()) {
                lambda *= 10.0;
                ++rejections;
                continue;
            }
            const VortexConfiguration trial = x.with_positions(xv + step);
            if (admissible(d, trial)) {
                const Eigen::VectorXd gt = residual(trial);
                const double ft = merit(trial, gt.norm());
                if (ft < f) {
                    x = trial;
                    g = gt;
                    gnorm = gt.norm();
                    f = ft;
                    lambda = std::max(lambda / 10.0, 1e-14);
                    rejections = 0;
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
            ++rejections;
        }
        if (!accepted) {
            // gradient descent on |grad W|^2 / 2, direction -H^T g
            Eigen::VectorXd dir = -jtg;
            double t = 1.0;
            const double dn = dir.norm();
            if (dn > 0.0) t = 0.1 * std::min(1.0, gnorm / dn * 10.0);
            for (int ls = 0; ls < 40 && dn > 0.0; ++ls, t *= 0.5) {
                const VortexConfiguration trial = x.with_positions(xv + t * dir);
                if (!admissible(d, trial)) continue;
                const Eigen::VectorXd gt = residual(trial);
                const double ft = merit(trial, gt.norm());
                if (ft < f) {
                    x = trial;
                    g = gt;
                    gnorm = gt.norm();
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            rejections = 0;
            lambda = 1e-6;
            if (!accepted) {
                r.reason = "no descent step";
                break;
            }
        }
        // stagnation: less than 1e-3 relative progress over 15 iterations
        if (it - window_start >= 15) {
            if (f > (1.0 - 1e-3) * best_window) {
                r.reason = "stagnated";
                ++it;
                break;
            }
            best_window = f;
            window_start = it;
        }
    }
    r.configuration = x;
    r.grad_norm = gnorm;
    r.iterations = it;
    r.converged = gnorm < tol;
    if (!r.converged && r.reason.empty()) r.reason = "iteration limit";
    if (r.converged) r.reason = "converged";
    return r;
}

inline CriticalPoint make_critical_point(const DomainModel &d, const VortexConfiguration &c, const HarmonicField &psi0) {
    CriticalPoint cp;
    cp.configuration = c;
    cp.gradient_norm = grad_norm(kr_grad(d, c, psi0));
    cp.value = kr_value(d, c, psi0);
    cp.classification = classify(kr_hessian(d, c, psi0), d, c, cp.hessian_eigenvalues, cp.symmetry_modes);
    return cp;
}

// Rotated copy with the first off-center vortex on the positive x1-axis.
inline VortexConfiguration canonical_configuration(const DomainModel &d, const VortexConfiguration &c) {
    if (!d.rotationally_symmetric()) return c;
    const Eigen::VectorXd v = canonical(d, c);
    const Point2 o = d.centroid();
    VortexConfiguration out = c;
    for (std::size_t i = 0; i < c.size(); ++i) out.points[i] = {v[2 * i] + o.x1, v[2 * i + 1] + o.x2};
    return out;
}

} // namespace detail

/// Multi-start search for critical points of W with per-start diagnostics.
inline SearchResult search_critical_points(const DomainModel &d, const std::vector<double> &circulations,
                                           const HarmonicField &psi0, const SearchConfig &sc) {
    sc.validate();
    if (circulations.empty()) throw InvalidArgument("at least one circulation is required");
    for (double k : circulations)
        if (k == 0.0 || !std::isfinite(k)) throw InvalidCirculation("circulations must be finite and nonzero");
    for (const auto &root : sc.deflate) validate(d, root);

    const double margin = std::max(sc.delta0, sc.interior_margin);
    const detail::Admissible admissible{};
    SearchResult result;
    result.starts.resize(static_cast<std::size_t>(sc.starts));
    std::vector<std::optional<VortexConfiguration>> found(result.starts.size());

    parallel_for(result.starts.size(), sc.threads, [&](std::size_t s) {
        auto rng = detail::start_rng(sc.seed, s);
        const auto x0 = detail::sample_configuration(d, circulations, rng, margin, sc.delta0);
        StartOutcome &out = result.starts[s];
        try {
            const auto lm = detail::levenberg_marquardt(d, x0, psi0, sc.newton_tol, sc.max_iter, admissible, sc.deflate);
            out.converged = lm.converged;
            out.iterations = lm.iterations;
            out.initial_norm = lm.initial_norm;
            out.final_norm = lm.grad_norm;
            out.reason = lm.reason;
            out.final_configuration = lm.configuration;
            if (lm.converged) found[s] = lm.configuration;
        } catch (const Error &e) {
            out.reason = e.what();
            out.final_configuration = x0;
        }
    });

    // sequential reduction in start order
    for (std::size_t s = 0; s < found.size(); ++s) {
        if (!found[s]) continue;
        VortexConfiguration c = *found[s];
        const VortexConfiguration canon = detail::canonical_configuration(d, c);
        if (grad_norm(kr_grad(d, canon, psi0)) < sc.newton_tol) c = canon;
        bool duplicate = false;
        for (const auto &p : result.points)
            duplicate = duplicate || detail::configuration_distance(d, c, p.configuration) < sc.dedup_radius;
        for (const auto &root : sc.deflate)
            duplicate = duplicate || detail::configuration_distance(d, c, root) < sc.dedup_radius;
        if (!duplicate) result.points.push_back(detail::make_critical_point(d, c, psi0));
    }

    if (result.converged_starts() == 0) {
        const bool any_progress = std::any_of(result.starts.begin(), result.starts.end(), [](const auto &s) {
            return s.iterations > 0 && s.final_norm < s.initial_norm;
        });
        if (!any_progress) throw SolverFailure("no start reduced the gradient norm");
    }
    return result;
}

/// Critical points of W, deduplicated modulo symmetry and classified.
inline std::vector<CriticalPoint> find_critical_points(const DomainModel &d, const std::vector<double> &circulations,
                                                       const HarmonicField &psi0, const SearchConfig &sc) {
    return search_critical_points(d, circulations, psi0, sc).points;
}

// ---------------------------------------------------------------------------
// Convex nonexistence sweep

struct NonexistenceReport {
    int resolution = 0;
    double delta0 = 0.0;
    double grid_min_grad_norm = 0.0; // exact discrete minimum over the tensor grid
    double min_grad_norm = 0.0;      // after local polish from the grid argmin
    VortexConfiguration argmin;
    std::size_t admissible_points = 0;
    std::size_t configurations = 0;
    Box grid_box{};
    // per grid cell of the first vortex: min |grad W| over the other positions (NaN if inadmissible)
    std::vector<double> first_vortex_min;
};

namespace detail {

inline void sweep_recurse(std::size_t level, std::vector<std::size_t> &idx, const std::vector<Point2> &pts,
                          const std::vector<double> &kappa, const std::vector<Vec2> &robin_grad,
                          const std::vector<Vec2> &ggrad, double delta0, double &best, std::vector<std::size_t> &best_idx,
                          std::size_t &count) {
    const std::size_t n = pts.size(), k = kappa.size();
    if (level == k) {
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            Vec2 gl = 0.5 * kappa[l] * kappa[l] * robin_grad[idx[l]];
            for (std::size_t j = 0; j < k; ++j)
                if (j != l) gl -= kappa[l] * kappa[j] * ggrad[idx[l] * n + idx[j]];
            s += norm2(gl);
        }
        ++count;
        if (s < best) {
            best = s;
            best_idx = idx;
        }
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < level && ok; ++j) ok = distance(pts[i], pts[idx[j]]) >= delta0;
        if (!ok) continue;
        idx[level] = i;
        sweep_recurse(level + 1, idx, pts, kappa, robin_grad, ggrad, delta0, best, best_idx, count);
    }
}

} // namespace detail

/// Minimizes |grad W| over all configurations on a tensor grid of cell centers
/// with boundary distance and pairwise distance at least delta0, then polishes
/// the argmin by a local descent restricted to the same set.
inline NonexistenceReport nonexistence_sweep(const DomainModel &d, const std::vector<double> &circulations, double delta0,
                                             int resolution, unsigned threads = 0) {
    if (circulations.size() < 2) throw InvalidArgument("the sweep needs at least two vortices");
    for (double k : circulations)
        if (!(k > 0.0) || !std::isfinite(k)) throw InvalidCirculation("the sweep needs positive circulations");
    if (!(delta0 > 0.0)) throw InvalidArgument("delta0 must be positive");
    if (resolution < 2) throw InvalidArgument("resolution must be at least 2");
    if (!d.is_convex()) throw ConvexityViolated("domain failed the convexity test");

    NonexistenceReport rep;
    rep.resolution = resolution;
    rep.delta0 = delta0;
    rep.grid_box = d.bounding_box();
    const Box &b = rep.grid_box;
    const double hx = b.width() / resolution, hy = b.height() / resolution;

    std::vector<Point2> pts;
    std::vector<std::size_t> cell_of;
    for (int j = 0; j < resolution; ++j)
        for (int i = 0; i < resolution; ++i) {
            const Point2 p{b.lo.x1 + (i + 0.5) * hx, b.lo.x2 + (j + 0.5) * hy};
            if (d.contains(p) && d.boundary_distance(p) >= delta0) {
                pts.push_back(p);
                cell_of.push_back(static_cast<std::size_t>(j) * resolution + i);
            }
        }
    rep.admissible_points = pts.size();
    if (pts.size() < circulations.size()) throw InvalidArgument("delta0 leaves too few admissible grid points");

    // gradient tables over the admissible point set
    const std::size_t n = pts.size();
    std::vector<Vec2> rgrad(n), ggrad(n * n);
    if (d.as_numeric()) {
        const auto [h1, h2] = d.regular_part_grad_matrices(pts, pts);
        for (std::size_t i = 0; i < n; ++i) {
            rgrad[i] = 2.0 * Vec2{h1(i, i), h2(i, i)};
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) {
                    const Vec2 dv = pts[i] - pts[j];
                    ggrad[i * n + j] = -inv_2pi * dv / norm2(dv) - Vec2{h1(i, j), h2(i, j)};
                }
        }
    } else {
        parallel_for(n, threads, [&](std::size_t i) {
            rgrad[i] = robin_grad(d, pts[i]);
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) ggrad[i * n + j] = green_grad_x(d, pts[i], pts[j]);
        });
    }

    // one task per first-vortex position
    const std::size_t k = circulations.size();
    std::vector<double> best_by_first(n, std::numeric_limits<double>::infinity());
    std::vector<std::vector<std::size_t>> argmin_by_first(n);
    std::vector<std::size_t> count_by_first(n, 0);
    parallel_for(n, threads, [&](std::size_t first) {
        std::vector<std::size_t> idx(k), best_idx;
        idx[0] = first;
        double best = std::numeric_limits<double>::infinity();
        detail::sweep_recurse(1, idx, pts, circulations, rgrad, ggrad, delta0, best, best_idx,
                              count_by_first[first]);
        best_by_first[first] = best;
        argmin_by_first[first] = best_idx;
    });

    rep.first_vortex_min.assign(static_cast<std::size_t>(resolution) * resolution,
                                std::numeric_limits<double>::quiet_NaN());
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_first = n;
    for (std::size_t i = 0; i < n; ++i) {
        rep.configurations += count_by_first[i];
        if (std::isfinite(best_by_first[i])) rep.first_vortex_min[cell_of[i]] = std::sqrt(best_by_first[i]);
        if (best_by_first[i] < best) {
            best = best_by_first[i];
            best_first = i;
        }
    }
    if (best_first == n) throw InvalidArgument("no admissible configuration on the grid");
    rep.grid_min_grad_norm = std::sqrt(best);
    rep.argmin.circulations = circulations;
    for (auto i : argmin_by_first[best_first]) rep.argmin.points.push_back(pts[i]);

    // polish: local descent restricted to the admissible set
    const detail::Admissible admissible{delta0, delta0};
    const auto lm = detail::levenberg_marquardt(d, rep.argmin, HarmonicField::zero(), 0.0, 60, admissible);
    if (lm.grad_norm < rep.grid_min_grad_norm) {
        rep.min_grad_norm = lm.grad_norm;
        rep.argmin = lm.configuration;
    } else {
        rep.min_grad_norm = rep.grid_min_grad_norm;
    }
    return rep;
}

} // namespace krv
