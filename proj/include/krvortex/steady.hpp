#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "critical_finder.hpp"
#include "domain.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "harmonic.hpp"
#include "kirchhoff_routh.hpp"
#include "parallel.hpp"

namespace krv {

/// Polynomial bump phi(x) = A (1 - |x - c|^2 / R^2)^3 inside the radius, 0 outside.
/// C^2 across the cut-off.
struct TestFunction {
    Point2 center{};
    double radius = 1.0;
    double amplitude = 1.0;

    double value(const Point2 &x) const {
        const double s = norm2(x - center) / (radius * radius);
        if (s >= 1.0) return 0.0;
        const double u = 1.0 - s;
        return amplitude * u * u * u;
    }
    Vec2 gradient(const Point2 &x) const {
        const Vec2 d = x - center;
        const double s = norm2(d) / (radius * radius);
        if (s >= 1.0) return {};
        const double u = 1.0 - s;
        return (-6.0 * amplitude * u * u / (radius * radius)) * d;
    }
    /// max |grad phi|, attained at |x - c|^2 = R^2 / 5
    double gradient_sup() const { return std::abs(amplitude) * 6.0 / radius * std::sqrt(0.2) * 0.64; }
};

// ---------------------------------------------------------------------------
// Stream function of piecewise-constant vorticity on one or more grids

namespace detail {

/// All active cells of a set of grids, flattened. Sources are always a subset of
/// these cells, which lets the regular part be evaluated from per-cell data
/// prepared once.
class CellSystem {
  public:
    CellSystem(const DomainModel &d, const std::vector<const GridField *> &grids) : d_(d) {
        for (std::size_t g = 0; g < grids.size(); ++g) {
            offsets_.push_back(points_.size());
            const GridField &f = *grids[g];
            for (std::size_t k = 0; k < f.size(); ++k) {
                if (!f.active(k)) continue;
                points_.push_back(f.center(k));
                grid_.push_back(g);
                cell_.push_back(k);
                area_.push_back(f.cell_area());
                self_log_.push_back(kernel::rect_log_integral(f.center(k), f.cell_box(k)) / f.cell_area());
            }
            index_.emplace_back(f.size(), npos);
            for (std::size_t i = offsets_[g]; i < points_.size(); ++i) index_[g][cell_[i]] = i;
        }
        for (const auto &p : points_) d.require_inside(p);
        if (const auto *cd = d.as_conformal()) {
            chart_.reserve(points_.size());
            for (const auto &p : points_) chart_.push_back(cd->chart(p));
        }
        if (const auto *nd = d.as_numeric()) nd->batch(points_, phi_, coef_);
    }

    std::size_t size() const { return points_.size(); }
    const Point2 &point(std::size_t i) const { return points_[i]; }
    std::size_t grid_of(std::size_t i) const { return grid_[i]; }
    std::size_t cell_of(std::size_t i) const { return cell_[i]; }
    std::size_t find(std::size_t grid, std::size_t cell) const { return index_[grid][cell]; }
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    /// psi at every cell for sources (cell ids into this system, masses omega * dA).
    std::vector<double> stream(const std::vector<std::size_t> &src, const std::vector<double> &mass,
                               const HarmonicField &psi0, unsigned threads) const {
        std::vector<double> out(points_.size(), 0.0);
        const auto *nd = d_.as_numeric();
        // symmetrized fit: h(x, y) = (phi(x).coef(y) + phi(y).coef(x)) / 2
        Eigen::VectorXd sum_coef, sum_phi;
        if (nd) {
            sum_coef = Eigen::VectorXd::Zero(coef_.cols());
            sum_phi = Eigen::VectorXd::Zero(phi_.cols());
            for (std::size_t j = 0; j < src.size(); ++j) {
                const auto r = static_cast<Eigen::Index>(src[j]);
                sum_coef += mass[j] * coef_.row(r).transpose();
                sum_phi += mass[j] * phi_.row(r).transpose();
            }
        }
        parallel_for(points_.size(), threads, [&](std::size_t t) {
            const Point2 &x = points_[t];
            double log_part = 0.0, h_part = 0.0;
            for (std::size_t j = 0; j < src.size(); ++j) {
                const std::size_t s = src[j];
                log_part += mass[j] * (s == t ? self_log_[t] : 0.5 * std::log(norm2(x - points_[s])));
                if (!nd) h_part += mass[j] * regular(t, s);
            }
            if (nd) {
                const auto r = static_cast<Eigen::Index>(t);
                h_part = 0.5 * (phi_.row(r).dot(sum_coef) + coef_.row(r).dot(sum_phi));
            }
            out[t] = -inv_2pi * log_part - h_part + (psi0.is_zero() ? 0.0 : psi0.value(x));
        });
        return out;
    }

  private:
    double regular(std::size_t t, std::size_t s) const {
        if (const auto *dd = d_.as_disk()) {
            return disk::regular_part(dd->chart(points_[t]), dd->chart(points_[s])) - inv_2pi * std::log(dd->radius);
        }
        const auto *cd = d_.as_conformal();
        const Complex wt = chart_[t], ws = chart_[s];
        const Complex dw = wt - ws;
        const Complex dd = std::abs(dw) > 1e-6 ? (to_complex(points_[t]) - to_complex(points_[s])) / dw
                                                : cd->map.divided_difference(wt, ws);
        return disk::regular_part(to_point(wt), to_point(ws)) - inv_2pi * std::log(std::abs(dd));
    }

    DomainModel d_;
    std::vector<Point2> points_;
    std::vector<std::size_t> grid_, cell_, offsets_;
    std::vector<double> area_, self_log_;
    std::vector<std::vector<std::size_t>> index_;
    std::vector<Complex> chart_;
    Eigen::MatrixXd phi_, coef_;
};

inline void collect_sources(const CellSystem &sys, const std::vector<const GridField *> &grids,
                            std::vector<std::size_t> &src, std::vector<double> &mass) {
    src.clear();
    mass.clear();
    for (std::size_t g = 0; g < grids.size(); ++g) {
        const GridField &f = *grids[g];
        for (std::size_t k = 0; k < f.size(); ++k) {
            if (f.value(k) == 0.0) continue;
            const std::size_t i = sys.find(g, k);
            if (i == CellSystem::npos) throw InvalidArgument("vorticity outside the grid mask");
            src.push_back(i);
            mass.push_back(f.value(k) * f.cell_area());
        }
    }
}

} // namespace detail

/// psi = G omega + psi0 on the active cells of omega's grid. G is summed cell by
/// cell: the logarithmic part with the exact cell average over the own cell, the
/// regular part at cell centers.
inline GridField stream_of(const GridField &omega, const DomainModel &d, const HarmonicField &psi0,
                           unsigned threads = 0) {
    const detail::CellSystem sys(d, {&omega});
    std::vector<std::size_t> src;
    std::vector<double> mass;
    detail::collect_sources(sys, {&omega}, src, mass);
    const auto psi = sys.stream(src, mass, psi0, threads);
    GridField out(omega.box(), omega.n1(), omega.n2());
    for (std::size_t k = 0; k < out.size(); ++k) out.set_active(k, omega.active(k));
    for (std::size_t i = 0; i < sys.size(); ++i) out.set(sys.cell_of(i), psi[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Diagnostics on fields

/// First-moment quotient of omega by the midpoint rule.
inline Point2 centroid(const GridField &omega) {
    double m = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < omega.size(); ++k) {
        const double w = omega.value(k);
        if (w == 0.0) continue;
        const Point2 c = omega.center(k);
        m += w;
        m1 += w * c.x1;
        m2 += w * c.x2;
    }
    if (std::abs(m * omega.cell_area()) < 1e-14) throw ZeroMass("field has zero total mass");
    return {m1 / m, m2 / m};
}

/// Largest distance between centers of support cells.
inline double support_diameter(const GridField &omega) {
    const auto s = omega.support();
    double best = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) best = std::max(best, distance(omega.center(s[i]), omega.center(s[j])));
    return best;
}

/// Sum of |term| in the antisymmetry double sum; the natural scale for |C|.
inline double antisymmetry_scale(const GridField &omega, const Vec2 &b) {
    const auto s = omega.support();
    const double a = omega.cell_area();
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (i == j) continue;
            const Vec2 d = omega.center(s[i]) - omega.center(s[j]);
            total += std::abs(dot(perp(d), b) / norm2(d) * omega.value(s[i]) * omega.value(s[j])) * a * a;
        }
    return inv_2pi * total;
}

/// |C| with C = -(1/2pi) sum_{x != y} perp(x - y).b / |x - y|^2 omega(x) omega(y) dA^2,
/// summing each pair (x, y) together with (y, x).
inline double antisymmetry_check(const GridField &omega, const Vec2 &b) {
    const auto s = omega.support();
    const double a = omega.cell_area();
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            const Point2 x = omega.center(s[i]), y = omega.center(s[j]);
            const double wxy = omega.value(s[i]) * omega.value(s[j]) * a * a;
            const Vec2 dxy = x - y, dyx = y - x;
            const double txy = dot(perp(dxy), b) / norm2(dxy) * wxy;
            const double tyx = dot(perp(dyx), b) / norm2(dyx) * wxy;
            total += txy + tyx;
        }
    return std::abs(-inv_2pi * total);
}

/// Same double sum in plain row order, for comparison.
inline double antisymmetry_check_naive(const GridField &omega, const Vec2 &b) {
    const auto s = omega.support();
    const double a = omega.cell_area();
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (i == j) continue;
            const Vec2 d = omega.center(s[i]) - omega.center(s[j]);
            total += dot(perp(d), b) / norm2(d) * omega.value(s[i]) * omega.value(s[j]) * a * a;
        }
    return std::abs(-inv_2pi * total);
}

/// Weak-form residual  int omega perp(grad psi) . grad phi dx  with psi = G omega + psi0,
/// summed over all fields (one per blob). grad psi uses the cell-exact
/// logarithmic kernel plus the regular part and psi0 at cell centers.
inline double weak_residual(const std::vector<GridField> &omega, const DomainModel &d, const HarmonicField &psi0,
                            const TestFunction &phi, unsigned threads = 0) {
    std::vector<Point2> all_pts;
    std::vector<double> all_mass;
    struct Target {
        Point2 x;
        double mass;
        Vec2 grad_phi;
    };
    std::vector<Target> targets;
    for (const auto &f : omega)
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double w = f.value(k);
            if (w == 0.0) continue;
            const Point2 c = f.center(k);
            all_pts.push_back(c);
            all_mass.push_back(w * f.cell_area());
            const Vec2 gp = phi.gradient(c);
            if (gp.v1 != 0.0 || gp.v2 != 0.0) targets.push_back({c, w * f.cell_area(), gp});
        }
    if (targets.empty()) return 0.0;
    for (const auto &p : all_pts) d.require_inside(p);

    std::vector<Point2> tp;
    for (const auto &t : targets) tp.push_back(t.x);
    const auto [h1, h2] = d.regular_part_grad_matrices(tp, all_pts);

    std::vector<double> contrib(targets.size());
    parallel_for(targets.size(), threads, [&](std::size_t i) {
        Vec2 g{};
        for (const auto &f : omega) g += -inv_2pi * log_potential_grad(f, targets[i].x);
        for (std::size_t s = 0; s < all_pts.size(); ++s)
            g -= all_mass[s] * Vec2{h1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)),
                                    h2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s))};
        if (!psi0.is_zero()) g += psi0.gradient(targets[i].x);
        contrib[i] = targets[i].mass * dot(perp(g), targets[i].grad_phi);
    });
    double r = 0.0;
    for (double c : contrib) r += c;
    return r;
}

inline double weak_residual(const GridField &omega, const DomainModel &d, const HarmonicField &psi0,
                            const TestFunction &phi, unsigned threads = 0) {
    return weak_residual(std::vector<GridField>{omega}, d, psi0, phi, threads);
}

// ---------------------------------------------------------------------------
// Area-constrained level-set iteration

struct SteadySolution {
    double epsilon = 0.0;
    double delta = 0.0;
    std::vector<Point2> ball_centers;
    std::vector<double> circulations;     // requested
    std::vector<GridField> blobs;         // one local grid per ball
    std::vector<double> lambda;           // patch amplitude per blob
    std::vector<double> mu;               // level constant per blob
    std::vector<double> achieved;         // integral of each blob
    std::vector<double> support_diameter;
    std::vector<Point2> centroids;
    std::vector<bool> touches_ball;       // support reaches the edge of its constraint ball
    int iterations = 0;
    std::size_t final_change = 0;         // cells that changed in the last step
    bool fixed_point = false;

    /// Fixed point of the iteration with every support strictly inside its ball.
    bool converged() const {
        return fixed_point && std::none_of(touches_ball.begin(), touches_ball.end(), [](bool b) { return b; });
    }
};

/// Raised when the iteration cycles or runs out of steps. Carries the last two states.
class IterationStalled : public NoConvergence {
  public:
    IterationStalled(const std::string &what, SteadySolution last, SteadySolution previous)
        : NoConvergence(what), last_(std::move(last)), previous_(std::move(previous)) {}
    const SteadySolution &last() const { return last_; }
    const SteadySolution &previous() const { return previous_; }

  private:
    SteadySolution last_, previous_;
};

struct TurkingtonOptions {
    double cells_per_eps = 8.0;
    int max_iter = 200;
    int cycle_window = 8;
    unsigned threads = 0;
    int max_cells_per_axis = 2048;
};

/// Default constraint radius: half the smallest center distance, the boundary
/// distance minus delta0/2, and a quarter of the domain diameter, whichever is least.
inline double default_ball_radius(const DomainModel &d, const std::vector<Point2> &centers, double delta0) {
    double r = 0.25 * d.diameter();
    for (std::size_t i = 0; i < centers.size(); ++i) {
        r = std::min(r, d.boundary_distance(centers[i]) - 0.5 * delta0);
        for (std::size_t j = i + 1; j < centers.size(); ++j) r = std::min(r, 0.5 * distance(centers[i], centers[j]));
    }
    return r;
}

namespace detail {

inline std::uint64_t hash_sets(const std::vector<std::vector<std::size_t>> &sets) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto &s : sets) {
        for (auto v : s) {
            h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL;
            h *= 1099511628211ULL;
        }
        h ^= 0xffULL;
        h *= 1099511628211ULL;
    }
    return h;
}

inline bool touches_edge(const GridField &f, std::size_t k) {
    const int i = f.col(k), j = f.row(k);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int q = 0; q < 4; ++q) {
        const int a = i + di[q], b = j + dj[q];
        if (a < 0 || b < 0 || a >= f.n1() || b >= f.n2()) return true;
        if (!f.active(f.index(a, b))) return true;
    }
    return false;
}

} // namespace detail

/// Builds a steady patch solution: omega = sum lambda_i 1{sign(k_i) psi > sign(k_i) mu_i} on
/// B_delta(x_i), with lambda_i = k_i / (pi eps^2) and mu_i chosen so that the patch
/// covers round(pi eps^2 / dA) cells (the cells of largest sign(k_i) psi; ties go
/// to the lower cell index). Iterates psi -> patch until the cell sets repeat.
inline SteadySolution turkington_iterate(const DomainModel &d, const std::vector<Point2> &centers,
                                         const std::vector<double> &circulations, double epsilon, double delta,
                                         const HarmonicField &psi0, const TurkingtonOptions &opt = {}) {
    const std::size_t k = centers.size();
    if (k == 0 || circulations.size() != k) throw InvalidArgument("need one circulation per ball center");
    for (double c : circulations)
        if (c == 0.0 || !std::isfinite(c)) throw InvalidCirculation("circulations must be finite and nonzero");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (!(delta > 0.0)) throw InvalidArgument("ball radius must be positive");
    if (opt.cells_per_eps < 8.0) throw InvalidArgument("the grid must resolve epsilon with at least 8 cells");
    for (const auto &c : centers) {
        d.require_inside(c);
        if (d.boundary_distance(c) <= delta) throw InvalidArgument("constraint ball leaves the domain");
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            if (distance(centers[i], centers[j]) <= 2.0 * delta) throw InvalidArgument("constraint balls overlap");

    const int n = static_cast<int>(std::ceil(2.0 * delta * opt.cells_per_eps / epsilon - 1e-9));
    if (n > opt.max_cells_per_axis) throw InvalidArgument("grid would need " + std::to_string(n) + " cells per axis");

    SteadySolution sol;
    sol.epsilon = epsilon;
    sol.delta = delta;
    sol.ball_centers = centers;
    sol.circulations = circulations;
    std::vector<std::size_t> n_target(k);
    for (std::size_t i = 0; i < k; ++i) {
        const Point2 &c = centers[i];
        GridField f({{c.x1 - delta, c.x2 - delta}, {c.x1 + delta, c.x2 + delta}}, n, n);
        std::size_t active = 0;
        for (std::size_t q = 0; q < f.size(); ++q) {
            const Point2 p = f.center(q);
            const bool on = distance(p, c) < delta && d.contains(p);
            f.set_active(q, on);
            active += on;
        }
        sol.lambda.push_back(circulations[i] / (pi * epsilon * epsilon));
        n_target[i] = static_cast<std::size_t>(std::llround(pi * epsilon * epsilon / f.cell_area()));
        if (n_target[i] == 0 || n_target[i] >= active)
            throw ConstraintInfeasible("patch area cannot be matched inside constraint ball " + std::to_string(i));
        sol.blobs.push_back(std::move(f));
    }

    std::vector<const GridField *> ptrs;
    for (const auto &f : sol.blobs) ptrs.push_back(&f);
    const detail::CellSystem sys(d, ptrs);

    // start: the cells nearest to each center
    std::vector<std::vector<std::size_t>> sets(k);
    for (std::size_t i = 0; i < k; ++i) {
        const GridField &f = sol.blobs[i];
        std::vector<std::size_t> cells;
        for (std::size_t q = 0; q < f.size(); ++q)
            if (f.active(q)) cells.push_back(q);
        std::stable_sort(cells.begin(), cells.end(), [&](std::size_t a, std::size_t b) {
            return distance(f.center(a), centers[i]) < distance(f.center(b), centers[i]);
        });
        cells.resize(n_target[i]);
        std::sort(cells.begin(), cells.end());
        sets[i] = std::move(cells);
    }

    auto assemble = [&](SteadySolution &s, const std::vector<std::vector<std::size_t>> &cs) {
        for (std::size_t i = 0; i < k; ++i) {
            GridField &f = s.blobs[i];
            for (std::size_t q = 0; q < f.size(); ++q)
                if (f.value(q) != 0.0) f.set(q, 0.0);
            for (auto q : cs[i]) f.set(q, s.lambda[i]);
        }
    };
    assemble(sol, sets);
    sol.mu.assign(k, 0.0);

    std::deque<std::uint64_t> history{detail::hash_sets(sets)};
    SteadySolution previous = sol;
    bool done = false;
    for (int it = 1; it <= opt.max_iter && !done; ++it) {
        std::vector<std::size_t> src;
        std::vector<double> mass;
        detail::collect_sources(sys, ptrs, src, mass);
        const auto psi = sys.stream(src, mass, psi0, opt.threads);

        std::vector<std::vector<std::size_t>> next(k);
        std::vector<double> mu(k);
        for (std::size_t i = 0; i < k; ++i) {
            const GridField &f = sol.blobs[i];
            const double sgn = circulations[i] > 0.0 ? 1.0 : -1.0;
            std::vector<std::pair<double, std::size_t>> keyed;
            for (std::size_t q = 0; q < f.size(); ++q)
                if (f.active(q)) keyed.push_back({sgn * psi[sys.find(i, q)], q});
            std::sort(keyed.begin(), keyed.end(), [](const auto &a, const auto &b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            const std::size_t m = n_target[i];
            mu[i] = sgn * 0.5 * (keyed[m - 1].first + keyed[m].first);
            // keys equal up to rounding straddling the cut are decided by cell index
            const double tie = 1e-13 * std::max(std::abs(keyed.front().first), std::abs(keyed.back().first));
            std::size_t lo = m - 1, hi = m;
            while (lo > 0 && keyed[lo - 1].first - keyed[lo].first <= tie) --lo;
            while (hi + 1 < keyed.size() && keyed[hi].first - keyed[hi + 1].first <= tie) ++hi;
            if (keyed[m - 1].first - keyed[m].first <= tie)
                std::sort(keyed.begin() + static_cast<std::ptrdiff_t>(lo), keyed.begin() + static_cast<std::ptrdiff_t>(hi) + 1,
                          [](const auto &a, const auto &b) { return a.second < b.second; });
            for (std::size_t q = 0; q < m; ++q) next[i].push_back(keyed[q].second);
            std::sort(next[i].begin(), next[i].end());
        }

        std::size_t changed = 0;
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<std::size_t> diff;
            std::set_symmetric_difference(sets[i].begin(), sets[i].end(), next[i].begin(), next[i].end(),
                                          std::back_inserter(diff));
            changed += diff.size();
        }
        previous = sol;
        sets = std::move(next);
        assemble(sol, sets);
        sol.mu = mu;
        sol.iterations = it;
        sol.final_change = changed;

        const std::uint64_t h = detail::hash_sets(sets);
        if (changed == 0) {
            done = true;
            sol.fixed_point = true;
        } else if (std::find(history.begin(), history.end(), h) != history.end()) {
            throw IterationStalled("patch cell sets cycle after " + std::to_string(it) + " steps", sol, previous);
        }
        history.push_back(h);
        if (static_cast<int>(history.size()) > opt.cycle_window) history.pop_front();
    }
    if (!done) {
        throw IterationStalled("no fixed point after " + std::to_string(opt.max_iter) + " steps", sol, previous);
    }

    for (std::size_t i = 0; i < k; ++i) {
        const GridField &f = sol.blobs[i];
        sol.achieved.push_back(f.integral());
        sol.centroids.push_back(centroid(f));
        sol.support_diameter.push_back(support_diameter(f));
        bool touch = false;
        for (auto q : sets[i]) touch = touch || detail::touches_edge(f, q);
        sol.touches_ball.push_back(touch);
    }
    return sol;
}

inline SteadySolution turkington_iterate(const DomainModel &d, const std::vector<Point2> &centers,
                                         const std::vector<double> &circulations, double epsilon,
                                         const HarmonicField &psi0, double delta0 = 0.1,
                                         const TurkingtonOptions &opt = {}) {
    return turkington_iterate(d, centers, circulations, epsilon, default_ball_radius(d, centers, delta0), psi0, opt);
}

// ---------------------------------------------------------------------------
// Concentration experiment

struct ConcentrationRow {
    double epsilon = 0.0;
    double lambda = 0.0;
    std::size_t blob_index = 0;
    Point2 centroid{};
    double dist_to_critical = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    double residual_scale = std::numeric_limits<double>::quiet_NaN(); // lambda |kappa| sup|grad phi|
    double support_diameter = std::numeric_limits<double>::quiet_NaN();
    double mu = std::numeric_limits<double>::quiet_NaN();
    double centroid_grad_norm = std::numeric_limits<double>::quiet_NaN(); // |grad W| at all centroids
    int iterations = 0;
    bool converged = false;
    std::string status;
};

struct ConcentrationTable {
    std::optional<CriticalPoint> critical_point; // ball centers come from here when available
    VortexConfiguration centers;
    double delta = 0.0;
    std::vector<ConcentrationRow> rows;          // epsilon decreasing, then blob index
    std::vector<SteadySolution> solutions;       // one per epsilon that produced a state
};

struct ConcentrationOptions {
    TurkingtonOptions turkington{};
    double delta = 0.0;              // 0 selects default_ball_radius
    double test_radius_factor = 3.0; // phi has radius factor * epsilon about each centroid
    std::vector<Point2> centers;     // override the ball centers
};

/// For each epsilon (strictly decreasing): build the patch solution with balls
/// at a critical point of W and record centroids, distances, and residuals. A
/// row whose iteration does not reach a fixed point strictly inside the balls is
/// reported with converged = false, never dropped.
inline ConcentrationTable concentration_experiment(const DomainModel &d, const std::vector<double> &circulations,
                                                   const HarmonicField &psi0, const std::vector<double> &schedule,
                                                   const SearchConfig &search, const ConcentrationOptions &opt = {}) {
    if (schedule.empty()) throw InvalidArgument("epsilon schedule is empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i] > 0.0)) throw InvalidArgument("epsilon must be positive");
        if (i > 0 && !(schedule[i] < schedule[i - 1])) throw InvalidArgument("epsilon schedule must strictly decrease");
    }
    ConcentrationTable table;
    table.centers.circulations = circulations;
    if (!opt.centers.empty()) {
        if (opt.centers.size() != circulations.size()) throw InvalidArgument("need one center per circulation");
        table.centers.points = opt.centers;
    } else {
        const auto res = search_critical_points(d, circulations, psi0, search);
        if (!res.points.empty()) {
            table.critical_point = res.points.front();
            table.centers = res.points.front().configuration;
        } else {
            // no critical point: use the start that got closest to one
            const auto best = std::min_element(res.starts.begin(), res.starts.end(), [](const auto &a, const auto &b) {
                return a.final_norm < b.final_norm;
            });
            table.centers = best->final_configuration;
        }
    }
    validate(d, table.centers);
    table.delta = opt.delta > 0.0 ? opt.delta : default_ball_radius(d, table.centers.points, search.delta0);
    if (!(table.delta > 0.0)) throw InvalidArgument("no room for constraint balls around the centers");

    for (double eps : schedule) {
        SteadySolution sol;
        std::string status = "fixed point";
        bool have = true;
        try {
            sol = turkington_iterate(d, table.centers.points, circulations, eps, table.delta, psi0, opt.turkington);
            if (!sol.converged()) status = "support reaches the constraint ball";
        } catch (const IterationStalled &e) {
            sol = e.last();
            status = e.what();
            for (std::size_t i = 0; i < sol.blobs.size(); ++i) {
                sol.achieved.push_back(sol.blobs[i].integral());
                sol.centroids.push_back(centroid(sol.blobs[i]));
                sol.support_diameter.push_back(support_diameter(sol.blobs[i]));
                sol.touches_ball.push_back(false);
            }
        } catch (const ConstraintInfeasible &e) {
            have = false;
            status = e.what();
        }
        if (!have) {
            for (std::size_t i = 0; i < circulations.size(); ++i) {
                ConcentrationRow r;
                r.epsilon = eps;
                r.lambda = circulations[i] / (pi * eps * eps);
                r.blob_index = i;
                r.status = status;
                table.rows.push_back(r);
            }
            continue;
        }
        double grad_at_centroids = std::numeric_limits<double>::quiet_NaN();
        try {
            grad_at_centroids = grad_norm(kr_grad(d, {sol.centroids, circulations}, psi0));
        } catch (const InputError &) {
        }
        for (std::size_t i = 0; i < circulations.size(); ++i) {
            ConcentrationRow r;
            r.epsilon = eps;
            r.lambda = sol.lambda[i];
            r.blob_index = i;
            r.centroid = sol.centroids[i];
            r.dist_to_critical = distance(sol.centroids[i], table.centers.points[i]);
            TestFunction phi{sol.centroids[i], opt.test_radius_factor * eps, 1.0};
            phi.radius = std::min(phi.radius, 0.9 * d.boundary_distance(phi.center));
            r.residual = weak_residual(sol.blobs, d, psi0, phi, opt.turkington.threads);
            r.residual_scale = std::abs(sol.lambda[i] * circulations[i]) * phi.gradient_sup();
            r.support_diameter = sol.support_diameter[i];
            r.mu = sol.mu[i];
            r.centroid_grad_norm = grad_at_centroids;
            r.iterations = sol.iterations;
            r.converged = sol.converged();
            r.status = status;
            table.rows.push_back(r);
        }
        table.solutions.push_back(std::move(sol));
    }
    return table;
}

} // namespace krv
