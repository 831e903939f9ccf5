#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "domain.hpp"
#include "errors.hpp"
#include "harmonic.hpp"

namespace krv {

/// Below this separation the Kirchhoff-Routh function is numerically meaningless.
inline constexpr double diagonal_guard = 1e-10;

/// k point vortices with nonzero circulations.
struct VortexConfiguration {
    std::vector<Point2> points;
    std::vector<double> circulations;

    std::size_t size() const { return points.size(); }

    Eigen::VectorXd flatten() const {
        Eigen::VectorXd v(2 * points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            v[2 * i] = points[i].x1;
            v[2 * i + 1] = points[i].x2;
        }
        return v;
    }
    VortexConfiguration with_positions(const Eigen::VectorXd &v) const {
        VortexConfiguration c = *this;
        for (std::size_t i = 0; i < points.size(); ++i) c.points[i] = {v[2 * i], v[2 * i + 1]};
        return c;
    }
    double min_separation() const {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t j = i + 1; j < points.size(); ++j) d = std::min(d, distance(points[i], points[j]));
        return d;
    }
};

/// Checks the configuration invariants; throws on violation.
inline void validate(const DomainModel &d, const VortexConfiguration &cfg) {
    if (cfg.points.empty()) throw InvalidArgument("configuration needs at least one vortex");
    if (cfg.points.size() != cfg.circulations.size())
        throw InvalidArgument("configuration needs one circulation per point");
    for (double k : cfg.circulations)
        if (k == 0.0 || !std::isfinite(k)) throw InvalidCirculation("circulations must be finite and nonzero");
    for (const auto &p : cfg.points) d.require_inside(p);
    if (cfg.min_separation() <= diagonal_guard) throw DiagonalSingular("two vortices closer than 1e-10");
}

/// Kirchhoff-Routh function
///   W = -sum_{i<j} k_i k_j G(x_i, x_j) + 1/2 sum k_i^2 H(x_i) + sum k_i psi0(x_i).
inline double kr_value(const DomainModel &d, const VortexConfiguration &cfg, const HarmonicField &psi0) {
    validate(d, cfg);
    const auto t = d.tables(cfg.points);
    const auto &k = cfg.circulations;
    double w = 0.0;
    for (std::size_t i = 0; i < t.n; ++i) {
        for (std::size_t j = i + 1; j < t.n; ++j) w -= k[i] * k[j] * t.g(i, j);
        w += 0.5 * k[i] * k[i] * t.robin[i];
        if (!psi0.is_zero()) w += k[i] * psi0.value(cfg.points[i]);
    }
    return w;
}

/// grad_{x_l} W = -sum_{j != l} k_l k_j grad_x G(x_l, x_j) + 1/2 k_l^2 grad H(x_l) + k_l grad psi0(x_l).
inline std::vector<Vec2> kr_grad(const DomainModel &d, const VortexConfiguration &cfg, const HarmonicField &psi0) {
    validate(d, cfg);
    const auto t = d.grad_tables(cfg.points, false);
    const auto &k = cfg.circulations;
    std::vector<Vec2> g(t.n);
    for (std::size_t l = 0; l < t.n; ++l) {
        Vec2 s = 0.5 * k[l] * k[l] * t.robin_grad[l];
        for (std::size_t j = 0; j < t.n; ++j)
            if (j != l) s -= k[l] * k[j] * t.g(l, j);
        if (!psi0.is_zero()) s += k[l] * psi0.gradient(cfg.points[l]);
        g[l] = s;
    }
    return g;
}

inline Eigen::VectorXd flatten(const std::vector<Vec2> &g) {
    Eigen::VectorXd v(2 * g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        v[2 * i] = g[i].v1;
        v[2 * i + 1] = g[i].v2;
    }
    return v;
}

inline double grad_norm(const std::vector<Vec2> &g) { return flatten(g).norm(); }

/// Finite-difference step used by kr_hessian: 1e-4 times the domain diameter,
/// reduced so that every stencil point stays inside and away from the diagonal.
inline double hessian_step(const DomainModel &d, const VortexConfiguration &cfg) {
    double step = 1e-4 * d.diameter();
    for (const auto &p : cfg.points) step = std::min(step, 0.25 * d.boundary_distance(p));
    if (cfg.size() > 1) step = std::min(step, 0.25 * cfg.min_separation());
    return step;
}

/// Hessian of W by central differences of the analytic gradient, symmetrized.
inline Eigen::MatrixXd kr_hessian(const DomainModel &d, const VortexConfiguration &cfg, const HarmonicField &psi0,
                                  double step = 0.0) {
    validate(d, cfg);
    if (step <= 0.0) step = hessian_step(d, cfg);
    const std::size_t n = 2 * cfg.size();
    const Eigen::VectorXd x = cfg.flatten();
    Eigen::MatrixXd hess(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        Eigen::VectorXd xp = x, xm = x;
        xp[c] += step;
        xm[c] -= step;
        const Eigen::VectorXd gp = flatten(kr_grad(d, cfg.with_positions(xp), psi0));
        const Eigen::VectorXd gm = flatten(kr_grad(d, cfg.with_positions(xm), psi0));
        hess.col(c) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (hess + hess.transpose());
}

// ---------------------------------------------------------------------------
// Critical points

enum class Classification { minimum, maximum, saddle, degenerate };

inline std::string to_string(Classification c) {
    switch (c) {
    case Classification::minimum: return "minimum";
    case Classification::maximum: return "maximum";
    case Classification::saddle: return "saddle";
    case Classification::degenerate: return "degenerate";
    }
    return "unknown";
}

struct CriticalPoint {
    VortexConfiguration configuration;
    double gradient_norm = 0.0;
    double value = 0.0;
    Classification classification = Classification::degenerate;
    std::vector<double> hessian_eigenvalues; // full spectrum, ascending
    int symmetry_modes = 0;                  // zero modes of a continuous symmetry excluded from classification
};

/// Eigenvalue threshold below which a critical point is labelled degenerate.
inline constexpr double classification_threshold = 1e-3;

/// Classifies a Hessian. For rotationally symmetric domains the generator of
/// rotations about the center is an exact null direction at any critical point
/// off the center; that direction is projected out before reading signs.
inline Classification classify(const Eigen::MatrixXd &hess, const DomainModel &d, const VortexConfiguration &cfg,
                               std::vector<double> &eigenvalues, int &symmetry_modes) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(hess);
    eigenvalues.assign(full.eigenvalues().data(), full.eigenvalues().data() + full.eigenvalues().size());
    symmetry_modes = 0;

    std::vector<double> reduced = eigenvalues;
    if (d.rotationally_symmetric()) {
        const Point2 c = d.centroid();
        Eigen::VectorXd tau(hess.rows());
        for (std::size_t i = 0; i < cfg.size(); ++i) {
            tau[2 * i] = -(cfg.points[i].x2 - c.x2);
            tau[2 * i + 1] = cfg.points[i].x1 - c.x1;
        }
        if (tau.norm() > 1e-8) {
            tau.normalize();
            const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(hess.rows(), hess.cols()) - tau * tau.transpose();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> red(proj * hess * proj);
            std::size_t drop = 0;
            double best = -1.0;
            for (Eigen::Index i = 0; i < red.eigenvalues().size(); ++i) {
                const double overlap = std::abs(red.eigenvectors().col(i).dot(tau));
                if (overlap > best) { best = overlap; drop = static_cast<std::size_t>(i); }
            }
            reduced.clear();
            for (Eigen::Index i = 0; i < red.eigenvalues().size(); ++i)
                if (static_cast<std::size_t>(i) != drop) reduced.push_back(red.eigenvalues()[i]);
            symmetry_modes = 1;
        }
    }
    double min_abs = std::numeric_limits<double>::infinity();
    bool any_pos = false, any_neg = false;
    for (double e : reduced) {
        min_abs = std::min(min_abs, std::abs(e));
        any_pos = any_pos || e > 0.0;
        any_neg = any_neg || e < 0.0;
    }
    if (min_abs < classification_threshold) return Classification::degenerate;
    if (any_pos && any_neg) return Classification::saddle;
    return any_pos ? Classification::minimum : Classification::maximum;
}

} // namespace krv
