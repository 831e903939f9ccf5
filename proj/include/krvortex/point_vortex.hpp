#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "domain.hpp"
#include "errors.hpp"
#include "harmonic.hpp"
#include "kirchhoff_routh.hpp"

namespace krv {

/// Sampled solution of the point-vortex system.
struct Trajectory {
    std::vector<double> times;
    std::vector<VortexConfiguration> states;
    std::vector<double> hamiltonian_values;

    std::size_t size() const { return times.size(); }
    double max_hamiltonian_drift() const {
        double m = 0.0;
        for (double w : hamiltonian_values) m = std::max(m, std::abs(w - hamiltonian_values.front()));
        return m;
    }
};

/// Integration halted because two vortices, or a vortex and the boundary, came
/// within the stop radius. Carries everything integrated so far.
class CollisionStop : public SolverError {
  public:
    CollisionStop(const std::string &what, Trajectory partial) : SolverError(what), partial_(std::move(partial)) {}
    const Trajectory &partial() const { return partial_; }

  private:
    Trajectory partial_;
};

inline constexpr double collision_radius = 1e-6;

/// Velocity of vortex l: perp(grad_{x_l} W) / kappa_l.
inline std::vector<Vec2> pv_velocity(const DomainModel &d, const VortexConfiguration &cfg, const HarmonicField &psi0) {
    auto g = kr_grad(d, cfg, psi0);
    for (std::size_t l = 0; l < g.size(); ++l) g[l] = perp(g[l]) / cfg.circulations[l];
    return g;
}

struct IntegrationOptions {
    bool backward = false;   // integrate the time-reversed system dx/dt = -v
    long max_steps = 10000000;
    double initial_step = 0.0; // 0 picks one from the initial velocity
};

namespace detail {

inline Eigen::VectorXd pv_rhs(const DomainModel &d, const VortexConfiguration &shape, const Eigen::VectorXd &y,
                              const HarmonicField &psi0, double sign) {
    const auto v = pv_velocity(d, shape.with_positions(y), psi0);
    Eigen::VectorXd out(y.size());
    for (std::size_t l = 0; l < v.size(); ++l) {
        out[2 * l] = sign * v[l].v1;
        out[2 * l + 1] = sign * v[l].v2;
    }
    return out;
}

inline double closest_approach(const DomainModel &d, const VortexConfiguration &c) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto &p : c.points) m = std::min(m, d.contains(p) ? d.boundary_distance(p) : 0.0);
    if (c.size() > 1) m = std::min(m, c.min_separation());
    return m;
}

} // namespace detail

/// Dormand-Prince 5(4) with absolute error control: each accepted step has
/// embedded error estimate (max norm) at most tol. Every accepted step is
/// recorded. Throws CollisionStop when a vortex comes within 1e-6 of another or
/// of the boundary, StepUnderflow when the step would drop below 1e-14.
inline Trajectory pv_integrate(const DomainModel &d, const VortexConfiguration &cfg0, const HarmonicField &psi0, double T,
                               double tol, const IntegrationOptions &opt = {}) {
    validate(d, cfg0);
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("integration time must be positive");
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");

    // Dormand-Prince tableau
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                     e7 = -1.0 / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;

    const double sign = opt.backward ? -1.0 : 1.0;
    Trajectory traj;
    VortexConfiguration state = cfg0;
    Eigen::VectorXd y = cfg0.flatten();
    double t = 0.0;
    traj.times.push_back(t);
    traj.states.push_back(state);
    traj.hamiltonian_values.push_back(kr_value(d, state, psi0));

    if (detail::closest_approach(d, state) < collision_radius)
        throw CollisionStop("initial configuration is within the collision radius", traj);

    auto f = [&](const Eigen::VectorXd &z) { return detail::pv_rhs(d, cfg0, z, psi0, sign); };
    Eigen::VectorXd k1 = f(y);
    double h = opt.initial_step;
    if (!(h > 0.0)) {
        const double speed = k1.lpNorm<Eigen::Infinity>();
        h = speed > 0.0 ? std::min(T, 0.01 * std::pow(tol, 0.2) / speed) : T;
    }

    for (long step = 0; t < T; ++step) {
        if (step >= opt.max_steps) throw SolverFailure("step limit reached at t = " + std::to_string(t));
        h = std::min(h, T - t);
        if (h < 1e-14) throw StepUnderflow("step size fell below 1e-14 at t = " + std::to_string(t));
        Eigen::VectorXd y5, k7;
        double err = 0.0;
        bool stage_ok = true;
        try {
            const Eigen::VectorXd k2 = f(y + h * a21 * k1);
            const Eigen::VectorXd k3 = f(y + h * (a31 * k1 + a32 * k2));
            const Eigen::VectorXd k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            const Eigen::VectorXd k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const Eigen::VectorXd k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            k7 = f(y5);
            err = (h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).lpNorm<Eigen::Infinity>();
        } catch (const InputError &) {
            // a stage left the domain or hit the diagonal
            stage_ok = false;
        }
        if (!stage_ok || !std::isfinite(err)) {
            h *= 0.25;
            continue;
        }
        if (err <= tol) {
            t = (T - t - h <= 1e-15 * T) ? T : t + h;
            y = y5;
            k1 = k7;
            state = cfg0.with_positions(y);
            traj.times.push_back(t);
            traj.states.push_back(state);
            traj.hamiltonian_values.push_back(kr_value(d, state, psi0));
            if (detail::closest_approach(d, state) < collision_radius)
                throw CollisionStop("vortices within 1e-6 of each other or the boundary at t = " + std::to_string(t),
                                    traj);
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(tol / err, 0.2), 0.2, 5.0);
        h *= factor;
    }
    return traj;
}

} // namespace krv
