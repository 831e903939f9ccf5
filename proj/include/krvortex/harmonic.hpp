#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "domain.hpp"
#include "errors.hpp"
#include "geometry.hpp"

namespace krv {

/// Boundary flux g of the velocity field, v . n = g on the boundary.
struct NeumannData {
    std::function<double(const Point2 &)> g;

    static NeumannData zero() {
        return {[](const Point2 &) { return 0.0; }};
    }
};

/// Harmonic stream function psi0 carrying the boundary flux.
///
/// Three representations: identically zero; a power series Re sum c_n w^n in the
/// disk chart w (disk and conformal domains); a sum of logarithmic charges plus a
/// constant (numeric domains).
class HarmonicField {
  public:
    enum class Kind { zero, chart_series, charges };

    HarmonicField() = default;
    static HarmonicField zero() { return {}; }

    static HarmonicField chart_series(DomainModel domain, std::vector<Complex> c) {
        HarmonicField f;
        f.kind_ = Kind::chart_series;
        f.domain_ = std::move(domain);
        f.series_ = std::move(c);
        return f;
    }

    static HarmonicField charges(std::vector<Point2> q, std::vector<double> c, double constant) {
        HarmonicField f;
        f.kind_ = Kind::charges;
        f.charges_ = std::move(q);
        f.charge_coef_ = std::move(c);
        f.constant_ = constant;
        return f;
    }

    Kind kind() const { return kind_; }
    bool is_zero() const { return kind_ == Kind::zero; }
    const std::vector<Complex> &series() const { return series_; }

    double value(const Point2 &x) const {
        switch (kind_) {
        case Kind::zero: return 0.0;
        case Kind::chart_series: return series_value(chart(x)).real();
        case Kind::charges: {
            double s = constant_;
            for (std::size_t j = 0; j < charges_.size(); ++j) s += charge_coef_[j] * std::log(distance(x, charges_[j]));
            return s;
        }
        }
        return 0.0;
    }

    Vec2 gradient(const Point2 &x) const {
        switch (kind_) {
        case Kind::zero: return {};
        case Kind::chart_series: {
            const Complex w = chart(x);
            // psi = Re P(w) has gradient conj(P'(w) dw/dx)
            return to_vec(std::conj(series_derivative(w) * chart_jacobian(w)));
        }
        case Kind::charges: {
            Vec2 g{};
            for (std::size_t j = 0; j < charges_.size(); ++j) {
                const Vec2 d = x - charges_[j];
                g += charge_coef_[j] / norm2(d) * d;
            }
            return g;
        }
        }
        return {};
    }

  private:
    Complex chart(const Point2 &x) const {
        if (const auto *dd = domain_.as_disk()) return to_complex(dd->chart(x));
        return domain_.as_conformal()->chart(x);
    }
    // dw/dx of the chart as a complex multiplier
    Complex chart_jacobian(Complex w) const {
        if (const auto *dd = domain_.as_disk()) return Complex{1.0 / dd->radius};
        return 1.0 / domain_.as_conformal()->map.derivative(w);
    }
    Complex series_value(Complex w) const {
        Complex s{0.0};
        for (auto it = series_.rbegin(); it != series_.rend(); ++it) s = s * w + *it;
        return s;
    }
    Complex series_derivative(Complex w) const {
        Complex s{0.0};
        for (std::size_t n = series_.size(); n-- > 1;) s = s * w + static_cast<double>(n) * series_[n];
        return s;
    }

    Kind kind_ = Kind::zero;
    DomainModel domain_ = DomainModel::unit_disk();
    std::vector<Complex> series_;
    std::vector<Point2> charges_;
    std::vector<double> charge_coef_;
    double constant_ = 0.0;
};

namespace detail {

inline constexpr int psi0_fourier_samples = 512;

inline HarmonicField solve_psi0_chart(const DomainModel &d, const NeumannData &data) {
    const int m = psi0_fourier_samples;
    // dPhi/dtheta = g |F'| along the circle, Phi = boundary values of psi0
    std::vector<double> gt(m);
    double total = 0.0, mass = 0.0;
    for (int j = 0; j < m; ++j) {
        const double t = 2.0 * pi * j / m;
        const Complex w = std::polar(1.0, t);
        Point2 z;
        double speed;
        if (const auto *dd = d.as_disk()) {
            z = dd->center + dd->radius * to_vec(w);
            speed = dd->radius;
        } else {
            const auto &map = d.as_conformal()->map;
            z = to_point(map.value(w));
            speed = std::abs(map.derivative(w));
        }
        gt[j] = data.g(z) * speed;
        total += gt[j];
        mass += std::abs(gt[j]);
    }
    if (std::abs(total) > 1e-10 * mass) throw IncompatibleData("boundary flux does not integrate to zero");

    std::vector<Complex> c(m / 2, Complex{0.0});
    double scale = 0.0;
    for (int n = 1; n < m / 2; ++n) {
        double alpha = 0.0, beta = 0.0;
        for (int j = 0; j < m; ++j) {
            const double t = 2.0 * pi * static_cast<double>((static_cast<long>(n) * j) % m) / m;
            alpha += gt[j] * std::cos(t);
            beta += gt[j] * std::sin(t);
        }
        alpha *= 2.0 / m;
        beta *= 2.0 / m;
        c[n] = Complex{-beta, -alpha} / static_cast<double>(n);
        scale = std::max(scale, std::abs(c[n]));
    }
    while (c.size() > 1 && std::abs(c.back()) <= 1e-16 * scale) c.pop_back();
    if (scale == 0.0) return HarmonicField::zero();

    auto field = HarmonicField::chart_series(d, c);
    c[0] = Complex{-field.value(d.centroid()), 0.0};
    return HarmonicField::chart_series(d, std::move(c));
}

inline HarmonicField solve_psi0_charges(const NumericDomain &nd, const NeumannData &data, Point2 centroid) {
    const std::size_t m = nd.nodes.size(), n = nd.charges.size();
    Eigen::VectorXd rhs(m);
    double total = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        rhs[i] = data.g(nd.nodes[i]);
        total += rhs[i] * nd.arc_weights[i];
        mass += std::abs(rhs[i]) * nd.arc_weights[i];
    }
    // trapezoid quadrature on the polyline limits how well the compatibility can be checked
    if (std::abs(total) > 1e-4 * mass) throw IncompatibleData("boundary flux does not integrate to zero");
    if (mass == 0.0) return HarmonicField::zero();

    // tangential derivative of psi0 equals g: grad(ln|x - q|) . t = (x - q) . t / |x - q|^2
    Eigen::MatrixXd a(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const Vec2 dv = nd.nodes[i] - nd.charges[j];
            a(i, j) = dot(dv, nd.tangents[i]) / norm2(dv);
        }
    const Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(rhs);
    const double resid = (a * coef - rhs).norm() / rhs.norm();
    if (!std::isfinite(resid) || resid > 1e-3)
        throw SolverFailure("psi0 collocation residual " + std::to_string(resid) + " exceeds 1e-3");

    std::vector<double> c(coef.data(), coef.data() + n);
    auto field = HarmonicField::charges(nd.charges, c, 0.0);
    const double shift = field.value(centroid);
    return HarmonicField::charges(nd.charges, std::move(c), -shift);
}

} // namespace detail

/// Harmonic psi0 with tangential derivative g on the boundary (the harmonic
/// conjugate of the Neumann problem with data g), normalized by psi0(centroid) = 0.
inline HarmonicField solve_psi0(const DomainModel &d, const NeumannData &g) {
    if (const auto *nd = d.as_numeric()) return detail::solve_psi0_charges(*nd, g, d.centroid());
    return detail::solve_psi0_chart(d, g);
}

} // namespace krv
