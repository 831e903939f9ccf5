#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace krv {

/// Scalar field on a uniform Cartesian grid of n1 x n2 cells over `box`, with a
/// mask of active cells. Cells are stored row-major, index = j * n1 + i, where i
/// runs along x1. Values outside the mask are zero.
class GridField {
  public:
    GridField() = default;

    GridField(Box box, int n1, int n2) : box_(box), n1_(n1), n2_(n2) {
        if (n1 <= 0 || n2 <= 0) throw InvalidArgument("grid resolution must be positive");
        if (!(box.width() > 0.0) || !(box.height() > 0.0)) throw InvalidArgument("grid box must have positive extent");
        h1_ = box.width() / n1;
        h2_ = box.height() / n2;
        values_.assign(static_cast<std::size_t>(n1) * n2, 0.0);
        mask_.assign(values_.size(), 1);
    }

    const Box &box() const { return box_; }
    int n1() const { return n1_; }
    int n2() const { return n2_; }
    double h1() const { return h1_; }
    double h2() const { return h2_; }
    double cell_area() const { return h1_ * h2_; }
    std::size_t size() const { return values_.size(); }

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n1_ + i; }
    int col(std::size_t k) const { return static_cast<int>(k % n1_); }
    int row(std::size_t k) const { return static_cast<int>(k / n1_); }

    Point2 center(std::size_t k) const {
        return {box_.lo.x1 + (col(k) + 0.5) * h1_, box_.lo.x2 + (row(k) + 0.5) * h2_};
    }
    Box cell_box(std::size_t k) const {
        const Point2 lo{box_.lo.x1 + col(k) * h1_, box_.lo.x2 + row(k) * h2_};
        return {lo, {lo.x1 + h1_, lo.x2 + h2_}};
    }
    /// Cell containing p, if p lies in the box.
    std::optional<std::size_t> locate(const Point2 &p) const {
        const double fi = (p.x1 - box_.lo.x1) / h1_, fj = (p.x2 - box_.lo.x2) / h2_;
        if (!(fi >= 0.0 && fj >= 0.0 && fi < n1_ && fj < n2_)) return std::nullopt;
        return index(static_cast<int>(fi), static_cast<int>(fj));
    }

    bool active(std::size_t k) const { return mask_[k] != 0; }
    void set_active(std::size_t k, bool on) {
        mask_[k] = on ? 1 : 0;
        if (!on) values_[k] = 0.0;
    }
    double value(std::size_t k) const { return values_[k]; }
    void set(std::size_t k, double v) {
        if (!active(k) && v != 0.0) throw InvalidArgument("cannot assign a value outside the grid mask");
        values_[k] = v;
    }
    const std::vector<double> &values() const { return values_; }
    const std::vector<std::uint8_t> &mask() const { return mask_; }

    /// Midpoint-rule integral of the field.
    double integral() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s * cell_area();
    }

    /// Indices of cells with nonzero value.
    std::vector<std::size_t> support() const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < values_.size(); ++k)
            if (values_[k] != 0.0) out.push_back(k);
        return out;
    }

    /// Same field on a grid refined by `factor` in each direction.
    GridField refined(int factor) const {
        GridField out(box_, n1_ * factor, n2_ * factor);
        for (std::size_t k = 0; k < out.size(); ++k) {
            const std::size_t parent = index(out.col(k) / factor, out.row(k) / factor);
            out.mask_[k] = mask_[parent];
            out.values_[k] = values_[parent];
        }
        return out;
    }

  private:
    Box box_{};
    int n1_ = 0;
    int n2_ = 0;
    double h1_ = 0.0;
    double h2_ = 0.0;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

namespace kernel {

namespace detail {

// Phi with d^2 Phi / du dv = ln sqrt(u^2 + v^2), Phi(0, v) = Phi(u, 0) = 0
inline double log_antiderivative2(double u, double v) {
    if (u == 0.0 || v == 0.0) return 0.0;
    const double r = std::hypot(u, v);
    return u * v * std::log(r) - 1.5 * u * v + 0.5 * u * u * std::atan(v / u) + 0.5 * v * v * std::atan(u / v);
}

// L(u, v) = int_0^v ln sqrt(u^2 + s^2) ds
inline double log_antiderivative1(double u, double v) {
    if (v == 0.0) return 0.0;
    if (u == 0.0) return v * std::log(std::abs(v)) - v;
    return v * std::log(std::hypot(u, v)) - v + u * std::atan(v / u);
}

} // namespace detail

/// Exact integral of ln|x - y| over y in the rectangle.
inline double rect_log_integral(const Point2 &x, const Box &cell) {
    const double uh = x.x1 - cell.lo.x1, ul = x.x1 - cell.hi.x1;
    const double vh = x.x2 - cell.lo.x2, vl = x.x2 - cell.hi.x2;
    using detail::log_antiderivative2;
    return log_antiderivative2(uh, vh) - log_antiderivative2(ul, vh) - log_antiderivative2(uh, vl) +
           log_antiderivative2(ul, vl);
}

/// Exact integral of (x - y) / |x - y|^2 over y in the rectangle (the x-gradient of
/// rect_log_integral).
inline Vec2 rect_log_gradient(const Point2 &x, const Box &cell) {
    const double uh = x.x1 - cell.lo.x1, ul = x.x1 - cell.hi.x1;
    const double vh = x.x2 - cell.lo.x2, vl = x.x2 - cell.hi.x2;
    using detail::log_antiderivative1;
    const double g1 = (log_antiderivative1(uh, vh) - log_antiderivative1(uh, vl)) -
                      (log_antiderivative1(ul, vh) - log_antiderivative1(ul, vl));
    const double g2 = (log_antiderivative1(vh, uh) - log_antiderivative1(vh, ul)) -
                      (log_antiderivative1(vl, uh) - log_antiderivative1(vl, ul));
    return {g1, g2};
}

} // namespace kernel

/// Gradient of f(x) = int ln|x - y| omega(y) dy, i.e. int (x - y)/|x - y|^2 omega(y) dy,
/// exact for the piecewise-constant field. The midpoint rule is off by O(h^2) next to x.
inline Vec2 log_potential_grad(const GridField &omega, const Point2 &x) {
    if (!is_finite(x)) throw InvalidArgument("evaluation point must be finite");
    Vec2 g{};
    for (std::size_t k = 0; k < omega.size(); ++k) {
        const double w = omega.value(k);
        if (w != 0.0) g += w * kernel::rect_log_gradient(x, omega.cell_box(k));
    }
    return g;
}

/// f(x) = int ln|x - y| omega(y) dy, exact cellwise.
inline double log_potential(const GridField &omega, const Point2 &x) {
    double f = 0.0;
    for (std::size_t k = 0; k < omega.size(); ++k) {
        const double w = omega.value(k);
        if (w != 0.0) f += w * kernel::rect_log_integral(x, omega.cell_box(k));
    }
    return f;
}

} // namespace krv
