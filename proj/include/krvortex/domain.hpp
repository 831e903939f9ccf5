#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "conformal_map.hpp"
#include "errors.hpp"
#include "geometry.hpp"

namespace krv {

/// Points closer than this are treated as coincident by the Green's function.
inline constexpr double coincident_threshold = 1e-14;
/// Points closer than this to the boundary are treated as outside.
inline constexpr double boundary_guard = 1e-12;

namespace disk {

// Closed forms on the unit disk from the method of images.
// Q(x, y) = |x - y|^2 + (1 - |x|^2)(1 - |y|^2) = |y|^2 |x - y/|y|^2|^2

inline double image_q(const Point2 &x, const Point2 &y) {
    const double ax = 1.0 - norm2(as_vec(x));
    const double ay = 1.0 - norm2(as_vec(y));
    return norm2(x - y) + ax * ay;
}

inline double green(const Point2 &x, const Point2 &y) {
    return -0.5 * inv_2pi * std::log(norm2(x - y) / image_q(x, y));
}

inline double regular_part(const Point2 &x, const Point2 &y) { return -0.5 * inv_2pi * std::log(image_q(x, y)); }

inline Vec2 regular_part_grad_x(const Point2 &x, const Point2 &y) {
    const Vec2 yv = as_vec(y);
    return inv_2pi * (yv - norm2(yv) * as_vec(x)) / image_q(x, y);
}

inline Vec2 green_grad_x(const Point2 &x, const Point2 &y) {
    const Vec2 d = x - y;
    return -inv_2pi * d / norm2(d) - regular_part_grad_x(x, y);
}

inline double robin(const Point2 &x) { return -inv_2pi * std::log(1.0 - norm2(as_vec(x))); }

inline Vec2 robin_grad(const Point2 &x) { return (1.0 / pi) * as_vec(x) / (1.0 - norm2(as_vec(x))); }

} // namespace disk

/// Disk of given center and radius; the unit disk is the special case radius 1 at the origin.
struct DiskDomain {
    Point2 center{};
    double radius = 1.0;
    bool unit = true;

    Point2 chart(const Point2 &x) const { return as_point((x - center) / radius); }
    bool contains(const Point2 &x) const { return boundary_distance(x) > boundary_guard; }
    double boundary_distance(const Point2 &x) const { return radius - distance(x, center); }
    Box bounding_box() const {
        return {{center.x1 - radius, center.x2 - radius}, {center.x1 + radius, center.x2 + radius}};
    }
    Point2 centroid() const { return center; }
    double diameter() const { return 2.0 * radius; }
    bool convex() const { return true; }

    double green(const Point2 &x, const Point2 &y) const { return disk::green(chart(x), chart(y)); }
    Vec2 green_grad_x(const Point2 &x, const Point2 &y) const {
        return disk::green_grad_x(chart(x), chart(y)) / radius;
    }
    double regular_part(const Point2 &x, const Point2 &y) const {
        return disk::regular_part(chart(x), chart(y)) - inv_2pi * std::log(radius);
    }
    Vec2 regular_part_grad_x(const Point2 &x, const Point2 &y) const {
        return disk::regular_part_grad_x(chart(x), chart(y)) / radius;
    }
    double robin(const Point2 &x) const { return disk::robin(chart(x)) - inv_2pi * std::log(radius); }
    Vec2 robin_grad(const Point2 &x) const { return disk::robin_grad(chart(x)) / radius; }
};

/// Image of the unit disk under an injective power series F. Evaluation pulls
/// points back to the disk, where G_D(x, y) = G_disk(F^-1 x, F^-1 y).
struct ConformalDomain {
    PowerSeriesMap map;
    Point2 centroid_{};
    double diameter_ = 0.0;
    Box box{};
    bool convex_ = false;

    explicit ConformalDomain(PowerSeriesMap m) : map(std::move(m)) {
        const auto &b = map.boundary();
        const std::size_t n = b.size();
        double a2 = 0.0, cx = 0.0, cy = 0.0;
        box = {b[0], b[0]};
        bool left = true;
        for (std::size_t i = 0; i < n; ++i) {
            const auto &p = b[i], &q = b[(i + 1) % n], &r = b[(i + 2) % n];
            const double c = p.x1 * q.x2 - q.x1 * p.x2;
            a2 += c;
            cx += (p.x1 + q.x1) * c;
            cy += (p.x2 + q.x2) * c;
            box.lo = {std::min(box.lo.x1, p.x1), std::min(box.lo.x2, p.x2)};
            box.hi = {std::max(box.hi.x1, p.x1), std::max(box.hi.x2, p.x2)};
            const Vec2 e1 = q - p, e2 = r - q;
            if (e1.v1 * e2.v2 - e1.v2 * e2.v1 < -1e-14 * norm(e1) * norm(e2)) left = false;
        }
        centroid_ = {cx / (3.0 * a2), cy / (3.0 * a2)};
        convex_ = left;
        for (std::size_t i = 0; i < n; i += 4)
            for (std::size_t j = i + 1; j < n; ++j) diameter_ = std::max(diameter_, distance(b[i], b[j]));
    }

    Complex chart(const Point2 &x) const {
        auto w = map.inverse(to_complex(x));
        if (!w || std::abs(*w) >= 1.0) throw OutsideDomain("point is outside the conformal domain");
        return *w;
    }
    bool contains(const Point2 &x) const {
        auto w = map.inverse(to_complex(x));
        return w && std::abs(*w) < 1.0 && boundary_distance(x) > boundary_guard;
    }
    double boundary_distance(const Point2 &x) const {
        const auto &b = map.boundary();
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < b.size(); ++i) d = std::min(d, segment_distance(x, b[i], b[(i + 1) % b.size()]));
        return d;
    }
    Box bounding_box() const { return box; }
    Point2 centroid() const { return centroid_; }
    double diameter() const { return diameter_; }
    bool convex() const { return convex_; }

    // gradient in x of a function u(F^-1 x), given grad_w u as a complex number
    Vec2 pull_gradient(Complex w, Complex grad_w) const { return to_vec(std::conj(1.0 / map.derivative(w)) * grad_w); }

    Complex dd_d1(Complex w1, Complex w2) const {
        // d/dw1 of the divided difference
        const auto &a = map.coefficients();
        Complex out{0.0};
        for (std::size_t n = 2; n < a.size(); ++n) {
            Complex s{0.0};
            for (std::size_t j = 1; j < n; ++j)
                s += static_cast<double>(j) * std::pow(w1, static_cast<int>(j - 1)) *
                     std::pow(w2, static_cast<int>(n - 1 - j));
            out += a[n] * s;
        }
        return out;
    }

    double green(const Point2 &x, const Point2 &y) const {
        return disk::green(to_point(chart(x)), to_point(chart(y)));
    }
    Vec2 green_grad_x(const Point2 &x, const Point2 &y) const {
        const Complex w1 = chart(x), w2 = chart(y);
        return pull_gradient(w1, to_complex(disk::green_grad_x(to_point(w1), to_point(w2))));
    }
    double regular_part(const Point2 &x, const Point2 &y) const {
        const Complex w1 = chart(x), w2 = chart(y);
        return disk::regular_part(to_point(w1), to_point(w2)) - inv_2pi * std::log(std::abs(map.divided_difference(w1, w2)));
    }
    Vec2 regular_part_grad_x(const Point2 &x, const Point2 &y) const {
        const Complex w1 = chart(x), w2 = chart(y);
        const Complex dlog = dd_d1(w1, w2) / map.divided_difference(w1, w2);
        const Complex g = to_complex(disk::regular_part_grad_x(to_point(w1), to_point(w2))) - inv_2pi * std::conj(dlog);
        return pull_gradient(w1, g);
    }
    double robin(const Point2 &x) const {
        const Complex w = chart(x);
        return disk::robin(to_point(w)) - inv_2pi * std::log(std::abs(map.derivative(w)));
    }
    Vec2 robin_grad(const Point2 &x) const {
        const Complex w = chart(x);
        const Complex g = to_complex(disk::robin_grad(to_point(w))) -
                          inv_2pi * std::conj(map.second_derivative(w) / map.derivative(w));
        return pull_gradient(w, g);
    }
};

/// Domain bounded by a closed polyline. The regular part h(., y) is fitted by the
/// method of fundamental solutions: logarithmic charges on a curve offset outward
/// from the boundary plus a constant, least-squares collocated at the boundary
/// nodes. The fitted kernel is symmetrized, h(x, y) = (h~(x, y) + h~(y, x)) / 2.
struct NumericDomain {
    std::vector<Point2> nodes;
    std::vector<Vec2> tangents;      // unit, counterclockwise
    std::vector<double> arc_weights; // trapezoid weights for boundary integrals
    std::vector<Point2> charges;
    double charge_offset = 0.0;
    Eigen::MatrixXd pinv; // (N + 1) x M
    Point2 centroid_{};
    double diameter_ = 0.0;
    Box box{};
    bool convex_ = false;

    /// Per-point data reused by every kernel involving that point.
    struct Footprint {
        Eigen::VectorXd phi, dphi1, dphi2;    // basis values and gradients at the point
        Eigen::VectorXd coef, dcoef1, dcoef2; // fitted coefficients of h~(., p) and their p-gradient
    };

    NumericDomain(std::vector<Point2> boundary, double offset, int charge_count) : charge_offset(offset) {
        if (!boundary.empty() && boundary.front() == boundary.back()) boundary.pop_back();
        const std::size_t m = boundary.size();
        if (m < 16) throw InvalidDomain("numeric boundary needs at least 16 points");
        for (const auto &p : boundary)
            if (!is_finite(p)) throw InvalidDomain("numeric boundary has non-finite coordinates");
        if (!(offset > 0.0) || !std::isfinite(offset)) throw InvalidDomain("charge offset must be positive");
        double a2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const auto &p = boundary[i], &q = boundary[(i + 1) % m];
            a2 += p.x1 * q.x2 - q.x1 * p.x2;
        }
        if (a2 == 0.0) throw InvalidDomain("numeric boundary encloses no area");
        if (a2 < 0.0) std::reverse(boundary.begin(), boundary.end());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 2; j < m; ++j) {
                if (i == 0 && j == m - 1) continue;
                if (segments_intersect(boundary[i], boundary[i + 1], boundary[j], boundary[(j + 1) % m]))
                    throw InvalidDomain("numeric boundary is not a simple polyline");
            }
        nodes = std::move(boundary);
        build_geometry();

        const std::size_t n = charge_count > 0 ? static_cast<std::size_t>(charge_count) : m / 2;
        if (n < 4 || n > m) throw InvalidDomain("charge count must lie in [4, boundary points]");
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t i = (j * m) / n;
            const Point2 q = nodes[i] + offset * perp(tangents[i]);
            if (inside_polygon(q)) throw InvalidDomain("charge offset places a charge inside the domain");
            charges.push_back(q);
        }
        Eigen::MatrixXd a(m, n + 1);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) a(i, j) = std::log(distance(nodes[i], charges[j]));
            a(i, n) = 1.0;
        }
        pinv = a.completeOrthogonalDecomposition().pseudoInverse();
    }

    void build_geometry() {
        const std::size_t m = nodes.size();
        tangents.resize(m);
        arc_weights.resize(m);
        double a2 = 0.0, cx = 0.0, cy = 0.0;
        box = {nodes[0], nodes[0]};
        convex_ = true;
        for (std::size_t i = 0; i < m; ++i) {
            const auto &prev = nodes[(i + m - 1) % m], &p = nodes[i], &next = nodes[(i + 1) % m];
            const Vec2 t = next - prev;
            tangents[i] = t / norm(t);
            arc_weights[i] = 0.5 * (distance(prev, p) + distance(p, next));
            const double c = p.x1 * next.x2 - next.x1 * p.x2;
            a2 += c;
            cx += (p.x1 + next.x1) * c;
            cy += (p.x2 + next.x2) * c;
            box.lo = {std::min(box.lo.x1, p.x1), std::min(box.lo.x2, p.x2)};
            box.hi = {std::max(box.hi.x1, p.x1), std::max(box.hi.x2, p.x2)};
            const Vec2 e1 = p - prev, e2 = next - p;
            if (e1.v1 * e2.v2 - e1.v2 * e2.v1 < -1e-14 * norm(e1) * norm(e2)) convex_ = false;
        }
        centroid_ = {cx / (3.0 * a2), cy / (3.0 * a2)};
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) diameter_ = std::max(diameter_, distance(nodes[i], nodes[j]));
    }

    bool inside_polygon(const Point2 &x) const {
        bool in = false;
        const std::size_t m = nodes.size();
        for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
            const auto &a = nodes[i], &b = nodes[j];
            if ((a.x2 > x.x2) != (b.x2 > x.x2) && x.x1 < (b.x1 - a.x1) * (x.x2 - a.x2) / (b.x2 - a.x2) + a.x1)
                in = !in;
        }
        return in;
    }

    bool contains(const Point2 &x) const { return inside_polygon(x) && boundary_distance(x) > boundary_guard; }
    double boundary_distance(const Point2 &x) const {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nodes.size(); ++i)
            d = std::min(d, segment_distance(x, nodes[i], nodes[(i + 1) % nodes.size()]));
        return d;
    }
    Box bounding_box() const { return box; }
    Point2 centroid() const { return centroid_; }
    double diameter() const { return diameter_; }
    bool convex() const { return convex_; }

    Footprint footprint(const Point2 &p) const {
        const std::size_t m = nodes.size(), n = charges.size();
        Footprint f;
        f.phi.resize(n + 1);
        f.dphi1.resize(n + 1);
        f.dphi2.resize(n + 1);
        for (std::size_t j = 0; j < n; ++j) {
            const Vec2 d = p - charges[j];
            const double r2 = norm2(d);
            f.phi[j] = 0.5 * std::log(r2);
            f.dphi1[j] = d.v1 / r2;
            f.dphi2[j] = d.v2 / r2;
        }
        f.phi[n] = 1.0;
        f.dphi1[n] = f.dphi2[n] = 0.0;
        Eigen::MatrixXd rhs(m, 3);
        for (std::size_t i = 0; i < m; ++i) {
            const Vec2 d = p - nodes[i];
            const double r2 = norm2(d);
            rhs(i, 0) = -0.5 * inv_2pi * std::log(r2);
            rhs(i, 1) = -inv_2pi * d.v1 / r2;
            rhs(i, 2) = -inv_2pi * d.v2 / r2;
        }
        const Eigen::MatrixXd c = pinv * rhs;
        f.coef = c.col(0);
        f.dcoef1 = c.col(1);
        f.dcoef2 = c.col(2);
        return f;
    }

    static double h(const Footprint &x, const Footprint &y) { return 0.5 * (x.phi.dot(y.coef) + y.phi.dot(x.coef)); }
    static Vec2 h_grad_x(const Footprint &x, const Footprint &y) {
        return {0.5 * (x.dphi1.dot(y.coef) + y.phi.dot(x.dcoef1)), 0.5 * (x.dphi2.dot(y.coef) + y.phi.dot(x.dcoef2))};
    }
    static double robin(const Footprint &x) { return x.phi.dot(x.coef); }
    static Vec2 robin_grad(const Footprint &x) {
        return {x.dphi1.dot(x.coef) + x.phi.dot(x.dcoef1), x.dphi2.dot(x.coef) + x.phi.dot(x.dcoef2)};
    }

    double regular_part(const Point2 &x, const Point2 &y) const { return h(footprint(x), footprint(y)); }
    Vec2 regular_part_grad_x(const Point2 &x, const Point2 &y) const { return h_grad_x(footprint(x), footprint(y)); }
    double green(const Point2 &x, const Point2 &y) const {
        return -inv_2pi * std::log(distance(x, y)) - regular_part(x, y);
    }
    Vec2 green_grad_x(const Point2 &x, const Point2 &y) const {
        const Vec2 d = x - y;
        return -inv_2pi * d / norm2(d) - regular_part_grad_x(x, y);
    }
    double robin(const Point2 &x) const { return robin(footprint(x)); }
    Vec2 robin_grad(const Point2 &x) const { return robin_grad(footprint(x)); }

    /// Basis values (rows = points) and fitted coefficients (rows = points) for a batch.
    void batch(std::span<const Point2> pts, Eigen::MatrixXd &phi, Eigen::MatrixXd &coef, Eigen::MatrixXd *dphi1 = nullptr,
               Eigen::MatrixXd *dphi2 = nullptr, Eigen::MatrixXd *dcoef1 = nullptr,
               Eigen::MatrixXd *dcoef2 = nullptr) const {
        const std::size_t m = nodes.size(), n = charges.size(), p = pts.size();
        const bool grads = dphi1 != nullptr;
        phi.resize(p, n + 1);
        if (grads) {
            dphi1->resize(p, n + 1);
            dphi2->resize(p, n + 1);
        }
        for (std::size_t k = 0; k < p; ++k) {
            for (std::size_t j = 0; j < n; ++j) {
                const Vec2 d = pts[k] - charges[j];
                const double r2 = norm2(d);
                phi(k, j) = 0.5 * std::log(r2);
                if (grads) {
                    (*dphi1)(k, j) = d.v1 / r2;
                    (*dphi2)(k, j) = d.v2 / r2;
                }
            }
            phi(k, n) = 1.0;
            if (grads) (*dphi1)(k, n) = (*dphi2)(k, n) = 0.0;
        }
        Eigen::MatrixXd b(m, p), b1, b2;
        if (grads) {
            b1.resize(m, p);
            b2.resize(m, p);
        }
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t i = 0; i < m; ++i) {
                const Vec2 d = pts[k] - nodes[i];
                const double r2 = norm2(d);
                b(i, k) = -0.5 * inv_2pi * std::log(r2);
                if (grads) {
                    b1(i, k) = -inv_2pi * d.v1 / r2;
                    b2(i, k) = -inv_2pi * d.v2 / r2;
                }
            }
        coef = (pinv * b).transpose();
        if (grads) {
            *dcoef1 = (pinv * b1).transpose();
            *dcoef2 = (pinv * b2).transpose();
        }
    }
};

/// Values of G and H at a set of points: green[i * n + j] = G(x_i, x_j) for i != j.
struct GreenTables {
    std::size_t n = 0;
    std::vector<double> green;
    std::vector<double> robin;
    double g(std::size_t i, std::size_t j) const { return green[i * n + j]; }
};

/// Gradients at a set of points: grad[i * n + j] = grad_x G(x_i, x_j) for i != j.
struct GreenGradTables {
    std::size_t n = 0;
    std::vector<Vec2> green_grad_x;
    std::vector<Vec2> robin_grad;
    const Vec2 &g(std::size_t i, std::size_t j) const { return green_grad_x[i * n + j]; }
};

/// A simply-connected bounded planar domain with Green's function machinery.
/// Cheap to copy; the underlying representation is immutable and shared.
class DomainModel {
  public:
    enum class Variant { unit_disk, scaled_disk, conformal, numeric };
    using Storage = std::variant<DiskDomain, ConformalDomain, NumericDomain>;

    static DomainModel unit_disk() { return DomainModel(Variant::unit_disk, DiskDomain{}); }

    static DomainModel scaled_disk(double radius, Point2 center) {
        if (!(radius > 0.0) || !std::isfinite(radius) || !is_finite(center))
            throw InvalidDomain("scaled disk needs a positive radius and finite center");
        return DomainModel(Variant::scaled_disk, DiskDomain{center, radius, false});
    }

    static DomainModel conformal(std::vector<Complex> coefficients) {
        return DomainModel(Variant::conformal, ConformalDomain(PowerSeriesMap(std::move(coefficients))));
    }

    static DomainModel numeric(std::vector<Point2> boundary, double charge_offset, int charges = 0) {
        return DomainModel(Variant::numeric, NumericDomain(std::move(boundary), charge_offset, charges));
    }

    Variant variant() const { return variant_; }
    const Storage &storage() const { return *impl_; }
    const DiskDomain *as_disk() const { return std::get_if<DiskDomain>(impl_.get()); }
    const ConformalDomain *as_conformal() const { return std::get_if<ConformalDomain>(impl_.get()); }
    const NumericDomain *as_numeric() const { return std::get_if<NumericDomain>(impl_.get()); }

    bool contains(const Point2 &x) const {
        return is_finite(x) && std::visit([&](const auto &d) { return d.contains(x); }, *impl_);
    }
    double boundary_distance(const Point2 &x) const {
        return std::visit([&](const auto &d) { return d.boundary_distance(x); }, *impl_);
    }
    Box bounding_box() const { return std::visit([](const auto &d) { return d.bounding_box(); }, *impl_); }
    Point2 centroid() const { return std::visit([](const auto &d) { return d.centroid(); }, *impl_); }
    double diameter() const { return std::visit([](const auto &d) { return d.diameter(); }, *impl_); }
    bool is_convex() const { return std::visit([](const auto &d) { return d.convex(); }, *impl_); }
    /// Disks are invariant under rotation about their center.
    bool rotationally_symmetric() const { return as_disk() != nullptr; }

    void require_inside(const Point2 &x) const {
        if (!contains(x)) throw OutsideDomain("point (" + std::to_string(x.x1) + ", " + std::to_string(x.x2) + ") is outside the domain");
    }

    template <class Fn> decltype(auto) visit(Fn &&fn) const { return std::visit(std::forward<Fn>(fn), *impl_); }

    /// G and H on a point set (points must be interior and pairwise distinct).
    GreenTables tables(std::span<const Point2> pts) const {
        check_points(pts);
        GreenTables t;
        t.n = pts.size();
        t.green.assign(t.n * t.n, 0.0);
        t.robin.resize(t.n);
        if (const auto *nd = as_numeric()) {
            std::vector<NumericDomain::Footprint> f;
            for (const auto &p : pts) f.push_back(nd->footprint(p));
            for (std::size_t i = 0; i < t.n; ++i) {
                t.robin[i] = NumericDomain::robin(f[i]);
                for (std::size_t j = 0; j < t.n; ++j)
                    if (i != j)
                        t.green[i * t.n + j] = -inv_2pi * std::log(distance(pts[i], pts[j])) - NumericDomain::h(f[i], f[j]);
            }
            return t;
        }
        visit([&](const auto &d) {
            for (std::size_t i = 0; i < t.n; ++i) {
                t.robin[i] = d.robin(pts[i]);
                for (std::size_t j = 0; j < t.n; ++j)
                    if (i != j) t.green[i * t.n + j] = d.green(pts[i], pts[j]);
            }
        });
        return t;
    }

    /// grad_x G and grad H on a point set (points must be interior and pairwise distinct).
    GreenGradTables grad_tables(std::span<const Point2> pts, bool check = true) const {
        if (check) check_points(pts);
        GreenGradTables t;
        t.n = pts.size();
        t.green_grad_x.assign(t.n * t.n, Vec2{});
        t.robin_grad.resize(t.n);
        if (const auto *nd = as_numeric()) {
            Eigen::MatrixXd phi, coef, d1, d2, c1, c2;
            nd->batch(pts, phi, coef, &d1, &d2, &c1, &c2);
            const Eigen::MatrixXd g1 = 0.5 * (d1 * coef.transpose() + c1 * phi.transpose());
            const Eigen::MatrixXd g2 = 0.5 * (d2 * coef.transpose() + c2 * phi.transpose());
            for (std::size_t i = 0; i < t.n; ++i) {
                t.robin_grad[i] = {2.0 * g1(i, i), 2.0 * g2(i, i)};
                for (std::size_t j = 0; j < t.n; ++j)
                    if (i != j) {
                        const Vec2 d = pts[i] - pts[j];
                        t.green_grad_x[i * t.n + j] = -inv_2pi * d / norm2(d) - Vec2{g1(i, j), g2(i, j)};
                    }
            }
            return t;
        }
        visit([&](const auto &d) {
            for (std::size_t i = 0; i < t.n; ++i) {
                t.robin_grad[i] = d.robin_grad(pts[i]);
                for (std::size_t j = 0; j < t.n; ++j)
                    if (i != j && distance(pts[i], pts[j]) >= coincident_threshold)
                        t.green_grad_x[i * t.n + j] = d.green_grad_x(pts[i], pts[j]);
            }
        });
        return t;
    }

    /// h(x_t, y_s) for all target/source pairs; rows = targets.
    Eigen::MatrixXd regular_part_matrix(std::span<const Point2> targets, std::span<const Point2> sources) const {
        Eigen::MatrixXd out(targets.size(), sources.size());
        if (const auto *nd = as_numeric()) {
            Eigen::MatrixXd pt, ct, ps, cs;
            nd->batch(targets, pt, ct);
            nd->batch(sources, ps, cs);
            out = 0.5 * (pt * cs.transpose() + ct * ps.transpose());
            return out;
        }
        visit([&](const auto &d) {
            for (std::size_t t = 0; t < targets.size(); ++t)
                for (std::size_t s = 0; s < sources.size(); ++s) out(t, s) = d.regular_part(targets[t], sources[s]);
        });
        return out;
    }

    /// grad_x h(x_t, y_s) components for all target/source pairs; rows = targets.
    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> regular_part_grad_matrices(std::span<const Point2> targets,
                                                                           std::span<const Point2> sources) const {
        Eigen::MatrixXd o1(targets.size(), sources.size()), o2(targets.size(), sources.size());
        if (const auto *nd = as_numeric()) {
            Eigen::MatrixXd pt, ct, d1, d2, c1, c2, ps, cs;
            nd->batch(targets, pt, ct, &d1, &d2, &c1, &c2);
            nd->batch(sources, ps, cs);
            o1 = 0.5 * (d1 * cs.transpose() + c1 * ps.transpose());
            o2 = 0.5 * (d2 * cs.transpose() + c2 * ps.transpose());
            return {o1, o2};
        }
        visit([&](const auto &d) {
            for (std::size_t t = 0; t < targets.size(); ++t)
                for (std::size_t s = 0; s < sources.size(); ++s) {
                    const Vec2 g = d.regular_part_grad_x(targets[t], sources[s]);
                    o1(t, s) = g.v1;
                    o2(t, s) = g.v2;
                }
        });
        return {o1, o2};
    }

  private:
    DomainModel(Variant v, Storage s) : variant_(v), impl_(std::make_shared<const Storage>(std::move(s))) {}

    void check_points(std::span<const Point2> pts) const {
        for (const auto &p : pts) require_inside(p);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                if (distance(pts[i], pts[j]) < coincident_threshold) throw CoincidentPoints("coincident points");
    }

    Variant variant_;
    std::shared_ptr<const Storage> impl_;
};

inline std::string to_string(DomainModel::Variant v) {
    switch (v) {
    case DomainModel::Variant::unit_disk: return "unit_disk";
    case DomainModel::Variant::scaled_disk: return "scaled_disk";
    case DomainModel::Variant::conformal: return "conformal";
    case DomainModel::Variant::numeric: return "numeric";
    }
    return "unknown";
}

/// Closed polyline of an ellipse with semi-axes (a, b), counterclockwise.
inline std::vector<Point2> ellipse_boundary(double a, double b, int points, Point2 center = {}) {
    std::vector<Point2> out;
    out.reserve(points);
    for (int i = 0; i < points; ++i) {
        const double t = 2.0 * pi * i / points;
        out.push_back({center.x1 + a * std::cos(t), center.x2 + b * std::sin(t)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pointwise Green's function operations

namespace detail {
inline void check_pair(const DomainModel &d, const Point2 &x, const Point2 &y) {
    d.require_inside(x);
    d.require_inside(y);
    if (distance(x, y) < coincident_threshold) throw CoincidentPoints("G(x, y) is singular at x == y");
}
} // namespace detail

/// Green's function of -Laplace with zero Dirichlet data.
inline double green(const DomainModel &d, const Point2 &x, const Point2 &y) {
    detail::check_pair(d, x, y);
    return d.visit([&](const auto &s) { return s.green(x, y); });
}

inline Vec2 green_grad_x(const DomainModel &d, const Point2 &x, const Point2 &y) {
    detail::check_pair(d, x, y);
    return d.visit([&](const auto &s) { return s.green_grad_x(x, y); });
}

/// h(x, y) = -(1/2pi) ln|x - y| - G(x, y); at x == y returns H(x).
inline double regular_part(const DomainModel &d, const Point2 &x, const Point2 &y) {
    d.require_inside(x);
    d.require_inside(y);
    return d.visit([&](const auto &s) { return s.regular_part(x, y); });
}

inline Vec2 regular_part_grad_x(const DomainModel &d, const Point2 &x, const Point2 &y) {
    d.require_inside(x);
    d.require_inside(y);
    return d.visit([&](const auto &s) { return s.regular_part_grad_x(x, y); });
}

/// Robin function H(x) = h(x, x).
inline double robin(const DomainModel &d, const Point2 &x) {
    d.require_inside(x);
    return d.visit([&](const auto &s) { return s.robin(x); });
}

inline Vec2 robin_grad(const DomainModel &d, const Point2 &x) {
    d.require_inside(x);
    return d.visit([&](const auto &s) { return s.robin_grad(x); });
}

} // namespace krv
