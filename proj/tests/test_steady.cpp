#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "krvortex/steady.hpp"

using namespace krv;

namespace {

double dipole_root() {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid * mid * mid * mid + 4.0 * mid * mid - 1.0 < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Grid of step 0.01 whose cell centers include the origin and (0.5, 0).
GridField disk_grid(double half = 0.605, int n = 121) {
    GridField f({{-half, -half}, {half, half}}, n, n);
    for (std::size_t k = 0; k < f.size(); ++k) f.set_active(k, norm(as_vec(f.center(k))) < 0.95);
    return f;
}

void fill_disk(GridField &f, Point2 c, double r, double mass) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < f.size(); ++k) count += f.active(k) && distance(f.center(k), c) < r;
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f.active(k) && distance(f.center(k), c) < r) f.set(k, mass / (count * f.cell_area()));
}

TurkingtonOptions serial() {
    TurkingtonOptions o;
    o.threads = 1;
    return o;
}

} // namespace

TEST(TestFunction, BumpAndGradient) {
    const TestFunction phi{{0.1, -0.2}, 0.3, 2.0};
    EXPECT_DOUBLE_EQ(phi.value(phi.center), 2.0);
    EXPECT_EQ(phi.value({0.41, -0.2}), 0.0);
    EXPECT_EQ(phi.gradient({0.1, 0.2}).v1, 0.0);
    const Point2 x{0.2, -0.1};
    const double h = 1e-6;
    const Vec2 g = phi.gradient(x);
    EXPECT_NEAR(g.v1, (phi.value({x.x1 + h, x.x2}) - phi.value({x.x1 - h, x.x2})) / (2 * h), 1e-8);
    EXPECT_NEAR(g.v2, (phi.value({x.x1, x.x2 + h}) - phi.value({x.x1, x.x2 - h})) / (2 * h), 1e-8);
    double sup = 0.0;
    for (int i = 0; i <= 30000; ++i) sup = std::max(sup, norm(phi.gradient({0.1 + 0.3 * i / 30000.0, -0.2})));
    EXPECT_NEAR(phi.gradient_sup(), sup, 1e-6);
}

TEST(StreamOf, ZeroFieldGivesPsi0) {
    const auto d = DomainModel::unit_disk();
    const auto psi0 = solve_psi0(d, {[](const Point2 &z) { return std::cos(std::atan2(z.x2, z.x1)); }});
    auto f = disk_grid(0.505, 101);
    const auto psi = stream_of(f, d, psi0);
    for (std::size_t k = 0; k < f.size(); k += 37) EXPECT_NEAR(psi.value(k), psi0.value(f.center(k)), 1e-15);
}

TEST(StreamOf, FarFieldOfACentralPatchIsTheMonopole) {
    const auto d = DomainModel::unit_disk();
    auto f = disk_grid();
    fill_disk(f, {0.0, 0.0}, 0.1, 1.0);
    EXPECT_NEAR(f.integral(), 1.0, 1e-12);
    const auto psi = stream_of(f, d, HarmonicField::zero());
    const auto k = f.locate({0.5, 0.0});
    ASSERT_TRUE(k.has_value());
    EXPECT_NEAR(psi.value(*k), std::log(2.0) / (2.0 * pi), 1e-3);
}

TEST(StreamOf, Superposition) {
    const auto d = DomainModel::conformal({{0.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}, {0.08, 0.0}});
    GridField a({{-0.4, -0.4}, {0.4, 0.4}}, 40, 40), b = a, sum = a;
    for (std::size_t k = 0; k < a.size(); ++k) {
        a.set_active(k, true);
        b.set_active(k, true);
        sum.set_active(k, true);
    }
    fill_disk(a, {0.1, 0.05}, 0.1, 1.0);
    fill_disk(b, {-0.15, -0.1}, 0.12, -0.7);
    for (std::size_t k = 0; k < a.size(); ++k) sum.set(k, a.value(k) + b.value(k));
    const auto psi0 = HarmonicField::charges({{3.0, 0.0}}, {0.5}, 0.2);
    const auto pa = stream_of(a, d, psi0), pb = stream_of(b, d, psi0), ps = stream_of(sum, d, psi0);
    for (std::size_t k = 0; k < a.size(); ++k)
        EXPECT_NEAR(ps.value(k), pa.value(k) + pb.value(k) - psi0.value(a.center(k)), 1e-12);
}

TEST(StreamOf, NumericDiskMatchesClosedForm) {
    const auto disk = DomainModel::unit_disk();
    std::vector<Point2> circle;
    for (int i = 0; i < 256; ++i) circle.push_back({std::cos(2 * pi * i / 256), std::sin(2 * pi * i / 256)});
    const auto num = DomainModel::numeric(circle, 0.1);
    GridField f({{-0.3, -0.3}, {0.5, 0.5}}, 40, 40);
    for (std::size_t k = 0; k < f.size(); ++k) f.set_active(k, true);
    fill_disk(f, {0.1, 0.1}, 0.15, 1.0);
    const auto a = stream_of(f, disk, HarmonicField::zero());
    const auto b = stream_of(f, num, HarmonicField::zero());
    for (std::size_t k = 0; k < f.size(); ++k) EXPECT_NEAR(a.value(k), b.value(k), 1e-6);
}

TEST(Centroid, Examples) {
    GridField two({{-0.5, -0.5}, {1.5, 0.5}}, 2, 1);
    two.set_active(0, true);
    two.set_active(1, true);
    two.set(0, 1.0);
    two.set(1, 3.0);
    EXPECT_DOUBLE_EQ(centroid(two).x1, 0.75);

    GridField f({{0.0, 0.0}, {0.6, 0.4}}, 60, 40);
    for (std::size_t k = 0; k < f.size(); ++k) f.set_active(k, true);
    fill_disk(f, {0.3, 0.2}, 0.08, 1.0);
    const Point2 c = centroid(f);
    EXPECT_LT(distance(c, {0.3, 0.2}), f.h1());

    GridField g = f;
    for (std::size_t k = 0; k < f.size(); ++k) g.set(k, 0.0);
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f.value(k) != 0.0) g.set(k + 1, f.value(k));
    EXPECT_NEAR(centroid(g).x1 - c.x1, f.h1(), 1e-12);
    EXPECT_NEAR(centroid(g).x2, c.x2, 1e-12);

    for (std::size_t k = 0; k < f.size(); ++k) g.set(k, 0.0);
    EXPECT_THROW(centroid(g), ZeroMass);
}

TEST(Antisymmetry, PairedSumCancels) {
    GridField f({{-0.2, -0.1}, {0.3, 0.25}}, 50, 35);
    for (std::size_t k = 0; k < f.size(); ++k) {
        f.set_active(k, true);
        const Point2 c = f.center(k);
        if (norm2(c - Point2{0.05, 0.05}) < 0.02) f.set(k, 1.0 + 3.0 * c.x1 * c.x1 + std::sin(7.0 * c.x2));
    }
    double mass = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) mass += std::abs(f.value(k)) * f.cell_area();
    for (const Vec2 b : {Vec2{1.0, 0.0}, Vec2{0.3, -2.0}}) {
        const double paired = antisymmetry_check(f, b);
        const double naive = antisymmetry_check_naive(f, b);
        const double scale = antisymmetry_scale(f, b);
        EXPECT_LT(paired, 1e-12 * mass * mass);
        EXPECT_LT(paired, 1e-12 * scale);
        EXPECT_LT(std::abs(naive - paired), 1e-9 * scale);
    }
    GridField one({{0.0, 0.0}, {1.0, 1.0}}, 4, 4);
    one.set_active(5, true);
    one.set(5, 2.0);
    EXPECT_EQ(antisymmetry_check(one, {1.0, 1.0}), 0.0);
}

TEST(WeakResidual, TrivialCases) {
    const auto d = DomainModel::unit_disk();
    auto f = disk_grid(0.305, 61);
    const TestFunction phi{{0.0, 0.0}, 0.5, 1.0};
    EXPECT_EQ(weak_residual(f, d, HarmonicField::zero(), phi), 0.0);
    fill_disk(f, {0.1, 0.0}, 0.08, 1.0);
    // phi vanishes on a neighborhood of the support
    EXPECT_EQ(weak_residual(f, d, HarmonicField::zero(), TestFunction{{-0.2, 0.0}, 0.1, 1.0}), 0.0);
}

TEST(Turkington, SingleCentralBlob) {
    const auto d = DomainModel::unit_disk();
    const double eps = 0.1;
    const auto sol = turkington_iterate(d, {{0.0, 0.0}}, {1.0}, eps, 0.3, HarmonicField::zero(), serial());
    EXPECT_TRUE(sol.fixed_point);
    EXPECT_TRUE(sol.converged());
    const GridField &f = sol.blobs[0];
    EXPECT_LT(std::abs(sol.achieved[0] - 1.0), 2.0 * sol.lambda[0] * f.cell_area());
    EXPECT_DOUBLE_EQ(sol.lambda[0], 1.0 / (pi * eps * eps));
    for (std::size_t k = 0; k < f.size(); ++k) {
        ASSERT_TRUE(f.value(k) == 0.0 || f.value(k) == sol.lambda[0]);
        if (f.value(k) != 0.0) {
            ASSERT_LT(distance(f.center(k), {0.0, 0.0}), 0.3);
        }
    }
    EXPECT_LT(norm(as_vec(sol.centroids[0])), eps * eps);
    EXPECT_LT(sol.support_diameter[0], 2.2 * eps);

    const TestFunction phi{sol.centroids[0], 3.0 * eps, 1.0};
    const double r = weak_residual(sol.blobs, d, HarmonicField::zero(), phi);
    EXPECT_LT(std::abs(r), 1e-3 * sol.lambda[0] * phi.gradient_sup());
}

TEST(Turkington, DipolePatchesStayInTheirBalls) {
    const auto d = DomainModel::unit_disk();
    const double a = dipole_root(), eps = 0.05;
    const std::vector<Point2> centers{{a, 0.0}, {-a, 0.0}};
    const double delta = default_ball_radius(d, centers, 0.2);
    const auto sol = turkington_iterate(d, centers, {1.0, -1.0}, eps, delta, HarmonicField::zero(), serial());
    EXPECT_TRUE(sol.converged());
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LT(sol.support_diameter[i], 4.0 * eps);
        EXPECT_LT(distance(sol.centroids[i], centers[i]), eps);
        const GridField &f = sol.blobs[i];
        for (auto k : f.support()) ASSERT_LT(distance(f.center(k), centers[i]), delta);
        EXPECT_LT(std::abs(sol.achieved[i] - (i == 0 ? 1.0 : -1.0)), 2.0 * std::abs(sol.lambda[i]) * f.cell_area());
    }
    EXPECT_GT(sol.mu[0], 0.0);
    EXPECT_LT(sol.mu[1], 0.0);
}

TEST(Turkington, Preconditions) {
    const auto d = DomainModel::unit_disk();
    const auto z = HarmonicField::zero();
    EXPECT_THROW(turkington_iterate(d, {{0.0, 0.0}}, {1.0}, 0.1, 1.0, z), InvalidArgument);
    EXPECT_THROW(turkington_iterate(d, {{0.2, 0.0}, {-0.2, 0.0}}, {1.0, 1.0}, 0.05, 0.25, z), InvalidArgument);
    TurkingtonOptions coarse;
    coarse.cells_per_eps = 4.0;
    EXPECT_THROW(turkington_iterate(d, {{0.0, 0.0}}, {1.0}, 0.1, 0.3, z, coarse), InvalidArgument);
    EXPECT_THROW(turkington_iterate(d, {{0.0, 0.0}}, {0.0}, 0.1, 0.3, z), InvalidCirculation);
    // a patch of radius eps does not fit in a ball of radius eps / 2
    EXPECT_THROW(turkington_iterate(d, {{0.0, 0.0}}, {1.0}, 0.1, 0.05, z), ConstraintInfeasible);
}

TEST(Concentration, SingleVortexCentroidsApproachTheOrigin) {
    const auto d = DomainModel::unit_disk();
    SearchConfig sc;
    sc.starts = 20;
    sc.threads = 1;
    ConcentrationOptions opt;
    opt.turkington.threads = 1;
    const auto t0 = std::chrono::steady_clock::now();
    const auto tab = concentration_experiment(d, {1.0}, HarmonicField::zero(), {0.2, 0.1, 0.05, 0.025}, sc, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_TRUE(tab.critical_point.has_value());
    ASSERT_EQ(tab.rows.size(), 4u);
    for (std::size_t i = 0; i < tab.rows.size(); ++i) {
        const auto &r = tab.rows[i];
        EXPECT_TRUE(r.converged) << r.status;
        EXPECT_LT(r.dist_to_critical, r.epsilon);
        if (i > 0) {
            EXPECT_LT(r.dist_to_critical, tab.rows[i - 1].dist_to_critical);
        }
        std::printf("eps %.3f dist %.3e residual %.3e scale %.3e iters %d\n", r.epsilon, r.dist_to_critical,
                    r.residual, r.residual_scale, r.iterations);
    }
    EXPECT_LT(std::abs(tab.rows.back().residual), 1e-2 * tab.rows.back().residual_scale);
    std::printf("concentration: %.2f s\n", secs);
}

TEST(Concentration, ScheduleMustDecrease) {
    const auto d = DomainModel::unit_disk();
    EXPECT_THROW(concentration_experiment(d, {1.0}, HarmonicField::zero(), {0.1, 0.2}, SearchConfig{}), InvalidArgument);
    EXPECT_THROW(concentration_experiment(d, {1.0}, HarmonicField::zero(), {}, SearchConfig{}), InvalidArgument);
}
