#include <cmath>

#include <gtest/gtest.h>

#include "krvortex/critical_finder.hpp"
#include "krvortex/point_vortex.hpp"

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

} // namespace

TEST(PvVelocity, SingleVortexInDisk) {
    const auto d = DomainModel::unit_disk();
    const auto v = pv_velocity(d, {{{0.5, 0.0}}, {1.0}}, HarmonicField::zero());
    EXPECT_NEAR(v[0].v1, 0.0, 1e-15);
    EXPECT_NEAR(v[0].v2, -1.0 / (3.0 * pi), 1e-15);
    EXPECT_NEAR(norm(v[0]), 0.1061033, 1e-7);
    // tangent to circles about the center
    const auto w = pv_velocity(d, {{{0.3, -0.4}}, {2.0}}, HarmonicField::zero());
    EXPECT_NEAR(dot(w[0], Vec2{0.3, -0.4}), 0.0, 1e-15);
}

TEST(PvVelocity, VanishesAtCriticalPoints) {
    const auto d = DomainModel::unit_disk();
    const double a = dipole_root();
    const auto v = pv_velocity(d, {{{a, 0.0}, {-a, 0.0}}, {1.0, -1.0}}, HarmonicField::zero());
    EXPECT_LT(norm(v[0]) + norm(v[1]), 1e-12);
}

TEST(PvIntegrate, DipoleStaysPut) {
    const auto d = DomainModel::unit_disk();
    const double a = dipole_root();
    const VortexConfiguration c{{{a, 0.0}, {-a, 0.0}}, {1.0, -1.0}};
    const auto tr = pv_integrate(d, c, HarmonicField::zero(), 100.0, 1e-10);
    EXPECT_EQ(tr.times.back(), 100.0);
    EXPECT_LT((tr.states.back().flatten() - c.flatten()).norm(), 1e-6);
}

TEST(PvIntegrate, SingleVortexKeepsItsRadius) {
    const auto d = DomainModel::unit_disk();
    const auto tr = pv_integrate(d, {{{0.5, 0.0}}, {1.0}}, HarmonicField::zero(), 50.0, 1e-11);
    double worst = 0.0;
    for (const auto &s : tr.states) worst = std::max(worst, std::abs(norm(as_vec(s.points[0])) - 0.5));
    EXPECT_LT(worst, 1e-8);
    // angular speed 1/(3 pi) / 0.5, clockwise
    const double angle = std::atan2(tr.states.back().points[0].x2, tr.states.back().points[0].x1);
    const double expected = std::remainder(-50.0 * (1.0 / (3.0 * pi)) / 0.5, 2.0 * pi);
    EXPECT_NEAR(std::remainder(angle - expected, 2.0 * pi), 0.0, 1e-7);
}

TEST(PvIntegrate, HamiltonianIsConservedAndTimeReversible) {
    const auto d = DomainModel::unit_disk();
    const VortexConfiguration c{{{0.2, 0.3}, {-0.4, 0.1}, {0.1, -0.5}}, {1.0, -0.7, 1.4}};
    const auto tr = pv_integrate(d, c, HarmonicField::zero(), 20.0, 1e-10);
    EXPECT_LT(tr.max_hamiltonian_drift(), 1e-8);
    for (std::size_t i = 1; i < tr.times.size(); ++i) ASSERT_GT(tr.times[i], tr.times[i - 1]);

    IntegrationOptions back;
    back.backward = true;
    const auto rev = pv_integrate(d, tr.states.back(), HarmonicField::zero(), 20.0, 1e-10, back);
    EXPECT_LT((rev.states.back().flatten() - c.flatten()).norm(), 1e-6);
}

TEST(PvIntegrate, CollisionStopCarriesPartialTrajectory) {
    const auto d = DomainModel::unit_disk();
    for (const VortexConfiguration &c : {VortexConfiguration{{{0.0, 0.0}, {0.0, 5e-7}}, {1.0, 1.0}},
                                         VortexConfiguration{{{1.0 - 5e-7, 0.0}}, {1.0}}}) {
        try {
            pv_integrate(d, c, HarmonicField::zero(), 1.0, 1e-10);
            FAIL() << "expected CollisionStop";
        } catch (const CollisionStop &e) {
            ASSERT_EQ(e.partial().size(), 1u);
            EXPECT_EQ(e.partial().states[0].flatten(), c.flatten());
        }
    }
}

TEST(PvIntegrate, Preconditions) {
    const auto d = DomainModel::unit_disk();
    EXPECT_THROW(pv_integrate(d, {{{0.1, 0.0}}, {1.0}}, HarmonicField::zero(), 0.0, 1e-8), InvalidArgument);
    EXPECT_THROW(pv_integrate(d, {{{0.1, 0.0}}, {1.0}}, HarmonicField::zero(), 1.0, 0.0), InvalidArgument);
    EXPECT_THROW(pv_integrate(d, {{{1.1, 0.0}}, {1.0}}, HarmonicField::zero(), 1.0, 1e-8), OutsideDomain);
}

TEST(PvIntegrate, CriticalPointsFromTheFinderAreStationary) {
    const auto d = DomainModel::conformal({{0.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}, {0.08, 0.0}});
    SearchConfig sc;
    sc.starts = 20;
    sc.threads = 1;
    const auto pts = find_critical_points(d, {1.0, -0.6}, HarmonicField::zero(), sc);
    ASSERT_FALSE(pts.empty());
    for (const auto &p : pts) {
        const auto tr = pv_integrate(d, p.configuration, HarmonicField::zero(), 10.0, 1e-10);
        EXPECT_LT((tr.states.back().flatten() - p.configuration.flatten()).norm(), 1e-9);
    }
}
