#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "krvortex/kirchhoff_routh.hpp"

using namespace krv;

namespace {

// a^4 + 4 a^2 - 1 = 0 on (0, 1) by bisection
double dipole_root() {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f = mid * mid * mid * mid + 4.0 * mid * mid - 1.0;
        (f < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

VortexConfiguration random_config(std::mt19937_64 &rng, const DomainModel &d, int k, double margin) {
    const Box b = d.bounding_box();
    std::uniform_real_distribution<double> u1(b.lo.x1, b.hi.x1), u2(b.lo.x2, b.hi.x2), kap(0.5, 2.0);
    std::bernoulli_distribution sign(0.5);
    VortexConfiguration c;
    while (static_cast<int>(c.size()) < k) {
        const Point2 p{u1(rng), u2(rng)};
        if (!d.contains(p) || d.boundary_distance(p) < margin) continue;
        bool ok = true;
        for (const auto &q : c.points) ok = ok && distance(p, q) > margin;
        if (!ok) continue;
        c.points.push_back(p);
        c.circulations.push_back(sign(rng) ? kap(rng) : -kap(rng));
    }
    return c;
}

std::vector<Vec2> fd_grad(const DomainModel &d, const VortexConfiguration &c, const HarmonicField &psi0, double h) {
    std::vector<Vec2> g(c.size());
    for (std::size_t l = 0; l < c.size(); ++l) {
        auto shifted = [&](double dx, double dy) {
            auto cc = c;
            cc.points[l] = {cc.points[l].x1 + dx, cc.points[l].x2 + dy};
            return kr_value(d, cc, psi0);
        };
        g[l] = {(shifted(h, 0) - shifted(-h, 0)) / (2 * h), (shifted(0, h) - shifted(0, -h)) / (2 * h)};
    }
    return g;
}

} // namespace

TEST(KrValue, SingleVortexInDisk) {
    const auto d = DomainModel::unit_disk();
    EXPECT_EQ(kr_value(d, {{{0.0, 0.0}}, {1.0}}, HarmonicField::zero()), 0.0);
    EXPECT_NEAR(kr_value(d, {{{0.5, 0.0}}, {1.0}}, HarmonicField::zero()), 0.0228930, 1e-7);
    EXPECT_NEAR(kr_value(d, {{{0.5, 0.0}}, {1.0}}, HarmonicField::zero()), -std::log(0.75) / (4.0 * pi), 1e-15);
}

TEST(KrValue, QuadraticScalingAndPermutation) {
    const auto d = DomainModel::unit_disk();
    const VortexConfiguration c{{{0.1, 0.2}, {-0.4, 0.3}, {0.5, -0.5}}, {1.0, -2.0, 0.7}};
    auto scaled = c;
    for (auto &k : scaled.circulations) k *= 2.5;
    const double w = kr_value(d, c, HarmonicField::zero());
    EXPECT_NEAR(kr_value(d, scaled, HarmonicField::zero()), 6.25 * w, 1e-12 * std::abs(w) + 1e-15);

    const VortexConfiguration p{{c.points[2], c.points[0], c.points[1]}, {0.7, 1.0, -2.0}};
    EXPECT_NEAR(kr_value(d, p, HarmonicField::zero()), w, 1e-14);
    const auto g = kr_grad(d, c, HarmonicField::zero()), gp = kr_grad(d, p, HarmonicField::zero());
    EXPECT_NEAR(norm(gp[0] - g[2]), 0.0, 1e-14);
    EXPECT_NEAR(norm(gp[1] - g[0]), 0.0, 1e-14);
}

TEST(KrValue, BlowUpNearDiagonalAndBoundary) {
    const auto d = DomainModel::unit_disk();
    double prev = 0.0;
    for (double sep : {1e-1, 1e-2, 1e-3, 1e-5}) {
        const double w = kr_value(d, {{{0.0, 0.0}, {sep, 0.0}}, {1.0, 1.0}}, HarmonicField::zero());
        if (sep != 1e-1) {
            EXPECT_LT(w, prev);
        }
        prev = w;
    }
    EXPECT_LT(prev, -1.5);
    for (double r : {0.9, 0.99, 0.999, 0.99999}) {
        const double w = kr_value(d, {{{0.0, 0.0}, {r, 0.0}}, {1.0, 1.0}}, HarmonicField::zero());
        if (r != 0.9) {
            EXPECT_GT(w, prev);
        }
        prev = w;
    }
    EXPECT_GT(prev, 0.8);
}

TEST(KrValue, ValidationErrors) {
    const auto d = DomainModel::unit_disk();
    const auto z = HarmonicField::zero();
    EXPECT_THROW(kr_value(d, {{{0.1, 0.0}, {0.1, 5e-11}}, {1.0, 1.0}}, z), DiagonalSingular);
    EXPECT_THROW(kr_grad(d, {{{0.1, 0.0}, {0.1, 5e-11}}, {1.0, 1.0}}, z), DiagonalSingular);
    EXPECT_THROW(kr_value(d, {{{0.1, 0.0}}, {0.0}}, z), InvalidCirculation);
    EXPECT_THROW(kr_value(d, {{{1.1, 0.0}}, {1.0}}, z), OutsideDomain);
    EXPECT_THROW(kr_value(d, {{}, {}}, z), InvalidArgument);
}

TEST(KrGrad, SingleVortexAtCenterAndDipole) {
    const auto d = DomainModel::unit_disk();
    const auto z = HarmonicField::zero();
    EXPECT_EQ(norm(kr_grad(d, {{{0.0, 0.0}}, {1.0}}, z)[0]), 0.0);
    const double a = dipole_root();
    EXPECT_NEAR(a, 0.4858683, 1e-7);
    const auto g = kr_grad(d, {{{a, 0.0}, {-a, 0.0}}, {1.0, -1.0}}, z);
    EXPECT_LT(norm(g[0]), 1e-8);
    EXPECT_LT(norm(g[1]), 1e-8);
}

TEST(KrGrad, FiniteDifferencesOnRandomConfigurations) {
    const auto disk = DomainModel::unit_disk();
    const auto conf = DomainModel::conformal({{0.0, 0.0}, {1.0, 0.0}, {0.15, 0.1}});
    const auto psi = solve_psi0(disk, {[](const Point2 &p) { return p.x1 * p.x2; }});
    std::mt19937_64 rng(41);
    for (const auto *d : {&disk, &conf}) {
        for (int i = 0; i < 10; ++i) {
            const auto c = random_config(rng, *d, 3, 0.05);
            for (bool with_flux : {true, false}) {
                const HarmonicField field = (with_flux && d == &disk) ? psi : HarmonicField::zero();
                const auto g = flatten(kr_grad(*d, c, field));
                const auto fd = flatten(fd_grad(*d, c, field, 1e-5));
                EXPECT_LT((g - fd).norm() / fd.norm(), 1e-6);
            }
        }
    }
}

TEST(KrHessian, CenterOfDisk) {
    const auto d = DomainModel::unit_disk();
    const auto h = kr_hessian(d, {{{0.0, 0.0}}, {1.0}}, HarmonicField::zero());
    EXPECT_NEAR(h(0, 0), 1.0 / (2.0 * pi), 1e-8);
    EXPECT_NEAR(h(1, 1), 0.1591549, 1e-7);
    EXPECT_NEAR(h(0, 1), 0.0, 1e-10);
    EXPECT_LT((h - h.transpose()).norm(), 1e-8);
}

TEST(KrHessian, AgreesWithSecondDifferencesOfValue) {
    const auto d = DomainModel::unit_disk();
    const VortexConfiguration c{{{0.2, 0.1}, {-0.3, 0.4}}, {1.0, -0.5}};
    const auto h = kr_hessian(d, c, HarmonicField::zero());
    const double s = 1e-4;
    const Eigen::VectorXd x = c.flatten();
    auto w = [&](const Eigen::VectorXd &v) { return kr_value(d, c.with_positions(v), HarmonicField::zero()); };
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
            pp[i] += s; pp[j] += s;
            pm[i] += s; pm[j] -= s;
            mp[i] -= s; mp[j] += s;
            mm[i] -= s; mm[j] -= s;
            const double fd = (w(pp) - w(pm) - w(mp) + w(mm)) / (4 * s * s);
            EXPECT_NEAR(h(i, j), fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
}

TEST(KrHessian, DipoleSpectrum) {
    // Independent oracle: second differences of the image-formula W, eigenvalues
    // {0, 0.1287591, 0.2083365, 0.7537687}. W grows without bound both at the
    // boundary and at collision for opposite signs, so the dipole minimizes W
    // up to rotation.
    const auto d = DomainModel::unit_disk();
    const double a = dipole_root();
    const VortexConfiguration c{{{a, 0.0}, {-a, 0.0}}, {1.0, -1.0}};
    const auto h = kr_hessian(d, c, HarmonicField::zero());
    std::vector<double> ev;
    int modes = 0;
    const auto cls = classify(h, d, c, ev, modes);
    ASSERT_EQ(ev.size(), 4u);
    EXPECT_NEAR(ev[0], 0.0, 1e-6);
    EXPECT_NEAR(ev[1], 0.1287591, 1e-6);
    EXPECT_NEAR(ev[2], 0.2083365, 1e-6);
    EXPECT_NEAR(ev[3], 0.7537687, 1e-6);
    EXPECT_EQ(modes, 1);
    EXPECT_EQ(cls, Classification::minimum);
    // rotation generator is a null direction of the full Hessian
    Eigen::VectorXd tau(4);
    tau << 0.0, a, 0.0, -a;
    EXPECT_LT((h * tau).norm() / tau.norm(), 1e-6);
}

TEST(Classify, MinimumAtDiskCenter) {
    const auto d = DomainModel::unit_disk();
    const VortexConfiguration c{{{0.0, 0.0}}, {1.0}};
    std::vector<double> ev;
    int modes = -1;
    EXPECT_EQ(classify(kr_hessian(d, c, HarmonicField::zero()), d, c, ev, modes), Classification::minimum);
    EXPECT_EQ(modes, 0);
    Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(2, 2);
    flat(0, 0) = 1.0;
    flat(1, 1) = 1e-5;
    const auto ell = DomainModel::conformal({{0.0, 0.0}, {1.0, 0.0}, {0.1, 0.0}});
    EXPECT_EQ(classify(flat, ell, c, ev, modes), Classification::degenerate);
    flat(1, 1) = -1.0;
    EXPECT_EQ(classify(flat, ell, c, ev, modes), Classification::saddle);
    flat(0, 0) = -2.0;
    EXPECT_EQ(classify(flat, ell, c, ev, modes), Classification::maximum);
}
