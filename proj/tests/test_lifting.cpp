#include <doctest.h>

#include <cmath>
#include <random>

#include "pinning/errors.hpp"
#include "pinning/fraclap.hpp"
#include "pinning/grid.hpp"
#include "pinning/lifting.hpp"
#include "pinning/quadrature.hpp"
#include "pinning/rng.hpp"

using namespace pinning;
using lifting::LatticeHeights;
using lifting::LiftField;

namespace {

LatticeHeights random_heights(int n, long columns, double l, double d, double h, std::uint64_t seed) {
    LatticeHeights H;
    H.window = percolation::Window::torus(n, columns);
    H.l = l;
    H.d = d;
    H.h = h;
    H.alpha = 0.5;
    auto rng = make_rng(seed, Stage::Tests, 0);
    std::uniform_real_distribution<double> U(0.0, 2.0 * h);
    H.Lambda.resize(H.window.size());
    for (double& v : H.Lambda) v = 3.0 + U(rng);
    return H;
}

Coord random_point(std::mt19937_64& rng, int n, double extent) {
    std::uniform_real_distribution<double> U(0.0, extent);
    Coord x{};
    for (int i = 0; i < n; ++i) x[i] = U(rng);
    return x;
}

std::span<const double> sp(const Coord& x, int n) { return {x.data(), static_cast<std::size_t>(n)}; }

}  // namespace

TEST_CASE("mollifier has unit mass and the stated extrema") {
    const auto& m = lifting::Mollifier::instance();
    CHECK(m.cdf(-1.0) == 0.0);
    CHECK(m.cdf(1.0) == 1.0);
    CHECK(m.cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.cdf(0.3) + m.cdf(-0.3) == doctest::Approx(1.0).epsilon(1e-12));
    for (double t : {-0.9, -0.4, 0.1, 0.77}) {
        const double h = 1e-5;
        CHECK((m.cdf(t + h) - m.cdf(t - h)) / (2 * h) == doctest::Approx(m.density(t)).epsilon(1e-6));
        CHECK((m.density(t + h) - m.density(t - h)) / (2 * h) ==
              doctest::Approx(m.density_derivative(t)).epsilon(1e-6));
    }
    CHECK(m.max_density() == doctest::Approx(m.density(0.0)));
    double scan = 0.0;
    for (int k = 0; k <= 10000; ++k) scan = std::max(scan, std::abs(m.density_derivative(-1.0 + 2e-4 * k)));
    CHECK(scan <= m.max_density_derivative());
    CHECK(lifting::mollifier_C0(2) > lifting::mollifier_C0(1));
}

TEST_CASE("constant heights give a constant lift") {
    LatticeHeights H;
    H.window = percolation::Window::torus(2, 3);
    H.Lambda.assign(H.window.size(), 2.5);
    const LiftField lift(H);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 100; ++k) {
        const Coord x = random_point(rng, 2, 6.0);
        CHECK(lift.value(sp(x, 2)) == doctest::Approx(2.5).epsilon(1e-14));
        CHECK(lift.hessian_frobenius(sp(x, 2)) < 1e-12);
        double g[2];
        lift.gradient(sp(x, 2), g);
        CHECK(std::abs(g[0]) + std::abs(g[1]) < 1e-12);
    }
}

TEST_CASE("lift equals the lattice height on every hat cell") {
    const auto H = random_heights(2, 4, 1.0, 0.5, 0.2, 7);
    const LiftField lift(H);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    for (std::size_t a = 0; a < H.window.size(); ++a) {
        const auto idx = H.window.index(a);
        for (int k = 0; k < 10; ++k) {
            Coord x{idx[0] * H.pitch() + U(rng) * H.l, idx[1] * H.pitch() + U(rng) * H.l, 0.0};
            CHECK(lift.value(sp(x, 2)) == doctest::Approx(H.Lambda[a]).epsilon(1e-12));
            CHECK(lift.hessian_frobenius(sp(x, 2)) == 0.0);
        }
    }
}

TEST_CASE("lift preserves range, is linear and periodic") {
    auto A = random_heights(2, 4, 1.0, 0.5, 0.2, 11);
    auto B = random_heights(2, 4, 1.0, 0.5, 0.2, 12);
    auto S = A;
    for (std::size_t k = 0; k < S.Lambda.size(); ++k) S.Lambda[k] = 2.0 * A.Lambda[k] - 0.5 * B.Lambda[k];
    const LiftField la(A), lb(B), ls(S);
    const double lo = *std::min_element(A.Lambda.begin(), A.Lambda.end());
    const double hi = *std::max_element(A.Lambda.begin(), A.Lambda.end());
    const double period = la.period();
    CHECK(period == doctest::Approx(6.0));
    std::mt19937_64 rng(3);
    for (int k = 0; k < 200; ++k) {
        const Coord x = random_point(rng, 2, period);
        const double v = la.value(sp(x, 2));
        CHECK(v >= lo - 1e-14);
        CHECK(v <= hi + 1e-14);
        CHECK(ls.value(sp(x, 2)) == doctest::Approx(2.0 * v - 0.5 * lb.value(sp(x, 2))).epsilon(1e-12));
        const Coord y{x[0] + period, x[1] - period, 0.0};
        CHECK(la.value(sp(y, 2)) == doctest::Approx(v).epsilon(1e-13));
    }
}

TEST_CASE("one-dimensional step: derivatives against finite differences") {
    LatticeHeights H;
    H.window = percolation::Window::centred(1, 3);
    H.l = 1.0;
    H.d = 0.4;
    H.h = 0.25;
    H.Lambda = {0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5};
    const LiftField lift(H);
    const double bound = lifting::mollifier_C0(1) * H.h / (H.d * H.d);
    const double mid = 0.5 * H.pitch();
    double fd_sup = 0.0;
    for (int k = -100; k <= 100; ++k) {
        const double x = mid + k * 1e-3 * H.d;
        const double e = 1e-5;
        const double xs[3] = {x - e, x, x + e};
        const double fd2 = (lift.value({&xs[2], 1}) - 2 * lift.value({&xs[1], 1}) + lift.value({&xs[0], 1})) / (e * e);
        const double an = lift.hessian({&xs[1], 1})[0][0];
        CHECK(fd2 == doctest::Approx(an).epsilon(1e-3).scale(1e-3 * bound));
        double g;
        lift.gradient({&xs[1], 1}, {&g, 1});
        CHECK((lift.value({&xs[2], 1}) - lift.value({&xs[0], 1})) / (2 * e) == doctest::Approx(g).epsilon(1e-6));
        fd_sup = std::max(fd_sup, std::abs(fd2));
    }
    CHECK(fd_sup > 0.0);
    CHECK(fd_sup <= bound);
    const double left = -3.0 * H.pitch();
    CHECK(lift.value({&left, 1}) == 0.0);
}

TEST_CASE("hessian and fractional Laplacian stay below their bounds") {
    const auto H = random_heights(2, 4, 1.0, 0.5, 0.2, 21);
    const LiftField lift(H);
    const kernels::FracParams p{2, 0.5};
    std::mt19937_64 rng(5);
    std::vector<Coord> hp(2000), fp(6);
    for (auto& x : hp) x = random_point(rng, 2, lift.period());
    for (auto& x : fp) x = random_point(rng, 2, lift.period());
    const auto rep = lifting::verify_lift_bounds(lift, p, hp, fp, 1e-6);
    INFO(rep.describe());
    CHECK(rep.hessian_ok);
    CHECK(rep.fraclap_ok);
    CHECK(rep.quadrature_ok);
    CHECK(rep.fraclap_sup > 0.0);
}

TEST_CASE("bump transform") {
    const auto& m = lifting::Mollifier::instance();
    CHECK(lifting::bump_transform(0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double w : {1.0, 7.5, 40.0}) {
        const auto ref = quad::adaptive([&](double t) { return m.density(t) * std::cos(w * t); }, -1.0, 1.0, 1e-12);
        CHECK(lifting::bump_transform(w) == doctest::Approx(ref.value).epsilon(1e-9).scale(1e-12));
    }
}

TEST_CASE("Fourier series of the lift against grid FFT and quadrature") {
    const auto H = random_heights(2, 3, 1.0, 0.5, 0.2, 31);
    const LiftField lift(H);
    const double P = lift.period();
    const auto series = lifting::fraclap_series(lift, 0.5, 64, 1e-10);
    CHECK(series.truncation <= 1e-10);
    CHECK(series.m_max > 0);

    // A fine sampled grid converges to the series at the shared nodes.
    const auto spec = grid::GridSpec::torus(2, P, 1024);
    const auto g = lift.sample(spec);
    grid::Spectral fft(spec);
    const auto lg = fft.fraclap(g, 0.5);
    double diff = 0.0;
    for (std::size_t k = 0; k < series.values.size(); ++k) {
        const auto idx = series.values.index(k);
        diff = std::max(diff, std::abs(series.values.values[k] - lg.values[lg.flat({idx[0] * 16, idx[1] * 16, 0})]));
    }
    CHECK(diff < 1e-3 * series.values.sup_abs());

    LatticeHeights H1;
    H1.window = percolation::Window::torus(1, 4);
    H1.l = 1.0;
    H1.d = 0.5;
    H1.h = 0.2;
    H1.Lambda = {0.0, 0.3, 0.1, 0.4};
    const LiftField l1(H1);
    const auto s1 = lifting::fraclap_series(l1, 0.4, 48, 1e-10);
    fraclap::PointField f{1, [&](std::span<const double> x) { return l1.value(x); }, {}};
    fraclap::Options opt;
    opt.rel_tol = 1e-9;
    opt.scale = l1.eps();
    for (std::size_t k : {std::size_t{0}, std::size_t{5}, std::size_t{17}, std::size_t{30}}) {
        const Coord x = s1.values.node(k);
        const auto r = fraclap::evaluate(f, sp(x, 1), 0.4, fraclap::FarField::periodic({6.0, 0, 0}, l1.mean_height()), opt);
        INFO("diff " << (r.value - s1.values.values[k]) << " err " << r.error());
        CHECK(std::abs(r.value - s1.values.values[k]) <= std::max(1e-7, r.error()));
    }

    LatticeHeights flat = H;
    std::fill(flat.Lambda.begin(), flat.Lambda.end(), 1.7);
    CHECK(lifting::fraclap_series(LiftField(flat), 0.5, 16, 1e-10).values.sup_abs() < 1e-14);
}

TEST_CASE("heights from a lattice surface") {
    obstacles::Decomposition dec;
    dec.n = 1;
    dec.l = 1.0;
    dec.d = 0.5;
    dec.h = 0.3;
    dec.r1 = 0.2;
    percolation::LatticeSurface s;
    s.window = percolation::Window::centred(1, 2);
    s.alpha = 0.5;
    s.y = {1, 2, 2, 3, 3};
    s.witness.resize(5);
    for (std::size_t a = 0; a < 5; ++a) {
        s.witness[a].present = true;
        s.witness[a].y_flat = dec.level_bottom(s.y[a]) + 0.5 * dec.h;
    }
    const auto H = lifting::heights_from_surface(s, dec, 0.1);
    CHECK(H.Lambda[0] == doctest::Approx(0.2 + 0.15 + 0.1));
    CHECK(H.Lambda[4] == doctest::Approx(0.2 + 0.6 + 0.15 + 0.1));

    s.witness[4].y_flat = 5.0;
    CHECK_THROWS_AS(lifting::heights_from_surface(s, dec, 0.1), HolderViolationError);
    s.witness[4].present = false;
    CHECK_THROWS_AS(lifting::heights_from_surface(s, dec, 0.1), DomainError);
}

TEST_CASE("lift constants reject alpha outside (0, 2s)") {
    CHECK_THROWS_AS(lifting::lift_constants(2, 0.3, 0.7), DomainError);
    const auto c = lifting::lift_constants(2, 0.5, 0.5);
    CHECK(c.C1 > 0.0);
    CHECK(c.C2 > 0.0);
    CHECK(lifting::lift_fraclap_bound(c, 0.5, 1.0, 0.5, 0.4) ==
          doctest::Approx(2.0 * lifting::lift_fraclap_bound(c, 0.5, 1.0, 0.5, 0.2)));
}
