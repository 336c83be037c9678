#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pinning/errors.hpp"
#include "pinning/obstacles.hpp"
#include "pinning/rng.hpp"

using namespace pinning;
using namespace pinning::obstacles;

namespace {

ModelParams unit_params(double lambda) {
    ModelParams p;
    p.n = 2;
    p.r0 = 0.2;
    p.r1 = 0.5;
    p.lambda = lambda;
    p.law = StrengthLaw{StrengthLaw::Kind::ShiftedExponential, 1.0, 0.5};
    return p;
}

Box box2(double x0, double x1, double y0, double y1, double ylo, double yhi) {
    Box b;
    b.n = 2;
    b.lo = {x0, y0, 0.0};
    b.hi = {x1, y1, 0.0};
    b.y_lo = ylo;
    b.y_hi = yhi;
    return b;
}

}  // namespace

TEST_CASE("strength laws") {
    const StrengthLaw atom{StrengthLaw::Kind::PointMass, 2.0, 0.0};
    CHECK(atom.tail(2.0) == 1.0);
    CHECK(atom.tail(2.0001) == 0.0);
    const StrengthLaw ex{StrengthLaw::Kind::ShiftedExponential, 1.0, 0.5};
    CHECK(ex.tail(0.5) == 1.0);
    CHECK(ex.tail(2.0) == doctest::Approx(std::exp(-2.0)));
    auto rng = make_rng(3, Stage::Tests);
    double acc = 0.0;
    const int count = 200000;
    int above = 0;
    for (int i = 0; i < count; ++i) {
        const double f = ex.sample(rng);
        CHECK_UNARY(f >= 1.0);
        acc += f;
        above += f >= 1.7 ? 1 : 0;
    }
    CHECK(acc / count == doctest::Approx(1.5).epsilon(0.01));
    CHECK(static_cast<double>(above) / count == doctest::Approx(ex.tail(1.7)).epsilon(0.02));
}

TEST_CASE("model parameter validation") {
    ModelParams p = unit_params(1.0);
    CHECK_NOTHROW(p.validate());
    p.r1 = 0.3;  // sqrt(2) r0 < r1 < sqrt(3) r0
    CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("Poisson moments of the sampled point count") {
    ModelParams p = unit_params(2.0);
    const Box window = box2(0.0, 1.0, 0.0, 1.0, p.r1, p.r1 + 3.0);  // volume 3
    const int seeds = 10000;
    double sum = 0.0;
    double sum2 = 0.0;
    // Disjoint halves x < 0.5 and x >= 0.5 for the independence check.
    double a_sum = 0.0, b_sum = 0.0, ab_sum = 0.0, a2 = 0.0, b2 = 0.0;
    for (int k = 0; k < seeds; ++k) {
        auto rng = make_rng(100, Stage::Tests, k);
        const auto field = sample_field(p, window, rng);
        const double c = static_cast<double>(field.size());
        sum += c;
        sum2 += c * c;
        double left = 0.0;
        for (const auto& o : field.obstacles()) {
            left += o.x[0] < 0.5 ? 1.0 : 0.0;
            CHECK_UNARY(o.y >= p.r1);
            CHECK_UNARY(o.f > 0.0);
        }
        const double right = c - left;
        a_sum += left;
        b_sum += right;
        ab_sum += left * right;
        a2 += left * left;
        b2 += right * right;
    }
    const double mean = sum / seeds;
    const double var = sum2 / seeds - mean * mean;
    // Standard error of the mean is sqrt(6 / 1e4); of the variance roughly sqrt((2*36 + 6)/1e4).
    CHECK(std::abs(mean - 6.0) < 3.0 * std::sqrt(6.0 / seeds));
    CHECK(std::abs(var - 6.0) < 3.0 * std::sqrt((2.0 * 36.0 + 6.0) / seeds));
    const double cov = ab_sum / seeds - (a_sum / seeds) * (b_sum / seeds);
    const double va = a2 / seeds - (a_sum / seeds) * (a_sum / seeds);
    const double vb = b2 / seeds - (b_sum / seeds) * (b_sum / seeds);
    CHECK(std::abs(cov / std::sqrt(va * vb)) < 0.05);
}

TEST_CASE("vanishing intensity gives an empty field") {
    ModelParams p = unit_params(1e-12);
    auto rng = make_rng(1, Stage::Tests);
    CHECK(sample_field(p, box2(0, 1, 0, 1, p.r1, p.r1 + 1), rng).size() == 0);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
    ModelParams p = unit_params(5.0);
    const Box w = box2(0, 2, 0, 2, p.r1, p.r1 + 1);
    auto r1 = make_rng(77, Stage::Obstacles);
    auto r2 = make_rng(77, Stage::Obstacles);
    const auto a = sample_field(p, w, r1);
    const auto b = sample_field(p, w, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.obstacles()[i].x == b.obstacles()[i].x);
        CHECK(a.obstacles()[i].f == b.obstacles()[i].f);
    }
}

TEST_CASE("bump plateau, support and gradient") {
    const double r0 = 0.2, r1 = 0.5;
    const Bump bump(2, r0, r1);
    const std::array<double, 2> zero{0.0, 0.0};
    CHECK(bump.value(zero, 0.0) >= 1.0);
    // Corner of the full-strength cube.
    const std::array<double, 2> corner{r0, r0};
    CHECK(bump.value(corner, r0) >= 1.0);
    const std::array<double, 2> rim{r1 / std::sqrt(3.0), r1 / std::sqrt(3.0)};
    CHECK(bump.value(rim, r1 / std::sqrt(3.0)) == doctest::Approx(0.0).epsilon(1e-14));

    auto rng = make_rng(5, Stage::Tests);
    std::uniform_real_distribution<double> u(-0.35, 0.35);
    const double step = 1e-6;
    for (int i = 0; i < 100; ++i) {
        std::array<double, 2> dx{u(rng), u(rng)};
        const double dy = u(rng);
        std::array<double, 3> g{};
        bump.gradient(dx, dy, g);
        for (int k = 0; k < 3; ++k) {
            std::array<double, 2> a = dx, b = dx;
            double ya = dy, yb = dy;
            if (k < 2) {
                a[k] += step;
                b[k] -= step;
            } else {
                ya += step;
                yb -= step;
            }
            const double fd = (bump.value(a, ya) - bump.value(b, yb)) / (2.0 * step);
            CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
        CHECK(std::hypot(g[0], g[1], g[2]) <= bump.lipschitz());
    }
}

TEST_CASE("force through the bucket index matches the full scan") {
    ModelParams p = unit_params(40.0);
    const Box w = box2(-1, 3, -1, 3, p.r1, p.r1 + 1.0);
    auto rng = make_rng(9, Stage::Tests);
    const auto field = sample_field(p, w, rng);
    REQUIRE(field.size() > 100);
    std::uniform_real_distribution<double> ux(-1.5, 3.5), uy(0.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        const std::array<double, 2> x{ux(rng), ux(rng)};
        const double y = uy(rng);
        CHECK(field.force(x, y) == doctest::Approx(field.force_brute(x, y)).epsilon(1e-12).scale(1.0));
        CHECK(field.force(x, y) >= 0.0);
    }
    // far from every centre
    const std::array<double, 2> far{50.0, 50.0};
    CHECK(field.force(far, 1.0) == 0.0);
}

TEST_CASE("single obstacle and overlapping pair") {
    const Bump bump(2, 0.2, 0.5);
    Box w = box2(0, 1, 0, 1, 0.5, 2.0);
    const ObstacleField single(bump, w, {Obstacle{{0.5, 0.5, 0.0}, 1.0, 3.0}});
    const std::array<double, 2> c{0.5, 0.5};
    CHECK(single.force(c, 1.0) >= 3.0);
    const ObstacleField pair(bump, w, {Obstacle{{0.5, 0.5, 0.0}, 1.0, 3.0}, Obstacle{{0.6, 0.5, 0.0}, 1.1, 2.0}});
    const std::array<double, 2> q{0.55, 0.52};
    const std::array<double, 2> d1{0.05, 0.02}, d2{-0.05, 0.02};
    const double expect = 3.0 * bump.value(d1, 0.05) + 2.0 * bump.value(d2, -0.05);
    CHECK(pair.force(q, 1.05) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("periodic field with shear images") {
    ModelParams p = unit_params(30.0);
    const Box w = box2(0, 2, 0, 2, p.r1, p.r1 + 1.0);
    Periodicity per;
    per.period = {2.0, 2.0, 0.0};
    per.shear = {0.3 * 2.0, -0.1 * 2.0, 0.0};
    auto rng = make_rng(12, Stage::Tests);
    const auto field = sample_field(p, w, rng, per);
    std::uniform_real_distribution<double> ux(-3.0, 5.0), uy(0.0, 2.0);
    for (int i = 0; i < 300; ++i) {
        const std::array<double, 2> x{ux(rng), ux(rng)};
        const double y = uy(rng);
        CHECK(field.force(x, y) == doctest::Approx(field.force_brute(x, y)).epsilon(1e-12).scale(1.0));
        // Shifting by one period along x0 shifts the field up by the shear.
        const std::array<double, 2> xs{x[0] + 2.0, x[1]};
        CHECK(field.force(xs, y + 0.6) == doctest::Approx(field.force(x, y)).epsilon(1e-11).scale(1.0));
    }
}

TEST_CASE("force derivative in y and its global bound") {
    ModelParams p = unit_params(20.0);
    const Box w = box2(0, 2, 0, 2, p.r1, p.r1 + 1.0);
    auto rng = make_rng(21, Stage::Tests);
    const auto field = sample_field(p, w, rng);
    std::uniform_real_distribution<double> ux(0.0, 2.0), uy(0.3, 2.0);
    const double bound = field.dy_bound();
    for (int i = 0; i < 200; ++i) {
        const std::array<double, 2> x{ux(rng), ux(rng)};
        const double y = uy(rng);
        const double fd = (field.force(x, y + 1e-6) - field.force(x, y - 1e-6)) / 2e-6;
        CHECK(field.force_dy(x, y) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        CHECK(std::abs(field.force_dy(x, y)) <= bound);
        const auto [f, df] = field.force_with_dy(x, y);
        CHECK(f == doctest::Approx(field.force(x, y)).epsilon(1e-14).scale(1.0));
        CHECK(df == doctest::Approx(field.force_dy(x, y)).epsilon(1e-14).scale(1.0));
    }
}

TEST_CASE("graph transform") {
    const auto flat = InitialSurface::flat(2, 0.5);
    const std::array<double, 2> x{1.3, -0.4};
    auto [xi, yi] = transform_U(x, 0.7, flat);
    CHECK(yi == 0.7);
    CHECK(xi[0] == 1.3);

    const auto tilt = InitialSurface::flat(2, 0.5, {0.3, 0.0, 0.0});
    CHECK(transform_U(x, 0.7, tilt).second == doctest::Approx(0.7 + 0.3 * 1.3));

    const double L = 10.0;
    const double k = 2.0 * std::numbers::pi / L;
    const InitialSurface wavy(2, 0.5, {0.2, -0.1, 0.0}, {Mode{{k, 2 * k, 0}, 0.3, -0.2}}, {L, L, 0});
    auto rng = make_rng(4, Stage::Tests);
    std::uniform_real_distribution<double> u(-20, 20);
    for (int i = 0; i < 100; ++i) {
        const std::array<double, 2> p{u(rng), u(rng)};
        const double y = u(rng);
        const auto fwd = transform_U(p, y, wavy);
        const auto back = transform_U(std::span<const double>(fwd.first.data(), 2), fwd.second, wavy, true);
        CHECK(back.second == doctest::Approx(y).epsilon(1e-12).scale(1.0));
        CHECK(fwd.first[0] == p[0]);
        CHECK(fwd.first[1] == p[1]);
    }
}

TEST_CASE("initial surface derivatives and sup norms") {
    const double L = 8.0;
    const double k = 2.0 * std::numbers::pi / L;
    const double s = 0.5;
    const InitialSurface U(2, s, {0.1, 0.0, 0.0}, {Mode{{k, 0, 0}, 0.5, 0.0}, Mode{{0, 2 * k, 0}, 0.0, 0.1}}, {L, L, 0});
    auto rng = make_rng(8, Stage::Tests);
    std::uniform_real_distribution<double> u(0.0, L);
    for (int i = 0; i < 50; ++i) {
        const std::array<double, 2> x{u(rng), u(rng)};
        std::array<double, 2> g{};
        U.gradient(x, g);
        for (int a = 0; a < 2; ++a) {
            std::array<double, 2> xp = x, xm = x;
            xp[a] += 1e-5;
            xm[a] -= 1e-5;
            CHECK(g[a] == doctest::Approx((U.value(xp) - U.value(xm)) / 2e-5).epsilon(1e-7).scale(1.0));
        }
        const double expect = std::pow(k, 2 * s) * 0.5 * std::cos(k * x[0]) + std::pow(2 * k, 2 * s) * 0.1 * std::sin(2 * k * x[1]);
        CHECK(U.fraclap(x) == doctest::Approx(expect).epsilon(1e-13));
    }
    CHECK(U.fraclap_sup() >= std::pow(k, 2 * s) * 0.5 + std::pow(2 * k, 2 * s) * 0.1);
    CHECK(U.fraclap_sup() <= 1.011 * (std::pow(k, 2 * s) * 0.5 + std::pow(2 * k, 2 * s) * 0.1));
    CHECK(U.grad_sup() > 0.1);

    // Rescaling preserves both sup norms when s = 1/2.
    for (double eps : {0.5, 0.25, 0.125}) {
        const auto Ue = U.rescaled(eps);
        CHECK(Ue.grad_sup() == doctest::Approx(U.grad_sup()).epsilon(1e-10));
        CHECK(Ue.fraclap_sup() == doctest::Approx(U.fraclap_sup()).epsilon(1e-10));
    }
}

TEST_CASE("admissible height margin and containment") {
    CHECK(admissible_height_margin(InitialSurface::flat(2, 0.5), 0.3) == 0.3);
    // Surface with ||grad U|| = 0.5 exactly: pure tilt.
    const auto half = InitialSurface::flat(2, 0.5, {0.5, 0.0, 0.0});
    CHECK(admissible_height_margin(half, 0.2) == doctest::Approx(0.1));
    CHECK_THROWS_AS(admissible_height_margin(InitialSurface::flat(2, 0.5, {1.0, 0.2, 0.0}), 0.2),
                    DegenerateSurfaceError);

    const double L = 6.0, k = 2.0 * std::numbers::pi / L, r0 = 0.4;
    const InitialSurface U(2, 0.5, {0.2, 0.1, 0.0}, {Mode{{k, k, 0}, 0.3, 0.1}}, {L, L, 0});
    const double eta0 = admissible_height_margin(U, r0);
    auto rng = make_rng(31, Stage::Tests);
    std::uniform_real_distribution<double> u(-1.0, 1.0), c(0.0, L);
    for (int i = 0; i < 1000; ++i) {
        const std::array<double, 2> x0{c(rng), c(rng)};
        const double y0 = 5.0 + c(rng);
        // Pulled-back centre and a point of the flattened cylinder around it.
        const double yflat = y0 - U.value(x0);
        double a = u(rng), b = u(rng);
        while (a * a + b * b > 1.0) {
            a = u(rng);
            b = u(rng);
        }
        const std::array<double, 2> xi{x0[0] + r0 * a, x0[1] + r0 * b};
        const double eta = eta0 * u(rng);
        const auto img = transform_U(xi, yflat + eta, U);
        CHECK(std::abs(img.second - y0) <= r0 * (1.0 + 1e-12));
        CHECK(std::max(std::abs(xi[0] - x0[0]), std::abs(xi[1] - x0[1])) <= r0);
    }
}

TEST_CASE("decomposition cells") {
    const Decomposition dec{2, 3.0, 1.0, 0.5, 0.4};
    CHECK_NOTHROW(dec.validate());
    const std::array<double, 2> origin{0.0, 0.0};
    REQUIRE(dec.cell_of(origin).has_value());
    CHECK((*dec.cell_of(origin))[0] == 0);
    const std::array<double, 2> next{4.0, 0.0};
    CHECK((*dec.cell_of(next))[0] == 1);
    CHECK((*dec.cell_of(next))[1] == 0);
    const std::array<double, 2> gap{1.8, 0.0};
    CHECK_FALSE(dec.cell_of(gap).has_value());
    for (long a0 = -10; a0 <= 10; ++a0)
        for (long a1 = -10; a1 <= 10; ++a1) {
            const std::array<double, 2> c{dec.centre(a0), dec.centre(a1)};
            const auto cell = dec.cell_of(c);
            REQUIRE(cell.has_value());
            CHECK((*cell)[0] == a0);
            CHECK((*cell)[1] == a1);
        }
    CHECK(dec.cuboid_volume() == doctest::Approx(std::pow(3.0 - 0.8, 2) * 0.5).epsilon(1e-15));
    CHECK(dec.level_of(0.39) == 0);
    CHECK(dec.level_of(0.4) == 1);
    CHECK(dec.level_of(0.95) == 2);
    CHECK_THROWS_AS((Decomposition{2, 0.7, 1.0, 0.5, 0.4}.validate()), DomainError);
}
