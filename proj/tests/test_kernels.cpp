#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "pinning/errors.hpp"
#include "pinning/kernels.hpp"
#include "pinning/math.hpp"
#include "pinning/rng.hpp"

using namespace pinning;
using namespace pinning::kernels;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Direct tanh-sinh quadrature; the part above w = 1 is mapped back to (0, 1] by w = 1/v.
double phi_oracle(double zeta, const FracParams& p) {
    boost::math::quadrature::tanh_sinh<double> rule;
    const double a = p.s;
    const double b = 0.5 * p.n - p.s;
    auto lower = [&](double w) { return std::pow(w, a - 1.0) * std::pow(1.0 + w, -0.5 * p.n); };
    auto upper = [&](double v) { return std::pow(v, b - 1.0) * std::pow(1.0 + v, -0.5 * p.n); };
    double total = rule.integrate(lower, 0.0, std::min(zeta, 1.0), 1e-14);
    if (zeta > 1.0) total += rule.integrate(upper, std::isinf(zeta) ? 0.0 : 1.0 / zeta, 1.0, 1e-14);
    return total;
}

}  // namespace

TEST_CASE("phi_integral matches direct quadrature") {
    for (const FracParams p : {FracParams{2, 0.5}, FracParams{2, 0.25}, FracParams{3, 0.75}, FracParams{2, 0.9}}) {
        for (double zeta : {1e-8, 1e-3, 0.3, 1.0, 2.5, 40.0, 1e4, 1e9}) {
            const double expected = phi_oracle(zeta, p);
            CHECK(phi_integral(zeta, p) == doctest::Approx(expected).epsilon(1e-10));
        }
        CHECK(phi_integral(kInf, p) == doctest::Approx(std::beta(p.s, 0.5 * p.n - p.s)).epsilon(1e-12));
        CHECK(phi_integral(0.0, p) == 0.0);
    }
}

TEST_CASE("phi_integral limit, monotonicity and crude bound") {
    const FracParams p{2, 0.5};
    CHECK(phi_integral(kInf, p) == doctest::Approx(kPi).epsilon(1e-12));
    double prev = 0.0;
    for (double zeta = 1e-6; zeta < 1e8; zeta *= 1.7) {
        const double v = phi_integral(zeta, p);
        CHECK(v >= prev);
        CHECK(v <= phi_upper_bound(p));
        prev = v;
    }
    CHECK_THROWS_AS(phi_integral(-1.0, p), DomainError);
}

TEST_CASE("Getoor closed form") {
    const FracParams p{2, 0.5};
    const std::array<double, 2> origin{0.0, 0.0};
    CHECK(getoor_solution(origin, 1.0, p) == doctest::Approx(2.0 / kPi).epsilon(1e-14));
    const std::array<double, 2> edge{0.6, 0.8};
    CHECK(getoor_solution(edge, 1.0, p) == 0.0);
    double prev = kInf;
    for (double r = 0.0; r < 1.0; r += 0.05) {
        const double g = getoor_solution_radial(r, 1.0, p);
        CHECK(g >= 0.0);
        CHECK(g <= prev);
        prev = g;
    }
}

TEST_CASE("kernel prefactor calibration") {
    const GreenKernel k2({2, 0.5});
    // The calibrated constant reproduces the standard pi^{n/2} normalisation.
    CHECK(k2.constants().calibrated == doctest::Approx(k2.constants().standard).epsilon(1e-9));
    CHECK(k2.constants().standard == doctest::Approx(1.0 / (2.0 * kPi * kPi)).epsilon(1e-14));
    CHECK(k2.constants().printed == doctest::Approx(1.0 / (2.0 * std::pow(kPi, 1.5))).epsilon(1e-14));
    const GreenKernel k3({3, 0.3});
    CHECK(k3.constants().calibrated == doctest::Approx(k3.constants().standard).epsilon(1e-9));
}

TEST_CASE("Green function symmetry, positivity and boundary") {
    const GreenKernel kernel({2, 0.5});
    auto rng = make_rng(7, Stage::Tests);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    for (int i = 0; i < 50; ++i) {
        const std::array<double, 2> x{u(rng), u(rng)};
        const std::array<double, 2> y{u(rng), u(rng)};
        const double gxy = greens_function(x, y, 1.0, kernel);
        CHECK(gxy > 0.0);
        CHECK(gxy == doctest::Approx(greens_function(y, x, 1.0, kernel)).epsilon(1e-13));
    }
    const std::array<double, 2> out{1.2, 0.0};
    const std::array<double, 2> in{0.1, 0.0};
    CHECK(greens_function(out, in, 1.0, kernel) == 0.0);
    CHECK_THROWS_AS(greens_function(in, in, 1.0, kernel), SingularInputError);
}

TEST_CASE("integral of the Green function reproduces the Getoor solution") {
    for (const FracParams p : {FracParams{2, 0.5}, FracParams{2, 0.3}, FracParams{3, 0.6}}) {
        const GreenKernel kernel(p);
        auto rng = make_rng(11, Stage::Tests, p.n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double R = 1.7;
        for (int i = 0; i < 10; ++i) {
            const double radius = R * 0.98 * u(rng);
            const double lhs = ball_integral(radius, R, R, kernel, 1e-10);
            const double rhs = getoor_solution_radial(radius, R, p);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
        }
    }
}

TEST_CASE("bump integral at the origin agrees with Monte Carlo") {
    const FracParams p{2, 0.5};
    const GreenKernel kernel(p);
    const double r0 = 0.1;
    const BallProblem prob{1.0, r0, 1.0, 1.0};
    const std::array<double, 2> origin{0.0, 0.0};
    const double b0 = bump_integral(origin, prob, kernel);

    // Importance sampling with density proportional to |y|^{2s-n} on B_{r0}.
    auto rng = make_rng(2024, Stage::Tests);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int samples = 1'000'000;
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double r = r0 * std::pow(u(rng), 1.0 / (2.0 * p.s));
        acc += phi_integral((1.0 - r * r) / (r * r), p);
    }
    const double mass = sphere_area(p.n) * std::pow(r0, 2.0 * p.s) / (2.0 * p.s);
    const double mc = kernel.prefactor() * mass * acc / samples;
    CHECK(std::abs(b0 - mc) < 1e-4);
}

TEST_CASE("bump integral sandwich and vanishing radius") {
    const FracParams p{2, 0.5};
    const GreenKernel kernel(p);
    const double R = 1.0;
    for (double q : {0.05, 0.1, 0.3}) {
        const BallProblem prob{R, q * R, 1.0, 1.0};
        const double factor = std::pow(1.0 - q * q, p.s) / std::pow(1.0 + q, p.n) * std::pow(q, p.n) *
                              (2.0 * p.s / p.n);
        for (double r = 0.0; r < R; r += 0.07) {
            const double b = bump_integral_radial(r, prob, kernel);
            CHECK(b >= factor * getoor_solution_radial(r, R, p) * (1.0 - 1e-9));
        }
        const double bound = kernel.min_bound_constant(kernel.prefactor()) * std::pow(q * R, 2.0 * p.s);
        CHECK(bump_integral_radial(0.0, prob, kernel) <= bound);
    }
    const BallProblem tiny{R, 1e-6, 1.0, 1.0};
    CHECK(bump_integral_radial(0.3, tiny, kernel) < 1e-10);
}

TEST_CASE("local condition report") {
    const FracParams p{2, 0.5};
    const auto rep = check_local_conditions(BallProblem{1.0, 0.1, 1.0, 1.0}, p);
    CHECK(rep.rhs == doctest::Approx(2.0 * 1.21 / (std::sqrt(0.99) * 0.01)).epsilon(1e-12));
    CHECK(rep.rhs == doctest::Approx(243.2).epsilon(1e-3));
    CHECK_FALSE(rep.holds);
    const auto trivially = check_local_conditions(BallProblem{1.0, 0.1, 1.0, 0.0}, p);
    CHECK(trivially.holds);
    CHECK(std::isinf(trivially.lhs));
    CHECK_FALSE(rep.describe().empty());
}

TEST_CASE("local solution under the ratio condition") {
    const FracParams p{2, 0.5};
    const GreenKernel kernel(p);
    const double q = 0.2;
    const double F2 = 1.0;
    const double ratio = check_local_conditions(BallProblem{1.0, q, 1.0, 1.0}, p).rhs;
    const BallProblem prob{1.0, q, (ratio - 1.0) * F2 * 1.05, F2};
    REQUIRE(check_local_conditions(prob, p).holds);
    const auto prof = local_solution(prob, kernel, 60, RadialGrid::ClusteredNearR);
    CHECK(prof.radii.front() == 0.0);
    CHECK(prof.radii.back() == prob.R);
    for (std::size_t i = 0; i + 1 < prof.values.size(); ++i) {
        CHECK(prof.values[i] < 0.0);
        CHECK(prof.values[i + 1] - prof.values[i] >= -1e-8);
    }
    CHECK(prof(prob.R) == 0.0);
    CHECK(prof(5.0) == 0.0);
    const double K = kernel.min_bound_constant(kernel.prefactor());
    CHECK(prof.at_origin() >= -K * prob.F1 * std::pow(prob.r0, 2.0 * p.s));

    std::ostringstream os;
    prof.write_csv(os);
    CHECK(os.str().rfind("radius,value\n", 0) == 0);
}

TEST_CASE("local solution scales self-similarly") {
    const FracParams p{2, 0.5};
    const GreenKernel kernel(p);
    const BallProblem a{1.0, 0.2, 300.0, 1.0};
    const double c = 2.5;
    const BallProblem b{c * a.R, c * a.r0, a.F1, a.F2};
    const auto pa = local_solution(a, kernel, 11);
    const auto pb = local_solution(b, kernel, 11);
    for (std::size_t i = 0; i < pa.values.size(); ++i)
        CHECK(pb.values[i] == doctest::Approx(std::pow(c, 2.0 * p.s) * pa.values[i]).epsilon(1e-8));
}

TEST_CASE("zero sources give a zero profile") {
    const GreenKernel kernel({2, 0.5});
    const auto prof = local_solution(BallProblem{1.0, 0.3, 0.0, 0.0}, kernel, 5);
    for (double v : prof.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(local_solution(BallProblem{1.0, 0.3, 0.0, 0.0}, kernel, 1), DomainError);
}
