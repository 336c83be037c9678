#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pinning/errors.hpp"
#include "pinning/lifting.hpp"
#include "pinning/rng.hpp"
#include "pinning/scaling.hpp"

using namespace pinning;
using obstacles::InitialSurface;
using obstacles::ModelParams;
using obstacles::StrengthLaw;

namespace {

constexpr double kPi = std::numbers::pi;

ModelParams desk_model(double lambda = 2e5) {
    ModelParams P;
    P.n = 2;
    P.s = 0.5;
    P.r0 = 1.0;
    P.r1 = 1.1 * std::sqrt(3.0);
    P.lambda = lambda;
    P.law.kind = StrengthLaw::Kind::ShiftedExponential;
    P.law.value = 1.0;
    P.law.theta = 0.5;
    return P;
}

InitialSurface wavy(int n, double s, Coord nu, double amplitude, double period) {
    obstacles::Mode m;
    m.k[0] = 2 * kPi / period;
    m.a = amplitude;
    Coord box{};
    for (int i = 0; i < n; ++i) box[i] = period;
    return InitialSurface(n, s, nu, {m}, box);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

TEST_CASE("recipe constants: closed-form values") {
    auto P = desk_model();
    P.r0 = 1.0;
    const double C0 = lifting::mollifier_C0(2);
    const auto c = scaling::compute_constants(P, 0.5, 1.0 - std::exp(-1.0), C0);
    CHECK(c.A3 == doctest::Approx(162.0 / 63.0).epsilon(1e-14));
    CHECK(c.A1 == doctest::Approx(32.0).epsilon(1e-14));
    CHECK(c.A1 > 0.0);

    // K = pi^{n/2} / (2^{2s} pi^{1/n} Gamma(s)^2 s^2 (n/2 - s)) at n = 2, s = 1/2.
    CHECK(c.K_printed == doctest::Approx(kPi / (2.0 * std::sqrt(kPi) * kPi * 0.25 * 0.5)).epsilon(1e-13));
    CHECK(c.A2_printed == doctest::Approx(1.0 / c.K_printed));
    CHECK(c.A2_standard > c.A2_printed);
    CHECK(c.A2 == c.A2_printed);

    const auto lc = lifting::lift_constants(2, 0.5, 0.5);
    CHECK(c.C1 == doctest::Approx(lc.C1).epsilon(1e-13));
    CHECK(c.C2 == doctest::Approx(lc.C2).epsilon(1e-13));
    CHECK(c.A4 == doctest::Approx((4 * c.C1 + c.C2) * std::sqrt(2.0)).epsilon(1e-13));
    CHECK(c.A0 == doctest::Approx(std::pow(4 * c.A3, -3.0) / std::pow(c.A1 * c.A4, 2.0)).epsilon(1e-13));

    const auto cs = scaling::compute_constants(P, 0.5, 0.9, C0, scaling::A2Variant::Standard);
    CHECK(cs.A2 == cs.A2_standard);
    CHECK_THROWS_AS(scaling::compute_constants(P, 0.5, 1.0, C0), DomainError);
    CHECK_THROWS_AS(scaling::compute_constants(P, 1.0, 0.9, C0), DomainError);
}

TEST_CASE("desk-scale recipe: accepted, clipped and consistent") {
    const auto P = desk_model();
    const auto surf = InitialSurface::flat(2, 0.5);
    const auto c = scaling::compute_constants(P, 0.5, 0.99, lifting::mollifier_C0(2));
    const double S = scaling::choose_S(P, c);
    const auto L = scaling::select_parameters(P, surf, S, 0.99);
    CHECK(L.accepted);
    CHECK(L.q_clipped);
    CHECK(L.q < P.r0 / (8 * P.r1 * std::sqrt(2.0)));
    CHECK(L.l == doctest::Approx(L.d));
    CHECK(L.R == doctest::Approx(2 * L.l * std::sqrt(2.0)));
    CHECK(L.l > 4 * P.r1);
    CHECK(L.F_star == doctest::Approx(0.5 * std::min(L.S - L.F1, L.F2)));
    CHECK(L.F_star > 0.0);
    CHECK(scaling::reverify(L));
    const auto dec = L.decomposition();
    CHECK(dec.pitch() == doctest::Approx(2 * L.l));

    const auto text = scaling::to_json(L).dump();
    const auto back = scaling::ledger_from_json(nlohmann::json::parse(text));
    CHECK(scaling::to_json(back).dump() == text);
    CHECK(scaling::reverify(back));
    CHECK(scaling::format_table(L).find("F*") != std::string::npos);

    auto broken = scaling::to_json(L);
    broken["schema_version"] = 7;
    CHECK_THROWS_AS(scaling::ledger_from_json(broken), ConfigError);
    auto tampered = back;
    tampered.h *= 100.0;
    CHECK_FALSE(scaling::reverify(tampered));
}

TEST_CASE("recipe self-consistency over random dials") {
    auto rng = make_rng(2024, Stage::Tests, 5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int accepted = 0;
    for (int trial = 0; trial < 200; ++trial) {
        ModelParams P;
        P.n = U(rng) < 0.7 ? 2 : 3;
        P.s = 0.2 + 0.75 * U(rng);
        P.r0 = 0.5 + 1.5 * U(rng);
        P.r1 = (1.05 + U(rng)) * std::sqrt(P.n + 1.0) * P.r0;
        P.lambda = std::pow(10.0, -2.0 + 8.0 * U(rng));
        if (U(rng) < 0.5) {
            P.law.kind = StrengthLaw::Kind::PointMass;
            P.law.value = 0.2 + 2.0 * U(rng);
        } else {
            P.law.kind = StrengthLaw::Kind::ShiftedExponential;
            P.law.value = 0.1 + U(rng);
            P.law.theta = 0.1 + U(rng);
        }
        const double p_alpha = 0.5 + 0.499 * U(rng);
        const double alpha = std::min(1.0, P.s) * (0.3 + 0.69 * U(rng));
        Coord nu{0.7 * U(rng), 0.0, 0.0};
        scaling::SelectOptions opt;
        opt.alpha = alpha;
        opt.throw_on_reject = false;
        opt.variant = U(rng) < 0.5 ? scaling::A2Variant::Printed : scaling::A2Variant::Standard;
        const auto c = scaling::compute_constants(P, alpha, p_alpha, lifting::mollifier_C0(P.n), opt.variant);
        const double S = scaling::choose_S(P, c);

        // Residual amplitude set to half the admissible level measured on the bare tilt.
        const auto probe = scaling::select_parameters(P, InitialSurface::flat(P.n, P.s, nu), S, p_alpha, opt);
        REQUIRE(probe.accepted);
        const double threshold = std::min(probe.admissibility.sharp_threshold, probe.admissibility.clipped_threshold);
        const double k = 2 * kPi / 10.0;
        const auto surf = wavy(P.n, P.s, nu, 0.5 * threshold / std::pow(k, 2 * P.s) / 1.01, 10.0);
        const auto L = scaling::select_parameters(P, surf, S, p_alpha, opt);
        INFO("trial " << trial << ": " << L.diagnosis);
        if (!L.accepted) {
            CHECK_FALSE(L.diagnosis.empty());
            continue;
        }
        ++accepted;
        CHECK(L.all_inequalities_pass());
        const auto back = scaling::ledger_from_json(nlohmann::json::parse(scaling::to_json(L).dump()));
        CHECK(scaling::reverify(back));
        CHECK(L.F_star > L.admissibility.fraclap_U);
        CHECK(L.admissibility.fraclap_U > 0.0);
    }
    CHECK(accepted >= 190);
}

TEST_CASE("power laws in lambda mu_S") {
    for (const auto& [n, s] : {std::pair{2, 0.5}, std::pair{2, 0.7}, std::pair{3, 0.4}}) {
        ModelParams P = desk_model();
        P.n = n;
        P.s = s;
        P.r1 = 1.2 * std::sqrt(n + 1.0);
        P.law.kind = StrengthLaw::Kind::PointMass;
        P.law.value = 1.0;
        std::vector<double> x, lq, lh, lf;
        for (int k = 0; k < 9; ++k) {
            P.lambda = std::pow(10.0, -4.0 + 0.5 * k);
            const auto L = scaling::select_parameters(P, InitialSurface::flat(n, s), 1.0, 0.9);
            REQUIRE_FALSE(L.q_clipped);
            x.push_back(std::log(P.lambda * L.mu_S));
            lq.push_back(std::log(L.q));
            lh.push_back(std::log(L.h));
            lf.push_back(std::log(L.F2));
        }
        CHECK(slope(x, lq) == doctest::Approx(1.0 / (2 * s)).epsilon(0.01));
        CHECK(slope(x, lh) == doctest::Approx(n / (2 * s) - 1.0).scale(1.0).epsilon(0.01));
        CHECK(slope(x, lf) == doctest::Approx(n / (2 * s)).epsilon(0.01));
    }
}

TEST_CASE("threshold is nondecreasing in lambda") {
    auto P = desk_model();
    const auto surf = wavy(2, 0.5, {0.3, 0.0, 0.0}, 1e-9, 10.0);
    double prev = 0.0;
    for (int k = 0; k < 12; ++k) {
        P.lambda = std::pow(10.0, -2.0 + k);
        scaling::SelectOptions opt;
        opt.throw_on_reject = false;
        const auto L = scaling::select_parameters(P, surf, 1.0, 0.9, opt);
        CHECK(L.admissibility.sharp_threshold >= prev);
        prev = L.admissibility.sharp_threshold;
    }
}

TEST_CASE("admissibility: trivial cases and rejection") {
    const auto P = desk_model();
    const auto flat = scaling::select_parameters(P, InitialSurface::flat(2, 0.5), 1.0, 0.99);
    CHECK(flat.accepted);
    CHECK(flat.admissibility.fraclap_U == 0.0);
    const auto tilted = scaling::select_parameters(P, InitialSurface::flat(2, 0.5, {0.6, 0.3, 0.0}), 1.0, 0.99);
    CHECK(tilted.accepted);
    CHECK(tilted.admissibility.grad_U == doctest::Approx(std::sqrt(0.45)));
    CHECK(tilted.F1 <= flat.F1);

    const auto steep = InitialSurface::flat(2, 0.5, {1.2, 0.0, 0.0});
    CHECK_THROWS_AS(scaling::select_parameters(P, steep, 1.0, 0.99), DegenerateSurfaceError);
    scaling::SelectOptions opt;
    opt.throw_on_reject = false;
    const auto rej = scaling::select_parameters(P, steep, 1.0, 0.99, opt);
    CHECK_FALSE(rej.accepted);
    CHECK(rej.diagnosis.find("grad U") != std::string::npos);

    const auto rough = wavy(2, 0.5, {}, 0.5, 10.0);
    CHECK_THROWS_AS(scaling::select_parameters(P, rough, 1.0, 0.99), AdmissibilityError);
    CHECK_THROWS_AS(scaling::select_parameters(P, InitialSurface::flat(2, 0.5), 0.0, 0.99, opt), DomainError);
    auto pm = P;
    pm.law.kind = StrengthLaw::Kind::PointMass;
    pm.law.value = 0.7;
    CHECK_THROWS_AS(scaling::select_parameters(pm, InitialSurface::flat(2, 0.5), 0.8, 0.99), DomainError);
}

TEST_CASE("admissibility flips exactly at the closed-form threshold") {
    const auto P = desk_model(1e3);
    const auto c = scaling::compute_constants(P, 0.5, 0.9, lifting::mollifier_C0(2));
    const double S = 1.0;
    const Coord nu{0.2, 0.1, 0.0};
    auto surface = [&](double t) { return wavy(2, 0.5, nu, t, 40.0); };
    scaling::SelectOptions opt;
    opt.throw_on_reject = false;
    auto passes = [&](double t) {
        return scaling::select_parameters(P, surface(t), S, 0.9, opt).admissibility.pass();
    };
    // Oracle: the closed-form inequality with the surface norms, independent of the ledger.
    auto closed_form = [&](double t) {
        const auto u = surface(t);
        const double m = std::min(c.A2 * (1.0 - u.grad_sup()), 0.5 * S);
        const double lm = P.lambda * P.law.tail(S);
        const double q_recipe = std::pow(m * lm / (4 * c.A1 * c.A3 * c.A4), 1.0);
        const double q = std::min(q_recipe, 0.95 * P.r0 / (8 * P.r1 * std::sqrt(2.0)));
        const double thr = std::min(std::pow(m / (4 * c.A3), 2.0) * lm / (c.A1 * c.A4), m * q * q / (4 * c.A3));
        return u.fraclap_sup() <= thr;
    };
    double lo = 0.0, hi = 1.0;
    REQUIRE(passes(lo));
    REQUIRE_FALSE(passes(hi));
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (passes(mid) ? lo : hi) = mid;
    }
    double olo = 0.0, ohi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (olo + ohi);
        (closed_form(mid) ? olo : ohi) = mid;
    }
    CHECK(lo == doctest::Approx(olo).epsilon(1e-12));
    CHECK(lo > 0.0);
}

TEST_CASE("S selection") {
    auto P = desk_model();
    P.law.kind = StrengthLaw::Kind::PointMass;
    P.law.value = 0.6;
    const auto c = scaling::compute_constants(P, 0.5, 0.9, lifting::mollifier_C0(2));
    CHECK(scaling::choose_S(P, c) == doctest::Approx(0.6));
    // The objective is flat on [2 A2, value]; the largest S keeps the most room above F1.
    P.law.value = 3.0;
    REQUIRE(2 * c.A2 < 3.0);
    CHECK(scaling::choose_S(P, c) == doctest::Approx(3.0));
    auto E = P;
    E.law.kind = StrengthLaw::Kind::ShiftedExponential;
    E.law.value = 0.2;
    E.law.theta = 0.5;
    const double S = scaling::choose_S(E, c);
    auto objective = [&](double x) {
        return std::pow(std::min(c.A2, 0.5 * x), 3.0) * std::pow(E.law.tail(x), 2.0);
    };
    for (double x = 0.01; x < 12.0; x += 0.01) CHECK(objective(x) <= objective(S) * (1 + 1e-9));
}
