#include "pinning/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "pinning/errors.hpp"
#include "pinning/kernels.hpp"
#include "pinning/lifting.hpp"

namespace pinning::scaling {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRoundoff = 1e-12;

Inequality at_most(std::string name, double lhs, double rhs, double slack = 0.0) {
    return {std::move(name), lhs, rhs, lhs <= rhs * (1.0 + slack), rhs - lhs};
}

Inequality at_least(std::string name, double lhs, double rhs, bool strict = false, double slack = 0.0) {
    const bool pass = strict ? lhs > rhs : lhs >= rhs * (1.0 - slack);
    return {std::move(name), lhs, rhs, pass, lhs - rhs};
}

double lift_bound_of(const Constants& c, double l, double d, double h) {
    return c.C1 * std::pow(d + l, 2.0 - 2.0 * c.s) * h / (d * d) + c.C2 * h / std::pow(d + l, 2.0 * c.s);
}

}  // namespace

Constants compute_constants(const obstacles::ModelParams& params, double alpha, double p_alpha, double mollifier_C0,
                            A2Variant variant) {
    params.validate();
    const int n = params.n;
    const double s = params.s;
    if (!(p_alpha > 0.0 && p_alpha < 1.0)) throw DomainError("constants: p_alpha must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha <= 1.0 && alpha < 2.0 * s)) throw DomainError("constants: need 0 < alpha <= 1, alpha < 2s");
    if (!(mollifier_C0 > 0.0)) throw DomainError("constants: C0 must be positive");

    Constants c;
    c.n = n;
    c.s = s;
    c.alpha = alpha;
    c.p_alpha = p_alpha;
    c.variant = variant;
    c.C = fraclap_constant(n, s);
    c.C0 = mollifier_C0;
    const double area = sphere_area(n);
    c.C1 = c.C * c.C0 * area * std::pow(1.5 * std::sqrt(static_cast<double>(n)), 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    c.C2 = c.C * 8.0 * (n + 1) * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n) * std::pow(1.5, alpha - 2.0 * s) /
           (2.0 * s - alpha);

    const kernels::FracParams fp{n, s};
    const double base = std::tgamma(0.5 * n) / (std::pow(2.0, 2.0 * s) * std::pow(std::tgamma(s), 2));
    const double K_unit = kernels::phi_upper_bound(fp) * area / (2.0 * s);
    c.K_printed = base / std::pow(kPi, 1.0 / n) * K_unit;
    c.K_standard = base / std::pow(kPi, 0.5 * n) * K_unit;

    const double r0 = params.r0;
    c.A1 = -std::pow(2.0, 2.0 * n) * std::pow(std::sqrt(static_cast<double>(n)), n) / std::pow(r0, n) *
           std::log1p(-p_alpha);
    c.A2_printed = std::pow(r0, 1.0 - 2.0 * s) / c.K_printed;
    c.A2_standard = std::pow(r0, 1.0 - 2.0 * s) / c.K_standard;
    c.A2 = variant == A2Variant::Printed ? c.A2_printed : c.A2_standard;
    c.A3 = n / (2.0 * s) * std::pow(9.0 / 8.0, n) * 64.0 / 63.0;
    c.A4 = (4.0 * c.C1 + c.C2) / std::pow(r0, 2.0 * s) * std::pow(static_cast<double>(n), s);
    const double e = n / (2.0 * s);
    c.A0 = std::pow(4.0 * c.A3, -(1.0 + e)) * std::pow(c.A1 * c.A4, -e);
    return c;
}

obstacles::Decomposition GeometryLedger::decomposition() const {
    obstacles::Decomposition dec;
    dec.n = params.n;
    dec.l = l;
    dec.d = d;
    dec.h = h;
    dec.r1 = params.r1;
    dec.validate();
    return dec;
}

bool GeometryLedger::all_inequalities_pass() const {
    for (const auto& i : ineq)
        if (!i.pass) return false;
    for (const auto& i : simplified)
        if (!i.pass) return false;
    return true;
}

Admissibility admissibility(const obstacles::InitialSurface& surf, const GeometryLedger& L) {
    Admissibility a;
    a.fraclap_U = surf.fraclap_sup();
    a.grad_U = surf.grad_sup();
    const auto& c = L.constants;
    const double e = c.n / (2.0 * c.s);
    const double lm = L.params.lambda * L.mu_S;
    const double g = std::min(a.grad_U, 1.0);
    const double m = std::min(c.A2 * (1.0 - g), 0.5 * L.S);
    a.sharp_threshold = c.A0 * std::pow(m, 1.0 + e) * std::pow(lm, e);
    a.simple_threshold =
        c.A0 * std::pow(std::min(c.A2, 0.5 * L.S), 1.0 + e) * std::pow(lm, e) * std::pow(1.0 - g, 1.0 + e);
    a.clipped_threshold = m * std::pow(L.q, c.n) / (4.0 * c.A3);
    a.sharp_pass = a.grad_U < 1.0 && a.fraclap_U <= a.sharp_threshold;
    a.simple_pass = a.grad_U < 1.0 && a.fraclap_U <= a.simple_threshold;
    a.clipped_pass = a.grad_U < 1.0 && a.fraclap_U <= a.clipped_threshold;
    return a;
}

void verify(GeometryLedger& L) {
    const auto& c = L.constants;
    const auto& P = L.params;
    const int n = P.n;
    const double s = P.s;
    const double lm = P.lambda * L.mu_S;
    const double g = L.admissibility.grad_U;
    const double fr = L.admissibility.fraclap_U;
    const double K = c.variant == A2Variant::Printed ? c.K_printed : c.K_standard;
    L.lift_bound = lift_bound_of(c, L.l, L.d, L.h);
    L.F_star = 0.5 * std::min(L.S - L.F1, L.F2);

    L.ineq[0] = at_least("percolation: h (l - 2 r1)^n > -log(1 - p_alpha) / (lambda mu_S)",
                         L.h * std::pow(L.l - 2.0 * P.r1, n), -std::log1p(-c.p_alpha) / lm, true);
    L.ineq[1] = at_most("depth: K F1 r0^{2s} <= r0 (1 - |grad U|)", K * L.F1 * std::pow(P.r0, 2.0 * s), P.r0 * (1.0 - g),
                        kRoundoff);
    L.ineq[2] = at_least("ratio: (F1 + F2) / F2 >= (n/2s) (1+q)^n / ((1-q^2)^s q^n)", (L.F1 + L.F2) / L.F2,
                         n / (2.0 * s) * std::pow(1.0 + L.q, n) / (std::pow(1.0 - L.q * L.q, s) * std::pow(L.q, n)));
    L.ineq[3] = at_most("lift: lift bound + |(-Delta)^s U| <= F*", L.lift_bound + fr, L.F_star);

    L.simplified[0] = at_least("percolation, simplified: h / q^n >= A1 / (lambda mu_S)", L.h / std::pow(L.q, n), c.A1 / lm, false,
                               kRoundoff);
    L.simplified[1] = at_most("depth, simplified: F1 <= A2 (1 - |grad U|)", L.F1, c.A2 * (1.0 - g), kRoundoff);
    L.simplified[2] = at_least("ratio, simplified: (F1 / F2) q^n >= A3", L.F1 / L.F2 * std::pow(L.q, n), c.A3, false, kRoundoff);
    L.simplified[3] = at_most("lift, simplified: A4 h q^{2s} + |(-Delta)^s U| <= min{S - F1, F2} / 2",
                              c.A4 * L.h * std::pow(L.q, 2.0 * s) + fr, 0.5 * std::min(L.S - L.F1, L.F2), kRoundoff);
}

bool reverify(const GeometryLedger& ledger) {
    GeometryLedger copy = ledger;
    const auto fresh = compute_constants(ledger.params, ledger.constants.alpha, ledger.constants.p_alpha,
                                         ledger.constants.C0, ledger.constants.variant);
    auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
    const auto& c = ledger.constants;
    if (!(same(fresh.A0, c.A0) && same(fresh.A1, c.A1) && same(fresh.A2, c.A2) && same(fresh.A3, c.A3) &&
          same(fresh.A4, c.A4) && same(fresh.C1, c.C1) && same(fresh.C2, c.C2)))
        return false;
    copy.constants = fresh;
    verify(copy);
    const double n = ledger.params.n;
    const bool geometry = same(copy.l, copy.d) &&
                          same(copy.l, ledger.params.r0 / (2.0 * copy.q * std::sqrt(n))) &&
                          same(copy.R, ledger.params.r0 / copy.q) && copy.l > 4.0 * ledger.params.r1 &&
                          copy.q < ledger.params.r0 / (8.0 * ledger.params.r1 * std::sqrt(n)) && copy.F_star > 0.0;
    return geometry && copy.all_inequalities_pass();
}

double choose_S(const obstacles::ModelParams& params, const Constants& c, int grid_points) {
    const auto& law = params.law;
    const double hi = law.kind == obstacles::StrengthLaw::Kind::PointMass ? law.value : law.value + 20.0 * law.theta;
    const double e = params.n / (2.0 * params.s);
    auto objective = [&](double S) {
        const double mu = law.tail(S);
        if (mu <= 0.0) return 0.0;
        return std::pow(std::min(c.A2, 0.5 * S), 1.0 + e) * std::pow(mu, e);
    };
    double best_S = hi;
    double best = objective(hi);
    std::vector<double> candidates;
    for (int k = 1; k <= grid_points; ++k) candidates.push_back(hi * k / grid_points);
    candidates.push_back(law.value);
    if (2.0 * c.A2 < hi) candidates.push_back(2.0 * c.A2);
    for (double S : candidates) {
        const double v = objective(S);
        if (v > best) {
            best = v;
            best_S = S;
        }
    }
    const double step = hi / grid_points;
    const double a = std::max(best_S - step, 1e-3 * step), b = std::min(best_S + step, hi);
    if (b > a) {
        const auto r = boost::math::tools::brent_find_minima([&](double S) { return -objective(S); }, a, b, 40);
        if (-r.second > best) best_S = r.first;
    }
    return best_S;
}

GeometryLedger select_parameters(const obstacles::ModelParams& params, const obstacles::InitialSurface& surf,
                                 double S, double p_alpha, const SelectOptions& opt) {
    params.validate();
    if (surf.dim() != params.n) throw DomainError("select: surface dimension does not match the model");
    GeometryLedger L;
    L.params = params;
    L.admissibility.grad_U = surf.grad_sup();
    L.admissibility.fraclap_U = surf.fraclap_sup();
    const double g = L.admissibility.grad_U;
    if (!(g < 1.0)) {
        std::ostringstream os;
        os << "rejected: |grad U|_inf = " << g << " >= 1";
        if (opt.throw_on_reject) throw DegenerateSurfaceError(os.str());
        L.diagnosis = os.str();
        return L;
    }
    const double alpha = opt.alpha > 0.0 ? opt.alpha : std::min(params.s, 1.0);
    L.constants = compute_constants(params, alpha, p_alpha, lifting::mollifier_C0(params.n), opt.variant);
    const auto& c = L.constants;
    const int n = params.n;
    const double s = params.s;

    L.S = S;
    L.mu_S = params.law.tail(S);
    if (!(S > 0.0) || !(L.mu_S > 0.0)) throw DomainError("select: need S > 0 with P(f >= S) > 0");
    const double lm = params.lambda * L.mu_S;
    const double m = std::min(c.A2 * (1.0 - g), 0.5 * S);
    L.q_recipe = std::pow(m * lm / (4.0 * c.A1 * c.A3 * c.A4), 1.0 / (2.0 * s));
    const double q_cap = params.r0 / (8.0 * params.r1 * std::sqrt(static_cast<double>(n)));
    L.q = L.q_recipe;
    if (!(L.q < q_cap)) {
        L.q = 0.95 * q_cap;
        L.q_clipped = true;
    }
    L.F1 = m;
    L.F2 = m / c.A3 * std::pow(L.q, n);
    L.h = c.A1 / lm * std::pow(L.q, n);
    L.l = L.d = params.r0 / (2.0 * L.q * std::sqrt(static_cast<double>(n)));
    L.R = params.r0 / L.q;

    L.admissibility = admissibility(surf, L);
    verify(L);

    std::ostringstream os;
    bool ok = true;
    for (const auto* group : {L.ineq, L.simplified}) {
        for (int k = 0; k < 4; ++k) {
            if (!group[k].pass) {
                os << "failed " << group[k].name << " (lhs " << group[k].lhs << ", rhs " << group[k].rhs << "); ";
                ok = false;
            }
        }
    }
    if (!L.admissibility.pass()) {
        os << "U not admissible: |(-Delta)^s U| = " << L.admissibility.fraclap_U << " > threshold "
           << std::min(L.admissibility.sharp_threshold, L.admissibility.clipped_threshold) << "; ";
        ok = false;
    }
    L.accepted = ok;
    L.diagnosis = ok ? (L.q_clipped ? "accepted (q clipped to 0.95 r0 / (8 r1 sqrt n))" : "accepted") : os.str();
    if (!ok && opt.throw_on_reject) throw AdmissibilityError(L.diagnosis);
    return L;
}

namespace {

nlohmann::json ineq_json(const Inequality& i) {
    return {{"name", i.name}, {"lhs", i.lhs}, {"rhs", i.rhs}, {"pass", i.pass}, {"margin", i.margin}};
}

Inequality ineq_from(const nlohmann::json& j) {
    return {j.at("name").get<std::string>(), j.at("lhs").get<double>(), j.at("rhs").get<double>(),
            j.at("pass").get<bool>(), j.at("margin").get<double>()};
}

}  // namespace

nlohmann::json to_json(const GeometryLedger& L) {
    using nlohmann::json;
    const auto& P = L.params;
    const auto& c = L.constants;
    json j;
    j["schema_version"] = 1;
    j["model"] = {{"n", P.n},
                  {"s", P.s},
                  {"r0", P.r0},
                  {"r1", P.r1},
                  {"lambda", P.lambda},
                  {"seed", P.seed},
                  {"law",
                   {{"kind", P.law.kind == obstacles::StrengthLaw::Kind::PointMass ? "point_mass" : "shifted_exponential"},
                    {"value", P.law.value},
                    {"theta", P.law.theta}}}};
    j["assumptions"] = {{"p_alpha", c.p_alpha}, {"alpha", c.alpha},
                        {"note", "p_alpha is a dial; p_alpha > p_H is assumed, not certified"}};
    j["constants"] = {{"C", c.C},
                      {"C0", c.C0},
                      {"C1", c.C1},
                      {"C2", c.C2},
                      {"K_printed", c.K_printed},
                      {"K_standard", c.K_standard},
                      {"A0", c.A0},
                      {"A1", c.A1},
                      {"A2", c.A2},
                      {"A2_printed", c.A2_printed},
                      {"A2_standard", c.A2_standard},
                      {"A2_variant", c.variant == A2Variant::Printed ? "printed" : "standard"},
                      {"A3", c.A3},
                      {"A4", c.A4}};
    j["parameters"] = {{"S", L.S},   {"mu_S", L.mu_S}, {"q", L.q},   {"q_recipe", L.q_recipe},
                       {"q_clipped", L.q_clipped},   {"R", L.R},       {"l", L.l},   {"d", L.d},
                       {"h", L.h},   {"F1", L.F1},     {"F2", L.F2}, {"F_star", L.F_star},
                       {"lift_bound", L.lift_bound}};
    json in = json::array();
    json si = json::array();
    for (int k = 0; k < 4; ++k) {
        in.push_back(ineq_json(L.ineq[k]));
        si.push_back(ineq_json(L.simplified[k]));
    }
    j["inequalities"] = in;
    j["simplified"] = si;
    const auto& a = L.admissibility;
    j["admissibility"] = {{"fraclap_U", a.fraclap_U},
                          {"grad_U", a.grad_U},
                          {"sharp_threshold", a.sharp_threshold},
                          {"simple_threshold", a.simple_threshold},
                          {"clipped_threshold", a.clipped_threshold},
                          {"sharp_pass", a.sharp_pass},
                          {"simple_pass", a.simple_pass},
                          {"clipped_pass", a.clipped_pass}};
    j["accepted"] = L.accepted;
    j["diagnosis"] = L.diagnosis;
    return j;
}

GeometryLedger ledger_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1) throw ConfigError("ledger: unsupported schema_version");
        GeometryLedger L;
        const auto& m = j.at("model");
        L.params.n = m.at("n").get<int>();
        L.params.s = m.at("s").get<double>();
        L.params.r0 = m.at("r0").get<double>();
        L.params.r1 = m.at("r1").get<double>();
        L.params.lambda = m.at("lambda").get<double>();
        L.params.seed = m.at("seed").get<std::uint64_t>();
        const auto& law = m.at("law");
        const auto kind = law.at("kind").get<std::string>();
        if (kind == "point_mass")
            L.params.law.kind = obstacles::StrengthLaw::Kind::PointMass;
        else if (kind == "shifted_exponential")
            L.params.law.kind = obstacles::StrengthLaw::Kind::ShiftedExponential;
        else
            throw ConfigError("ledger: unknown strength law " + kind);
        L.params.law.value = law.at("value").get<double>();
        L.params.law.theta = law.at("theta").get<double>();

        auto& c = L.constants;
        c.n = L.params.n;
        c.s = L.params.s;
        c.p_alpha = j.at("assumptions").at("p_alpha").get<double>();
        c.alpha = j.at("assumptions").at("alpha").get<double>();
        const auto& k = j.at("constants");
        c.C = k.at("C").get<double>();
        c.C0 = k.at("C0").get<double>();
        c.C1 = k.at("C1").get<double>();
        c.C2 = k.at("C2").get<double>();
        c.K_printed = k.at("K_printed").get<double>();
        c.K_standard = k.at("K_standard").get<double>();
        c.A0 = k.at("A0").get<double>();
        c.A1 = k.at("A1").get<double>();
        c.A2 = k.at("A2").get<double>();
        c.A2_printed = k.at("A2_printed").get<double>();
        c.A2_standard = k.at("A2_standard").get<double>();
        c.variant = k.at("A2_variant").get<std::string>() == "printed" ? A2Variant::Printed : A2Variant::Standard;
        c.A3 = k.at("A3").get<double>();
        c.A4 = k.at("A4").get<double>();

        const auto& p = j.at("parameters");
        L.S = p.at("S").get<double>();
        L.mu_S = p.at("mu_S").get<double>();
        L.q = p.at("q").get<double>();
        L.q_recipe = p.at("q_recipe").get<double>();
        L.q_clipped = p.at("q_clipped").get<bool>();
        L.R = p.at("R").get<double>();
        L.l = p.at("l").get<double>();
        L.d = p.at("d").get<double>();
        L.h = p.at("h").get<double>();
        L.F1 = p.at("F1").get<double>();
        L.F2 = p.at("F2").get<double>();
        L.F_star = p.at("F_star").get<double>();
        L.lift_bound = p.at("lift_bound").get<double>();
        for (int i = 0; i < 4; ++i) {
            L.ineq[i] = ineq_from(j.at("inequalities").at(i));
            L.simplified[i] = ineq_from(j.at("simplified").at(i));
        }
        const auto& a = j.at("admissibility");
        auto& A = L.admissibility;
        A.fraclap_U = a.at("fraclap_U").get<double>();
        A.grad_U = a.at("grad_U").get<double>();
        A.sharp_threshold = a.at("sharp_threshold").get<double>();
        A.simple_threshold = a.at("simple_threshold").get<double>();
        A.clipped_threshold = a.at("clipped_threshold").get<double>();
        A.sharp_pass = a.at("sharp_pass").get<bool>();
        A.simple_pass = a.at("simple_pass").get<bool>();
        A.clipped_pass = a.at("clipped_pass").get<bool>();
        L.accepted = j.at("accepted").get<bool>();
        L.diagnosis = j.at("diagnosis").get<std::string>();
        return L;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ledger: ") + e.what());
    }
}

std::string format_table(const GeometryLedger& L) {
    std::ostringstream os;
    os << std::setprecision(6);
    const auto& c = L.constants;
    auto row = [&](const std::string& k, double v) { os << "  " << std::left << std::setw(12) << k << v << "\n"; };
    os << "constants\n";
    row("C", c.C);
    row("C0", c.C0);
    row("C1", c.C1);
    row("C2", c.C2);
    row("A0", c.A0);
    row("A1", c.A1);
    row("A2", c.A2);
    row("A3", c.A3);
    row("A4", c.A4);
    os << "parameters\n";
    row("S", L.S);
    row("mu_S", L.mu_S);
    row("q", L.q);
    row("R", L.R);
    row("l = d", L.l);
    row("h", L.h);
    row("F1", L.F1);
    row("F2", L.F2);
    row("F*", L.F_star);
    os << "inequalities\n";
    for (const auto* group : {L.ineq, L.simplified})
        for (int k = 0; k < 4; ++k)
            os << "  " << (group[k].pass ? "ok   " : "FAIL ") << group[k].name << "  [" << group[k].lhs << " vs "
               << group[k].rhs << "]\n";
    os << "admissibility: |(-Delta)^s U| = " << L.admissibility.fraclap_U << ", sharp threshold "
       << L.admissibility.sharp_threshold << ", simple threshold " << L.admissibility.simple_threshold << "\n";
    os << L.diagnosis << "\n";
    return os.str();
}

}  // namespace pinning::scaling
