#pragma once

// Parameter recipe for the supersolution: constants A0..A4, the choice of q, F1, F2, h,
// l = d, the four feasibility inequalities and the admissibility of the initial surface.

#include <string>

#include <json.hpp>

#include "pinning/obstacles.hpp"

namespace pinning::scaling {

/// Which kernel prefactor enters A2: the printed pi^{1/n} form (larger, conservative for
/// n >= 2) or the standard pi^{n/2} form.
enum class A2Variant { Printed, Standard };

struct Constants {
    int n = 2;
    double s = 0.5;
    double alpha = 0.5;
    double p_alpha = 0.5;
    double C = 0.0;  ///< C_{n,s}
    double C0 = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double K_printed = 0.0;   ///< |u_local(0)| <= K F1 r0^{2s}
    double K_standard = 0.0;
    double A1 = 0.0;
    double A2_printed = 0.0;
    double A2_standard = 0.0;
    double A2 = 0.0;  ///< the variant used for selection
    double A3 = 0.0;
    double A4 = 0.0;
    double A0 = 0.0;
    A2Variant variant = A2Variant::Printed;
};

/// Requires n >= 2, s in (0, 1), p_alpha in (0, 1), 0 < alpha < 2s, alpha <= 1.
Constants compute_constants(const obstacles::ModelParams& params, double alpha, double p_alpha, double mollifier_C0,
                            A2Variant variant = A2Variant::Printed);

struct Inequality {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
    /// rhs - lhs for "<=" records, lhs - rhs for ">=" records.
    double margin = 0.0;
};

struct Admissibility {
    double fraclap_U = 0.0;   ///< ||(-Delta)^s U||_inf
    double grad_U = 0.0;      ///< ||grad U||_inf
    double sharp_threshold = 0.0;    ///< A0 min{A2 (1-|grad U|), S/2}^{1+n/2s} (lambda mu_S)^{n/2s}
    double simple_threshold = 0.0;   ///< A0 min{A2, S/2}^{1+n/2s} (lambda mu_S)^{n/2s} (1-|grad U|)^{1+n/2s}
    double clipped_threshold = 0.0;  ///< min{A2 (1-|grad U|), S/2} q^n / (4 A3) with the final q
    bool sharp_pass = false;
    bool simple_pass = false;
    bool clipped_pass = false;
    bool pass() const { return grad_U < 1.0 && sharp_pass && clipped_pass; }
};

struct GeometryLedger {
    obstacles::ModelParams params;
    Constants constants;
    double S = 0.0;
    double mu_S = 0.0;
    double q = 0.0;
    double q_recipe = 0.0;  ///< before clipping to q < r0 / (8 r1 sqrt n)
    bool q_clipped = false;
    double R = 0.0;
    double l = 0.0;
    double d = 0.0;
    double h = 0.0;
    double F1 = 0.0;
    double F2 = 0.0;
    double F_star = 0.0;
    double lift_bound = 0.0;  ///< C1 (d+l)^{2-2s} h / d^2 + C2 h / (d+l)^{2s}
    Inequality ineq[4];
    Inequality simplified[4];
    Admissibility admissibility;
    bool accepted = false;
    std::string diagnosis;

    obstacles::Decomposition decomposition() const;
    bool all_inequalities_pass() const;
};

struct SelectOptions {
    A2Variant variant = A2Variant::Printed;
    double alpha = 0.0;  ///< 0 picks alpha = min(s, 1)
    /// Throw AdmissibilityError (or DegenerateSurfaceError) instead of returning a
    /// rejected ledger.
    bool throw_on_reject = true;
};

/// The recipe with the given S (mu_S = P(f >= S) from the strength law).
GeometryLedger select_parameters(const obstacles::ModelParams& params, const obstacles::InitialSurface& surf,
                                 double S, double p_alpha, const SelectOptions& opt = {});

/// S maximising min{A2, S/2}^{1+n/2s} mu_S^{n/2s} on a grid over the support of the law.
double choose_S(const obstacles::ModelParams& params, const Constants& c, int grid_points = 400);

/// Recomputes the four scale inequalities, their simplified forms and the admissibility record
/// from the ledger's stored parameters and the surface norms.
void verify(GeometryLedger& ledger);

/// Same check from the stored values only; true when every recorded inequality holds.
bool reverify(const GeometryLedger& ledger);

Admissibility admissibility(const obstacles::InitialSurface& surf, const GeometryLedger& ledger);

nlohmann::json to_json(const GeometryLedger& ledger);
GeometryLedger ledger_from_json(const nlohmann::json& j);

std::string format_table(const GeometryLedger& ledger);

}  // namespace pinning::scaling
