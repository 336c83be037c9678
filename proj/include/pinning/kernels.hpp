#pragma once

// Fractional Dirichlet Green kernel on balls and the radial local solution with an
// inner source F1 on B_{r0} and an outer sink F2 on the annulus r0 < |x| < R.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pinning::kernels {

struct FracParams {
    int n = 2;
    double s = 0.5;

    void validate() const;
};

/// Phi(zeta) = int_0^zeta w^{s-1} (1+w)^{-n/2} dw. zeta = +inf gives the complete
/// Beta integral B(s, n/2 - s).
double phi_integral(double zeta, const FracParams& p);

/// 1 / (s (n/2 - s)), the crude bound on phi_integral used for the minimum estimate.
double phi_upper_bound(const FracParams& p);

/// Gamma(n/2) / (2^{2s} Gamma(n/2+s) Gamma(1+s)): g(x) = constant * (R^2 - |x|^2)^s.
double getoor_constant(const FracParams& p);

/// Getoor's closed form for the uniform unit source on B_R.
double getoor_solution(std::span<const double> x, double R, const FracParams& p);
double getoor_solution_radial(double radius, double R, const FracParams& p);

/// The kernel prefactor kappa in G = kappa |x-y|^{2s-n} Phi(zeta), in three variants.
struct KernelConstants {
    double printed = 0.0;     ///< Gamma(n/2) / (2^{2s} pi^{1/n} Gamma(s)^2)
    double standard = 0.0;    ///< Gamma(n/2) / (2^{2s} pi^{n/2} Gamma(s)^2)
    double calibrated = 0.0;  ///< fixed by int_{B_R} G(0, y) dy = g(0)
};

/// Green kernel of the fractional Laplacian on B_R(0) with exterior Dirichlet data.
/// Construction calibrates the prefactor against the Getoor solution.
class GreenKernel {
public:
    explicit GreenKernel(FracParams p);

    const FracParams& params() const { return params_; }
    const KernelConstants& constants() const { return constants_; }
    double prefactor() const { return constants_.calibrated; }

    /// G(x, y); zero when either point lies outside B_R. Throws on x == y.
    double operator()(std::span<const double> x, std::span<const double> y, double R) const;

    /// Constant K with u(0) >= -K F1 r0^{2s}, for the given prefactor.
    double min_bound_constant(double prefactor) const;

private:
    FracParams params_;
    KernelConstants constants_;
};

double greens_function(std::span<const double> x, std::span<const double> y, double R,
                       const GreenKernel& kernel);

/// int_{B_rho(0)} G(x, y) dy for |x| = radius, by a (distance, polar angle) reduction
/// centred on x. rho <= R.
double ball_integral(double radius, double rho, double R, const GreenKernel& kernel,
                     double rel_tol = 1e-10);

struct BallProblem {
    double R = 1.0;
    double r0 = 0.1;
    double F1 = 0.0;
    double F2 = 0.0;

    double q() const { return r0 / R; }
    void validate() const;
    static BallProblem from_ratio(double q, double R, double F1, double F2);
};

/// b(x) = int_{B_{r0}} G(x, y) dy.
double bump_integral(std::span<const double> x, const BallProblem& prob, const GreenKernel& kernel,
                     double rel_tol = 1e-10);
double bump_integral_radial(double radius, const BallProblem& prob, const GreenKernel& kernel,
                            double rel_tol = 1e-10);

enum class RadialGrid { Uniform, ClusteredNearR };

struct RadialProfile {
    std::vector<double> radii;
    std::vector<double> values;
    BallProblem meta;

    /// Piecewise-linear evaluation; identically zero for r >= R.
    double operator()(double radius) const;
    double at_origin() const { return values.front(); }
    void write_csv(std::ostream& os) const;
};

RadialProfile local_solution(const BallProblem& prob, const GreenKernel& kernel, int grid_size,
                             RadialGrid grid = RadialGrid::Uniform, double rel_tol = 1e-10);

struct LocalConditionReport {
    bool holds = false;
    double lhs = 0.0;  ///< (F1 + F2) / F2
    double rhs = 0.0;  ///< (n / 2s) (1+q)^n / ((1-q^2)^s q^n)
    std::string describe() const;
};

LocalConditionReport check_local_conditions(const BallProblem& prob, const FracParams& p);

}  // namespace pinning::kernels
