#pragma once

// Lifting function: mollification of the piecewise-constant extension of lattice
// heights, with exact Hessian and the bounds on its fractional Laplacian.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "pinning/grid.hpp"
#include "pinning/kernels.hpp"
#include "pinning/percolation.hpp"

namespace pinning::lifting {

/// Unit-mass 1D bump eta(t) = c exp(-1/(1-t^2)) on (-1, 1) with its tabulated
/// distribution function.
class Mollifier {
public:
    static const Mollifier& instance();

    double density(double t) const;
    double density_derivative(double t) const;
    double cdf(double t) const;
    double max_density() const { return m1_; }             ///< M1 = sup eta
    double max_density_derivative() const { return m2_; }  ///< M2 = sup |eta'|

private:
    Mollifier();
    double norm_ = 1.0;
    double m1_ = 0.0;
    double m2_ = 0.0;
    std::vector<double> table_;  // cdf at the knots
    double step_ = 0.0;
};

/// Hessian constant of the tensor-product mollification with half-width eps = d/(2 sqrt n):
/// ||D^2 u_lift||_F <= C0 h / d^2 whenever neighbouring heights differ by at most 2h.
double mollifier_C0(int n);

struct LatticeHeights {
    percolation::Window window;
    double l = 1.0;
    double d = 1.0;
    double h = 1.0;
    double alpha = 0.5;
    std::vector<double> Lambda;

    double pitch() const { return l + d; }
    /// Pairs (a, b) with |Lambda(a) - Lambda(b)| > 2h |a - b|_1^alpha.
    std::vector<std::pair<std::size_t, std::size_t>> holder_violations() const;
    /// Throws HolderViolationError listing offending pairs.
    void validate() const;
};

/// Lambda(a) = (pulled-back witness height) + depth, so the local solution with minimum
/// -depth attains the witness height at x_a.
LatticeHeights heights_from_surface(const percolation::LatticeSurface& surface, const obstacles::Decomposition& dec,
                                    double depth);

class LiftField {
public:
    explicit LiftField(LatticeHeights heights);

    const LatticeHeights& heights() const { return heights_; }
    int dim() const { return heights_.window.n; }
    /// Half-width of the tensor mollifier; its support lies in the ball of radius d/2.
    double eps() const { return eps_; }

    double value(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;
    std::array<std::array<double, kMaxDim>, kMaxDim> hessian(std::span<const double> x) const;
    double hessian_frobenius(std::span<const double> x) const;

    /// Period of the lift when the window is periodic (0 otherwise).
    double period() const;
    double mean_height() const;

    grid::GridField sample(const grid::GridSpec& spec) const;

private:
    struct Axis {
        long cell[2];
        double w[2];
        double dw[2];
        double d2w[2];
    };
    Axis axis(double xi) const;
    double lambda_at(const std::array<long, kMaxDim>& a) const;

    LatticeHeights heights_;
    double eps_ = 0.0;
};

/// Cosine transform of the unit bump, eta^(w) = int eta(t) cos(w t) dt, by the trapezoid
/// rule on 4096 knots (spectrally accurate for a compactly supported smooth bump).
double bump_transform(double omega);

/// (-Delta)^s u_lift at the nodes of an M^n torus grid, from the exact Fourier series of
/// a periodic lift. Modes are kept in a box |m_i| <= m_max folded onto the grid; the
/// dropped modes contribute at most `truncation` in sup norm.
struct SeriesResult {
    grid::GridField values;
    double truncation = 0.0;
    long m_max = 0;
};

SeriesResult fraclap_series(const LiftField& lift, double s, long nodes_per_axis, double tol);

struct LiftConstants {
    double C = 0.0;  ///< normalisation C_{n,s}
    double C0 = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
};

LiftConstants lift_constants(int n, double s, double alpha);

/// C1 (d+l)^{2-2s} h / d^2 + C2 h / (d+l)^{2s}.
double lift_fraclap_bound(const LiftConstants& c, double s, double l, double d, double h);

struct LiftReport {
    LiftConstants constants;
    double hessian_sup = 0.0;
    double hessian_bound = 0.0;
    double fraclap_sup = 0.0;
    double fraclap_bound = 0.0;
    double max_quad_error = 0.0;
    std::size_t points = 0;
    bool hessian_ok = false;
    bool fraclap_ok = false;
    bool quadrature_ok = false;  ///< quadrature error below 10% of the margin
    bool ok() const { return hessian_ok && fraclap_ok && quadrature_ok; }
    std::string describe() const;
};

/// Measures the Hessian at hessian_points and (-Delta)^s u_lift at fraclap_points, and
/// compares them with the bounds. Periodic lifts use the Fourier series (points are
/// snapped to a torus grid of series_nodes per axis, and the sup also covers every node);
/// other lifts use the singular-integral quadrature.
LiftReport verify_lift_bounds(const LiftField& lift, const kernels::FracParams& p,
                              std::span<const Coord> hessian_points, std::span<const Coord> fraclap_points,
                              double rel_tol = 1e-7, long series_nodes = 256);

}  // namespace pinning::lifting
