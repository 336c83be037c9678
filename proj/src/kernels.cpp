#include "pinning/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>

#include "pinning/errors.hpp"
#include "pinning/math.hpp"
#include "pinning/quadrature.hpp"

namespace pinning::kernels {

namespace {

constexpr double kPi = std::numbers::pi;

double sq(double v) { return v * v; }

// Integral over t in [a, b] where the integrand behaves like (b - t)^s at the upper end.
// The map t = b - (b - a) w^{1/s} turns that endpoint behaviour into a linear one.
double integrate_upper_power(const std::function<double(double)>& f, double a, double b, double s,
                             double tol) {
    const double p = 1.0 / s;
    const double width = b - a;
    auto g = [&](double w) {
        if (w <= 0.0) return 0.0;
        return f(b - width * std::pow(w, p)) * width * p * std::pow(w, p - 1.0);
    };
    return quad::adaptive(g, 0.0, 1.0, tol).value;
}

}  // namespace

void FracParams::validate() const {
    if (n < 2) throw DomainError("dimension n must be >= 2");
    if (!(s > 0.0 && s < 1.0)) throw DomainError("exponent s must lie in (0, 1)");
}

double phi_upper_bound(const FracParams& p) { return 1.0 / (p.s * (0.5 * p.n - p.s)); }

double phi_integral(double zeta, const FracParams& p) {
    if (std::isnan(zeta) || zeta < 0.0) throw DomainError("phi_integral: zeta must be >= 0");
    if (zeta == 0.0) return 0.0;
    const double a = p.s;
    const double b = 0.5 * p.n - p.s;
    const double complete = std::beta(a, b);
    if (std::isinf(zeta)) return complete;
    // w = t / (1 - t) maps the integral onto the incomplete Beta function B_x(s, n/2 - s).
    // For zeta > 1 the upper tail B_{1/(1+zeta)}(n/2 - s, s) is subtracted instead.
    if (zeta <= 1.0) return boost::math::beta(a, b, zeta / (1.0 + zeta));
    return complete - boost::math::beta(b, a, 1.0 / (1.0 + zeta));
}

double getoor_constant(const FracParams& p) {
    const double half_n = 0.5 * p.n;
    return std::tgamma(half_n) /
           (std::pow(2.0, 2.0 * p.s) * std::tgamma(half_n + p.s) * std::tgamma(1.0 + p.s));
}

double getoor_solution_radial(double radius, double R, const FracParams& p) {
    if (!(R > 0.0)) throw DomainError("getoor_solution: R must be positive");
    if (radius >= R) return 0.0;
    return getoor_constant(p) * std::pow(R * R - radius * radius, p.s);
}

double getoor_solution(std::span<const double> x, double R, const FracParams& p) {
    return getoor_solution_radial(norm(x), R, p);
}

GreenKernel::GreenKernel(FracParams p) : params_(p) {
    params_.validate();
    const int n = p.n;
    const double s = p.s;
    const double base = std::tgamma(0.5 * n) / (std::pow(2.0, 2.0 * s) * sq(std::tgamma(s)));
    constants_.printed = base / std::pow(kPi, 1.0 / n);
    constants_.standard = base / std::pow(kPi, 0.5 * n);

    // int_{B_1} |y|^{2s-n} Phi((1-|y|^2)/|y|^2) dy with unit prefactor, radial form.
    // rho = t^{1/(2s)} removes the rho^{2s-1} weight; the upper end behaves like (1-t)^s.
    auto radial = [&](double t) {
        const double rho = std::pow(t, 1.0 / (2.0 * s));
        if (rho >= 1.0) return 0.0;
        if (rho <= 0.0) return phi_integral(std::numeric_limits<double>::infinity(), p);
        return phi_integral((1.0 - rho * rho) / (rho * rho), p);
    };
    const double lower = quad::adaptive(radial, 0.0, 0.5, 1e-13).value;
    const double upper = integrate_upper_power(radial, 0.5, 1.0, s, 1e-13);
    const double unit_integral = sphere_area(n) * (lower + upper) / (2.0 * s);
    constants_.calibrated = getoor_constant(p) / unit_integral;
}

double GreenKernel::operator()(std::span<const double> x, std::span<const double> y, double R) const {
    const double nx = norm(x);
    const double ny = norm(y);
    if (nx >= R || ny >= R) return 0.0;
    const double dist = distance(x, y);
    if (dist == 0.0) throw SingularInputError("greens_function: x == y");
    const double R2 = R * R;
    const double zeta = (R2 - nx * nx) * (R2 - ny * ny) / (R2 * dist * dist);
    return prefactor() * std::pow(dist, 2.0 * params_.s - params_.n) * phi_integral(zeta, params_);
}

double GreenKernel::min_bound_constant(double prefactor) const {
    const int n = params_.n;
    const double s = params_.s;
    // b(0) <= kappa * phi_upper_bound * |S^{n-1}| * r0^{2s} / (2s)
    return prefactor * phi_upper_bound(params_) * sphere_area(n) / (2.0 * s);
}

double greens_function(std::span<const double> x, std::span<const double> y, double R,
                       const GreenKernel& kernel) {
    return kernel(x, y, R);
}

double ball_integral(double radius, double rho, double R, const GreenKernel& kernel, double rel_tol) {
    const FracParams& p = kernel.params();
    const int n = p.n;
    const double s = p.s;
    if (!(rho > 0.0) || rho > R) throw DomainError("ball_integral: need 0 < rho <= R");
    if (radius < 0.0) throw DomainError("ball_integral: negative radius");
    if (radius >= R) return 0.0;

    const double kappa = kernel.prefactor();
    const double R2 = R * R;
    const double inner_tol = rel_tol * 1e-2;
    const bool touches_boundary = rho >= R * (1.0 - 1e-14);

    // Radial part along a ray from x: int kappa rho^{2s-1} Phi(zeta) d rho in t = rho^{2s}.
    auto along_ray = [&](double cos_theta, double lo, double hi) {
        auto f = [&](double t) {
            const double r = std::pow(t, 1.0 / (2.0 * s));
            const double y2 = radius * radius + 2.0 * r * radius * cos_theta + r * r;
            if (y2 >= R2) return 0.0;
            if (r <= 0.0) return phi_integral(std::numeric_limits<double>::infinity(), p);
            const double zeta = (R2 - radius * radius) * (R2 - y2) / (R2 * r * r);
            return phi_integral(zeta, p);
        };
        const double tlo = std::pow(lo, 2.0 * s);
        const double thi = std::pow(hi, 2.0 * s);
        if (thi <= tlo) return 0.0;
        const double body = touches_boundary ? integrate_upper_power(f, tlo, thi, s, inner_tol)
                                             : quad::adaptive(f, tlo, thi, inner_tol).value;
        return kappa * body / (2.0 * s);
    };

    // Solid-angle weight of the polar angle theta about the axis through x.
    const double ring = n == 2 ? 2.0 : sphere_area(n - 1);
    auto angular_weight = [&](double sin_theta) { return ring * std::pow(sin_theta, n - 2); };

    if (radius == 0.0) return sphere_area(n) * along_ray(1.0, 0.0, rho);

    if (radius <= rho) {
        auto f = [&](double theta) {
            const double c = std::cos(theta);
            const double sn = std::sin(theta);
            const double disc = std::max(0.0, rho * rho - radius * radius * sn * sn);
            const double hi = -radius * c + std::sqrt(disc);
            return angular_weight(sn) * along_ray(c, 0.0, hi);
        };
        return quad::adaptive(f, 0.0, kPi, rel_tol).value;
    }

    // x outside B_rho: only directions within theta_max of the inward axis hit the ball.
    // theta' = pi - theta = theta_max (1 - tau^2) smooths the tangency endpoint.
    const double theta_max = std::asin(rho / radius);
    auto f = [&](double tau) {
        const double tp = theta_max * (1.0 - tau * tau);
        const double jac = 2.0 * theta_max * tau;
        const double c = std::cos(tp);
        const double sn = std::sin(tp);
        const double disc = std::max(0.0, rho * rho - radius * radius * sn * sn);
        const double root = std::sqrt(disc);
        const double lo = std::max(0.0, radius * c - root);
        const double hi = radius * c + root;
        return jac * angular_weight(sn) * along_ray(-c, lo, hi);
    };
    return quad::adaptive(f, 0.0, 1.0, rel_tol).value;
}

void BallProblem::validate() const {
    if (!(R > 0.0)) throw DomainError("BallProblem: R must be positive");
    if (!(r0 > 0.0 && r0 < R)) throw DomainError("BallProblem: need 0 < r0 < R");
    if (!(F1 >= 0.0) || !(F2 >= 0.0) || !std::isfinite(F1) || !std::isfinite(F2))
        throw DomainError("BallProblem: sources must be finite and nonnegative");
}

BallProblem BallProblem::from_ratio(double q, double R, double F1, double F2) {
    BallProblem b{R, q * R, F1, F2};
    b.validate();
    return b;
}

double bump_integral_radial(double radius, const BallProblem& prob, const GreenKernel& kernel,
                            double rel_tol) {
    if (radius >= prob.R) return 0.0;
    return ball_integral(radius, prob.r0, prob.R, kernel, rel_tol);
}

double bump_integral(std::span<const double> x, const BallProblem& prob, const GreenKernel& kernel,
                     double rel_tol) {
    return bump_integral_radial(norm(x), prob, kernel, rel_tol);
}

double RadialProfile::operator()(double radius) const {
    radius = std::abs(radius);
    if (radius >= meta.R) return 0.0;
    const auto it = std::upper_bound(radii.begin(), radii.end(), radius);
    if (it == radii.end()) return values.back();
    const std::size_t hi = static_cast<std::size_t>(it - radii.begin());
    const std::size_t lo = hi - 1;
    const double w = (radius - radii[lo]) / (radii[hi] - radii[lo]);
    return (1.0 - w) * values[lo] + w * values[hi];
}

void RadialProfile::write_csv(std::ostream& os) const {
    os << "radius,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < radii.size(); ++i) os << radii[i] << ',' << values[i] << '\n';
}

RadialProfile local_solution(const BallProblem& prob, const GreenKernel& kernel, int grid_size,
                             RadialGrid grid, double rel_tol) {
    prob.validate();
    if (grid_size < 2) throw DomainError("local_solution: grid_size must be >= 2");
    RadialProfile out;
    out.meta = prob;
    out.radii.resize(grid_size);
    out.values.resize(grid_size);
    const FracParams& p = kernel.params();
    for (int i = 0; i < grid_size; ++i) {
        const double t = static_cast<double>(i) / (grid_size - 1);
        out.radii[i] = grid == RadialGrid::Uniform ? prob.R * t : prob.R * std::sin(0.5 * kPi * t);
    }
    out.radii.back() = prob.R;
    for (int i = 0; i < grid_size; ++i) {
        const double r = out.radii[i];
        if (r >= prob.R || (prob.F1 == 0.0 && prob.F2 == 0.0)) {
            out.values[i] = 0.0;
            continue;
        }
        const double g = getoor_solution_radial(r, prob.R, p);
        const double b = bump_integral_radial(r, prob, kernel, rel_tol);
        out.values[i] = prob.F2 * g - (prob.F1 + prob.F2) * b;
    }
    return out;
}

std::string LocalConditionReport::describe() const {
    std::ostringstream os;
    os << "(F1+F2)/F2 = " << lhs << (holds ? " >= " : " < ") << rhs;
    return os.str();
}

LocalConditionReport check_local_conditions(const BallProblem& prob, const FracParams& p) {
    LocalConditionReport r;
    const double q = prob.q();
    r.lhs = prob.F2 > 0.0 ? (prob.F1 + prob.F2) / prob.F2 : std::numeric_limits<double>::infinity();
    r.rhs = (p.n / (2.0 * p.s)) * std::pow(1.0 + q, p.n) / (std::pow(1.0 - q * q, p.s) * std::pow(q, p.n));
    r.holds = r.lhs >= r.rhs;
    return r;
}

}  // namespace pinning::kernels
