#include "pinning/fraclap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pinning/errors.hpp"
#include "pinning/quadrature.hpp"

namespace pinning::fraclap {

PointField PointField::from_grid(const grid::GridField& g) {
    PointField f;
    f.n = g.spec.n;
    f.value = [&g](std::span<const double> x) { return g.interpolate(x); };
    return f;
}

FarField FarField::compact(Coord centre, double radius) {
    FarField f;
    f.kind = Kind::Compact;
    f.centre = centre;
    f.radius = radius;
    return f;
}

FarField FarField::periodic(Coord period, double mean, Coord tilt) {
    FarField f;
    f.kind = Kind::Periodic;
    f.period = period;
    f.mean = mean;
    f.tilt = tilt;
    return f;
}

FarField FarField::bounded(double bound, Coord tilt) {
    FarField f;
    f.kind = Kind::Bounded;
    f.bound = bound;
    f.tilt = tilt;
    return f;
}

FarField FarField::holder(double constant, double exponent) {
    FarField f;
    f.kind = Kind::Holder;
    f.holder_const = constant;
    f.holder_exp = exponent;
    return f;
}

namespace {

constexpr double kPi = std::numbers::pi;

struct Evaluator {
    const PointField& u;
    int n;
    Coord x{};
    double ux = 0.0;
    double amplitude = 1.0;  // typical |u(x+y) - u(x)| at |y| = scale
    double noise = 0.0;      // roundoff level of a second difference
    const Options& opt;
    mutable long evaluations = 0;

    double at(const Coord& y, double sign) const {
        Coord p = x;
        for (int i = 0; i < n; ++i) p[i] += sign * y[i];
        ++evaluations;
        return u.value(std::span<const double>(p.data(), n));
    }

    // Spherical integral of h(theta) over S^{n-1}, for h even in theta.
    template <class H>
    quad::Estimate sphere(H&& h, double abs_tol) const {
        if (n == 1) {
            const Coord e{1.0, 0.0, 0.0};
            return {2.0 * h(e), 0.0};
        }
        if (n == 2) {
            auto f = [&](double t) { return h(Coord{std::cos(t), std::sin(t), 0.0}); };
            auto e = quad::adaptive(f, 0.0, kPi, opt.rel_tol, opt.max_panels / 8, 0.5 * abs_tol);
            return {2.0 * e.value, 2.0 * e.error};
        }
        double inner_err = 0.0;
        auto outer = [&](double mu) {
            const double r = std::sqrt(std::max(0.0, 1.0 - mu * mu));
            auto f = [&](double phi) { return h(Coord{r * std::cos(phi), r * std::sin(phi), mu}); };
            auto e = quad::adaptive(f, 0.0, 2.0 * kPi, opt.rel_tol, opt.max_panels, 0.25 * abs_tol);
            inner_err += e.error;
            return e.value;
        };
        auto e = quad::adaptive(outer, 0.0, 1.0, opt.rel_tol, opt.max_panels, 0.25 * abs_tol);
        return {2.0 * e.value, 2.0 * (e.error + inner_err * 1e-3)};
    }

    // int over [a, b] of rho^{-1-2s} G(rho) with G the spherical integral of g.
    quad::Estimate radial(double a, double b, double s, const std::function<double(const Coord&, double)>& g) const {
        const double area = sphere_area(n);
        auto f = [&](double rho) {
            const double tol = std::max(noise * area,
                                        opt.rel_tol * area * amplitude * std::min(1.0, (rho / opt.scale) * (rho / opt.scale)));
            auto e = sphere([&](const Coord& th) { return g(th, rho); }, tol);
            return std::pow(rho, -1.0 - 2.0 * s) * e.value;
        };
        const double tol = opt.abs_tol + opt.rel_tol * area * amplitude * std::pow(opt.scale, -2.0 * s) * 1e-2 +
                           noise * area * std::pow(a, -2.0 * s);
        auto e = quad::adaptive(f, a, b, opt.rel_tol, opt.max_panels, tol);
        return {e.value, e.error};
    }

    double laplacian(double h) const {
        if (u.laplacian) return u.laplacian(std::span<const double>(x.data(), n));
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            Coord e{};
            e[i] = h;
            acc += (at(e, 1.0) + at(e, -1.0) - 2.0 * ux) / (h * h);
        }
        return acc;
    }
};

std::vector<double> breakpoints(double a, double b) {
    std::vector<double> pts{a};
    double r = a;
    while (r * 2.0 < b) {
        r *= 2.0;
        pts.push_back(r);
    }
    pts.push_back(b);
    return pts;
}

}  // namespace

Result evaluate(const PointField& u, std::span<const double> xin, double s, const FarField& far, const Options& opt,
                double max_error) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("fraclap: s must lie in (0, 1)");
    const int n = u.n;
    Evaluator ev{u, n, {}, 0.0, 1.0, 0.0, opt};
    for (int i = 0; i < n; ++i) ev.x[i] = xin[i];
    ev.ux = u.value(xin);
    {
        double amp = 0.0;
        for (int i = 0; i < n; ++i) {
            Coord e{};
            e[i] = opt.scale;
            amp = std::max({amp, std::abs(ev.at(e, 1.0) - ev.ux), std::abs(ev.at(e, -1.0) - ev.ux)});
        }
        ev.amplitude = amp > 0.0 ? amp : std::max(std::abs(ev.ux), 1e-300);
        ev.noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(ev.ux) + ev.amplitude);
    }
    const double area = sphere_area(n);
    const double C = fraclap_constant(n, s);
    Result res;
    double integral = 0.0;

    // Inner cut: g ~ rho^2 theta^T D^2u theta, whose spherical mean is rho^2 |S| Delta u / n.
    const double r_in = 1e-3 * opt.scale;
    {
        const double w = area * std::pow(r_in, 2.0 - 2.0 * s) / (n * (2.0 - 2.0 * s));
        const double lap = ev.laplacian(r_in);
        integral += w * lap;
        if (!u.laplacian) res.quad_error += w * std::abs(lap - ev.laplacian(2.0 * r_in));
    }

    double r_out = opt.outer_radius;
    if (r_out <= 0.0) {
        switch (far.kind) {
            case FarField::Kind::Compact: {
                double dist = 0.0;
                for (int i = 0; i < n; ++i) dist += (ev.x[i] - far.centre[i]) * (ev.x[i] - far.centre[i]);
                r_out = std::sqrt(dist) + far.radius;
                break;
            }
            case FarField::Kind::Periodic: {
                double P = 0.0;
                for (int i = 0; i < n; ++i) P = std::max(P, far.period[i]);
                r_out = 4.0 * P;
                break;
            }
            default:
                r_out = 100.0 * opt.scale;
        }
        r_out = std::max(r_out, 4.0 * r_in);
    }

    auto second_difference = [&](const Coord& th, double rho) {
        Coord y{};
        for (int i = 0; i < n; ++i) y[i] = rho * th[i];
        return ev.at(y, 1.0) + ev.at(y, -1.0) - 2.0 * ev.ux;
    };
    const auto pts = breakpoints(r_in, r_out);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        auto e = ev.radial(pts[k], pts[k + 1], s, second_difference);
        integral += e.value;
        res.quad_error += e.error;
    }

    // Tail beyond r_out.
    double tilt_x = 0.0;
    for (int i = 0; i < n; ++i) tilt_x += far.tilt[i] * ev.x[i];
    const double tail_weight = area * std::pow(r_out, -2.0 * s) / (2.0 * s);
    switch (far.kind) {
        case FarField::Kind::Compact:
            integral += -2.0 * ev.ux * tail_weight;
            break;
        case FarField::Kind::Periodic: {
            const double centred = ev.ux - tilt_x - far.mean;
            integral += -2.0 * centred * tail_weight;
            // Oscillating part u~(x+y) + u~(x-y) under a smooth cutoff; the neglected
            // remainder is smooth and oscillating, so it decays quickly with the taper.
            auto tapered = [&](double r_end) {
                auto g = [&](const Coord& th, double rho) {
                    Coord y{};
                    double ty = 0.0;
                    for (int i = 0; i < n; ++i) {
                        y[i] = rho * th[i];
                        ty += far.tilt[i] * y[i];
                    }
                    const double plus = ev.at(y, 1.0) - (tilt_x + ty) - far.mean;
                    const double minus = ev.at(y, -1.0) - (tilt_x - ty) - far.mean;
                    const double t = 2.0 * (rho - r_out) / (r_end - r_out) - 1.0;
                    return (plus + minus) * (1.0 - smooth_step(t).value);
                };
                double acc = 0.0;
                double err = 0.0;
                const int pieces = 8;
                for (int k = 0; k < pieces; ++k) {
                    const double a = r_out + (r_end - r_out) * k / pieces;
                    const double b = r_out + (r_end - r_out) * (k + 1) / pieces;
                    auto e = ev.radial(a, b, s, g);
                    acc += e.value;
                    err += e.error;
                }
                return quad::Estimate{acc, err};
            };
            const auto long_taper = tapered(3.0 * r_out);
            const auto short_taper = tapered(2.0 * r_out);
            integral += long_taper.value;
            res.quad_error += long_taper.error;
            res.tail_error += std::abs(long_taper.value - short_taper.value);
            break;
        }
        case FarField::Kind::Bounded: {
            const double centred = ev.ux - tilt_x;
            integral += -2.0 * centred * tail_weight;
            res.tail_error += 2.0 * far.bound * tail_weight;
            break;
        }
        case FarField::Kind::Holder: {
            const double beta = far.holder_exp;
            if (!(beta < 2.0 * s)) throw DomainError("fraclap: Holder tail needs exponent < 2s");
            res.tail_error += 2.0 * far.holder_const * area * std::pow(r_out, beta - 2.0 * s) / (2.0 * s - beta);
            break;
        }
    }

    const double factor = 0.5 * C;
    res.value = -factor * integral;
    res.evaluations = ev.evaluations;
    res.quad_error *= factor;
    res.tail_error *= factor;
    if (max_error > 0.0 && res.error() > max_error)
        throw QuadratureError("fraclap: error estimate " + std::to_string(res.error()) + " exceeds " +
                              std::to_string(max_error));
    return res;
}

}  // namespace pinning::fraclap
