#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>

namespace pinning {

/// Largest base-space dimension supported by the grid and field code.
inline constexpr int kMaxDim = 3;

using Coord = std::array<double, kMaxDim>;

inline double norm(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc);
}

inline double norm(const Coord& x, int n) { return norm(std::span<const double>(x.data(), n)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

/// Surface measure of the unit sphere S^{n-1}.
inline double sphere_area(int n) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Lebesgue measure of the unit ball in R^n.
inline double ball_volume(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// Normalisation C_{n,s} of the singular-integral form of (-Delta)^s that matches
/// the Fourier multiplier |k|^{2s}.
inline double fraclap_constant(int n, double s) {
    return s * std::pow(4.0, s) * std::tgamma(0.5 * n + s) /
           (std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(1.0 - s));
}

/// C-infinity step rising from 0 at t = -1 to 1 at t = +1, with its first two
/// derivatives. Built as the logistic of g(t) = 1/(1-t) - 1/(1+t).
struct SmoothStep {
    double value;
    double d1;
    double d2;
};

inline SmoothStep smooth_step(double t) {
    if (t <= -1.0) return {0.0, 0.0, 0.0};
    if (t >= 1.0) return {1.0, 0.0, 0.0};
    const double a = 1.0 + t;
    const double b = 1.0 - t;
    const double g = 1.0 / b - 1.0 / a;
    const double g1 = 1.0 / (a * a) + 1.0 / (b * b);
    const double g2 = 2.0 / (b * b * b) - 2.0 / (a * a * a);
    double S;
    if (g >= 0.0) {
        S = 1.0 / (1.0 + std::exp(-g));
    } else {
        const double e = std::exp(g);
        S = e / (1.0 + e);
    }
    const double w = S * (1.0 - S);
    return {S, w * g1, w * ((1.0 - 2.0 * S) * g1 * g1 + g2)};
}

}  // namespace pinning
