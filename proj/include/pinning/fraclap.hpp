#pragma once

// Pointwise (-Delta)^s by the second-difference singular integral
//   (-Delta)^s u(x) = -(C_{n,s}/2) int (u(x+y) + u(x-y) - 2u(x)) / |y|^{n+2s} dy
// in polar coordinates, with a Laplacian-based correction near y = 0 and a tail model
// chosen from the declared far-field behaviour of u.

#include <functional>
#include <span>

#include "pinning/grid.hpp"
#include "pinning/math.hpp"

namespace pinning::fraclap {

struct PointField {
    int n = 2;
    std::function<double(std::span<const double>)> value;
    /// Optional exact Laplacian; finite differences are used when empty.
    std::function<double(std::span<const double>)> laplacian;

    /// Cubic-convolution interpolant of a sampled field.
    static PointField from_grid(const grid::GridField& g);
};

/// How u behaves far from x; selects the tail treatment.
struct FarField {
    enum class Kind {
        Compact,   ///< u = 0 outside the ball B(centre, radius): exact tail
        Periodic,  ///< u = tilt.x + mean + periodic zero-mean part: smoothly tapered tail
        Bounded,   ///< |u - tilt.x| <= bound: tail bounded, not evaluated
        Holder,    ///< |u(x+y) - u(x)| <= holder_const |y|^holder_exp for large y
    };
    Kind kind = Kind::Compact;
    Coord centre{};
    double radius = 0.0;
    Coord period{};
    Coord tilt{};
    double mean = 0.0;
    double bound = 0.0;
    double holder_const = 0.0;
    double holder_exp = 0.0;

    static FarField compact(Coord centre, double radius);
    static FarField periodic(Coord period, double mean, Coord tilt = {});
    static FarField bounded(double bound, Coord tilt = {});
    static FarField holder(double constant, double exponent);
};

struct Options {
    double rel_tol = 1e-8;
    double abs_tol = 1e-13;
    /// Feature length of u; sets the inner cut (1e-3 * scale) and the panel breakpoints.
    double scale = 1.0;
    /// Radius beyond which the tail model takes over; 0 picks one from the far field.
    double outer_radius = 0.0;
    unsigned max_panels = 4000;
};

struct Result {
    double value = 0.0;
    double quad_error = 0.0;  ///< summed adaptive-quadrature estimates and the inner-cut correction
    double tail_error = 0.0;  ///< truncation bound (Bounded, Holder) or taper variation (Periodic)
    long evaluations = 0;
    double error() const { return quad_error + tail_error; }
};

/// Throws QuadratureError when the error estimate exceeds max_error (if positive).
Result evaluate(const PointField& u, std::span<const double> x, double s, const FarField& far,
                const Options& opt = {}, double max_error = 0.0);

}  // namespace pinning::fraclap
