#pragma once

// Open sites of the cuboid decomposition, the smallest Lipschitz surface of open
// sites and Monte-Carlo statistics of its height at the origin.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "pinning/obstacles.hpp"

namespace pinning::percolation {

using obstacles::LatticeIndex;

/// Finite box of lattice columns a with lo[i] <= a[i] < lo[i] + extent[i]. A periodic
/// window is a discrete torus: distances wrap around.
struct Window {
    int n = 2;
    LatticeIndex lo{};
    LatticeIndex extent{1, 1, 1};
    bool periodic = false;

    std::size_t size() const;
    LatticeIndex index(std::size_t flat) const;
    std::size_t flat(const LatticeIndex& a) const;
    bool contains(const LatticeIndex& a) const;
    /// l1 distance between two columns (torus distance when periodic).
    long distance(std::size_t a, std::size_t b) const;

    static Window centred(int n, long half_width, bool periodic = false);
    static Window torus(int n, long columns);
};

/// H(k) = floor(k^alpha).
long lipschitz_H(long k, double alpha);

struct Witness {
    bool present = false;
    Coord x{};
    double y = 0.0;       ///< centre height in original coordinates
    double y_flat = 0.0;  ///< centre height after pulling back by U
    double f = 0.0;
};

struct SiteGrid {
    Window window;
    long levels = 0;                 ///< J: sites j = 1..J per column
    std::vector<std::uint8_t> open;  ///< column-major: open[col * J + (j - 1)]
    std::vector<Witness> witness;    ///< same layout; present iff open

    bool is_open(std::size_t col, long j) const { return open[col * levels + (j - 1)] != 0; }
    double p_hat() const;
};

/// p = 1 - exp(-lambda h (l - 2 r1)^n mu_S).
double open_probability(double lambda, double h, double l, double r1, int n, double mu_S);

/// Site (a, j) is open iff some obstacle with f >= S has its pulled-back centre in
/// Q_a x [(j-1) h + r1, j h + r1]. For a periodic window the field must be periodic with
/// period extent * (l + d) along every axis. Throws CoverageError otherwise.
SiteGrid build_site_grid(const obstacles::ObstacleField& field, const obstacles::Decomposition& dec,
                         const obstacles::InitialSurface& surf, double S, const Window& window, long levels);

struct LatticeSurface {
    Window window;
    double alpha = 0.5;
    std::vector<long> y;
    std::vector<Witness> witness;
    long sweeps = 0;

    /// Largest |y_a - y_b| - H(|a - b|) over all pairs; <= 0 for a valid surface.
    long worst_violation() const;
};

/// Pointwise minimal y with (a, y_a) open and |y_a - y_b| <= H(|a-b|_1) on the window,
/// by the monotone Jacobi iteration y_a <- min{open j >= max_b(y_b - H)}. Throws
/// NoSurfaceError if some column would need a level above the cap.
LatticeSurface smallest_surface(const SiteGrid& grid, double alpha);

/// Same iteration on a bare open/closed pattern; returns the level array.
std::vector<long> smallest_levels(const Window& window, long levels, std::span<const std::uint8_t> open,
                                  double alpha, long* sweeps = nullptr);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Wilson score interval for k successes out of n at z standard deviations.
Interval wilson_interval(long k, long n, double z = 1.96);

struct TailPoint {
    long m = 0;
    long count = 0;
    double p_hat = 0.0;
    Interval ci;
};

struct TailReport {
    double p = 0.0;
    long replicates = 0;
    long levels = 0;
    std::vector<TailPoint> points;
    double slope = 0.0;           ///< fitted d log P(y0 > m) / dm over m >= 1 with count >= 10
    double envelope_slope = 0.0;  ///< log(2 (1 - p))
    double C_fit = 0.0;           ///< smallest C with P(y0 > m) <= C (2(1-p))^m / (2p - 1)
    double mean_y0 = 0.0;
    double mean_bound = 0.0;      ///< C_fit / (2p - 1)^2
    bool regime_warning = false;  ///< p <= 1/2
    long censored = 0;            ///< replicates with no surface below the cap (counted as y0 = J + 1)
};

/// Cap with (2 (1 - p))^J < 1e-6, at least 4.
long default_level_cap(double p);

/// Independent Bernoulli(p) sites on a (2 half_width + 1)^n window; height of the
/// smallest surface at the centre column over independent replicates.
TailReport tail_statistics(double p, double alpha, int n, long half_width, long replicates,
                           std::uint64_t seed, long levels = 0);

}  // namespace pinning::percolation
