#pragma once

// Random obstacle field, the lattice decomposition of the base space and the
// graph transform that flattens a tilted initial surface.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pinning/math.hpp"

namespace pinning::obstacles {

/// Distribution of the i.i.d. obstacle strengths f_i.
struct StrengthLaw {
    enum class Kind { PointMass, ShiftedExponential };
    Kind kind = Kind::PointMass;
    double value = 1.0;  ///< atom for PointMass, S_min for ShiftedExponential
    double theta = 1.0;  ///< mean excess of the exponential part

    double sample(std::mt19937_64& rng) const;
    /// mu_S = P(f_0 >= S).
    double tail(double S) const;
    double mean() const;
    void validate() const;
    std::string name() const;
};

struct ModelParams {
    int n = 2;
    double s = 0.5;
    double r0 = 1.0;
    double r1 = 2.2;
    double lambda = 1.0;
    StrengthLaw law;
    std::uint64_t seed = 1;

    /// Checks r1 > sqrt(n+1) r0: the radial plateau must contain the full-strength cube.
    void validate() const;
};

/// Radial C-infinity bump: 1 on the ball of radius sqrt(n+1) r0 (which contains the
/// infinity-ball of radius r0), 0 outside the ball of radius r1.
class Bump {
public:
    Bump() = default;
    Bump(int n, double r0, double r1);

    double value(std::span<const double> dx, double dy) const;
    /// Radial profile psi(rho) and its derivative.
    double profile(double rho) const;
    double profile_derivative(double rho) const;
    /// Gradient with respect to (dx, dy); returns n + 1 components in out.
    void gradient(std::span<const double> dx, double dy, std::span<double> out) const;
    /// sup |psi'|, a Lipschitz constant of the bump.
    double lipschitz() const { return lipschitz_; }
    double plateau_radius() const { return inner_; }
    double support_radius() const { return outer_; }
    int dim() const { return n_; }

private:
    int n_ = 2;
    double inner_ = 0.0;
    double outer_ = 1.0;
    double lipschitz_ = 0.0;
};

struct Obstacle {
    Coord x{};
    double y = 0.0;
    double f = 0.0;
};

/// Axis-aligned sampling box R^n x [y_lo, y_hi].
struct Box {
    int n = 2;
    Coord lo{};
    Coord hi{};
    double y_lo = 0.0;
    double y_hi = 1.0;

    double base_volume() const;
    double volume() const { return base_volume() * (y_hi - y_lo); }
    bool contains(const Obstacle& o) const;
};

/// Periodic images: the field repeats with period[i] along axis i, shifted vertically
/// by shear[i] per period (the tilt nu_i * period[i] of a periodic initial surface).
struct Periodicity {
    Coord period{};
    Coord shear{};
};

class ObstacleField {
public:
    ObstacleField() = default;
    ObstacleField(Bump bump, Box window, std::vector<Obstacle> obstacles,
                  std::optional<Periodicity> periodic = std::nullopt);

    const Bump& bump() const { return bump_; }
    const Box& window() const { return window_; }
    const std::vector<Obstacle>& obstacles() const { return obstacles_; }
    const std::optional<Periodicity>& periodicity() const { return periodic_; }
    int dim() const { return bump_.dim(); }
    std::size_t size() const { return obstacles_.size(); }

    /// f(x, y) = sum_i f_i phi(x - x_i, y - y_i), through the bucket index.
    double force(std::span<const double> x, double y) const;
    /// Partial derivative of the force in y.
    double force_dy(std::span<const double> x, double y) const;
    /// force and force_dy in one pass over the neighbours.
    std::pair<double, double> force_with_dy(std::span<const double> x, double y) const;
    /// Full scan over every obstacle (and periodic image); test oracle for force().
    double force_brute(std::span<const double> x, double y) const;
    /// Upper bound on |d f / d y| over all points: Lip(phi) times the largest
    /// strength sum over overlapping supports, bounded per bucket neighbourhood.
    double dy_bound() const;

    /// Calls fn(obstacle, image_offset_x, image_offset_y) for every obstacle image whose
    /// support may reach the column above x.
    template <class Fn>
    void visit_near(std::span<const double> x, Fn&& fn) const;

private:
    void build_index();
    std::size_t bucket_of(const std::array<long, kMaxDim>& c) const;

    Bump bump_;
    Box window_;
    std::vector<Obstacle> obstacles_;
    std::optional<Periodicity> periodic_;

    Coord origin_{};
    Coord cell_{1.0, 1.0, 1.0};
    std::array<long, kMaxDim> counts_{1, 1, 1};
    std::vector<std::uint32_t> bucket_start_;
    std::vector<std::uint32_t> bucket_items_;
};

/// Poisson(lambda vol) points, uniform in the window, strengths i.i.d. from the law.
ObstacleField sample_field(const ModelParams& params, const Box& window, std::mt19937_64& rng,
                           std::optional<Periodicity> periodic = std::nullopt);

/// One Fourier mode of the residual r(x) = a cos(k.x) + b sin(k.x).
struct Mode {
    Coord k{};
    double a = 0.0;
    double b = 0.0;
};

/// U(x) = nu.x + r(x) with r a finite Fourier sum, so gradient and (-Delta)^s are exact.
class InitialSurface {
public:
    InitialSurface() = default;
    /// period: fundamental box of r used for the sampled sup norms (all modes must be
    /// commensurate with it).
    InitialSurface(int n, double s, Coord nu, std::vector<Mode> modes, Coord period);

    static InitialSurface flat(int n, double s, Coord nu = {});

    double value(std::span<const double> x) const;
    double residual(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;
    double laplacian(std::span<const double> x) const;
    /// (-Delta)^s U = (-Delta)^s r = sum |k|^{2s} (a cos + b sin).
    double fraclap(std::span<const double> x) const;

    double grad_sup() const { return grad_sup_; }
    double fraclap_sup() const { return fraclap_sup_; }
    const Coord& nu() const { return nu_; }
    const std::vector<Mode>& modes() const { return modes_; }
    const Coord& period() const { return period_; }
    int dim() const { return n_; }
    double s() const { return s_; }

    /// u^eps(xi) = U(eps xi) / eps: same tilt, amplitudes / eps, wave numbers * eps.
    InitialSurface rescaled(double eps) const;
    /// Same surface with residual amplitudes multiplied by factor.
    InitialSurface with_amplitude(double factor) const;

private:
    void compute_sups();

    int n_ = 2;
    double s_ = 0.5;
    Coord nu_{};
    std::vector<Mode> modes_;
    Coord period_{};
    double grad_sup_ = 0.0;
    double fraclap_sup_ = 0.0;
};

/// (x, y) -> (x, y + U(x)), or the inverse.
std::pair<Coord, double> transform_U(std::span<const double> x, double y, const InitialSurface& surf,
                                     bool inverse = false);

/// eta_0 = (1 - ||grad U||) r0: the flattened cylinder of radius r0 and half-height eta_0
/// about a pulled-back centre maps into the full-strength cube. Throws
/// DegenerateSurfaceError if ||grad U|| >= 1.
double admissible_height_margin(const InitialSurface& surf, double r0);

using LatticeIndex = std::array<long, kMaxDim>;

/// Q_a = prod [a_i (l+d) - l/2 + r1, a_i (l+d) + l/2 - r1], hat Q_a the same without
/// the r1 inset, and cuboids Q_{a,j} = Q_a x [(j-1) h + r1, j h + r1].
struct Decomposition {
    int n = 2;
    double l = 1.0;
    double d = 1.0;
    double h = 1.0;
    double r1 = 0.0;

    double pitch() const { return l + d; }
    void validate() const;
    double centre(long a) const { return a * pitch(); }
    /// Lattice index of the hat cell containing x, or nullopt in the gaps.
    std::optional<LatticeIndex> cell_of(std::span<const double> x) const;
    /// Nearest lattice index ignoring gaps.
    LatticeIndex nearest(std::span<const double> x) const;
    bool in_core(std::span<const double> x, const LatticeIndex& a) const;
    double level_bottom(long j) const { return (j - 1) * h + r1; }
    double level_top(long j) const { return j * h + r1; }
    /// Level j with (j-1) h + r1 <= y < j h + r1, or 0 when y < r1.
    long level_of(double y) const;
    double cuboid_volume() const;
};

template <class Fn>
void ObstacleField::visit_near(std::span<const double> x, Fn&& fn) const {
    const int n = dim();
    std::array<long, kMaxDim> centre{};
    for (int i = 0; i < n; ++i) {
        double xi = x[i];
        if (periodic_) xi -= periodic_->period[i] * std::floor(xi / periodic_->period[i]);
        centre[i] = static_cast<long>(std::floor((xi - origin_[i]) / cell_[i]));
        if (!periodic_ && (centre[i] < -1 || centre[i] > counts_[i])) return;
    }
    std::array<long, kMaxDim> off{};
    const long total = n == 2 ? 9 : 27;
    std::array<std::size_t, 27> seen{};
    int seen_count = 0;
    for (long code = 0; code < total; ++code) {
        long c = code;
        std::array<long, kMaxDim> b{};
        bool skip = false;
        for (int i = 0; i < n; ++i) {
            off[i] = c % 3 - 1;
            c /= 3;
            b[i] = centre[i] + off[i];
            if (periodic_) {
                b[i] = ((b[i] % counts_[i]) + counts_[i]) % counts_[i];
            } else if (b[i] < 0 || b[i] >= counts_[i]) {
                skip = true;
            }
        }
        if (skip) continue;
        const std::size_t id = bucket_of(b);
        bool dup = false;
        for (int k = 0; k < seen_count; ++k) dup = dup || seen[k] == id;
        if (dup) continue;
        seen[seen_count++] = id;
        for (std::uint32_t it = bucket_start_[id]; it < bucket_start_[id + 1]; ++it) {
            const Obstacle& o = obstacles_[bucket_items_[it]];
            Coord ix = o.x;
            double iy = o.y;
            if (periodic_) {
                for (int i = 0; i < n; ++i) {
                    const double m = std::round((x[i] - o.x[i]) / periodic_->period[i]);
                    ix[i] += m * periodic_->period[i];
                    iy += m * periodic_->shear[i];
                }
            }
            fn(o, ix, iy);
        }
    }
}

}  // namespace pinning::obstacles
