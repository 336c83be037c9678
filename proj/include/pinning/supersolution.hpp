#pragma once

// Assembly of the barrier v = u_flat + u_lift + U on a torus of lattice columns and the
// pointwise check of -(-Delta)^s v - f(x, v) + F* <= 0.

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <json.hpp>

#include "pinning/grid.hpp"
#include "pinning/kernels.hpp"
#include "pinning/lifting.hpp"
#include "pinning/obstacles.hpp"
#include "pinning/percolation.hpp"
#include "pinning/scaling.hpp"

namespace pinning::supersolution {

struct PipelineConfig {
    obstacles::ModelParams params;
    obstacles::InitialSurface surface;
    double p_alpha = 0.99;
    scaling::SelectOptions select;
    double S = 0.0;        ///< 0 picks S by the grid search
    long columns = 16;     ///< torus of columns^n lattice cells
    long grid_nodes = 512; ///< nodes per axis of the sampling grid
    long levels = 0;       ///< 0 picks max(8, default_level_cap(p))
    int profile_points = 400;
};

/// Residual mode with an integer number of cycles per torus side.
struct TorusMode {
    std::array<long, kMaxDim> cycles{};
    double a = 0.0;
    double b = 0.0;
};

/// U = tilt.x + sum of torus modes on the torus of side L.
obstacles::InitialSurface torus_surface(int n, double s, Coord tilt, const std::vector<TorusMode>& modes, double L);

/// Sets cfg.surface from tilt and modes. The torus side depends on the ledger, which in
/// turn depends on the surface norms, so the two are iterated to a fixed point.
PipelineConfig with_torus_surface(PipelineConfig cfg, Coord tilt, const std::vector<TorusMode>& modes);

/// Ledger, decomposition and torus geometry shared by every stage.
struct Geometry {
    scaling::GeometryLedger ledger;
    obstacles::Decomposition dec;
    percolation::Window window;
    double torus_length = 0.0;
    long levels = 0;
    double p = 0.0;  ///< site-open probability

    grid::GridSpec grid_spec(long nodes) const;
};

Geometry make_geometry(const PipelineConfig& cfg);

/// Poisson obstacles whose pulled-back centres lie in the level slab
/// [r1, level_top(levels)] of the torus, placed in original coordinates by adding U.
/// Obstacles outside the slab are not sampled.
obstacles::ObstacleField sample_slab(const PipelineConfig& cfg, const Geometry& geo, std::mt19937_64& rng);

/// Copy of the field with every strength multiplied by factor.
obstacles::ObstacleField scale_strengths(const obstacles::ObstacleField& field, double factor);

/// Radial local solution on a uniform radial grid, with sources F1 on B_{r0} and -F2 on the annulus up to R.
struct LocalSolution {
    kernels::BallProblem problem;
    kernels::RadialProfile profile;
    kernels::LocalConditionReport conditions;
    double depth = 0.0;  ///< -u_local(0)

    /// Cubic B-spline through the profile (zero beyond R).
    double value(double radius) const;
    double slope(double radius) const;
    /// -(-Delta)^s u_local at the given radius: F1 inside r0, -F2 on the annulus.
    double source(double radius) const;

    std::shared_ptr<const boost::math::interpolators::cardinal_cubic_b_spline<double>> spline;
};

LocalSolution make_local_solution(const scaling::GeometryLedger& ledger, int points);

/// Nearest and second-nearest witness of a point on the torus.
struct Nearest {
    std::size_t first = 0;
    std::size_t second = 0;
    double d1 = 0.0;
    double d2 = 0.0;
    double bisector = 0.0;  ///< distance to the bisector of the two witnesses
};

class VoronoiLocator {
public:
    VoronoiLocator(std::vector<Coord> centres, const percolation::Window& window, double pitch);

    Nearest locate(std::span<const double> x) const;
    /// Displacement x - c on the torus, with each component in [-L/2, L/2).
    Coord displacement(std::span<const double> x, const Coord& c) const;
    const std::vector<Coord>& centres() const { return centres_; }

private:
    std::vector<Coord> centres_;
    percolation::Window window_;
    double pitch_ = 1.0;
    double length_ = 1.0;
};

struct FlatReport {
    std::size_t uncovered = 0;  ///< nodes farther than R from every witness
    double max_nearest = 0.0;
};

/// u_flat(x) = min_a u_local(x - x_a) over the witness centres on the torus; the nearest
/// witness attains the minimum because u_local is radially nondecreasing.
grid::GridField build_u_flat(const VoronoiLocator& locator, const LocalSolution& local, const grid::GridSpec& spec,
                             FlatReport* report = nullptr);

struct Bundle {
    Geometry geometry;
    obstacles::InitialSurface U;
    obstacles::ObstacleField field;
    percolation::LatticeSurface surface;
    LocalSolution local;
    std::shared_ptr<const lifting::LiftField> lift;
    std::shared_ptr<const VoronoiLocator> locator;
    FlatReport flat_report;
    grid::GridField u_flat;
    grid::GridField u_lift;
    grid::GridField U_grid;
    grid::GridField v;

    double v_at(std::span<const double> x) const;
    /// Witness centre of every column.
    std::vector<Coord> witness_points() const;
};

/// Builds the geometry, samples the slab, percolates, lifts and samples every part.
Bundle build_bundle(const PipelineConfig& cfg, std::uint64_t seed);

/// Same from precomputed geometry and field.
Bundle assemble(const PipelineConfig& cfg, Geometry geo, obstacles::ObstacleField field);

struct CertifyOptions {
    double tolerance = -1.0;          ///< < 0 picks 1e-3 F2
    double strength_scale = 1.0;      ///< scales obstacle strengths during the check only
    std::size_t offenders = 10;
};

struct Residual {
    Coord x{};
    double residual = 0.0;
    double flat = 0.0;
    double lift = 0.0;
    double U = 0.0;
    double f = 0.0;
    bool witness = false;
};

struct Certificate {
    double F_star = 0.0;
    double tolerance = 0.0;
    double strength_scale = 1.0;
    std::size_t nodes = 0;
    std::size_t tested = 0;
    std::size_t exempt = 0;
    std::size_t inside = 0;  ///< tested nodes within r0 of their witness
    std::size_t witness_points = 0;
    std::size_t violations = 0;
    double max_residual = 0.0;
    double max_residual_inside = 0.0;
    double max_residual_outside = 0.0;
    /// Outside every B_{r0}(x_a) with the obstacle force dropped (f >= 0).
    double max_structural_outside = 0.0;
    double exempt_max_residual = 0.0;
    /// Smallest gradient jump across the bisector among exempt nodes.
    double exempt_min_gradient_jump = 0.0;
    double min_v_minus_U = 0.0;
    double lift_sup = 0.0;
    double lift_bound = 0.0;
    double lift_truncation = 0.0;
    double fraclap_U_sup = 0.0;
    double min_f_inside = 0.0;
    std::size_t uncovered = 0;
    bool quadrature_ok = false;
    bool dominance_ok = false;
    bool pass = false;
    std::vector<Residual> worst;

    nlohmann::json to_json() const;
    std::string summary() const;
};

/// Residual rho = -(-Delta)^s v - f(x, v) + F* at every grid node and every witness
/// centre. The u_flat part uses -(-Delta)^s u_flat(x) <= -(-Delta)^s u_local(x - x_a) for
/// the nearest witness x_a; the lift part is the exact Fourier series; the U part is exact.
/// Nodes within one grid spacing of a Voronoi bisector are exempt. Away from the witnesses
/// the residual must also hold with f replaced by 0.
Certificate certify(const Bundle& bundle, double F_star, const CertifyOptions& opt = {});

struct ExpectationReport {
    long replicates = 0;
    long points = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double scale = 0.0;  ///< r1 + E[y0] h + depth with E[y0] from the replicates
    double mean_level = 0.0;
    double witness_gap_min = 0.0;  ///< min of v - U at witness centres, over replicates
    double witness_gap_max = 0.0;
    std::vector<double> replicate_means;

    nlohmann::json to_json() const;
};

/// Monte-Carlo statistics of v(x) - U(x) at `points` fixed random x over independent
/// realisations of the slab field.
ExpectationReport expectation_report(const PipelineConfig& cfg, long replicates, std::uint64_t seed, long points = 64);

}  // namespace pinning::supersolution
