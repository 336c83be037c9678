#pragma once

// Semi-implicit spectral solver for
//   du/dt = -(-Delta)^s u - f(x, u) + F
// on a periodic torus, the pinning experiment against a certified barrier and the
// small-scale homogenization sweep.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "pinning/grid.hpp"
#include "pinning/obstacles.hpp"
#include "pinning/supersolution.hpp"

namespace pinning::evolution {

/// Step-size control. Fixed steps use dt_max throughout.
struct Scheme {
    bool adaptive = true;
    double dt_max = 1.0;
    /// dt * max |df/du| over the current state stays below this.
    double stiffness_fraction = 0.1;
    /// dt * max |du/dt| stays below this, so no node crosses a bump in one step.
    double max_increment = 0.02;
};

struct EvolutionConfig {
    int n = 2;
    double L = 1.0;    ///< torus side
    long nodes = 64;   ///< nodes per axis, a power of two
    double T = 1.0;    ///< horizon
    double F = 0.0;    ///< driving force
    double s = 0.5;
    /// Tilt of the state: u - tilt.x is periodic. Matches the shear of the obstacle field.
    Coord tilt{};
    Scheme scheme;
    double blowup_bound = 1e6;          ///< on sup |u - u0|
    double pinned_rate = 1e-6;          ///< per unit time
    double trailing_fraction = 0.1;
    double barrier_tolerance = 1e-3;
    std::vector<double> snapshot_times;
    std::size_t history_stride = 1;     ///< record every k-th step (the last is always kept)

    void validate() const;
    grid::GridSpec spec() const { return grid::GridSpec::torus(n, L, nodes); }
};

/// Reusable stepper: owns the transform, scratch space and the per-node obstacle lists
/// for one grid.
class Stepper {
public:
    /// field may be null (f = 0).
    Stepper(const EvolutionConfig& cfg, const obstacles::ObstacleField* field);

    /// Explicit term N = F - f(x, u) and max |df/du| at the current state.
    struct Forcing {
        std::vector<double> N;
        double mean_f = 0.0;
        double max_dfdu = 0.0;
        double max_abs_N = 0.0;
    };
    void forcing(const grid::GridField& u, Forcing& out) const;

    /// Step size the scheme allows at a state with the given forcing.
    double suggest_dt(const Forcing& fc) const;

    /// One step (I + dt (-Delta)^s) u_new = u + dt N(u), applied to the periodic part.
    void step(grid::GridField& u, double dt, const Forcing& fc);

    const EvolutionConfig& config() const { return cfg_; }

private:
    /// Obstacle image within the support radius of a node's column.
    struct Neighbour {
        double y;
        double r2;  ///< horizontal squared distance
        double f;
    };

    EvolutionConfig cfg_;
    const obstacles::ObstacleField* field_;
    std::vector<std::size_t> offsets_;
    std::vector<Neighbour> neighbours_;
    grid::GridSpec spec_;
    grid::Spectral fft_;
    std::vector<double> tilt_;
    std::vector<double> multiplier_;
    std::vector<double> work_;
    std::vector<std::complex<double>> spectrum_;
};

/// Single step with a throwaway Stepper.
grid::GridField step(const grid::GridField& state, const EvolutionConfig& cfg, const obstacles::ObstacleField* field,
                     double dt);

struct Sample {
    double t = 0.0;
    double dt = 0.0;
    double sup = 0.0;          ///< sup |u - u0|
    double mean = 0.0;         ///< mean of u - u0
    double barrier_gap = 0.0;  ///< min (v - u); NaN without a barrier
};

struct Snapshot {
    double t = 0.0;
    grid::GridField u;
};

struct Contact {
    bool violated = false;
    std::size_t step = 0;
    double t = 0.0;
    Coord x{};
    double excess = 0.0;  ///< u - v at the node
};

struct Trajectory {
    std::vector<Sample> history;
    std::vector<Snapshot> snapshots;
    grid::GridField final_state;
    std::size_t steps = 0;
    bool pinned = false;
    double trailing_rate = 0.0;  ///< sup-norm increment per unit time over the trailing window
    double late_slope = 0.0;     ///< least-squares slope of sup over the trailing window
    bool has_barrier = false;
    double min_barrier_gap = 0.0;
    Coord closest_x{};
    Contact first_contact;

    /// t, dt, sup, mean, barrier_gap.
    void write_csv(std::ostream& os) const;
    nlohmann::json to_json() const;
};

/// Evolves u0 to the horizon, checking u <= barrier + tolerance after every step when a
/// barrier is given. Throws BlowUpError when sup |u - u0| exceeds the configured bound.
Trajectory evolve(const EvolutionConfig& cfg, const obstacles::ObstacleField* field, const grid::GridField& u0,
                  const grid::GridField* barrier = nullptr);

/// Torus, tilt and grid taken from the bundle.
EvolutionConfig config_for(const supersolution::Bundle& bundle, double F, double T);

/// Requires u0 < v nodewise and F <= F*; evolves with the bundle's field and checks against v.
Trajectory run_pinning_experiment(const supersolution::Bundle& bundle, const EvolutionConfig& cfg,
                                  const grid::GridField& u0);

struct SweepConfig {
    supersolution::PipelineConfig pipeline;  ///< unit-scale model; its surface is ignored
    Coord tilt{};
    /// Residual modes of u0^eps at the smallest eps, in cycles per unit-scale torus.
    /// u0 itself then has period min(eps) L.
    std::vector<supersolution::TorusMode> modes;
    std::vector<double> epsilons{1.0, 0.5, 0.25, 0.125};
    long replicates = 8;
    long points = 64;
    double T = 10.0;
    double F = -1.0;  ///< < 0 uses F* of the ledger
    Scheme scheme;
};

struct SweepPoint {
    double epsilon = 0.0;
    double gap_mean = 0.0;  ///< E[v^eps - u0]
    double gap_ci = 0.0;    ///< 95% half-width
    double pos_mean = 0.0;  ///< E[(u^eps(T) - u0)_+]
    double pos_ci = 0.0;
    double grad_sup = 0.0;
    double fraclap_sup = 0.0;
    double unit_horizon = 0.0;
    bool barrier_ok = true;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    double grad_sup0 = 0.0;
    double fraclap_sup0 = 0.0;
    double scale_identity_error = 0.0;
    double slope = 0.0;         ///< d log gap / d log eps
    double intercept = 0.0;     ///< gap at eps = 0 from a linear fit in eps
    double intercept_ci = 0.0;
    bool pos_monotone = false;  ///< pos_mean nonincreasing as eps decreases

    /// epsilon, gap_mean, gap_ci, pos_mean, pos_ci.
    void write_csv(std::ostream& os) const;
    nlohmann::json to_json() const;
};

/// One quenched field per replicate, shared across eps through the rescaling
/// u^eps(t, x) = eps w(t / eps, x / eps): each eps builds the unit-scale barrier for
/// u0^eps(xi) = u0(eps xi) / eps, evolves w to T / eps and maps both back. Requires s = 1/2.
SweepResult homogenization_sweep(const SweepConfig& cfg, std::uint64_t seed);

}  // namespace pinning::evolution
