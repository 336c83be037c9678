#pragma once

// Run configuration: INI-style sections read through Boost.PropertyTree, with strict
// key checking, environment overrides (PINNING_<SECTION>_<KEY>) and a lossless echo.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pinning/evolution.hpp"
#include "pinning/supersolution.hpp"

namespace pinning::config {

inline constexpr int kSchemaVersion = 1;

struct CertifySection {
    double tolerance = -1.0;       ///< < 0 picks 1e-3 F2
    double negative_scale = 1e-3;  ///< strength factor of the negative control
    long offenders = 10;
};

struct ExpectationSection {
    long replicates = 100;
    long points = 64;
};

struct TailSection {
    double p = 0.9;
    int n = 1;
    long half_width = 64;
    long replicates = 10000;
};

struct EvolveSection {
    double T = 200.0;          ///< horizon with F = F*
    double T_zero = 1000.0;    ///< horizon with F = 0
    double F = -1.0;           ///< < 0 uses F*
    evolution::Scheme scheme;
    double pinned_rate = 1e-6;
    double trailing_fraction = 0.1;
    double barrier_tolerance = 1e-3;
    long history_stride = 1;
    std::vector<double> snapshots;
    double depin_F = 0.5;
    double depin_scale = 1e-3;
    double depin_T = 12.0;
};

struct HomogenizeSection {
    std::vector<double> epsilons{1.0, 0.5, 0.25, 0.125};
    long replicates = 8;
    long points = 64;
    double T = 10.0;
    double F = -1.0;
    long columns = 4;
    long grid_nodes = 64;
    Coord tilt{};
    std::vector<supersolution::TorusMode> modes;
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    supersolution::PipelineConfig pipeline;
    Coord tilt{};
    std::vector<supersolution::TorusMode> modes;
    CertifySection certify;
    ExpectationSection expectation;
    TailSection tail;
    EvolveSection evolve;
    HomogenizeSection homogenize;

    /// Pipeline with the surface built from tilt and modes on the torus of columns.
    supersolution::PipelineConfig resolved_pipeline() const;
    /// Sweep configuration from the model and the homogenization section.
    evolution::SweepConfig sweep() const;
};

/// Variable lookup plus the names present, so stray PINNING_ variables can be rejected.
struct Environment {
    std::function<const char*(const char*)> get;
    std::vector<std::string> names;
};

/// Reads INI text. Unknown sections or keys, a missing or wrong schema_version, missing
/// required model keys and malformed values throw ConfigError. Environment variables
/// PINNING_<SECTION>_<KEY> (top-level keys: PINNING_<KEY>) override file values; an
/// unrecognised PINNING_ variable is an error as well.
RunConfig parse(std::istream& in, const Environment& env = {});
RunConfig load(const std::string& path, const Environment& env = {});
/// The process environment.
Environment process_environment();

/// INI text that parses back to the same configuration.
std::string to_ini(const RunConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

/// Example configuration with every key at its default (desk-scale model).
std::string default_ini();

}  // namespace pinning::config
