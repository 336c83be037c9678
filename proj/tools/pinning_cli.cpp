// Batch front-end: one subcommand per pipeline stage, outputs and a manifest in --out.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "pinning/config.hpp"
#include "pinning/errors.hpp"
#include "pinning/evolution.hpp"
#include "pinning/parallel.hpp"
#include "pinning/percolation.hpp"
#include "pinning/rng.hpp"
#include "pinning/scaling.hpp"
#include "pinning/supersolution.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pinning;
namespace ss = pinning::supersolution;
namespace ev = pinning::evolution;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kUsage = 1, kRejected = 2, kFailed = 3 };

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::optional<double> tolerance;
    std::optional<unsigned> threads;
};

class Run {
public:
    Run(std::string command, config::RunConfig cfg, fs::path out)
        : command_(std::move(command)), cfg_(std::move(cfg)), out_(std::move(out)) {
        fs::create_directories(out_);
        stages_ = json::object();
    }

    const config::RunConfig& cfg() const { return cfg_; }
    std::uint64_t seed() const { return cfg_.seed; }

    void text(const std::string& name, const std::string& content) {
        std::ofstream os(out_ / name, std::ios::binary);
        os << content;
        if (!os) throw std::runtime_error("cannot write " + (out_ / name).string());
        files_.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
    void grid(const std::string& name, const grid::GridField& g) {
        g.save((out_ / name).string());
        files_.push_back(name);
    }
    template <class Fn>
    void stream(const std::string& name, Fn&& fn) {
        std::ofstream os(out_ / name, std::ios::binary);
        fn(os);
        if (!os) throw std::runtime_error("cannot write " + (out_ / name).string());
        files_.push_back(name);
    }

    void stage(const std::string& name, bool pass) {
        stages_[name] = pass;
        std::cout << "  [" << (pass ? "pass" : "FAIL") << "] " << name << "\n";
        ok_ = ok_ && pass;
    }
    bool ok() const { return ok_; }
    void set_ledger(const scaling::GeometryLedger& L) { ledger_ = scaling::to_json(L); }

    /// Echoes the configuration and merges this command into the manifest.
    void finish() {
        text("config.ini", config::to_ini(cfg_));
        const auto path = out_ / "manifest.json";
        json m;
        const json cfg_json = config::to_json(cfg_);
        if (fs::exists(path)) {
            std::ifstream in(path);
            try {
                m = json::parse(in);
            } catch (const json::exception&) {
                m = json();
            }
            if (!m.is_object() || m.value("config", json()) != cfg_json) m = json();
        }
        if (m.is_null()) {
            m = json::object();
            m["commands"] = json::object();
            m["outputs"] = json::object();
        }
        m["schema_version"] = 1;
        m["program"] = "pinning_cli";
        m["versions"] = {{"pinning", kVersion},
                         {"boost", BOOST_LIB_VERSION},
                         {"fft", grid::fft_version()},
                         {"compiler", __VERSION__}};
        m["seed"] = std::to_string(cfg_.seed);
        m["config"] = cfg_json;
        if (!ledger_.is_null()) m["ledger"] = ledger_;
        json cmd;
        cmd["stages"] = stages_;
        cmd["pass"] = ok_;
        cmd["outputs"] = files_;
        m["commands"][command_] = cmd;
        for (const auto& f : files_)
            m["outputs"][f] = {{"bytes", fs::file_size(out_ / f)}, {"sha256", sha256_file(out_ / f)}, {"command", command_}};
        std::ofstream os(path, std::ios::binary);
        os << m.dump(2) << "\n";
    }

private:
    std::string command_;
    config::RunConfig cfg_;
    fs::path out_;
    json stages_;
    json ledger_;
    std::vector<std::string> files_;
    bool ok_ = true;
};

config::RunConfig load_config(const Options& o) {
    auto cfg = config::load(o.config, config::process_environment());
    if (o.seed) cfg.seed = *o.seed;
    if (o.tolerance) cfg.certify.tolerance = *o.tolerance;
    if (o.threads) cfg.threads = *o.threads;
    worker_threads() = std::max(1u, cfg.threads);
    return cfg;
}

int cmd_select(Run& run) {
    const auto pc = run.cfg().resolved_pipeline();
    const auto geo = ss::make_geometry(pc);
    const auto& L = geo.ledger;
    run.set_ledger(L);
    run.write_json("ledger.json", scaling::to_json(L));
    run.text("ledger.txt", scaling::format_table(L));
    run.write_json("geometry.json", {{"torus_length", geo.torus_length},
                                     {"columns", pc.columns},
                                     {"levels", geo.levels},
                                     {"site_open_probability", geo.p},
                                     {"grid_nodes", pc.grid_nodes},
                                     {"grid_spacing", geo.torus_length / static_cast<double>(pc.grid_nodes)}});
    std::cout << scaling::format_table(L);
    run.stage("inequalities", L.all_inequalities_pass());
    run.stage("admissibility", L.admissibility.pass());
    run.stage("reverify", scaling::reverify(L));
    return run.ok() ? kOk : kRejected;
}

int cmd_sample(Run& run) {
    const auto pc = run.cfg().resolved_pipeline();
    const auto geo = ss::make_geometry(pc);
    run.set_ledger(geo.ledger);
    auto rng = make_rng(run.seed(), Stage::Obstacles);
    const auto field = ss::sample_slab(pc, geo, rng);
    const int n = pc.params.n;
    run.stream("obstacles.csv", [&](std::ostream& os) {
        os << std::setprecision(17);
        for (int i = 0; i < n; ++i) os << "x" << i << ",";
        os << "y,f\n";
        for (const auto& o : field.obstacles()) {
            for (int i = 0; i < n; ++i) os << o.x[i] << ",";
            os << o.y << "," << o.f << "\n";
        }
    });
    double fmax = 0.0, fsum = 0.0;
    for (const auto& o : field.obstacles()) {
        fmax = std::max(fmax, o.f);
        fsum += o.f;
    }
    const double lo = geo.dec.level_bottom(1), hi = geo.dec.level_top(geo.levels);
    const double expected = pc.params.lambda * std::pow(geo.torus_length, n) * (hi - lo);
    const auto count = static_cast<double>(field.size());
    run.write_json("sample.json", {{"count", field.size()},
                                   {"expected_count", expected},
                                   {"torus_length", geo.torus_length},
                                   {"slab", {lo, hi}},
                                   {"levels", geo.levels},
                                   {"max_strength", fmax},
                                   {"mean_strength", count > 0 ? fsum / count : 0.0}});
    std::cout << "sampled " << field.size() << " obstacles (expected " << expected << ")\n";
    run.stage("poisson_count", std::abs(count - expected) <= 5.0 * std::sqrt(expected) + 1.0);
    return run.ok() ? kOk : kFailed;
}

int cmd_percolate(Run& run) {
    const auto pc = run.cfg().resolved_pipeline();
    const auto geo = ss::make_geometry(pc);
    run.set_ledger(geo.ledger);
    auto rng = make_rng(run.seed(), Stage::Obstacles);
    const auto field = ss::sample_slab(pc, geo, rng);
    const auto sites = percolation::build_site_grid(field, geo.dec, pc.surface, geo.ledger.S, geo.window, geo.levels);
    const auto surf = percolation::smallest_surface(sites, geo.ledger.constants.alpha);
    const int n = pc.params.n;
    run.stream("surface.csv", [&](std::ostream& os) {
        os << std::setprecision(17);
        for (int i = 0; i < n; ++i) os << "a" << i << ",";
        os << "level,";
        for (int i = 0; i < n; ++i) os << "x" << i << ",";
        os << "y,f\n";
        for (std::size_t c = 0; c < surf.y.size(); ++c) {
            const auto a = surf.window.index(c);
            for (int i = 0; i < n; ++i) os << a[i] << ",";
            os << surf.y[c] << ",";
            for (int i = 0; i < n; ++i) os << surf.witness[c].x[i] << ",";
            os << surf.witness[c].y << "," << surf.witness[c].f << "\n";
        }
    });
    double mean_level = 0.0;
    long max_level = 0;
    for (long y : surf.y) {
        mean_level += static_cast<double>(y);
        max_level = std::max(max_level, y);
    }
    mean_level /= static_cast<double>(surf.y.size());
    const long worst = surf.worst_violation();
    run.write_json("percolation.json", {{"p", geo.p},
                                        {"p_hat", sites.p_hat()},
                                        {"levels", geo.levels},
                                        {"alpha", surf.alpha},
                                        {"mean_level", mean_level},
                                        {"max_level", max_level},
                                        {"worst_violation", worst},
                                        {"sweeps", surf.sweeps}});

    const auto& T = run.cfg().tail;
    const auto tail = percolation::tail_statistics(T.p, geo.ledger.constants.alpha, T.n, T.half_width, T.replicates,
                                                   stream_seed(run.seed(), static_cast<std::uint64_t>(Stage::TailStatistics)));
    run.stream("tail.csv", [&](std::ostream& os) {
        os << std::setprecision(17) << "m,count,p_hat,ci_lo,ci_hi\n";
        for (const auto& pt : tail.points)
            os << pt.m << "," << pt.count << "," << pt.p_hat << "," << pt.ci.lo << "," << pt.ci.hi << "\n";
    });
    run.write_json("tail.json", {{"p", tail.p},
                                 {"n", T.n},
                                 {"half_width", T.half_width},
                                 {"replicates", tail.replicates},
                                 {"levels", tail.levels},
                                 {"slope", tail.slope},
                                 {"envelope_slope", tail.envelope_slope},
                                 {"C_fit", tail.C_fit},
                                 {"mean_y0", tail.mean_y0},
                                 {"mean_bound", tail.mean_bound},
                                 {"censored", tail.censored},
                                 {"regime_warning", tail.regime_warning}});
    std::cout << "surface: mean level " << mean_level << ", max " << max_level << "; tail slope " << tail.slope
              << " (envelope " << tail.envelope_slope << ")\n";
    run.stage("lipschitz", worst <= 0);
    run.stage("tail_envelope", tail.slope <= tail.envelope_slope + 0.1);
    return run.ok() ? kOk : kFailed;
}

void certify_into(Run& run, const ss::Bundle& b) {
    const double Fs = b.geometry.ledger.F_star;
    ss::CertifyOptions opt;
    opt.tolerance = run.cfg().certify.tolerance;
    opt.offenders = static_cast<std::size_t>(run.cfg().certify.offenders);
    const auto cert = ss::certify(b, Fs, opt);
    run.write_json("certificate.json", cert.to_json());
    run.text("certificate.txt", cert.summary());
    std::cout << cert.summary();
    auto neg_opt = opt;
    neg_opt.strength_scale = run.cfg().certify.negative_scale;
    const auto neg = ss::certify(b, Fs, neg_opt);
    run.write_json("negative_certificate.json", neg.to_json());
    std::cout << "negative control (strengths x " << neg_opt.strength_scale << "): "
              << (neg.pass ? "CERTIFIED" : "NOT CERTIFIED") << ", max residual " << neg.max_residual << "\n";
    run.stage("certification", cert.pass);
    run.stage("dominance", cert.dominance_ok);
    run.stage("negative_control", !neg.pass);
    if (!cert.pass) {
        std::cerr << "offenders:\n";
        for (const auto& w : cert.worst)
            std::cerr << "  x = (" << w.x[0] << ", " << w.x[1] << ") residual " << w.residual << "\n";
    }
}

int cmd_build(Run& run) {
    const auto pc = run.cfg().resolved_pipeline();
    const auto b = ss::build_bundle(pc, run.seed());
    run.set_ledger(b.geometry.ledger);
    run.grid("u_flat.grid", b.u_flat);
    run.grid("u_lift.grid", b.u_lift);
    run.grid("U.grid", b.U_grid);
    run.grid("v.grid", b.v);
    certify_into(run, b);
    const auto& E = run.cfg().expectation;
    const auto rep = ss::expectation_report(pc, E.replicates, run.seed(), E.points);
    run.write_json("expectation.json", rep.to_json());
    std::cout << "E[v - U] = " << rep.mean << " in [" << rep.ci_lo << ", " << rep.ci_hi << "], scale " << rep.scale << "\n";
    run.stage("expectation_scale", rep.mean <= rep.scale);
    return run.ok() ? kOk : kFailed;
}

int cmd_certify(Run& run) {
    const auto pc = run.cfg().resolved_pipeline();
    const auto b = ss::build_bundle(pc, run.seed());
    run.set_ledger(b.geometry.ledger);
    certify_into(run, b);
    return run.ok() ? kOk : kFailed;
}

ev::EvolutionConfig evolve_config(const Run& run, const ss::Bundle& b, double F, double T) {
    const auto& E = run.cfg().evolve;
    auto ec = ev::config_for(b, F, T);
    ec.scheme = E.scheme;
    ec.pinned_rate = E.pinned_rate;
    ec.trailing_fraction = E.trailing_fraction;
    ec.barrier_tolerance = E.barrier_tolerance;
    ec.history_stride = static_cast<std::size_t>(E.history_stride);
    return ec;
}

void record_trajectory(Run& run, const std::string& tag, const ev::Trajectory& tr) {
    run.stream(tag + ".csv", [&](std::ostream& os) { tr.write_csv(os); });
    run.write_json(tag + ".json", tr.to_json());
    for (std::size_t i = 0; i < tr.snapshots.size(); ++i) run.grid(tag + "_snapshot" + std::to_string(i) + ".grid", tr.snapshots[i].u);
    const auto& last = tr.history.back();
    std::cout << tag << ": " << tr.steps << " steps to t = " << last.t << ", sup |u - u0| = " << last.sup
              << ", trailing rate " << tr.trailing_rate << ", min gap to v " << tr.min_barrier_gap << "\n";
}

int cmd_evolve(Run& run) {
    const auto pc = run.cfg().resolved_pipeline();
    const auto b = ss::build_bundle(pc, run.seed());
    run.set_ledger(b.geometry.ledger);
    const auto& E = run.cfg().evolve;
    const double F = E.F >= 0.0 ? E.F : b.geometry.ledger.F_star;

    auto ec = evolve_config(run, b, F, E.T);
    ec.snapshot_times = E.snapshots;
    const auto pin = ev::run_pinning_experiment(b, ec, b.U_grid);
    record_trajectory(run, "pin_fstar", pin);

    const auto zero = ev::run_pinning_experiment(b, evolve_config(run, b, 0.0, E.T_zero), b.U_grid);
    record_trajectory(run, "pin_zero", zero);

    const auto weak = ss::scale_strengths(b.field, E.depin_scale);
    const auto dep = ev::evolve(evolve_config(run, b, E.depin_F, E.depin_T), &weak, b.U_grid, &b.v);
    record_trajectory(run, "depin", dep);

    run.write_json("evolve.json", {{"F", F},
                                   {"F_star", b.geometry.ledger.F_star},
                                   {"pin_fstar", pin.to_json()},
                                   {"pin_zero", zero.to_json()},
                                   {"depin", dep.to_json()}});
    run.stage("fstar_below_barrier", !pin.first_contact.violated);
    run.stage("fstar_pinned", pin.pinned);
    run.stage("zero_below_barrier", !zero.first_contact.violated);
    run.stage("zero_pinned", zero.pinned);
    run.stage("depinned", !dep.pinned && dep.late_slope >= 0.9 * E.depin_F);
    return run.ok() ? kOk : kFailed;
}

int cmd_homogenize(Run& run) {
    const auto sc = run.cfg().sweep();
    const auto res = ev::homogenization_sweep(sc, run.seed());
    run.stream("sweep.csv", [&](std::ostream& os) { res.write_csv(os); });
    run.write_json("sweep.json", res.to_json());
    std::cout << std::setprecision(6) << "eps      E[v - u0]     E[(u - u0)+]\n";
    bool barrier = true;
    for (const auto& p : res.points) {
        std::cout << std::setw(8) << p.epsilon << " " << std::setw(12) << p.gap_mean << "  " << std::setw(12) << p.pos_mean
                  << "\n";
        barrier = barrier && p.barrier_ok;
    }
    std::cout << "slope " << res.slope << ", intercept " << res.intercept << " +- " << res.intercept_ci << "\n";
    run.stage("slope", std::abs(res.slope - 1.0) <= 0.1);
    run.stage("monotone", res.pos_monotone);
    run.stage("scale_identities", res.scale_identity_error <= 1e-10);
    run.stage("below_barrier", barrier);
    run.stage("intercept", std::abs(res.intercept) <= res.intercept_ci);
    return run.ok() ? kOk : kFailed;
}

int cmd_report(const fs::path& out) {
    const auto path = out / "manifest.json";
    std::ifstream in(path);
    if (!in) {
        std::cerr << "report: no manifest in " << out << "\n";
        return kUsage;
    }
    const json m = json::parse(in);
    bool ok = true;
    std::cout << "manifest " << path.string() << " (seed " << m.value("seed", std::string("?")) << ")\n";
    for (const auto& [name, cmd] : m["commands"].items()) {
        std::cout << name << ": " << (cmd["pass"].get<bool>() ? "pass" : "FAIL") << "\n";
        for (const auto& [stage, pass] : cmd["stages"].items())
            std::cout << "  [" << (pass.get<bool>() ? "pass" : "FAIL") << "] " << stage << "\n";
        ok = ok && cmd["pass"].get<bool>();
    }
    std::size_t mismatched = 0;
    for (const auto& [file, meta] : m["outputs"].items()) {
        const auto p = out / file;
        if (!fs::exists(p) || sha256_file(p) != meta["sha256"].get<std::string>()) {
            std::cout << "  changed or missing: " << file << "\n";
            ++mismatched;
        }
    }
    std::cout << m["outputs"].size() << " outputs, " << mismatched << " changed\n";
    return ok && mismatched == 0 ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interface pinning in random obstacle fields: barrier construction, certification and dynamics"};
    app.require_subcommand(1);
    bool print_default = false;
    app.add_flag("--default-config", print_default, "Print a complete configuration file and exit");

    Options o;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"select", "Choose the scales and write the constants ledger"},
        {"sample", "Sample the obstacle slab"},
        {"percolate", "Build the lattice surface and tail statistics"},
        {"build", "Assemble the barrier, dump grids, certify and estimate E[v - U]"},
        {"certify", "Assemble and certify the barrier"},
        {"evolve", "Pinning runs at F* and 0 and the depinning control"},
        {"homogenize", "Small-scale sweep over epsilon (s = 1/2 only)"},
        {"report", "Summarise a manifest and check output hashes"}};
    std::string chosen;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        if (name == "report") {
            sub->add_option("--out", o.out, "Output directory holding manifest.json")->capture_default_str();
        } else {
            sub->add_option("--config", o.config, "Configuration file")->required()->check(CLI::ExistingFile);
            sub->add_option("--seed", o.seed, "Master seed (overrides the file)");
            sub->add_option("--out", o.out, "Output directory")->capture_default_str();
            sub->add_option("--tolerance", o.tolerance, "Certification tolerance (default 1e-3 F2)");
            sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
        }
        sub->callback([&chosen, name = name] { chosen = name; });
    }
    app.preparse_callback([&](std::size_t) {});

    try {
        for (int i = 1; i < argc; ++i)
            if (std::string(argv[i]) == "--default-config") {
                std::cout << config::default_ini();
                return kOk;
            }
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (chosen == "report") return cmd_report(o.out);
        Run run(chosen, load_config(o), o.out);
        int code = kOk;
        if (chosen == "select")
            code = cmd_select(run);
        else if (chosen == "sample")
            code = cmd_sample(run);
        else if (chosen == "percolate")
            code = cmd_percolate(run);
        else if (chosen == "build")
            code = cmd_build(run);
        else if (chosen == "certify")
            code = cmd_certify(run);
        else if (chosen == "evolve")
            code = cmd_evolve(run);
        else if (chosen == "homogenize")
            code = cmd_homogenize(run);
        run.finish();
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    } catch (const AdmissibilityError& e) {
        std::cerr << e.what() << "\n";
        return kRejected;
    } catch (const DegenerateSurfaceError& e) {
        std::cerr << e.what() << "\n";
        return kRejected;
    } catch (const CertificationError& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return kFailed;
    } catch (const NoSurfaceError& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return kFailed;
    } catch (const BlowUpError& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return kFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}
