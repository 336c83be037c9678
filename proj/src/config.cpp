#include "pinning/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pinning/errors.hpp"

extern char** environ;

namespace pinning::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n\"");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n\"");
    return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

double to_double(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError("config: " + key + ": not a number: '" + text + "'");
    return v;
}

long to_long(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    long v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("config: " + key + ": not an integer: '" + text + "'");
    return v;
}

std::uint64_t to_u64(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        throw ConfigError("config: " + key + ": not an unsigned integer: '" + text + "'");
    return v;
}

bool to_bool(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError("config: " + key + ": expected true or false: '" + text + "'");
}

std::vector<double> to_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::istringstream is(trim(text));
    std::string tok;
    while (is >> tok) out.push_back(to_double(tok, key));
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
    return s;
}

Coord to_coord(const std::string& text, const std::string& key, int n) {
    const auto v = to_list(text, key);
    if (static_cast<int>(v.size()) != n) throw ConfigError("config: " + key + ": expected " + std::to_string(n) + " components");
    Coord c{};
    for (int i = 0; i < n; ++i) c[i] = v[i];
    return c;
}

/// "c1 c2 a b; c1 c2 a b" with n cycle counts per mode.
std::vector<supersolution::TorusMode> to_modes(const std::string& text, const std::string& key, int n) {
    std::vector<supersolution::TorusMode> out;
    std::istringstream is(trim(text));
    std::string item;
    while (std::getline(is, item, ';')) {
        if (trim(item).empty()) continue;
        const auto v = to_list(item, key);
        if (static_cast<int>(v.size()) != n + 2)
            throw ConfigError("config: " + key + ": each mode needs " + std::to_string(n) + " cycle counts, a and b");
        supersolution::TorusMode m;
        for (int i = 0; i < n; ++i) {
            if (v[i] != std::round(v[i])) throw ConfigError("config: " + key + ": cycle counts must be integers");
            m.cycles[i] = static_cast<long>(v[i]);
        }
        m.a = v[n];
        m.b = v[n + 1];
        out.push_back(m);
    }
    return out;
}

std::string fmt_modes(const std::vector<supersolution::TorusMode>& modes, int n) {
    std::string s;
    for (std::size_t j = 0; j < modes.size(); ++j) {
        if (j) s += "; ";
        for (int i = 0; i < n; ++i) s += std::to_string(modes[j].cycles[i]) + " ";
        s += fmt(modes[j].a) + " " + fmt(modes[j].b);
    }
    return s;
}

std::string fmt_coord(const Coord& c, int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + fmt(c[i]);
    return s;
}

struct Field {
    std::string section;  ///< empty for top-level keys
    std::string key;
    bool required = false;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;

    std::string name() const { return section.empty() ? key : section + "." + key; }
    std::string env() const { return "PINNING_" + (section.empty() ? "" : upper(section) + "_") + upper(key); }
};

/// Every key of the format, bound to cfg. Model keys come first so n is known before
/// vector-valued keys are read.
std::vector<Field> fields(RunConfig& c) {
    using obstacles::StrengthLaw;
    std::vector<Field> f;
    auto dbl = [&](std::string sec, std::string key, double& ref, bool req = false) {
        const std::string nm = sec + "." + key;
        f.push_back({sec, key, req, [&ref, nm](const std::string& v) { ref = to_double(v, nm); },
                     [&ref] { return fmt(ref); }});
    };
    auto lng = [&](std::string sec, std::string key, long& ref, bool req = false) {
        const std::string nm = sec + "." + key;
        f.push_back({sec, key, req, [&ref, nm](const std::string& v) { ref = to_long(v, nm); },
                     [&ref] { return std::to_string(ref); }});
    };
    auto& P = c.pipeline.params;

    f.push_back({"", "schema_version", true, [&c](const std::string& v) { c.schema_version = static_cast<int>(to_long(v, "schema_version")); },
                 [&c] { return std::to_string(c.schema_version); }});
    f.push_back({"", "seed", false, [&c](const std::string& v) { c.seed = to_u64(v, "seed"); },
                 [&c] { return std::to_string(c.seed); }});
    f.push_back({"", "threads", false,
                 [&c](const std::string& v) {
                     const long t = to_long(v, "threads");
                     if (t < 1) throw ConfigError("config: threads must be positive");
                     c.threads = static_cast<unsigned>(t);
                 },
                 [&c] { return std::to_string(c.threads); }});

    f.push_back({"model", "n", true, [&P](const std::string& v) { P.n = static_cast<int>(to_long(v, "model.n")); },
                 [&P] { return std::to_string(P.n); }});
    dbl("model", "s", P.s, true);
    dbl("model", "r0", P.r0, true);
    dbl("model", "r1", P.r1, true);
    dbl("model", "lambda", P.lambda, true);
    f.push_back({"model", "law", true,
                 [&P](const std::string& v) {
                     const auto t = trim(v);
                     if (t == "point_mass")
                         P.law.kind = StrengthLaw::Kind::PointMass;
                     else if (t == "shifted_exponential")
                         P.law.kind = StrengthLaw::Kind::ShiftedExponential;
                     else
                         throw ConfigError("config: model.law must be point_mass or shifted_exponential");
                 },
                 [&P] { return std::string(P.law.kind == StrengthLaw::Kind::PointMass ? "point_mass" : "shifted_exponential"); }});
    dbl("model", "law_value", P.law.value, true);
    dbl("model", "law_theta", P.law.theta);

    f.push_back({"surface", "tilt", false, [&c](const std::string& v) { c.tilt = to_coord(v, "surface.tilt", c.pipeline.params.n); },
                 [&c] { return fmt_coord(c.tilt, c.pipeline.params.n); }});
    f.push_back({"surface", "modes", false,
                 [&c](const std::string& v) { c.modes = to_modes(v, "surface.modes", c.pipeline.params.n); },
                 [&c] { return fmt_modes(c.modes, c.pipeline.params.n); }});

    auto& pl = c.pipeline;
    dbl("pipeline", "p_alpha", pl.p_alpha);
    dbl("pipeline", "S", pl.S);
    dbl("pipeline", "alpha", pl.select.alpha);
    f.push_back({"pipeline", "a2_variant", false,
                 [&pl](const std::string& v) {
                     const auto t = trim(v);
                     if (t == "printed")
                         pl.select.variant = scaling::A2Variant::Printed;
                     else if (t == "standard")
                         pl.select.variant = scaling::A2Variant::Standard;
                     else
                         throw ConfigError("config: pipeline.a2_variant must be printed or standard");
                 },
                 [&pl] { return std::string(pl.select.variant == scaling::A2Variant::Printed ? "printed" : "standard"); }});
    lng("pipeline", "columns", pl.columns);
    lng("pipeline", "grid_nodes", pl.grid_nodes);
    lng("pipeline", "levels", pl.levels);
    f.push_back({"pipeline", "profile_points", false,
                 [&pl](const std::string& v) { pl.profile_points = static_cast<int>(to_long(v, "pipeline.profile_points")); },
                 [&pl] { return std::to_string(pl.profile_points); }});

    dbl("certify", "tolerance", c.certify.tolerance);
    dbl("certify", "negative_scale", c.certify.negative_scale);
    lng("certify", "offenders", c.certify.offenders);

    lng("expectation", "replicates", c.expectation.replicates);
    lng("expectation", "points", c.expectation.points);

    dbl("tail", "p", c.tail.p);
    f.push_back({"tail", "n", false, [&c](const std::string& v) { c.tail.n = static_cast<int>(to_long(v, "tail.n")); },
                 [&c] { return std::to_string(c.tail.n); }});
    lng("tail", "half_width", c.tail.half_width);
    lng("tail", "replicates", c.tail.replicates);

    auto& e = c.evolve;
    dbl("evolve", "T", e.T);
    dbl("evolve", "T_zero", e.T_zero);
    dbl("evolve", "F", e.F);
    f.push_back({"evolve", "adaptive", false, [&e](const std::string& v) { e.scheme.adaptive = to_bool(v, "evolve.adaptive"); },
                 [&e] { return std::string(e.scheme.adaptive ? "true" : "false"); }});
    dbl("evolve", "dt_max", e.scheme.dt_max);
    dbl("evolve", "stiffness_fraction", e.scheme.stiffness_fraction);
    dbl("evolve", "max_increment", e.scheme.max_increment);
    dbl("evolve", "pinned_rate", e.pinned_rate);
    dbl("evolve", "trailing_fraction", e.trailing_fraction);
    dbl("evolve", "barrier_tolerance", e.barrier_tolerance);
    lng("evolve", "history_stride", e.history_stride);
    f.push_back({"evolve", "snapshots", false, [&e](const std::string& v) { e.snapshots = to_list(v, "evolve.snapshots"); },
                 [&e] { return fmt_list(e.snapshots); }});
    dbl("evolve", "depin_F", e.depin_F);
    dbl("evolve", "depin_scale", e.depin_scale);
    dbl("evolve", "depin_T", e.depin_T);

    auto& h = c.homogenize;
    f.push_back({"homogenize", "epsilons", false, [&h](const std::string& v) { h.epsilons = to_list(v, "homogenize.epsilons"); },
                 [&h] { return fmt_list(h.epsilons); }});
    lng("homogenize", "replicates", h.replicates);
    lng("homogenize", "points", h.points);
    dbl("homogenize", "T", h.T);
    dbl("homogenize", "F", h.F);
    lng("homogenize", "columns", h.columns);
    lng("homogenize", "grid_nodes", h.grid_nodes);
    f.push_back({"homogenize", "tilt", false,
                 [&c](const std::string& v) { c.homogenize.tilt = to_coord(v, "homogenize.tilt", c.pipeline.params.n); },
                 [&c] { return fmt_coord(c.homogenize.tilt, c.pipeline.params.n); }});
    f.push_back({"homogenize", "modes", false,
                 [&c](const std::string& v) { c.homogenize.modes = to_modes(v, "homogenize.modes", c.pipeline.params.n); },
                 [&c] { return fmt_modes(c.homogenize.modes, c.pipeline.params.n); }});
    return f;
}

void validate(const RunConfig& c) {
    c.pipeline.params.validate();
    c.pipeline.params.law.validate();
    if (c.pipeline.columns < 1 || c.pipeline.grid_nodes < 4) throw ConfigError("config: pipeline grid too small");
    if (c.certify.offenders < 0) throw ConfigError("config: certify.offenders must be nonnegative");
    if (c.expectation.replicates < 2 || c.expectation.points < 1) throw ConfigError("config: expectation needs >= 2 replicates");
    if (c.evolve.history_stride < 1) throw ConfigError("config: evolve.history_stride must be positive");
    if (!(c.evolve.T > 0.0 && c.evolve.T_zero > 0.0 && c.evolve.depin_T > 0.0))
        throw ConfigError("config: evolution horizons must be positive");
    if (c.homogenize.columns < 1 || c.homogenize.grid_nodes < 4) throw ConfigError("config: homogenize grid too small");
}

}  // namespace

supersolution::PipelineConfig RunConfig::resolved_pipeline() const {
    auto p = pipeline;
    p.surface = obstacles::InitialSurface::flat(p.params.n, p.params.s, tilt);
    return supersolution::with_torus_surface(p, tilt, modes);
}

evolution::SweepConfig RunConfig::sweep() const {
    evolution::SweepConfig sc;
    sc.pipeline = pipeline;
    sc.pipeline.surface = obstacles::InitialSurface::flat(pipeline.params.n, pipeline.params.s);
    sc.pipeline.columns = homogenize.columns;
    sc.pipeline.grid_nodes = homogenize.grid_nodes;
    sc.tilt = homogenize.tilt;
    sc.modes = homogenize.modes;
    sc.epsilons = homogenize.epsilons;
    sc.replicates = homogenize.replicates;
    sc.points = homogenize.points;
    sc.T = homogenize.T;
    sc.F = homogenize.F;
    sc.scheme = evolve.scheme;
    return sc;
}

RunConfig parse(std::istream& in, const Environment& env) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    RunConfig c;
    auto fs = fields(c);
    std::map<std::string, const Field*> known;
    std::set<std::string> sections;
    for (const auto& f : fs) {
        known[f.name()] = &f;
        if (!f.section.empty()) sections.insert(f.section);
    }

    // Collect file values, rejecting anything unknown.
    std::map<std::string, std::string> values;
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            if (!known.count(name)) throw ConfigError("config: unknown key '" + name + "'");
            values[name] = node.data();
            continue;
        }
        if (!sections.count(name)) throw ConfigError("config: unknown section [" + name + "]");
        for (const auto& [key, leaf] : node) {
            const std::string full = name + "." + key;
            if (!known.count(full)) throw ConfigError("config: unknown key '" + key + "' in [" + name + "]");
            values[full] = leaf.data();
        }
    }

    if (env.get) {
        std::set<std::string> env_names;
        for (const auto& f : fs) {
            env_names.insert(f.env());
            if (const char* v = env.get(f.env().c_str())) values[f.name()] = v;
        }
        for (const auto& nm : env.names)
            if (nm.rfind("PINNING_", 0) == 0 && !env_names.count(nm))
                throw ConfigError("config: unknown environment override " + nm);
    }

    for (const auto& f : fs) {
        const auto it = values.find(f.name());
        if (it == values.end()) {
            if (f.required) throw ConfigError("config: missing required key '" + f.name() + "'");
            continue;
        }
        f.set(it->second);
    }
    if (c.schema_version != kSchemaVersion)
        throw ConfigError("config: schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                          std::to_string(kSchemaVersion) + ")");
    c.pipeline.surface = obstacles::InitialSurface::flat(c.pipeline.params.n, c.pipeline.params.s, c.tilt);
    validate(c);
    return c;
}

RunConfig load(const std::string& path, const Environment& env) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse(in, env);
}

Environment process_environment() {
    Environment e;
    e.get = [](const char* name) -> const char* { return std::getenv(name); };
    for (char** p = environ; p && *p; ++p) {
        const std::string entry(*p);
        e.names.push_back(entry.substr(0, entry.find('=')));
    }
    return e;
}

std::string to_ini(const RunConfig& cfg) {
    RunConfig copy = cfg;
    const auto fs = fields(copy);
    std::ostringstream os;
    std::string section;
    for (const auto& f : fs)
        if (f.section.empty()) os << f.key << " = " << f.get() << '\n';
    for (const auto& f : fs) {
        if (f.section.empty()) continue;
        if (f.section != section) {
            section = f.section;
            os << "\n[" << section << "]\n";
        }
        os << f.key << " = " << f.get() << '\n';
    }
    return os.str();
}

nlohmann::json to_json(const RunConfig& cfg) {
    RunConfig copy = cfg;
    nlohmann::json j;
    for (const auto& f : fields(copy)) {
        if (f.section.empty())
            j[f.key] = f.get();
        else
            j[f.section][f.key] = f.get();
    }
    return j;
}

std::string default_ini() {
    RunConfig c;
    auto& P = c.pipeline.params;
    P.n = 2;
    P.s = 0.5;
    P.r0 = 1.0;
    P.r1 = 1.1 * std::sqrt(3.0);
    P.lambda = 2e5;
    P.law.kind = obstacles::StrengthLaw::Kind::ShiftedExponential;
    P.law.value = 1.0;
    P.law.theta = 0.5;
    c.tilt = {0.1, 0.0, 0.0};
    c.modes = {supersolution::TorusMode{{1, 1, 0}, 1e-3, 0.0}};
    c.homogenize.tilt = {0.1, 0.05, 0.0};
    c.homogenize.modes = {supersolution::TorusMode{{1, 1, 0}, 2e-4, 0.0}};
    return to_ini(c);
}

}  // namespace pinning::config
