#include "pinning/supersolution.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "pinning/errors.hpp"
#include "pinning/parallel.hpp"
#include "pinning/rng.hpp"

namespace pinning::supersolution {

namespace {

std::span<const double> sp(const Coord& x, int n) { return {x.data(), static_cast<std::size_t>(n)}; }

double wrap(double x, double L) {
    const double r = x - L * std::floor(x / L);
    return r >= L ? 0.0 : r;
}

void check_surface_period(const obstacles::InitialSurface& U, double L) {
    for (const auto& m : U.modes())
        for (int i = 0; i < U.dim(); ++i) {
            const double cycles = m.k[i] * L / (2.0 * std::numbers::pi);
            if (std::abs(cycles - std::round(cycles)) > 1e-9 * std::max(1.0, std::abs(cycles)))
                throw DomainError("pipeline: surface modes must be periodic on the torus of columns");
        }
}

}  // namespace

grid::GridSpec Geometry::grid_spec(long nodes) const { return grid::GridSpec::torus(dec.n, torus_length, nodes); }

Geometry make_geometry(const PipelineConfig& cfg) {
    const auto& P = cfg.params;
    P.validate();
    if (cfg.surface.dim() != P.n) throw DomainError("pipeline: surface dimension does not match the model");
    if (cfg.columns < 1) throw DomainError("pipeline: need at least one column");
    Geometry geo;
    double S = cfg.S;
    if (S <= 0.0) {
        const double alpha = cfg.select.alpha > 0.0 ? cfg.select.alpha : std::min(P.s, 1.0);
        const auto c =
            scaling::compute_constants(P, alpha, cfg.p_alpha, lifting::mollifier_C0(P.n), cfg.select.variant);
        S = scaling::choose_S(P, c);
    }
    geo.ledger = scaling::select_parameters(P, cfg.surface, S, cfg.p_alpha, cfg.select);
    const auto& L = geo.ledger;
    if (!(L.admissibility.grad_U < 1.0)) throw DegenerateSurfaceError(L.diagnosis);
    geo.dec =obstacles::Decomposition{P.n, L.l, L.d, L.h, P.r1};
    geo.dec.validate();
    geo.window = percolation::Window::torus(P.n, cfg.columns);
    geo.torus_length = static_cast<double>(cfg.columns) * geo.dec.pitch();
    check_surface_period(cfg.surface, geo.torus_length);
    geo.p = percolation::open_probability(P.lambda, L.h, L.l, P.r1, P.n, L.mu_S);
    geo.levels = cfg.levels > 0 ? cfg.levels : std::max(8L, percolation::default_level_cap(geo.p));
    return geo;
}

obstacles::InitialSurface torus_surface(int n, double s, Coord tilt, const std::vector<TorusMode>& modes, double L) {
    if (modes.empty()) return obstacles::InitialSurface::flat(n, s, tilt);
    std::vector<obstacles::Mode> ms;
    for (const auto& m : modes) {
        obstacles::Mode om;
        for (int i = 0; i < n; ++i) om.k[i] = 2.0 * std::numbers::pi * static_cast<double>(m.cycles[i]) / L;
        om.a = m.a;
        om.b = m.b;
        ms.push_back(om);
    }
    Coord box{};
    for (int i = 0; i < n; ++i) box[i] = L;
    return obstacles::InitialSurface(n, s, tilt, std::move(ms), box);
}

PipelineConfig with_torus_surface(PipelineConfig cfg, Coord tilt, const std::vector<TorusMode>& modes) {
    const int n = cfg.params.n;
    const double s = cfg.params.s;
    cfg.surface = obstacles::InitialSurface::flat(n, s, tilt);
    if (modes.empty()) return cfg;
    auto side = [&](const PipelineConfig& c) {
        auto relaxed = c;
        relaxed.select.throw_on_reject = false;
        const auto geo = make_geometry(relaxed);
        return geo.torus_length;
    };
    double L = side(cfg);
    for (int it = 0; it < 20; ++it) {
        cfg.surface = torus_surface(n, s, tilt, modes, L);
        const double next = side(cfg);
        if (std::abs(next - L) <= 1e-12 * L) return cfg;
        L = next;
    }
    throw DomainError("pipeline: torus side does not settle for the given surface modes");
}

obstacles::ObstacleField sample_slab(const PipelineConfig& cfg, const Geometry& geo, std::mt19937_64& rng) {
    const auto& P = cfg.params;
    const int n = P.n;
    const double L = geo.torus_length;
    const double lo = geo.dec.level_bottom(1);
    const double hi = geo.dec.level_top(geo.levels);
    const double mean = P.lambda * std::pow(L, n) * (hi - lo);
    std::poisson_distribution<long long> pois(mean);
    const long long count = pois(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<obstacles::Obstacle> obs(static_cast<std::size_t>(count));
    for (auto& o : obs) {
        for (int i = 0; i < n; ++i) o.x[i] = L * unit(rng);
        o.y = lo + (hi - lo) * unit(rng);
    }
    for (auto& o : obs) o.f = P.law.sample(rng);

    obstacles::Box box;
    box.n = n;
    for (int i = 0; i < n; ++i) box.hi[i] = L;
    box.y_lo = std::numeric_limits<double>::infinity();
    box.y_hi = -std::numeric_limits<double>::infinity();
    for (auto& o : obs) {
        o.y += cfg.surface.value(sp(o.x, n));
        box.y_lo = std::min(box.y_lo, o.y);
        box.y_hi = std::max(box.y_hi, o.y);
    }
    if (obs.empty()) {
        box.y_lo = lo;
        box.y_hi = hi;
    }
    obstacles::Periodicity per;
    for (int i = 0; i < n; ++i) {
        per.period[i] = L;
        per.shear[i] = cfg.surface.nu()[i] * L;
    }
    return obstacles::ObstacleField(obstacles::Bump(n, P.r0, P.r1), box, std::move(obs), per);
}

obstacles::ObstacleField scale_strengths(const obstacles::ObstacleField& field, double factor) {
    if (!(factor >= 0.0)) throw DomainError("scale_strengths: factor must be nonnegative");
    auto obs = field.obstacles();
    for (auto& o : obs) o.f *= factor;
    return obstacles::ObstacleField(field.bump(), field.window(), std::move(obs), field.periodicity());
}

double LocalSolution::source(double radius) const {
    if (radius <= problem.r0) return problem.F1;
    if (radius < problem.R) return -problem.F2;
    return 0.0;
}

double LocalSolution::value(double radius) const {
    if (radius >= problem.R) return 0.0;
    return (*spline)(radius);
}

double LocalSolution::slope(double radius) const {
    if (radius <= 0.0 || radius >= problem.R) return 0.0;
    return spline->prime(radius);
}

LocalSolution make_local_solution(const scaling::GeometryLedger& ledger, int points) {
    LocalSolution out;
    out.problem = kernels::BallProblem{ledger.R, ledger.params.r0, ledger.F1, ledger.F2};
    const kernels::FracParams fp{ledger.params.n, ledger.params.s};
    const kernels::GreenKernel kernel(fp);
    out.profile = kernels::local_solution(out.problem, kernel, points);
    out.conditions = kernels::check_local_conditions(out.problem, fp);
    out.depth = -out.profile.at_origin();
    const double step = out.profile.radii[1] - out.profile.radii[0];
    out.spline = std::make_shared<const boost::math::interpolators::cardinal_cubic_b_spline<double>>(
        out.profile.values.begin(), out.profile.values.end(), 0.0, step, 0.0);
    return out;
}

VoronoiLocator::VoronoiLocator(std::vector<Coord> centres, const percolation::Window& window, double pitch)
    : centres_(std::move(centres)), window_(window), pitch_(pitch) {
    if (!window_.periodic) throw DomainError("voronoi: window must be a torus");
    if (centres_.size() != window_.size()) throw DomainError("voronoi: one centre per column required");
    for (int i = 1; i < window_.n; ++i)
        if (window_.extent[i] != window_.extent[0]) throw DomainError("voronoi: torus must be a cube");
    length_ = static_cast<double>(window_.extent[0]) * pitch_;
    for (auto& c : centres_)
        for (int i = 0; i < window_.n; ++i) c[i] = wrap(c[i], length_);
}

Coord VoronoiLocator::displacement(std::span<const double> x, const Coord& c) const {
    Coord d{};
    for (int i = 0; i < window_.n; ++i) {
        double t = x[i] - c[i];
        t -= length_ * std::floor(t / length_ + 0.5);
        d[i] = t;
    }
    return d;
}

Nearest VoronoiLocator::locate(std::span<const double> x) const {
    // With l = d the witnesses of columns at lattice offset >= 3 are farther than both
    // the own witness and some neighbouring witness, so a 5^n block suffices.
    const int n = window_.n;
    const long N = window_.extent[0];
    const long reach = std::min(2L, (N - 1) / 2 + 1);
    percolation::LatticeIndex base{};
    for (int i = 0; i < n; ++i) base[i] = static_cast<long>(std::floor(wrap(x[i], length_) / pitch_ + 0.5));
    Nearest out;
    out.d1 = out.d2 = std::numeric_limits<double>::infinity();
    bool have_first = false, have_second = false;
    const long side = 2 * reach + 1;
    long total = 1;
    for (int i = 0; i < n; ++i) total *= side;
    std::vector<std::size_t> seen;
    for (long code = 0; code < total; ++code) {
        long c = code;
        percolation::LatticeIndex a{};
        for (int i = 0; i < n; ++i) {
            a[i] = ((base[i] + c % side - reach) % N + N) % N;
            c /= side;
        }
        const std::size_t id = window_.flat(a);
        if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
        seen.push_back(id);
        const Coord d = displacement(x, centres_[id]);
        const double dist = norm(d, n);
        if (!have_first || dist < out.d1) {
            if (have_first) {
                out.second = out.first;
                out.d2 = out.d1;
                have_second = true;
            }
            out.first = id;
            out.d1 = dist;
            have_first = true;
        } else if (!have_second || dist < out.d2) {
            out.second = id;
            out.d2 = dist;
            have_second = true;
        }
    }
    if (!have_second) {
        out.second = out.first;
        out.bisector = std::numeric_limits<double>::infinity();
        return out;
    }
    const Coord ab = displacement(sp(centres_[out.second], n), centres_[out.first]);
    const double sep = norm(ab, n);
    out.bisector = sep > 0.0 ? (out.d2 * out.d2 - out.d1 * out.d1) / (2.0 * sep) : 0.0;
    return out;
}

grid::GridField build_u_flat(const VoronoiLocator& locator, const LocalSolution& local, const grid::GridSpec& spec,
                             FlatReport* report) {
    grid::GridField g(spec);
    std::vector<double> nearest(g.size());
    parallel_for(g.size(), [&](std::size_t k) {
        const Coord x = g.node(k);
        const auto nr = locator.locate(sp(x, spec.n));
        nearest[k] = nr.d1;
        g.values[k] = local.value(nr.d1);
    });
    if (report) {
        *report = FlatReport{};
        for (double d : nearest) {
            report->max_nearest = std::max(report->max_nearest, d);
            if (d >= local.problem.R) ++report->uncovered;
        }
    }
    return g;
}

double Bundle::v_at(std::span<const double> x) const {
    return local.value(locator->locate(x).d1) + lift->value(x) + U.value(x);
}

std::vector<Coord> Bundle::witness_points() const {
    std::vector<Coord> out;
    out.reserve(surface.witness.size());
    for (const auto& w : surface.witness) out.push_back(w.x);
    return out;
}

Bundle assemble(const PipelineConfig& cfg, Geometry geo, obstacles::ObstacleField field) {
    Bundle b;
    b.U = cfg.surface;
    const auto& L = geo.ledger;
    const auto sites = percolation::build_site_grid(field, geo.dec, cfg.surface, L.S, geo.window, geo.levels);
    b.surface = percolation::smallest_surface(sites, L.constants.alpha);
    b.local = make_local_solution(L, cfg.profile_points);
    if (!b.local.conditions.holds)
        throw CertificationError("pipeline: local solution conditions fail: " + b.local.conditions.describe());
    b.lift = std::make_shared<const lifting::LiftField>(lifting::heights_from_surface(b.surface, geo.dec, b.local.depth));
    b.locator = std::make_shared<const VoronoiLocator>(b.witness_points(), geo.window, geo.dec.pitch());

    const auto spec = geo.grid_spec(cfg.grid_nodes);
    b.u_flat = build_u_flat(*b.locator, b.local, spec, &b.flat_report);
    b.u_lift = b.lift->sample(spec);
    b.U_grid = grid::GridField::sample(spec, [&](std::span<const double> x) { return b.U.value(x); });
    b.v = b.u_flat;
    b.v += b.u_lift;
    b.v += b.U_grid;
    b.geometry = std::move(geo);
    b.field = std::move(field);
    return b;
}

Bundle build_bundle(const PipelineConfig& cfg, std::uint64_t seed) {
    auto geo = make_geometry(cfg);
    auto rng = make_rng(seed, Stage::Obstacles);
    auto field = sample_slab(cfg, geo, rng);
    return assemble(cfg, std::move(geo), std::move(field));
}

Certificate certify(const Bundle& bundle, double F_star, const CertifyOptions& opt) {
    const auto& geo = bundle.geometry;
    const auto& L = geo.ledger;
    const int n = geo.dec.n;
    const double s = L.params.s;
    Certificate c;
    c.F_star = F_star;
    c.tolerance = opt.tolerance >= 0.0 ? opt.tolerance : 1e-3 * L.F2;
    c.strength_scale = opt.strength_scale;
    c.lift_bound = L.lift_bound;

    const obstacles::ObstacleField scaled =
        opt.strength_scale == 1.0 ? obstacles::ObstacleField{} : scale_strengths(bundle.field, opt.strength_scale);
    const obstacles::ObstacleField& field = opt.strength_scale == 1.0 ? bundle.field : scaled;

    const auto& spec = bundle.v.spec;
    const long M = spec.shape[0];
    const auto series = lifting::fraclap_series(*bundle.lift, s, M, 1e-2 * c.tolerance);
    for (int i = 0; i < n; ++i)
        if (series.values.spec.shape[i] != spec.shape[i] ||
            std::abs(series.values.spec.spacing[i] - spec.spacing[i]) > 1e-12 * spec.spacing[i])
            throw DomainError("certify: series grid does not match the bundle grid");
    c.lift_truncation = series.truncation;
    c.lift_sup = series.values.sup_abs();
    c.quadrature_ok = series.truncation < 0.1 * c.tolerance;

    double widest = spec.spacing[0];
    for (int i = 1; i < n; ++i) widest = std::max(widest, spec.spacing[i]);
    const double exempt_width = widest;

    const std::size_t N = bundle.v.size();
    std::vector<Residual> res(N);
    std::vector<std::uint8_t> exempt(N, 0), inside(N, 0), uncovered(N, 0);
    std::vector<double> jump(N, 0.0), fracU(N, 0.0);
    parallel_for(N, [&](std::size_t k) {
        Residual& r = res[k];
        r.x = bundle.v.node(k);
        const auto xs = sp(r.x, n);
        const auto nr = bundle.locator->locate(xs);
        r.flat = bundle.local.source(nr.d1);
        r.lift = -series.values.values[k];
        const double lu = bundle.U.fraclap(xs);
        fracU[k] = std::abs(lu);
        r.U = -lu;
        r.f = field.force(xs, bundle.v.values[k]);
        r.residual = r.flat + r.lift + r.U - r.f + F_star;
        inside[k] = nr.d1 <= L.params.r0;
        uncovered[k] = nr.d1 >= bundle.local.problem.R;
        if (nr.bisector < exempt_width) {
            exempt[k] = 1;
            const auto& C = bundle.locator->centres();
            const Coord e1 = bundle.locator->displacement(xs, C[nr.first]);
            const Coord e2 = bundle.locator->displacement(xs, C[nr.second]);
            const double g1 = bundle.local.slope(nr.d1) / std::max(nr.d1, 1e-300);
            const double g2 = bundle.local.slope(nr.d2) / std::max(nr.d2, 1e-300);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += (g1 * e1[i] - g2 * e2[i]) * (g1 * e1[i] - g2 * e2[i]);
            jump[k] = std::sqrt(acc);
        }
    });

    // Witness centres: v passes through the witness obstacle there, so f >= S.
    const auto wpts = bundle.witness_points();
    std::vector<Residual> wres(wpts.size());
    parallel_for(wpts.size(), [&](std::size_t a) {
        Residual& r = wres[a];
        r.x = wpts[a];
        r.witness = true;
        const auto xs = sp(r.x, n);
        r.flat = bundle.local.source(0.0);
        r.lift = -series.values.interpolate(xs);
        r.U = -bundle.U.fraclap(xs);
        r.f = field.force(xs, bundle.v_at(xs));
        r.residual = r.flat + r.lift + r.U - r.f + F_star;
    });

    const double inf = std::numeric_limits<double>::infinity();
    c.nodes = N;
    c.max_residual = c.max_residual_inside = c.max_residual_outside = c.exempt_max_residual = -inf;
    c.max_structural_outside = -inf;
    std::size_t structural_violations = 0;
    c.exempt_min_gradient_jump = inf;
    c.min_v_minus_U = inf;
    c.min_f_inside = inf;
    std::vector<Residual> tested;
    for (std::size_t k = 0; k < N; ++k) {
        c.min_v_minus_U = std::min(c.min_v_minus_U, bundle.u_flat.values[k] + bundle.u_lift.values[k]);
        c.fraclap_U_sup = std::max(c.fraclap_U_sup, fracU[k]);
        c.uncovered += uncovered[k];
        if (exempt[k]) {
            ++c.exempt;
            c.exempt_max_residual = std::max(c.exempt_max_residual, res[k].residual);
            c.exempt_min_gradient_jump = std::min(c.exempt_min_gradient_jump, jump[k]);
            continue;
        }
        ++c.tested;
        if (inside[k]) {
            ++c.inside;
            c.max_residual_inside = std::max(c.max_residual_inside, res[k].residual);
            c.min_f_inside = std::min(c.min_f_inside, res[k].f);
        } else {
            c.max_residual_outside = std::max(c.max_residual_outside, res[k].residual);
            const double structural = res[k].residual + res[k].f;
            c.max_structural_outside = std::max(c.max_structural_outside, structural);
            if (structural > c.tolerance) ++structural_violations;
        }
        tested.push_back(res[k]);
    }
    for (const auto& r : wres) {
        ++c.witness_points;
        c.max_residual_inside = std::max(c.max_residual_inside, r.residual);
        c.min_f_inside = std::min(c.min_f_inside, r.f);
        tested.push_back(r);
    }
    for (const auto& r : tested) {
        c.max_residual = std::max(c.max_residual, r.residual);
        if (r.residual > c.tolerance) ++c.violations;
    }
    std::stable_sort(tested.begin(), tested.end(),
                     [](const Residual& a, const Residual& b) { return a.residual > b.residual; });
    tested.resize(std::min(tested.size(), opt.offenders));
    c.worst = std::move(tested);
    c.dominance_ok = c.min_v_minus_U > 0.0;
    c.pass = c.violations == 0 && structural_violations == 0 && c.dominance_ok && c.quadrature_ok;
    return c;
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json Certificate::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["pass"] = pass;
    j["F_star"] = F_star;
    j["tolerance"] = tolerance;
    j["strength_scale"] = strength_scale;
    j["nodes"] = nodes;
    j["tested"] = tested;
    j["exempt"] = exempt;
    j["inside"] = inside;
    j["witness_points"] = witness_points;
    j["violations"] = violations;
    j["max_residual"] = finite_or_null(max_residual);
    j["budget"] = {{"max_residual_inside", finite_or_null(max_residual_inside)},
                   {"max_residual_outside", finite_or_null(max_residual_outside)},
                   {"max_structural_outside", finite_or_null(max_structural_outside)},
                   {"min_f_inside", finite_or_null(min_f_inside)},
                   {"lift_sup", lift_sup},
                   {"lift_bound", lift_bound},
                   {"lift_truncation", lift_truncation},
                   {"fraclap_U_sup", fraclap_U_sup}};
    j["exempt_max_residual"] = finite_or_null(exempt_max_residual);
    j["exempt_min_gradient_jump"] = finite_or_null(exempt_min_gradient_jump);
    j["min_v_minus_U"] = finite_or_null(min_v_minus_U);
    j["uncovered"] = uncovered;
    j["quadrature_ok"] = quadrature_ok;
    j["dominance_ok"] = dominance_ok;
    auto& w = j["worst"] = nlohmann::json::array();
    for (const auto& r : worst) {
        nlohmann::json e;
        e["x"] = std::vector<double>(r.x.begin(), r.x.end());
        e["residual"] = r.residual;
        e["flat"] = r.flat;
        e["lift"] = r.lift;
        e["U"] = r.U;
        e["f"] = r.f;
        e["witness"] = r.witness;
        w.push_back(e);
    }
    return j;
}

std::string Certificate::summary() const {
    std::ostringstream os;
    os << std::setprecision(6);
    os << (pass ? "CERTIFIED" : "NOT CERTIFIED") << "\n";
    os << "  F*                  " << F_star << "\n";
    os << "  tolerance           " << tolerance << "\n";
    os << "  max residual        " << max_residual << "  (inside " << max_residual_inside << ", outside "
       << max_residual_outside << ")\n";
    os << "  outside, f dropped  " << max_structural_outside << "\n";
    os << "  nodes               " << nodes << " tested " << tested << " exempt " << exempt << " inside " << inside
       << " witness points " << witness_points << "\n";
    os << "  violations          " << violations << "\n";
    os << "  min f inside r0     " << min_f_inside << "\n";
    os << "  lift sup / bound    " << lift_sup << " / " << lift_bound << " (truncation " << lift_truncation << ")\n";
    os << "  sup |(-D)^s U|      " << fraclap_U_sup << "\n";
    os << "  min v - U           " << min_v_minus_U << "\n";
    if (uncovered) os << "  warning: " << uncovered << " nodes outside every B_R(x_a)\n";
    return os.str();
}

nlohmann::json ExpectationReport::to_json() const {
    return {{"replicates", replicates},   {"points", points},           {"mean", mean},
            {"stddev", stddev},           {"ci", {ci_lo, ci_hi}},       {"scale", scale},
            {"mean_level", mean_level},   {"witness_gap_min", witness_gap_min},
            {"witness_gap_max", witness_gap_max}};
}

ExpectationReport expectation_report(const PipelineConfig& cfg, long replicates, std::uint64_t seed, long points) {
    if (replicates < 2) throw DomainError("expectation: need at least two replicates");
    const auto geo = make_geometry(cfg);
    const auto local = make_local_solution(geo.ledger, cfg.profile_points);
    const int n = geo.dec.n;
    const double Ltorus = geo.torus_length;

    std::vector<Coord> xs(static_cast<std::size_t>(points));
    auto prng = make_rng(seed, Stage::Expectation, std::uint64_t{1} << 40);
    std::uniform_real_distribution<double> unit(0.0, Ltorus);
    for (auto& x : xs)
        for (int i = 0; i < n; ++i) x[i] = unit(prng);

    std::vector<double> means(static_cast<std::size_t>(replicates)), level(means.size()), wmin(means.size()),
        wmax(means.size());
    parallel_for(means.size(), [&](std::size_t r) {
        auto rng = make_rng(seed, Stage::Expectation, r);
        const auto field = sample_slab(cfg, geo, rng);
        const auto sites =
            percolation::build_site_grid(field, geo.dec, cfg.surface, geo.ledger.S, geo.window, geo.levels);
        const auto surf = percolation::smallest_surface(sites, geo.ledger.constants.alpha);
        const lifting::LiftField lift(lifting::heights_from_surface(surf, geo.dec, local.depth));
        std::vector<Coord> centres;
        for (const auto& w : surf.witness) centres.push_back(w.x);
        const VoronoiLocator loc(centres, geo.window, geo.dec.pitch());
        double acc = 0.0;
        for (const auto& x : xs) acc += local.value(loc.locate(sp(x, n)).d1) + lift.value(sp(x, n));
        means[r] = acc / static_cast<double>(xs.size());
        level[r] = static_cast<double>(surf.y[0]);
        wmin[r] = std::numeric_limits<double>::infinity();
        wmax[r] = -wmin[r];
        for (std::size_t a = 0; a < surf.witness.size(); ++a) {
            const auto& x = surf.witness[a].x;
            const double gap = local.value(0.0) + lift.value(sp(x, n));
            wmin[r] = std::min(wmin[r], gap);
            wmax[r] = std::max(wmax[r], gap);
        }
    });

    ExpectationReport rep;
    rep.replicates = replicates;
    rep.points = points;
    rep.replicate_means = means;
    double m = 0.0, lv = 0.0;
    for (std::size_t r = 0; r < means.size(); ++r) {
        m += means[r];
        lv += level[r];
    }
    m /= static_cast<double>(replicates);
    lv /= static_cast<double>(replicates);
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    var /= static_cast<double>(replicates - 1);
    rep.mean = m;
    rep.stddev = std::sqrt(var);
    const double half = 1.96 * rep.stddev / std::sqrt(static_cast<double>(replicates));
    rep.ci_lo = m - half;
    rep.ci_hi = m + half;
    rep.mean_level = lv;
    rep.scale = geo.dec.r1 + lv * geo.dec.h + local.depth;
    rep.witness_gap_min = *std::min_element(wmin.begin(), wmin.end());
    rep.witness_gap_max = *std::max_element(wmax.begin(), wmax.end());
    return rep;
}

}  // namespace pinning::supersolution
