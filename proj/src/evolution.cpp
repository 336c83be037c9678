#include "pinning/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "pinning/errors.hpp"
#include "pinning/parallel.hpp"
#include "pinning/rng.hpp"

namespace pinning::evolution {

namespace {

bool power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

struct Stats {
    double mean = 0.0;
    double ci = 0.0;
};

Stats mean_ci(const std::vector<double>& xs) {
    Stats st;
    if (xs.empty()) return st;
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    st.mean = m;
    if (xs.size() < 2) return st;
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size() - 1);
    st.ci = 1.96 * std::sqrt(v / static_cast<double>(xs.size()));
    return st;
}

/// Least-squares line y = a + b x; returns {a, b}.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double b = sxx > 0.0 ? sxy / sxx : 0.0;
    return {my - b * mx, b};
}

}  // namespace

void EvolutionConfig::validate() const {
    if (n < 1 || n > kMaxDim) throw ConfigError("evolution: dimension must be 1, 2 or 3");
    if (!(L > 0.0)) throw ConfigError("evolution: torus side must be positive");
    if (!power_of_two(nodes)) throw ConfigError("evolution: nodes per axis must be a power of two");
    if (!(T > 0.0)) throw ConfigError("evolution: horizon must be positive");
    if (!(F >= 0.0)) throw ConfigError("evolution: driving force must be nonnegative");
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("evolution: s must lie in (0, 1)");
    if (!(scheme.dt_max > 0.0)) throw ConfigError("evolution: dt must be positive");
    if (scheme.adaptive && !(scheme.stiffness_fraction > 0.0 && scheme.max_increment > 0.0))
        throw ConfigError("evolution: adaptive step controls must be positive");
    if (!(trailing_fraction > 0.0 && trailing_fraction <= 1.0))
        throw ConfigError("evolution: trailing fraction must lie in (0, 1]");
    if (history_stride == 0) throw ConfigError("evolution: history stride must be positive");
    if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end()))
        throw ConfigError("evolution: snapshot times must be ascending");
}

Stepper::Stepper(const EvolutionConfig& cfg, const obstacles::ObstacleField* field)
    : cfg_(cfg), field_(field), spec_(cfg.spec()), fft_(spec_) {
    cfg_.validate();
    if (field_ && field_->dim() != cfg_.n) throw DomainError("evolution: obstacle field dimension mismatch");
    const grid::GridField probe(spec_);
    tilt_.resize(probe.size());
    for (std::size_t k = 0; k < probe.size(); ++k) {
        const Coord x = probe.node(k);
        double t = 0.0;
        for (int i = 0; i < cfg_.n; ++i) t += cfg_.tilt[i] * x[i];
        tilt_[k] = t;
    }
    const auto& k2 = fft_.k2();
    multiplier_.resize(k2.size());
    for (std::size_t j = 0; j < k2.size(); ++j) multiplier_[j] = k2[j] > 0.0 ? std::pow(k2[j], cfg_.s) : 0.0;
    work_.resize(probe.size());
    if (!field_) return;

    const std::size_t N = probe.size();
    const double r1 = field_->bump().support_radius();
    std::vector<std::vector<Neighbour>> lists(N);
    parallel_for(N, [&](std::size_t k) {
        const Coord x = probe.node(k);
        field_->visit_near(std::span<const double>(x.data(), cfg_.n),
                           [&](const obstacles::Obstacle& o, const Coord& ix, double iy) {
                               double r2 = 0.0;
                               for (int i = 0; i < cfg_.n; ++i) r2 += (x[i] - ix[i]) * (x[i] - ix[i]);
                               if (r2 < r1 * r1) lists[k].push_back({iy, r2, o.f});
                           });
    });
    offsets_.assign(N + 1, 0);
    for (std::size_t k = 0; k < N; ++k) offsets_[k + 1] = offsets_[k] + lists[k].size();
    neighbours_.reserve(offsets_[N]);
    for (auto& l : lists) {
        neighbours_.insert(neighbours_.end(), l.begin(), l.end());
        std::vector<Neighbour>().swap(l);
    }
}

void Stepper::forcing(const grid::GridField& u, Forcing& out) const {
    const std::size_t N = u.size();
    out.N.assign(N, cfg_.F);
    out.mean_f = 0.0;
    out.max_dfdu = 0.0;
    out.max_abs_N = cfg_.F;
    if (!field_) return;
    std::vector<double> f(N, 0.0), df(N, 0.0);
    const auto& bump = field_->bump();
    const double r1sq = bump.support_radius() * bump.support_radius();
    parallel_for(N, [&](std::size_t k) {
        const double y = u.values[k];
        double fv = 0.0, dv = 0.0;
        for (std::size_t e = offsets_[k]; e < offsets_[k + 1]; ++e) {
            const Neighbour& nb = neighbours_[e];
            const double dy = y - nb.y;
            const double r2 = nb.r2 + dy * dy;
            if (r2 >= r1sq) continue;
            const double rho = std::sqrt(r2);
            fv += nb.f * bump.profile(rho);
            if (rho > 0.0) dv += nb.f * bump.profile_derivative(rho) * dy / rho;
        }
        f[k] = fv;
        df[k] = dv;
    });
    double sum = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        out.N[k] = cfg_.F - f[k];
        sum += f[k];
        out.max_dfdu = std::max(out.max_dfdu, std::abs(df[k]));
        out.max_abs_N = std::max(out.max_abs_N, std::abs(out.N[k]));
    }
    out.mean_f = sum / static_cast<double>(N);
}

double Stepper::suggest_dt(const Forcing& fc) const {
    const auto& sc = cfg_.scheme;
    double dt = sc.dt_max;
    if (!sc.adaptive) return dt;
    if (fc.max_dfdu > 0.0) dt = std::min(dt, sc.stiffness_fraction / fc.max_dfdu);
    if (fc.max_abs_N > 0.0) dt = std::min(dt, sc.max_increment / fc.max_abs_N);
    return dt;
}

void Stepper::step(grid::GridField& u, double dt, const Forcing& fc) {
    if (!(dt > 0.0)) throw DomainError("evolution: dt must be positive");
    if (u.spec != spec_) throw DomainError("evolution: state does not match the configured grid");
    const std::size_t N = u.size();
    for (std::size_t k = 0; k < N; ++k) work_[k] = u.values[k] - tilt_[k] + dt * fc.N[k];
    fft_.forward(work_, spectrum_);
    for (std::size_t j = 0; j < spectrum_.size(); ++j) spectrum_[j] /= 1.0 + dt * multiplier_[j];
    fft_.backward(spectrum_, work_);
    for (std::size_t k = 0; k < N; ++k) u.values[k] = work_[k] + tilt_[k];
}

grid::GridField step(const grid::GridField& state, const EvolutionConfig& cfg, const obstacles::ObstacleField* field,
                     double dt) {
    Stepper st(cfg, field);
    Stepper::Forcing fc;
    st.forcing(state, fc);
    grid::GridField out = state;
    st.step(out, dt, fc);
    return out;
}

Trajectory evolve(const EvolutionConfig& cfg, const obstacles::ObstacleField* field, const grid::GridField& u0,
                  const grid::GridField* barrier) {
    Stepper st(cfg, field);
    const auto spec = cfg.spec();
    if (u0.spec != spec) throw DomainError("evolution: initial state does not match the configured grid");
    if (barrier && barrier->spec != spec) throw DomainError("evolution: barrier does not match the configured grid");

    Trajectory tr;
    tr.has_barrier = barrier != nullptr;
    tr.min_barrier_gap = std::numeric_limits<double>::infinity();
    grid::GridField u = u0;
    const std::size_t N = u.size();

    auto observe = [&](double t, double dt) {
        Sample smp;
        smp.t = t;
        smp.dt = dt;
        double sum = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double d = u.values[k] - u0.values[k];
            smp.sup = std::max(smp.sup, std::abs(d));
            sum += d;
        }
        smp.mean = sum / static_cast<double>(N);
        smp.barrier_gap = std::numeric_limits<double>::quiet_NaN();
        if (barrier) {
            double gap = std::numeric_limits<double>::infinity();
            std::size_t where = 0;
            for (std::size_t k = 0; k < N; ++k) {
                const double g = barrier->values[k] - u.values[k];
                if (g < gap) {
                    gap = g;
                    where = k;
                }
            }
            smp.barrier_gap = gap;
            if (gap < tr.min_barrier_gap) {
                tr.min_barrier_gap = gap;
                tr.closest_x = u.node(where);
            }
            if (-gap > cfg.barrier_tolerance && !tr.first_contact.violated) {
                tr.first_contact = {true, tr.steps, t, u.node(where), -gap};
            }
        }
        return smp;
    };

    tr.history.push_back(observe(0.0, 0.0));
    std::size_t next_snap = 0;
    while (next_snap < cfg.snapshot_times.size() && cfg.snapshot_times[next_snap] <= 0.0) {
        tr.snapshots.push_back({0.0, u});
        ++next_snap;
    }

    Stepper::Forcing fc;
    double t = 0.0;
    const double eps_t = 1e-12 * cfg.T;
    while (t < cfg.T - eps_t) {
        st.forcing(u, fc);
        double dt = std::min(st.suggest_dt(fc), cfg.T - t);
        if (next_snap < cfg.snapshot_times.size()) dt = std::min(dt, cfg.snapshot_times[next_snap] - t);
        dt = std::max(dt, eps_t);
        st.step(u, dt, fc);
        t += dt;
        ++tr.steps;
        const Sample smp = observe(t, dt);
        if (!(smp.sup <= cfg.blowup_bound))
            throw BlowUpError("evolution: sup |u - u0| = " + std::to_string(smp.sup) + " exceeds the bound at t = " +
                              std::to_string(t));
        const bool last = t >= cfg.T - eps_t;
        if (last || tr.steps % cfg.history_stride == 0) tr.history.push_back(smp);
        while (next_snap < cfg.snapshot_times.size() && cfg.snapshot_times[next_snap] <= t + eps_t) {
            tr.snapshots.push_back({t, u});
            ++next_snap;
        }
    }

    // Trailing window.
    const double t0 = (1.0 - cfg.trailing_fraction) * cfg.T;
    std::size_t first = 0;
    while (first + 1 < tr.history.size() && tr.history[first].t < t0 - eps_t) ++first;
    const Sample& a = tr.history[first];
    const Sample& b = tr.history.back();
    if (b.t > a.t) {
        tr.trailing_rate = std::abs(b.sup - a.sup) / (b.t - a.t);
        std::vector<double> ts, ss;
        for (std::size_t i = first; i < tr.history.size(); ++i) {
            ts.push_back(tr.history[i].t);
            ss.push_back(tr.history[i].sup);
        }
        tr.late_slope = fit_line(ts, ss).second;
    }
    tr.pinned = tr.trailing_rate < cfg.pinned_rate;
    if (!barrier) tr.min_barrier_gap = std::numeric_limits<double>::quiet_NaN();
    tr.final_state = std::move(u);
    return tr;
}

void Trajectory::write_csv(std::ostream& os) const {
    os << "t,dt,sup,mean,barrier_gap\n" << std::setprecision(17);
    for (const auto& s : history) os << s.t << ',' << s.dt << ',' << s.sup << ',' << s.mean << ',' << s.barrier_gap << '\n';
}

nlohmann::json Trajectory::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["steps"] = steps;
    j["horizon"] = history.empty() ? 0.0 : history.back().t;
    j["pinned"] = pinned;
    j["trailing_rate"] = trailing_rate;
    j["late_slope"] = late_slope;
    j["final_sup"] = history.empty() ? 0.0 : history.back().sup;
    j["final_mean"] = history.empty() ? 0.0 : history.back().mean;
    j["has_barrier"] = has_barrier;
    if (has_barrier) {
        j["min_barrier_gap"] = min_barrier_gap;
        j["closest_x"] = std::vector<double>(closest_x.begin(), closest_x.end());
        nlohmann::json c;
        c["violated"] = first_contact.violated;
        if (first_contact.violated) {
            c["step"] = first_contact.step;
            c["t"] = first_contact.t;
            c["x"] = std::vector<double>(first_contact.x.begin(), first_contact.x.end());
            c["excess"] = first_contact.excess;
        }
        j["first_contact"] = c;
    }
    std::vector<double> snaps;
    for (const auto& s : snapshots) snaps.push_back(s.t);
    j["snapshot_times"] = snaps;
    return j;
}

EvolutionConfig config_for(const supersolution::Bundle& bundle, double F, double T) {
    EvolutionConfig cfg;
    const auto& spec = bundle.v.spec;
    cfg.n = spec.n;
    cfg.L = bundle.geometry.torus_length;
    cfg.nodes = spec.shape[0];
    cfg.s = bundle.geometry.ledger.params.s;
    cfg.tilt = bundle.U.nu();
    cfg.F = F;
    cfg.T = T;
    return cfg;
}

Trajectory run_pinning_experiment(const supersolution::Bundle& bundle, const EvolutionConfig& cfg,
                                  const grid::GridField& u0) {
    if (u0.spec != bundle.v.spec) throw DomainError("pinning experiment: u0 must live on the barrier grid");
    for (std::size_t k = 0; k < u0.size(); ++k)
        if (!(u0.values[k] < bundle.v.values[k]))
            throw DomainError("pinning experiment: u0 must lie strictly below the barrier");
    const double Fs = bundle.geometry.ledger.F_star;
    if (cfg.F > Fs * (1.0 + 1e-12)) throw DomainError("pinning experiment: F exceeds F*");
    for (int i = 0; i < cfg.n; ++i)
        if (cfg.tilt[i] != bundle.U.nu()[i]) throw DomainError("pinning experiment: tilt differs from the surface");
    return evolve(cfg, &bundle.field, u0, &bundle.v);
}

void SweepResult::write_csv(std::ostream& os) const {
    os << "epsilon,gap_mean,gap_ci,pos_mean,pos_ci\n" << std::setprecision(17);
    for (const auto& p : points)
        os << p.epsilon << ',' << p.gap_mean << ',' << p.gap_ci << ',' << p.pos_mean << ',' << p.pos_ci << '\n';
}

nlohmann::json SweepResult::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["grad_sup0"] = grad_sup0;
    j["fraclap_sup0"] = fraclap_sup0;
    j["scale_identity_error"] = scale_identity_error;
    j["slope"] = slope;
    j["intercept"] = intercept;
    j["intercept_ci"] = intercept_ci;
    j["pos_monotone"] = pos_monotone;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points)
        pts.push_back({{"epsilon", p.epsilon},
                       {"gap_mean", p.gap_mean},
                       {"gap_ci", p.gap_ci},
                       {"pos_mean", p.pos_mean},
                       {"pos_ci", p.pos_ci},
                       {"grad_sup", p.grad_sup},
                       {"fraclap_sup", p.fraclap_sup},
                       {"unit_horizon", p.unit_horizon},
                       {"barrier_ok", p.barrier_ok}});
    j["points"] = pts;
    return j;
}

SweepResult homogenization_sweep(const SweepConfig& cfg, std::uint64_t seed) {
    const auto& P = cfg.pipeline.params;
    if (std::abs(P.s - 0.5) > 1e-12) throw DomainError("homogenization sweep: requires s = 1/2");
    if (cfg.epsilons.empty()) throw DomainError("homogenization sweep: no epsilons");
    if (cfg.replicates < 2 || cfg.points < 1) throw DomainError("homogenization sweep: need replicates >= 2 and points >= 1");
    const double eps_min = *std::min_element(cfg.epsilons.begin(), cfg.epsilons.end());
    if (!(eps_min > 0.0)) throw DomainError("homogenization sweep: epsilons must be positive");
    for (double e : cfg.epsilons) {
        const double ratio = e / eps_min;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
            throw DomainError("homogenization sweep: every epsilon must be an integer multiple of the smallest");
    }
    const int n = P.n;

    // u0^{eps_min} on the unit torus, then u0 in original coordinates.
    const auto base = supersolution::with_torus_surface(cfg.pipeline, cfg.tilt, cfg.modes);
    const auto geo0 = supersolution::make_geometry(base);
    const double L = geo0.torus_length;
    const auto u0 = base.surface.rescaled(1.0 / eps_min);
    const double F = cfg.F >= 0.0 ? cfg.F : geo0.ledger.F_star;

    SweepResult res;
    res.grad_sup0 = u0.grad_sup();
    res.fraclap_sup0 = u0.fraclap_sup();

    std::vector<Coord> xs(static_cast<std::size_t>(cfg.points));
    auto prng = make_rng(seed, Stage::Homogenization, std::uint64_t{1} << 40);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& x : xs)
        for (int i = 0; i < n; ++i) x[i] = eps_min * L * unit(prng);

    const std::size_t E = cfg.epsilons.size();
    const auto R = static_cast<std::size_t>(cfg.replicates);
    std::vector<std::vector<double>> gap(E, std::vector<double>(R)), pos(E, std::vector<double>(R));
    std::vector<char> ok(E * R, 1);

    for (std::size_t e = 0; e < E; ++e) {
        const double eps = cfg.epsilons[e];
        auto pc = cfg.pipeline;
        pc.surface = u0.rescaled(eps);
        SweepPoint pt;
        pt.epsilon = eps;
        pt.grad_sup = pc.surface.grad_sup();
        pt.fraclap_sup = pc.surface.fraclap_sup();
        pt.unit_horizon = cfg.T / eps;
        res.scale_identity_error = std::max({res.scale_identity_error, std::abs(pt.grad_sup - res.grad_sup0),
                                             std::abs(pt.fraclap_sup - res.fraclap_sup0)});
        res.points.push_back(pt);

        for (std::size_t r = 0; r < R; ++r) {
            const auto b = supersolution::build_bundle(pc, stream_seed(seed, static_cast<std::uint64_t>(Stage::Homogenization), r));
            auto ec = config_for(b, F, cfg.T / eps);
            ec.scheme = cfg.scheme;
            ec.history_stride = 64;
            const auto tr = evolve(ec, &b.field, b.U_grid, &b.v);
            ok[e * R + r] = !tr.first_contact.violated;

            // Map back to original coordinates: spacing * eps, heights * eps, periodic parts only.
            grid::GridField gap_map(b.v.spec), pos_map(b.v.spec);
            for (int i = 0; i < n; ++i) {
                gap_map.spec.spacing[i] *= eps;
                pos_map.spec.spacing[i] *= eps;
            }
            for (std::size_t k = 0; k < b.v.size(); ++k) {
                gap_map.values[k] = eps * (b.v.values[k] - b.U_grid.values[k]);
                pos_map.values[k] = eps * (tr.final_state.values[k] - b.U_grid.values[k]);
            }
            double g = 0.0, p = 0.0;
            for (const auto& x : xs) {
                const std::span<const double> xv(x.data(), static_cast<std::size_t>(n));
                g += gap_map.interpolate(xv);
                p += std::max(0.0, pos_map.interpolate(xv));
            }
            gap[e][r] = g / static_cast<double>(xs.size());
            pos[e][r] = p / static_cast<double>(xs.size());
        }
    }

    std::vector<double> le, lg, ev, gv;
    for (std::size_t e = 0; e < E; ++e) {
        auto& pt = res.points[e];
        const auto g = mean_ci(gap[e]);
        const auto p = mean_ci(pos[e]);
        pt.gap_mean = g.mean;
        pt.gap_ci = g.ci;
        pt.pos_mean = p.mean;
        pt.pos_ci = p.ci;
        for (std::size_t r = 0; r < R; ++r) pt.barrier_ok = pt.barrier_ok && ok[e * R + r];
        le.push_back(std::log(pt.epsilon));
        lg.push_back(std::log(pt.gap_mean));
        ev.push_back(pt.epsilon);
    }
    res.slope = E > 1 ? fit_line(le, lg).second : 0.0;

    // Intercept per replicate, then its mean and spread.
    std::vector<double> icpt(R);
    for (std::size_t r = 0; r < R; ++r) {
        gv.clear();
        for (std::size_t e = 0; e < E; ++e) gv.push_back(gap[e][r]);
        icpt[r] = E > 1 ? fit_line(ev, gv).first : gv[0];
    }
    const auto ic = mean_ci(icpt);
    res.intercept = ic.mean;
    res.intercept_ci = ic.ci;

    std::vector<std::size_t> order(E);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return res.points[a].epsilon > res.points[b].epsilon; });
    res.pos_monotone = true;
    for (std::size_t i = 1; i < E; ++i)
        if (res.points[order[i]].pos_mean > res.points[order[i - 1]].pos_mean) res.pos_monotone = false;
    return res;
}

}  // namespace pinning::evolution
