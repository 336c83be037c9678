#include "pinning/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pinning/errors.hpp"
#include "pinning/parallel.hpp"
#include "pinning/rng.hpp"

namespace pinning::percolation {

std::size_t Window::size() const {
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(extent[i]);
    return total;
}

LatticeIndex Window::index(std::size_t flat_id) const {
    LatticeIndex a{};
    for (int i = 0; i < n; ++i) {
        a[i] = lo[i] + static_cast<long>(flat_id % extent[i]);
        flat_id /= extent[i];
    }
    return a;
}

std::size_t Window::flat(const LatticeIndex& a) const {
    std::size_t id = 0;
    for (int i = n - 1; i >= 0; --i) {
        long c = a[i] - lo[i];
        if (periodic) c = ((c % extent[i]) + extent[i]) % extent[i];
        id = id * extent[i] + static_cast<std::size_t>(c);
    }
    return id;
}

bool Window::contains(const LatticeIndex& a) const {
    if (periodic) return true;
    for (int i = 0; i < n; ++i)
        if (a[i] < lo[i] || a[i] >= lo[i] + extent[i]) return false;
    return true;
}

long Window::distance(std::size_t a, std::size_t b) const {
    const LatticeIndex ia = index(a);
    const LatticeIndex ib = index(b);
    long d = 0;
    for (int i = 0; i < n; ++i) {
        long di = std::abs(ia[i] - ib[i]);
        if (periodic) di = std::min(di, extent[i] - di);
        d += di;
    }
    return d;
}

Window Window::centred(int n, long half_width, bool periodic) {
    Window w;
    w.n = n;
    w.periodic = periodic;
    for (int i = 0; i < n; ++i) {
        w.lo[i] = -half_width;
        w.extent[i] = 2 * half_width + 1;
    }
    return w;
}

Window Window::torus(int n, long columns) {
    Window w;
    w.n = n;
    w.periodic = true;
    for (int i = 0; i < n; ++i) {
        w.lo[i] = 0;
        w.extent[i] = columns;
    }
    return w;
}

long lipschitz_H(long k, double alpha) {
    if (k <= 0) return 0;
    return static_cast<long>(std::floor(std::pow(static_cast<double>(k), alpha) + 1e-12));
}

double SiteGrid::p_hat() const {
    if (open.empty()) return 0.0;
    std::size_t count = 0;
    for (auto o : open) count += o;
    return static_cast<double>(count) / open.size();
}

double open_probability(double lambda, double h, double l, double r1, int n, double mu_S) {
    return 1.0 - std::exp(-lambda * h * std::pow(l - 2.0 * r1, n) * mu_S);
}

namespace {

// Strongest first, then lowest flattened height, then lexicographic centre.
bool better_witness(const Witness& a, const Witness& b, int n) {
    if (!b.present) return true;
    if (a.f != b.f) return a.f > b.f;
    if (a.y_flat != b.y_flat) return a.y_flat < b.y_flat;
    for (int i = 0; i < n; ++i)
        if (a.x[i] != b.x[i]) return a.x[i] < b.x[i];
    return false;
}

std::vector<long> distance_table(const Window& window, double alpha) {
    const std::size_t m = window.size();
    std::vector<long> H(m * m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) H[a * m + b] = lipschitz_H(window.distance(a, b), alpha);
    return H;
}

std::vector<long> jacobi(const Window& window, long levels, std::span<const std::uint8_t> open,
                         std::span<const long> H, long* sweeps) {
    const std::size_t m = window.size();
    std::vector<long> y(m, 1);
    std::vector<long> next(m);
    long count = 0;
    for (;;) {
        ++count;
        bool changed = false;
        for (std::size_t a = 0; a < m; ++a) {
            long need = y[a];
            const long* row = H.data() + a * m;
            for (std::size_t b = 0; b < m; ++b) need = std::max(need, y[b] - row[b]);
            long j = need;
            while (j <= levels && !open[a * levels + (j - 1)]) ++j;
            if (j > levels) throw NoSurfaceError("no open site below the level cap in some column");
            next[a] = j;
            changed = changed || j != y[a];
        }
        y.swap(next);
        if (!changed) break;
    }
    if (sweeps) *sweeps = count;
    return y;
}

}  // namespace

SiteGrid build_site_grid(const obstacles::ObstacleField& field, const obstacles::Decomposition& dec,
                         const obstacles::InitialSurface& surf, double S, const Window& window, long levels) {
    const int n = window.n;
    if (levels < 1) throw DomainError("site grid: need at least one level");
    if (field.dim() != n || dec.n != n) throw DomainError("site grid: dimension mismatch");
    const double pitch = dec.pitch();
    if (window.periodic) {
        const auto& per = field.periodicity();
        if (!per) throw CoverageError("periodic window needs a periodic obstacle field");
        for (int i = 0; i < n; ++i)
            if (std::abs(per->period[i] - window.extent[i] * pitch) > 1e-9 * pitch)
                throw CoverageError("field period does not match the torus of columns");
    } else {
        const auto& box = field.window();
        for (int i = 0; i < n; ++i) {
            const double need_lo = window.lo[i] * pitch - 0.5 * dec.l + dec.r1;
            const double need_hi = (window.lo[i] + window.extent[i] - 1) * pitch + 0.5 * dec.l - dec.r1;
            if (box.lo[i] > need_lo + 1e-12 || box.hi[i] < need_hi - 1e-12)
                throw CoverageError("obstacle field window does not cover the lattice window");
        }
    }

    SiteGrid grid;
    grid.window = window;
    grid.levels = levels;
    grid.open.assign(window.size() * levels, 0);
    grid.witness.assign(window.size() * levels, Witness{});
    const double top = dec.level_top(levels);
    for (const auto& o : field.obstacles()) {
        if (o.f < S) continue;
        std::span<const double> x(o.x.data(), n);
        obstacles::LatticeIndex a = dec.nearest(x);
        if (!dec.in_core(x, a)) continue;
        if (window.periodic)
            for (int i = 0; i < n; ++i)
                a[i] = window.lo[i] + ((a[i] - window.lo[i]) % window.extent[i] + window.extent[i]) % window.extent[i];
        if (!window.contains(a)) continue;
        const double y_flat = o.y - surf.value(x);
        if (y_flat < dec.r1 || y_flat > top) continue;
        long j = dec.level_of(y_flat);
        if (j > levels) j = levels;  // y_flat == top
        const std::size_t site = window.flat(a) * levels + (j - 1);
        Witness w{true, o.x, o.y, y_flat, o.f};
        if (better_witness(w, grid.witness[site], n)) grid.witness[site] = w;
        grid.open[site] = 1;
    }
    return grid;
}

long LatticeSurface::worst_violation() const {
    long worst = std::numeric_limits<long>::min();
    const std::size_t m = window.size();
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b)
            worst = std::max(worst, std::abs(y[a] - y[b]) - lipschitz_H(window.distance(a, b), alpha));
    return m < 2 ? 0 : worst;
}

std::vector<long> smallest_levels(const Window& window, long levels, std::span<const std::uint8_t> open,
                                  double alpha, long* sweeps) {
    if (open.size() != window.size() * static_cast<std::size_t>(levels))
        throw DomainError("smallest_levels: pattern size mismatch");
    const auto H = distance_table(window, alpha);
    return jacobi(window, levels, open, H, sweeps);
}

LatticeSurface smallest_surface(const SiteGrid& grid, double alpha) {
    LatticeSurface out;
    out.window = grid.window;
    out.alpha = alpha;
    out.y = smallest_levels(grid.window, grid.levels, grid.open, alpha, &out.sweeps);
    out.witness.resize(out.y.size());
    for (std::size_t a = 0; a < out.y.size(); ++a) out.witness[a] = grid.witness[a * grid.levels + (out.y[a] - 1)];
    return out;
}

Interval wilson_interval(long k, long n, double z) {
    if (n <= 0) return {0.0, 1.0};
    const double ph = static_cast<double>(k) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (ph + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

long default_level_cap(double p) {
    const double r = 2.0 * (1.0 - p);
    if (!(r > 0.0)) return 4;
    if (r >= 1.0) return 64;
    return std::max(4L, static_cast<long>(std::ceil(std::log(1e-6) / std::log(r))) + 1);
}

TailReport tail_statistics(double p, double alpha, int n, long half_width, long replicates,
                           std::uint64_t seed, long levels) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("tail_statistics: p must lie in (0, 1]");
    if (replicates < 1) throw DomainError("tail_statistics: need replicates");
    TailReport rep;
    rep.p = p;
    rep.replicates = replicates;
    rep.levels = levels > 0 ? levels : default_level_cap(p);
    rep.regime_warning = p <= 0.5;
    const Window window = Window::centred(n, half_width);
    const auto H = distance_table(window, alpha);
    const std::size_t centre = window.flat(LatticeIndex{});
    const long J = rep.levels;

    std::vector<long> y0(replicates);
    parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t r) {
        auto rng = make_rng(seed, Stage::TailStatistics, r);
        std::bernoulli_distribution site(p);
        std::vector<std::uint8_t> open(window.size() * J);
        for (auto& o : open) o = site(rng) ? 1 : 0;
        try {
            y0[r] = jacobi(window, J, open, H, nullptr)[centre];
        } catch (const NoSurfaceError&) {
            y0[r] = J + 1;
        }
    });

    double total = 0.0;
    for (long v : y0) {
        total += static_cast<double>(v);
        rep.censored += v > J ? 1 : 0;
    }
    rep.mean_y0 = total / replicates;
    for (long m = 0; m <= J; ++m) {
        TailPoint pt;
        pt.m = m;
        pt.count = std::count_if(y0.begin(), y0.end(), [m](long v) { return v > m; });
        pt.p_hat = static_cast<double>(pt.count) / replicates;
        pt.ci = wilson_interval(pt.count, replicates);
        rep.points.push_back(pt);
    }

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    long used = 0;
    for (const auto& pt : rep.points) {
        if (pt.m < 1 || pt.count < 10) continue;
        const double x = static_cast<double>(pt.m);
        const double v = std::log(pt.p_hat);
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
        ++used;
    }
    rep.slope = used >= 2 ? (used * sxy - sx * sy) / (used * sxx - sx * sx) : -std::numeric_limits<double>::infinity();
    const double ratio = 2.0 * (1.0 - p);
    rep.envelope_slope = std::log(ratio);
    if (p > 0.5) {
        for (const auto& pt : rep.points)
            rep.C_fit = std::max(rep.C_fit, pt.p_hat * (2.0 * p - 1.0) / std::pow(ratio, static_cast<double>(pt.m)));
        rep.mean_bound = rep.C_fit / ((2.0 * p - 1.0) * (2.0 * p - 1.0));
    }
    return rep;
}

}  // namespace pinning::percolation
