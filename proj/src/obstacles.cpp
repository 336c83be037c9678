#include "pinning/obstacles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pinning/errors.hpp"

namespace pinning::obstacles {

double StrengthLaw::sample(std::mt19937_64& rng) const {
    if (kind == Kind::PointMass) return value;
    std::exponential_distribution<double> ex(1.0 / theta);
    return value + ex(rng);
}

double StrengthLaw::tail(double S) const {
    if (kind == Kind::PointMass) return S <= value ? 1.0 : 0.0;
    if (S <= value) return 1.0;
    return std::exp(-(S - value) / theta);
}

double StrengthLaw::mean() const { return kind == Kind::PointMass ? value : value + theta; }

void StrengthLaw::validate() const {
    if (!(value > 0.0) || !std::isfinite(value)) throw DomainError("strength law: value must be positive");
    if (kind == Kind::ShiftedExponential && !(theta > 0.0))
        throw DomainError("strength law: theta must be positive");
}

std::string StrengthLaw::name() const {
    std::ostringstream os;
    if (kind == Kind::PointMass)
        os << "point_mass(" << value << ")";
    else
        os << "shifted_exponential(" << value << ", " << theta << ")";
    return os.str();
}

void ModelParams::validate() const {
    if (n < 2 || n > kMaxDim) throw DomainError("model: n must be 2 or 3");
    if (!(s > 0.0 && s < 1.0)) throw DomainError("model: s must lie in (0, 1)");
    if (!(r0 > 0.0)) throw DomainError("model: r0 must be positive");
    if (!(r1 > std::sqrt(n + 1.0) * r0))
        throw DomainError("model: r1 must exceed sqrt(n+1) r0 so the radial plateau covers the full-strength cube");
    if (!(lambda > 0.0)) throw DomainError("model: lambda must be positive");
    law.validate();
}

Bump::Bump(int n, double r0, double r1) : n_(n), inner_(std::sqrt(n + 1.0) * r0), outer_(r1) {
    if (!(outer_ > inner_)) throw DomainError("bump: r1 must exceed sqrt(n+1) r0");
    double best = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        const double rho = inner_ + (outer_ - inner_) * i / 4000.0;
        best = std::max(best, std::abs(profile_derivative(rho)));
    }
    lipschitz_ = best * 1.01;
}

double Bump::profile(double rho) const {
    if (rho <= inner_) return 1.0;
    if (rho >= outer_) return 0.0;
    const double t = 2.0 * (rho - inner_) / (outer_ - inner_) - 1.0;
    return 1.0 - smooth_step(t).value;
}

double Bump::profile_derivative(double rho) const {
    if (rho <= inner_ || rho >= outer_) return 0.0;
    const double t = 2.0 * (rho - inner_) / (outer_ - inner_) - 1.0;
    return -smooth_step(t).d1 * 2.0 / (outer_ - inner_);
}

double Bump::value(std::span<const double> dx, double dy) const {
    double r2 = dy * dy;
    for (int i = 0; i < n_; ++i) r2 += dx[i] * dx[i];
    if (r2 >= outer_ * outer_) return 0.0;
    return profile(std::sqrt(r2));
}

void Bump::gradient(std::span<const double> dx, double dy, std::span<double> out) const {
    double r2 = dy * dy;
    for (int i = 0; i < n_; ++i) r2 += dx[i] * dx[i];
    const double rho = std::sqrt(r2);
    const double d = rho > 0.0 ? profile_derivative(rho) / rho : 0.0;
    for (int i = 0; i < n_; ++i) out[i] = d * dx[i];
    out[n_] = d * dy;
}

double Box::base_volume() const {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= hi[i] - lo[i];
    return v;
}

bool Box::contains(const Obstacle& o) const {
    for (int i = 0; i < n; ++i)
        if (o.x[i] < lo[i] || o.x[i] > hi[i]) return false;
    return o.y >= y_lo && o.y <= y_hi;
}

ObstacleField::ObstacleField(Bump bump, Box window, std::vector<Obstacle> obstacles,
                             std::optional<Periodicity> periodic)
    : bump_(bump), window_(window), obstacles_(std::move(obstacles)), periodic_(periodic) {
    if (periodic_) {
        for (int i = 0; i < dim(); ++i)
            if (!(periodic_->period[i] >= 3.0 * bump_.support_radius()))
                throw DomainError("obstacle field: period must be at least 3 r1");
        for (Obstacle& o : obstacles_) {
            for (int i = 0; i < dim(); ++i) {
                const double m = std::floor(o.x[i] / periodic_->period[i]);
                o.x[i] -= m * periodic_->period[i];
                o.y -= m * periodic_->shear[i];
            }
        }
    }
    build_index();
}

std::size_t ObstacleField::bucket_of(const std::array<long, kMaxDim>& c) const {
    std::size_t id = 0;
    for (int i = dim() - 1; i >= 0; --i) id = id * counts_[i] + c[i];
    return id;
}

void ObstacleField::build_index() {
    const int n = dim();
    const double r1 = bump_.support_radius();
    for (int i = 0; i < n; ++i) {
        if (periodic_) {
            origin_[i] = 0.0;
            counts_[i] = std::max(3L, static_cast<long>(std::floor(periodic_->period[i] / r1)));
            cell_[i] = periodic_->period[i] / counts_[i];
        } else {
            origin_[i] = window_.lo[i] - r1;
            const double span = window_.hi[i] - window_.lo[i] + 2.0 * r1;
            counts_[i] = std::max(1L, static_cast<long>(std::ceil(span / r1)));
            cell_[i] = span / counts_[i];
        }
    }
    for (int i = n; i < kMaxDim; ++i) counts_[i] = 1;
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= counts_[i];

    std::vector<std::size_t> ids(obstacles_.size());
    std::vector<std::uint32_t> fill(total + 1, 0);
    for (std::size_t k = 0; k < obstacles_.size(); ++k) {
        std::array<long, kMaxDim> c{};
        for (int i = 0; i < n; ++i) {
            c[i] = static_cast<long>(std::floor((obstacles_[k].x[i] - origin_[i]) / cell_[i]));
            c[i] = std::clamp(c[i], 0L, counts_[i] - 1);
        }
        ids[k] = bucket_of(c);
        ++fill[ids[k] + 1];
    }
    for (std::size_t b = 0; b < total; ++b) fill[b + 1] += fill[b];
    bucket_start_ = fill;
    bucket_items_.assign(obstacles_.size(), 0);
    std::vector<std::uint32_t> cursor(fill.begin(), fill.end() - 1);
    for (std::size_t k = 0; k < obstacles_.size(); ++k) bucket_items_[cursor[ids[k]]++] = static_cast<std::uint32_t>(k);
}

double ObstacleField::force(std::span<const double> x, double y) const {
    const int n = dim();
    const double r1 = bump_.support_radius();
    double total = 0.0;
    visit_near(x, [&](const Obstacle& o, const Coord& ix, double iy) {
        const double dy = y - iy;
        if (std::abs(dy) >= r1) return;
        Coord dx{};
        for (int i = 0; i < n; ++i) dx[i] = x[i] - ix[i];
        total += o.f * bump_.value(std::span<const double>(dx.data(), n), dy);
    });
    return total;
}

double ObstacleField::force_dy(std::span<const double> x, double y) const {
    const int n = dim();
    const double r1 = bump_.support_radius();
    double total = 0.0;
    visit_near(x, [&](const Obstacle& o, const Coord& ix, double iy) {
        const double dy = y - iy;
        if (std::abs(dy) >= r1) return;
        double r2 = dy * dy;
        for (int i = 0; i < n; ++i) r2 += (x[i] - ix[i]) * (x[i] - ix[i]);
        const double rho = std::sqrt(r2);
        if (rho <= 0.0) return;
        total += o.f * bump_.profile_derivative(rho) * dy / rho;
    });
    return total;
}

std::pair<double, double> ObstacleField::force_with_dy(std::span<const double> x, double y) const {
    const int n = dim();
    const double r1 = bump_.support_radius();
    const double r1sq = r1 * r1;
    double value = 0.0, slope = 0.0;
    visit_near(x, [&](const Obstacle& o, const Coord& ix, double iy) {
        const double dy = y - iy;
        if (std::abs(dy) >= r1) return;
        double r2 = dy * dy;
        for (int i = 0; i < n; ++i) r2 += (x[i] - ix[i]) * (x[i] - ix[i]);
        if (r2 >= r1sq) return;
        const double rho = std::sqrt(r2);
        value += o.f * bump_.profile(rho);
        if (rho > 0.0) slope += o.f * bump_.profile_derivative(rho) * dy / rho;
    });
    return {value, slope};
}

double ObstacleField::force_brute(std::span<const double> x, double y) const {
    const int n = dim();
    double total = 0.0;
    for (const Obstacle& o : obstacles_) {
        if (!periodic_) {
            Coord dx{};
            for (int i = 0; i < n; ++i) dx[i] = x[i] - o.x[i];
            total += o.f * bump_.value(std::span<const double>(dx.data(), n), y - o.y);
            continue;
        }
        // Every image within two periods along each axis.
        const long span = 2;
        const long combos = n == 2 ? 25 : 125;
        for (long code = 0; code < combos; ++code) {
            long c = code;
            Coord dx{};
            double iy = o.y;
            for (int i = 0; i < n; ++i) {
                const long m = c % 5 - span;
                c /= 5;
                dx[i] = x[i] - (o.x[i] + m * periodic_->period[i]);
                iy += m * periodic_->shear[i];
            }
            total += o.f * bump_.value(std::span<const double>(dx.data(), n), y - iy);
        }
    }
    return total;
}

double ObstacleField::dy_bound() const {
    double worst = 0.0;
    const int n = dim();
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= counts_[i];
    std::vector<double> mass(total, 0.0);
    for (std::size_t b = 0; b < total; ++b)
        for (std::uint32_t it = bucket_start_[b]; it < bucket_start_[b + 1]; ++it)
            mass[b] += obstacles_[bucket_items_[it]].f;
    for (std::size_t b = 0; b < total; ++b) {
        std::array<long, kMaxDim> c{};
        std::size_t rest = b;
        for (int i = 0; i < n; ++i) {
            c[i] = static_cast<long>(rest % counts_[i]);
            rest /= counts_[i];
        }
        Coord centre{};
        for (int i = 0; i < n; ++i) centre[i] = origin_[i] + (c[i] + 0.5) * cell_[i];
        double acc = 0.0;
        visit_near(std::span<const double>(centre.data(), n), [&](const Obstacle& o, const Coord&, double) {
            acc += o.f;
        });
        worst = std::max(worst, acc);
    }
    return worst * bump_.lipschitz();
}

ObstacleField sample_field(const ModelParams& params, const Box& window, std::mt19937_64& rng,
                           std::optional<Periodicity> periodic) {
    params.validate();
    const int n = params.n;
    const double mean = params.lambda * window.volume();
    std::vector<Obstacle> obs;
    if (mean > 0.0) {
        std::poisson_distribution<long long> pois(mean);
        const long long count = pois(rng);
        obs.reserve(static_cast<std::size_t>(count));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (long long k = 0; k < count; ++k) {
            Obstacle o;
            for (int i = 0; i < n; ++i) o.x[i] = window.lo[i] + (window.hi[i] - window.lo[i]) * unit(rng);
            o.y = window.y_lo + (window.y_hi - window.y_lo) * unit(rng);
            obs.push_back(o);
        }
        for (Obstacle& o : obs) o.f = params.law.sample(rng);
    }
    return ObstacleField(Bump(n, params.r0, params.r1), window, std::move(obs), periodic);
}

InitialSurface::InitialSurface(int n, double s, Coord nu, std::vector<Mode> modes, Coord period)
    : n_(n), s_(s), nu_(nu), modes_(std::move(modes)), period_(period) {
    if (n < 1 || n > kMaxDim) throw DomainError("initial surface: unsupported dimension");
    if (!modes_.empty())
        for (int i = 0; i < n; ++i)
            if (!(period_[i] > 0.0)) throw DomainError("initial surface: modes need a positive period box");
    compute_sups();
}

InitialSurface InitialSurface::flat(int n, double s, Coord nu) { return InitialSurface(n, s, nu, {}, Coord{}); }

double InitialSurface::residual(std::span<const double> x) const {
    double r = 0.0;
    for (const Mode& m : modes_) {
        double phase = 0.0;
        for (int i = 0; i < n_; ++i) phase += m.k[i] * x[i];
        r += m.a * std::cos(phase) + m.b * std::sin(phase);
    }
    return r;
}

double InitialSurface::value(std::span<const double> x) const {
    double v = residual(x);
    for (int i = 0; i < n_; ++i) v += nu_[i] * x[i];
    return v;
}

void InitialSurface::gradient(std::span<const double> x, std::span<double> out) const {
    for (int i = 0; i < n_; ++i) out[i] = nu_[i];
    for (const Mode& m : modes_) {
        double phase = 0.0;
        for (int i = 0; i < n_; ++i) phase += m.k[i] * x[i];
        const double d = -m.a * std::sin(phase) + m.b * std::cos(phase);
        for (int i = 0; i < n_; ++i) out[i] += m.k[i] * d;
    }
}

double InitialSurface::laplacian(std::span<const double> x) const {
    double lap = 0.0;
    for (const Mode& m : modes_) {
        double phase = 0.0;
        double k2 = 0.0;
        for (int i = 0; i < n_; ++i) {
            phase += m.k[i] * x[i];
            k2 += m.k[i] * m.k[i];
        }
        lap -= k2 * (m.a * std::cos(phase) + m.b * std::sin(phase));
    }
    return lap;
}

double InitialSurface::fraclap(std::span<const double> x) const {
    double out = 0.0;
    for (const Mode& m : modes_) {
        double phase = 0.0;
        double k2 = 0.0;
        for (int i = 0; i < n_; ++i) {
            phase += m.k[i] * x[i];
            k2 += m.k[i] * m.k[i];
        }
        out += std::pow(k2, s_) * (m.a * std::cos(phase) + m.b * std::sin(phase));
    }
    return out;
}

void InitialSurface::compute_sups() {
    if (modes_.empty()) {
        double g = 0.0;
        for (int i = 0; i < n_; ++i) g += nu_[i] * nu_[i];
        grad_sup_ = std::sqrt(g);
        fraclap_sup_ = 0.0;
        return;
    }
    // Dense sampling over one period, resolving the fastest mode with >= 32 points.
    double kmax = 0.0;
    for (const Mode& m : modes_)
        for (int i = 0; i < n_; ++i) kmax = std::max(kmax, std::abs(m.k[i]));
    std::array<long, kMaxDim> count{1, 1, 1};
    for (int i = 0; i < n_; ++i) {
        const double waves = kmax * period_[i] / (2.0 * std::numbers::pi);
        count[i] = std::clamp(static_cast<long>(std::ceil(32.0 * std::max(1.0, waves))), 32L, 4096L);
    }
    long total = 1;
    for (int i = 0; i < n_; ++i) total *= count[i];
    double gmax = 0.0;
    double fmax = 0.0;
    Coord x{};
    Coord g{};
    for (long idx = 0; idx < total; ++idx) {
        long rest = idx;
        for (int i = 0; i < n_; ++i) {
            x[i] = period_[i] * static_cast<double>(rest % count[i]) / count[i];
            rest /= count[i];
        }
        std::span<const double> xs(x.data(), n_);
        gradient(xs, std::span<double>(g.data(), n_));
        gmax = std::max(gmax, norm(std::span<const double>(g.data(), n_)));
        fmax = std::max(fmax, std::abs(fraclap(xs)));
    }
    grad_sup_ = 1.01 * gmax;
    fraclap_sup_ = 1.01 * fmax;
}

InitialSurface InitialSurface::rescaled(double eps) const {
    std::vector<Mode> modes = modes_;
    for (Mode& m : modes) {
        for (int i = 0; i < n_; ++i) m.k[i] *= eps;
        m.a /= eps;
        m.b /= eps;
    }
    Coord period = period_;
    for (int i = 0; i < n_; ++i) period[i] /= eps;
    return InitialSurface(n_, s_, nu_, std::move(modes), period);
}

InitialSurface InitialSurface::with_amplitude(double factor) const {
    std::vector<Mode> modes = modes_;
    for (Mode& m : modes) {
        m.a *= factor;
        m.b *= factor;
    }
    return InitialSurface(n_, s_, nu_, std::move(modes), period_);
}

std::pair<Coord, double> transform_U(std::span<const double> x, double y, const InitialSurface& surf,
                                     bool inverse) {
    Coord out{};
    for (int i = 0; i < surf.dim(); ++i) out[i] = x[i];
    const double u = surf.value(x);
    return {out, inverse ? y - u : y + u};
}

double admissible_height_margin(const InitialSurface& surf, double r0) {
    if (surf.grad_sup() >= 1.0)
        throw DegenerateSurfaceError("||grad U|| >= 1: the flattened obstacles lose their full-strength core");
    return (1.0 - surf.grad_sup()) * r0;
}

void Decomposition::validate() const {
    if (!(l > 2.0 * r1)) throw DomainError("decomposition: need l > 2 r1");
    if (!(d > 0.0)) throw DomainError("decomposition: need d > 0");
    if (!(h > 0.0)) throw DomainError("decomposition: need h > 0");
}

LatticeIndex Decomposition::nearest(std::span<const double> x) const {
    LatticeIndex a{};
    for (int i = 0; i < n; ++i) a[i] = static_cast<long>(std::floor(x[i] / pitch() + 0.5));
    return a;
}

std::optional<LatticeIndex> Decomposition::cell_of(std::span<const double> x) const {
    const LatticeIndex a = nearest(x);
    for (int i = 0; i < n; ++i)
        if (std::abs(x[i] - centre(a[i])) >= 0.5 * l) return std::nullopt;
    return a;
}

bool Decomposition::in_core(std::span<const double> x, const LatticeIndex& a) const {
    for (int i = 0; i < n; ++i)
        if (std::abs(x[i] - centre(a[i])) > 0.5 * l - r1) return false;
    return true;
}

long Decomposition::level_of(double y) const {
    if (y < r1) return 0;
    return static_cast<long>(std::floor((y - r1) / h)) + 1;
}

double Decomposition::cuboid_volume() const { return std::pow(l - 2.0 * r1, n) * h; }

}  // namespace pinning::obstacles
