#include "pinning/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "pinning/errors.hpp"
#include "pinning/fraclap.hpp"
#include "pinning/parallel.hpp"
#include "pinning/quadrature.hpp"

namespace pinning::lifting {

namespace {

constexpr int kKnots = 4096;

double raw_bump(double t) {
    if (t <= -1.0 || t >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - t * t));
}

double raw_bump_derivative(double t) {
    if (t <= -1.0 || t >= 1.0) return 0.0;
    const double a = 1.0 - t * t;
    return raw_bump(t) * (-2.0 * t / (a * a));
}

}  // namespace

Mollifier::Mollifier() {
    step_ = 2.0 / kKnots;
    table_.assign(kKnots + 1, 0.0);
    for (int k = 0; k < kKnots; ++k) {
        const double a = -1.0 + k * step_;
        table_[k + 1] = table_[k] + quad::panel(raw_bump, a, a + step_).value;
    }
    norm_ = 1.0 / table_.back();
    for (double& v : table_) v *= norm_;
    table_.back() = 1.0;
    m1_ = norm_ * raw_bump(0.0);
    // |eta'| peaks where d/dt [t / (1-t^2)^2 e^{-1/(1-t^2)}] = 0; a dense scan is enough.
    for (int k = 0; k <= 200000; ++k) {
        const double t = -1.0 + 2.0 * k / 200000.0;
        m2_ = std::max(m2_, std::abs(norm_ * raw_bump_derivative(t)));
    }
    m2_ *= 1.0 + 1e-6;
}

const Mollifier& Mollifier::instance() {
    static const Mollifier m;
    return m;
}

double Mollifier::density(double t) const { return norm_ * raw_bump(t); }
double Mollifier::density_derivative(double t) const { return norm_ * raw_bump_derivative(t); }

double Mollifier::cdf(double t) const {
    if (t <= -1.0) return 0.0;
    if (t >= 1.0) return 1.0;
    // Cubic Hermite on the knot table with the exact density as slope.
    const double u = (t + 1.0) / step_;
    const int k = std::min(kKnots - 1, static_cast<int>(u));
    const double a = -1.0 + k * step_;
    const double x = (t - a) / step_;
    const double y0 = table_[k];
    const double y1 = table_[k + 1];
    const double m0 = density(a) * step_;
    const double m1 = density(a + step_) * step_;
    const double x2 = x * x;
    const double x3 = x2 * x;
    return (2 * x3 - 3 * x2 + 1) * y0 + (x3 - 2 * x2 + x) * m0 + (-2 * x3 + 3 * x2) * y1 + (x3 - x2) * m1;
}

double mollifier_C0(int n) {
    const auto& m = Mollifier::instance();
    const double M1 = m.max_density();
    const double M2 = m.max_density_derivative();
    return 8.0 * n * std::sqrt(n * M2 * M2 + 4.0 * n * (n - 1) * M1 * M1 * M1 * M1);
}

std::vector<std::pair<std::size_t, std::size_t>> LatticeHeights::holder_violations() const {
    std::vector<std::pair<std::size_t, std::size_t>> bad;
    const std::size_t m = window.size();
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const double k = static_cast<double>(window.distance(a, b));
            if (std::abs(Lambda[a] - Lambda[b]) > 2.0 * h * std::pow(k, alpha) * (1.0 + 1e-12)) bad.emplace_back(a, b);
        }
    }
    return bad;
}

void LatticeHeights::validate() const {
    if (Lambda.size() != window.size()) throw DomainError("lattice heights: size does not match window");
    if (!(h > 0.0 && l > 0.0 && d > 0.0)) throw DomainError("lattice heights: h, l, d must be positive");
    const auto bad = holder_violations();
    if (!bad.empty()) {
        std::ostringstream os;
        os << bad.size() << " pairs violate |Lambda(a)-Lambda(b)| <= 2h|a-b|^alpha, e.g.";
        for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 5); ++k)
            os << " (" << bad[k].first << "," << bad[k].second << ")";
        throw HolderViolationError(os.str());
    }
}

LatticeHeights heights_from_surface(const percolation::LatticeSurface& surface, const obstacles::Decomposition& dec,
                                    double depth) {
    LatticeHeights hts;
    hts.window = surface.window;
    hts.l = dec.l;
    hts.d = dec.d;
    hts.h = dec.h;
    hts.alpha = surface.alpha;
    hts.Lambda.resize(surface.window.size());
    for (std::size_t a = 0; a < hts.Lambda.size(); ++a) {
        if (!surface.witness[a].present) throw DomainError("lattice heights: column without witness");
        hts.Lambda[a] = surface.witness[a].y_flat + depth;
    }
    hts.validate();
    return hts;
}

LiftField::LiftField(LatticeHeights heights) : heights_(std::move(heights)) {
    if (heights_.Lambda.size() != heights_.window.size()) throw DomainError("lift: size does not match window");
    eps_ = heights_.d / (2.0 * std::sqrt(static_cast<double>(dim())));
}

LiftField::Axis LiftField::axis(double xi) const {
    const auto& m = Mollifier::instance();
    const double p = heights_.pitch();
    const long c = static_cast<long>(std::floor(xi / p + 0.5));
    Axis ax{{c, c}, {1.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
    const double up = (xi - (c + 0.5) * p) / eps_;    // towards cell c + 1
    const double down = (xi - (c - 0.5) * p) / eps_;  // towards cell c - 1
    if (up > -1.0) {
        ax.cell[1] = c + 1;
        ax.w[1] = m.cdf(up);
        ax.dw[1] = m.density(up) / eps_;
        ax.d2w[1] = m.density_derivative(up) / (eps_ * eps_);
    } else if (down < 1.0) {
        ax.cell[1] = c - 1;
        ax.w[1] = 1.0 - m.cdf(down);
        ax.dw[1] = -m.density(down) / eps_;
        ax.d2w[1] = -m.density_derivative(down) / (eps_ * eps_);
    }
    ax.w[0] = 1.0 - ax.w[1];
    ax.dw[0] = -ax.dw[1];
    ax.d2w[0] = -ax.d2w[1];
    return ax;
}

double LiftField::lambda_at(const std::array<long, kMaxDim>& a) const {
    const auto& w = heights_.window;
    percolation::LatticeIndex idx{};
    for (int i = 0; i < w.n; ++i) {
        idx[i] = a[i];
        if (!w.periodic) idx[i] = std::clamp(idx[i], w.lo[i], w.lo[i] + w.extent[i] - 1);
    }
    return heights_.Lambda[w.flat(idx)];
}

double LiftField::value(std::span<const double> x) const {
    const int n = dim();
    std::array<Axis, kMaxDim> ax{};
    for (int i = 0; i < n; ++i) ax[i] = axis(x[i]);
    double acc = 0.0;
    for (int code = 0; code < (1 << n); ++code) {
        double w = 1.0;
        std::array<long, kMaxDim> a{};
        for (int i = 0; i < n; ++i) {
            const int b = (code >> i) & 1;
            w *= ax[i].w[b];
            a[i] = ax[i].cell[b];
        }
        if (w != 0.0) acc += w * lambda_at(a);
    }
    return acc;
}

void LiftField::gradient(std::span<const double> x, std::span<double> out) const {
    const int n = dim();
    std::array<Axis, kMaxDim> ax{};
    for (int i = 0; i < n; ++i) ax[i] = axis(x[i]);
    for (int j = 0; j < n; ++j) out[j] = 0.0;
    for (int code = 0; code < (1 << n); ++code) {
        std::array<long, kMaxDim> a{};
        for (int i = 0; i < n; ++i) a[i] = ax[i].cell[(code >> i) & 1];
        const double L = lambda_at(a);
        for (int j = 0; j < n; ++j) {
            double w = 1.0;
            for (int i = 0; i < n; ++i) {
                const int b = (code >> i) & 1;
                w *= i == j ? ax[i].dw[b] : ax[i].w[b];
            }
            out[j] += w * L;
        }
    }
}

std::array<std::array<double, kMaxDim>, kMaxDim> LiftField::hessian(std::span<const double> x) const {
    const int n = dim();
    std::array<Axis, kMaxDim> ax{};
    for (int i = 0; i < n; ++i) ax[i] = axis(x[i]);
    std::array<std::array<double, kMaxDim>, kMaxDim> H{};
    for (int code = 0; code < (1 << n); ++code) {
        std::array<long, kMaxDim> a{};
        for (int i = 0; i < n; ++i) a[i] = ax[i].cell[(code >> i) & 1];
        const double L = lambda_at(a);
        for (int p = 0; p < n; ++p) {
            for (int q = p; q < n; ++q) {
                double w = 1.0;
                for (int i = 0; i < n; ++i) {
                    const int b = (code >> i) & 1;
                    if (i == p && i == q) {
                        w *= ax[i].d2w[b];
                    } else if (i == p || i == q) {
                        w *= ax[i].dw[b];
                    } else {
                        w *= ax[i].w[b];
                    }
                }
                H[p][q] += w * L;
            }
        }
    }
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < p; ++q) H[p][q] = H[q][p];
    return H;
}

double LiftField::hessian_frobenius(std::span<const double> x) const {
    const auto H = hessian(x);
    double acc = 0.0;
    for (int p = 0; p < dim(); ++p)
        for (int q = 0; q < dim(); ++q) acc += H[p][q] * H[p][q];
    return std::sqrt(acc);
}

double LiftField::period() const {
    const auto& w = heights_.window;
    if (!w.periodic) return 0.0;
    return static_cast<double>(w.extent[0]) * heights_.pitch();
}

double LiftField::mean_height() const {
    double acc = 0.0;
    for (double v : heights_.Lambda) acc += v;
    return acc / static_cast<double>(heights_.Lambda.size());
}

grid::GridField LiftField::sample(const grid::GridSpec& spec) const {
    grid::GridField g(spec);
    parallel_for(g.size(), [&](std::size_t k) {
        const Coord x = g.node(k);
        g.values[k] = value(std::span<const double>(x.data(), spec.n));
    });
    return g;
}

double bump_transform(double omega) {
    static const std::vector<double> knots = [] {
        const auto& m = Mollifier::instance();
        std::vector<double> v(kKnots / 2);
        for (int j = 0; j < kKnots / 2; ++j) v[j] = m.density(2.0 * j / kKnots);
        return v;
    }();
    const double step = 2.0 / kKnots;
    double acc = 0.5 * knots[0];
    for (std::size_t j = 1; j < knots.size(); ++j) acc += knots[j] * std::cos(omega * step * static_cast<double>(j));
    return 2.0 * step * acc;
}

SeriesResult fraclap_series(const LiftField& lift, double s, long M, double tol) {
    const auto& H = lift.heights();
    const auto& W = H.window;
    const int n = W.n;
    if (!W.periodic) throw DomainError("fraclap series: lift must be periodic");
    for (int i = 1; i < n; ++i)
        if (W.extent[i] != W.extent[0]) throw DomainError("fraclap series: window must be a cube");
    if (M < 4 || M % 2 != 0) throw DomainError("fraclap series: nodes per axis must be even and >= 4");
    const double pi = std::numbers::pi;
    const long N = W.extent[0];
    const double p = H.pitch();
    const double P = static_cast<double>(N) * p;
    const double eps = lift.eps();
    const double dk = 2.0 * pi / P;

    // DFT of the heights with the mean removed; the m = 0 mode carries no |k|^{2s}.
    std::size_t Nn = 1;
    for (int i = 0; i < n; ++i) Nn *= static_cast<std::size_t>(N);
    std::vector<std::complex<double>> lam_hat(Nn);
    double lam_max = 0.0;
    for (std::size_t r = 0; r < Nn; ++r) {
        std::array<long, kMaxDim> rv{};
        std::size_t rem = r;
        for (int i = 0; i < n; ++i) {
            rv[i] = static_cast<long>(rem % static_cast<std::size_t>(N));
            rem /= static_cast<std::size_t>(N);
        }
        std::complex<double> acc = 0.0;
        for (std::size_t a = 0; a < W.size(); ++a) {
            const auto idx = W.index(a);
            double phase = 0.0;
            for (int i = 0; i < n; ++i) phase += static_cast<double>(rv[i] * idx[i]);
            acc += H.Lambda[a] * std::polar(1.0, -2.0 * pi * phase / static_cast<double>(N));
        }
        lam_hat[r] = r == 0 ? 0.0 : acc;
        lam_max = std::max(lam_max, std::abs(lam_hat[r]));
    }

    // One-dimensional factor psi^(k) = 2 sin(k p / 2) / k * eta^(eps k), tabulated until
    // eps k reaches 2000, where |eta^| is far below double precision.
    const long m_big = static_cast<long>(std::ceil(2000.0 / (eps * dk)));
    std::vector<double> psi(m_big + 1);
    psi[0] = p;
    parallel_for(static_cast<std::size_t>(m_big), [&](std::size_t j) {
        const double k = dk * static_cast<double>(j + 1);
        psi[j + 1] = 2.0 * std::sin(0.5 * k * p) / k * bump_transform(eps * k);
    });
    // Tail sums over |m| > M' of |psi| and |k|^{2s} |psi| (both signs).
    std::vector<double> tail_a(m_big + 2, 0.0), tail_b(m_big + 2, 0.0);
    for (long m = m_big; m >= 0; --m) {
        const double a = std::abs(psi[m]);
        const double b = std::pow(dk * static_cast<double>(m), 2.0 * s) * a;
        tail_a[m] = tail_a[m + 1] + (m == 0 ? a : 2.0 * a);
        tail_b[m] = tail_b[m + 1] + (m == 0 ? b : 2.0 * b);
    }
    const double A = tail_a[0];
    const double B = tail_b[0];
    const double scale = lam_max / std::pow(P, n);
    // |k|^{2s} <= n^s sum_i |k_i|^{2s}; a mode outside the box has some |m_j| > m_max.
    auto bound = [&](long mm) {
        const double At = tail_a[mm + 1];
        const double Bt = tail_b[mm + 1];
        const double per_axis = Bt * std::pow(A, n - 1) + (n - 1) * At * B * std::pow(A, std::max(0, n - 2));
        return scale * std::pow(static_cast<double>(n), s) * n * per_axis;
    };
    long m_max = 0;
    while (m_max < m_big && bound(m_max) > tol) ++m_max;

    const grid::GridSpec spec = grid::GridSpec::torus(n, P, M);
    grid::Spectral fft(spec);
    std::vector<std::complex<double>> bins(fft.modes(), 0.0);
    const long half = M / 2 + 1;
    auto bin_index = [&](const std::array<long, kMaxDim>& r) {
        std::size_t idx = 0;
        for (int i = 0; i < n; ++i) idx = idx * static_cast<std::size_t>(i == n - 1 ? half : M) + r[i];
        return idx;
    };
    auto wrap = [](long m, long L) { return ((m % L) + L) % L; };
    const double norm = static_cast<double>(spec.size()) / std::pow(P, n);
    const long residues0 = n == 1 ? half : M;
    parallel_for(static_cast<std::size_t>(residues0), [&](std::size_t r0) {
        std::array<long, kMaxDim> m{};
        std::array<long, kMaxDim> r{};
        long first = -m_max + wrap(static_cast<long>(r0) + m_max, M);
        for (m[0] = first; m[0] <= m_max; m[0] += M) {
            for (int i = 1; i < n; ++i) m[i] = -m_max;
            while (true) {
                bool keep = true;
                for (int i = 0; i < n; ++i) {
                    r[i] = wrap(m[i], M);
                    if (i == n - 1 && r[i] >= half) keep = false;
                }
                if (keep) {
                    double k2 = 0.0;
                    double prod = 1.0;
                    std::array<long, kMaxDim> rl{};
                    for (int i = 0; i < n; ++i) {
                        const double k = dk * static_cast<double>(m[i]);
                        k2 += k * k;
                        prod *= psi[std::abs(m[i])];
                        rl[i] = wrap(m[i], N);
                    }
                    if (k2 > 0.0 && prod != 0.0) {
                        std::size_t li = 0;
                        for (int i = n - 1; i >= 0; --i) li = li * static_cast<std::size_t>(N) + rl[i];
                        bins[bin_index(r)] += norm * std::pow(k2, s) * prod * lam_hat[li];
                    }
                }
                int i = n - 1;
                while (i >= 1 && ++m[i] > m_max) m[i--] = -m_max;
                if (i < 1) break;
            }
        }
    });
    SeriesResult out;
    out.values = grid::GridField(spec);
    fft.backward(bins, out.values.values);
    out.truncation = bound(m_max);
    out.m_max = m_max;
    return out;
}

LiftConstants lift_constants(int n, double s, double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0 * s)) throw DomainError("lift constants need 0 < alpha < 2s");
    LiftConstants c;
    c.C = fraclap_constant(n, s);
    c.C0 = mollifier_C0(n);
    const double surf = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
    c.C1 = c.C * c.C0 * surf * std::pow(1.5 * std::sqrt(static_cast<double>(n)), 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    c.C2 = c.C * 8.0 * (n + 1) * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n) *
           std::pow(1.5, alpha - 2.0 * s) / (2.0 * s - alpha);
    return c;
}

double lift_fraclap_bound(const LiftConstants& c, double s, double l, double d, double h) {
    return c.C1 * std::pow(d + l, 2.0 - 2.0 * s) * h / (d * d) + c.C2 * h / std::pow(d + l, 2.0 * s);
}

std::string LiftReport::describe() const {
    std::ostringstream os;
    os << "hessian " << hessian_sup << " <= " << hessian_bound << (hessian_ok ? " ok" : " FAIL") << "; fraclap "
       << fraclap_sup << " <= " << fraclap_bound << (fraclap_ok ? " ok" : " FAIL") << "; quadrature error "
       << max_quad_error << (quadrature_ok ? " ok" : " FAIL") << " over " << points << " points";
    return os.str();
}

LiftReport verify_lift_bounds(const LiftField& lift, const kernels::FracParams& p,
                              std::span<const Coord> hessian_points, std::span<const Coord> fraclap_points,
                              double rel_tol, long series_nodes) {
    p.validate();
    const auto& H = lift.heights();
    const int n = lift.dim();
    LiftReport rep;
    rep.constants = lift_constants(n, p.s, H.alpha);
    rep.hessian_bound = rep.constants.C0 * H.h / (H.d * H.d);
    rep.fraclap_bound = lift_fraclap_bound(rep.constants, p.s, H.l, H.d, H.h);
    for (const Coord& x : hessian_points)
        rep.hessian_sup = std::max(rep.hessian_sup, lift.hessian_frobenius(std::span<const double>(x.data(), n)));

    if (H.window.periodic) {
        const auto series = fraclap_series(lift, p.s, series_nodes, rel_tol * rep.fraclap_bound);
        rep.fraclap_sup = series.values.sup_abs();
        rep.max_quad_error = series.truncation;
        rep.points = series.values.size();
    } else {
        fraclap::PointField f;
        f.n = n;
        f.value = [&lift](std::span<const double> x) { return lift.value(x); };
        f.laplacian = [&lift, n](std::span<const double> x) {
            const auto Hs = lift.hessian(x);
            double tr = 0.0;
            for (int i = 0; i < n; ++i) tr += Hs[i][i];
            return tr;
        };
        // |u(x+y) - u(x)| <= 4(n+1) h (|y| / (l+d))^alpha away from x.
        const auto far = fraclap::FarField::holder(4.0 * (n + 1) * H.h * std::pow(H.pitch(), -H.alpha), H.alpha);
        fraclap::Options opt;
        opt.rel_tol = rel_tol;
        opt.scale = lift.eps();
        std::vector<fraclap::Result> results(fraclap_points.size());
        parallel_for(fraclap_points.size(), [&](std::size_t k) {
            results[k] = fraclap::evaluate(f, std::span<const double>(fraclap_points[k].data(), n), p.s, far, opt);
        });
        for (const auto& r : results) {
            rep.fraclap_sup = std::max(rep.fraclap_sup, std::abs(r.value));
            rep.max_quad_error = std::max(rep.max_quad_error, r.error());
        }
        rep.points = fraclap_points.size();
    }
    rep.hessian_ok = rep.hessian_sup <= rep.hessian_bound;
    rep.fraclap_ok = rep.fraclap_sup <= rep.fraclap_bound;
    rep.quadrature_ok = rep.max_quad_error < 0.1 * (rep.fraclap_bound - rep.fraclap_sup);
    return rep;
}

}  // namespace pinning::lifting
