#include "pinning/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include "pinning/errors.hpp"

namespace pinning::grid {

namespace {

// FFTW planning is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::array<double, 4> keys_weights(double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0), 0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2)};
}

void check_same_grid(const GridSpec& a, const GridSpec& b) {
    if (!(a == b)) throw DomainError("grid fields live on different grids");
}

}  // namespace

std::size_t GridSpec::size() const {
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(shape[i]);
    return total;
}

void GridSpec::validate() const {
    if (n < 1 || n > kMaxDim) throw DomainError("grid dimension must be 1, 2 or 3");
    for (int i = 0; i < n; ++i) {
        if (shape[i] < 1) throw DomainError("grid shape must be positive");
        if (!(spacing[i] > 0.0) || !std::isfinite(spacing[i])) throw DomainError("grid spacing must be positive");
    }
}

std::string fft_version() { return fftw_version; }

GridSpec GridSpec::torus(int n, double L, long N) {
    GridSpec g;
    g.n = n;
    g.periodic = true;
    for (int i = 0; i < n; ++i) {
        g.shape[i] = N;
        g.spacing[i] = L / static_cast<double>(N);
    }
    g.validate();
    return g;
}

GridField::GridField(GridSpec s, double fill) : spec(s) {
    spec.validate();
    values.assign(spec.size(), fill);
}

Shape GridField::index(std::size_t flat) const {
    Shape idx{0, 0, 0};
    for (int i = spec.n - 1; i >= 0; --i) {
        idx[i] = static_cast<long>(flat % static_cast<std::size_t>(spec.shape[i]));
        flat /= static_cast<std::size_t>(spec.shape[i]);
    }
    return idx;
}

std::size_t GridField::flat(const Shape& idx) const {
    std::size_t f = 0;
    for (int i = 0; i < spec.n; ++i) f = f * static_cast<std::size_t>(spec.shape[i]) + static_cast<std::size_t>(idx[i]);
    return f;
}

Coord GridField::node(std::size_t flat_index) const {
    const Shape idx = index(flat_index);
    Coord x{};
    for (int i = 0; i < spec.n; ++i) x[i] = spec.origin[i] + static_cast<double>(idx[i]) * spec.spacing[i];
    return x;
}

GridField GridField::sample(const GridSpec& spec, const std::function<double(std::span<const double>)>& fn) {
    GridField g(spec);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Coord x = g.node(k);
        g.values[k] = fn(std::span<const double>(x.data(), spec.n));
    }
    return g;
}

double GridField::interpolate(std::span<const double> x) const {
    const int n = spec.n;
    std::array<std::array<long, 4>, kMaxDim> nodes{};
    std::array<std::array<double, 4>, kMaxDim> weights{};
    for (int i = 0; i < n; ++i) {
        const double u = (x[i] - spec.origin[i]) / spec.spacing[i];
        const double base = std::floor(u);
        weights[i] = keys_weights(u - base);
        const long N = spec.shape[i];
        for (int k = 0; k < 4; ++k) {
            long j = static_cast<long>(base) - 1 + k;
            if (spec.periodic) {
                j = ((j % N) + N) % N;
            } else {
                j = std::clamp(j, 0L, N - 1);
            }
            nodes[i][k] = j;
        }
    }
    double acc = 0.0;
    const int total = n == 1 ? 4 : n == 2 ? 16 : 64;
    for (int code = 0; code < total; ++code) {
        int c = code;
        double w = 1.0;
        Shape idx{0, 0, 0};
        for (int i = 0; i < n; ++i) {
            const int k = c % 4;
            c /= 4;
            w *= weights[i][k];
            idx[i] = nodes[i][k];
        }
        acc += w * values[flat(idx)];
    }
    return acc;
}

double GridField::min() const { return *std::min_element(values.begin(), values.end()); }
double GridField::max() const { return *std::max_element(values.begin(), values.end()); }

double GridField::mean() const {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

double GridField::sup_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

GridField& GridField::operator+=(const GridField& other) {
    check_same_grid(spec, other.spec);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += other.values[k];
    return *this;
}

GridField& GridField::operator-=(const GridField& other) {
    check_same_grid(spec, other.spec);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] -= other.values[k];
    return *this;
}

void GridField::write_binary(std::ostream& os) const {
    std::ostringstream head;
    head << std::setprecision(17);
    head << "GRIDFIELD v1\n";
    head << "n " << spec.n << "\n";
    head << "shape";
    for (int i = 0; i < spec.n; ++i) head << ' ' << spec.shape[i];
    head << "\norigin";
    for (int i = 0; i < spec.n; ++i) head << ' ' << spec.origin[i];
    head << "\nspacing";
    for (int i = 0; i < spec.n; ++i) head << ' ' << spec.spacing[i];
    head << "\nperiodic " << (spec.periodic ? 1 : 0) << "\nEND\n";
    const std::string h = head.str();
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        char buf[8];
        std::memcpy(buf, &bits, 8);
        os.write(buf, 8);
    }
}

GridField GridField::read_binary(std::istream& is) {
    std::string line;
    std::getline(is, line);
    if (line != "GRIDFIELD v1") throw ConfigError("not a GRIDFIELD v1 dump");
    GridSpec spec;
    while (std::getline(is, line) && line != "END") {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "n") {
            ls >> spec.n;
        } else if (key == "shape") {
            for (int i = 0; i < spec.n; ++i) ls >> spec.shape[i];
        } else if (key == "origin") {
            for (int i = 0; i < spec.n; ++i) ls >> spec.origin[i];
        } else if (key == "spacing") {
            for (int i = 0; i < spec.n; ++i) ls >> spec.spacing[i];
        } else if (key == "periodic") {
            int p = 0;
            ls >> p;
            spec.periodic = p != 0;
        } else {
            throw ConfigError("unknown GRIDFIELD header key: " + key);
        }
    }
    if (line != "END") throw ConfigError("truncated GRIDFIELD header");
    GridField g(spec);
    for (double& v : g.values) {
        char buf[8];
        if (!is.read(buf, 8)) throw ConfigError("truncated GRIDFIELD data");
        std::uint64_t bits;
        std::memcpy(&bits, buf, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
    }
    return g;
}

void GridField::write_csv(std::ostream& os) const {
    static const char* names[] = {"x1", "x2", "x3"};
    for (int i = 0; i < spec.n; ++i) os << names[i] << ',';
    os << "value\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const Coord x = node(k);
        for (int i = 0; i < spec.n; ++i) os << x[i] << ',';
        os << values[k] << '\n';
    }
}

void GridField::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    write_binary(os);
}

GridField GridField::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path);
    return read_binary(is);
}

Spectral::Spectral(const GridSpec& spec) : spec_(spec) {
    spec_.validate();
    if (!spec_.periodic) throw DomainError("spectral operator needs a periodic grid");
    const int n = spec_.n;
    std::array<int, kMaxDim> dims{};
    for (int i = 0; i < n; ++i) dims[i] = static_cast<int>(spec_.shape[i]);
    real_size_ = spec_.size();
    std::size_t complex_size = 1;
    for (int i = 0; i < n - 1; ++i) complex_size *= static_cast<std::size_t>(dims[i]);
    const int last = dims[n - 1] / 2 + 1;
    complex_size *= static_cast<std::size_t>(last);

    k2_.resize(complex_size);
    for (std::size_t c = 0; c < complex_size; ++c) {
        std::size_t rem = c;
        double acc = 0.0;
        for (int i = n - 1; i >= 0; --i) {
            const long len = i == n - 1 ? last : dims[i];
            long j = static_cast<long>(rem % static_cast<std::size_t>(len));
            rem /= static_cast<std::size_t>(len);
            if (i != n - 1 && j > dims[i] / 2) j -= dims[i];
            const double k = 2.0 * std::numbers::pi * static_cast<double>(j) / spec_.period(i);
            acc += k * k;
        }
        k2_[c] = acc;
    }

    std::lock_guard lock(planner_mutex());
    real_ = fftw_alloc_real(real_size_);
    auto* spec_buf = fftw_alloc_complex(complex_size);
    spectrum_ = spec_buf;
    plan_fwd_ = fftw_plan_dft_r2c(n, dims.data(), real_, spec_buf, FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_c2r(n, dims.data(), spec_buf, real_, FFTW_ESTIMATE);
    if (!plan_fwd_ || !plan_bwd_) throw Error("FFTW planning failed");
}

Spectral::~Spectral() {
    std::lock_guard lock(planner_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    fftw_free(real_);
    fftw_free(spectrum_);
}

void Spectral::forward(std::span<const double> values, std::vector<std::complex<double>>& out) {
    if (values.size() != real_size_) throw DomainError("spectral forward: size mismatch");
    std::copy(values.begin(), values.end(), real_);
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    out.resize(k2_.size());
    auto* buf = static_cast<fftw_complex*>(spectrum_);
    for (std::size_t c = 0; c < k2_.size(); ++c) out[c] = {buf[c][0], buf[c][1]};
}

void Spectral::backward(const std::vector<std::complex<double>>& in, std::span<double> values) {
    if (in.size() != k2_.size() || values.size() != real_size_) throw DomainError("spectral backward: size mismatch");
    auto* buf = static_cast<fftw_complex*>(spectrum_);
    for (std::size_t c = 0; c < k2_.size(); ++c) {
        buf[c][0] = in[c].real();
        buf[c][1] = in[c].imag();
    }
    // c2r destroys its input; the buffer is scratch.
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (std::size_t k = 0; k < real_size_; ++k) values[k] = real_[k] * scale;
}

GridField Spectral::apply(const GridField& f, const std::function<double(double)>& multiplier) {
    check_same_grid(f.spec, spec_);
    std::vector<std::complex<double>> c;
    forward(f.values, c);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= multiplier(k2_[k]);
    GridField out(spec_);
    backward(c, out.values);
    return out;
}

GridField Spectral::fraclap(const GridField& f, double s) {
    return apply(f, [s](double k2) { return k2 == 0.0 ? 0.0 : std::pow(k2, s); });
}

}  // namespace pinning::grid
