#pragma once

// Uniformly sampled scalar fields on boxes or tori, their dumps, and the FFT-based
// fractional Laplacian on periodic grids.

#include <array>
#include <complex>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pinning/math.hpp"

namespace pinning::grid {

using Shape = std::array<long, kMaxDim>;

struct GridSpec {
    int n = 2;
    Coord origin{};
    Coord spacing{1.0, 1.0, 1.0};
    Shape shape{1, 1, 1};
    bool periodic = false;

    std::size_t size() const;
    /// Period along axis i (shape[i] * spacing[i]); meaningful when periodic.
    double period(int i) const { return static_cast<double>(shape[i]) * spacing[i]; }
    void validate() const;
    /// Periodic grid with N nodes per axis covering [0, L)^n.
    static GridSpec torus(int n, double L, long N);
    bool operator==(const GridSpec&) const = default;
};

/// Node values in row-major order (last axis fastest).
struct GridField {
    GridSpec spec;
    std::vector<double> values;

    GridField() = default;
    explicit GridField(GridSpec s, double fill = 0.0);

    std::size_t size() const { return values.size(); }
    Shape index(std::size_t flat) const;
    std::size_t flat(const Shape& idx) const;
    Coord node(std::size_t flat) const;

    static GridField sample(const GridSpec& spec, const std::function<double(std::span<const double>)>& fn);

    /// Tensor-product cubic convolution (Keys, a = -1/2). Periodic grids wrap; others
    /// clamp to the boundary nodes.
    double interpolate(std::span<const double> x) const;

    double min() const;
    double max() const;
    double mean() const;
    double sup_abs() const;

    GridField& operator+=(const GridField& other);
    GridField& operator-=(const GridField& other);

    /// Text header "GRIDFIELD v1" with n, shape, origin, spacing, periodic, then "END\n"
    /// followed by the values as little-endian IEEE doubles.
    void write_binary(std::ostream& os) const;
    static GridField read_binary(std::istream& is);
    /// One line per node: coordinates then value.
    void write_csv(std::ostream& os) const;
    void save(const std::string& path) const;
    static GridField load(const std::string& path);
};

/// Version string of the FFT backend.
std::string fft_version();

/// FFT on a periodic grid. Owns its FFTW plans and buffers; one instance per thread.
class Spectral {
public:
    explicit Spectral(const GridSpec& spec);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    const GridSpec& spec() const { return spec_; }
    std::size_t modes() const { return k2_.size(); }
    /// |k|^2 for each stored (half-spectrum) coefficient.
    const std::vector<double>& k2() const { return k2_; }

    /// Unnormalised forward transform into the half spectrum.
    void forward(std::span<const double> values, std::vector<std::complex<double>>& out);
    /// Inverse transform including the 1/N normalisation.
    void backward(const std::vector<std::complex<double>>& in, std::span<double> values);

    /// Multiplies every coefficient by m(|k|^2).
    GridField apply(const GridField& f, const std::function<double(double)>& multiplier);
    /// (-Delta)^s through the multiplier |k|^{2s}.
    GridField fraclap(const GridField& f, double s);

private:
    GridSpec spec_;
    std::size_t real_size_ = 0;
    std::vector<double> k2_;
    double* real_ = nullptr;
    void* spectrum_ = nullptr;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
};

}  // namespace pinning::grid
