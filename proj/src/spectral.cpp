#include "frb/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace frb {

namespace {

// The FFTW planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// Real <-> half-complex transform of one size, with its own aligned buffers.
// Unnormalized: forward computes sum_j x_j e^{-ikx_j}, backward sum_k c_k e^{ikx_j}.
class RealFft {
public:
    explicit RealFft(int n) : n_(n) {
        real_ = fftw_alloc_real(static_cast<std::size_t>(n));
        spec_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        std::lock_guard lock(planner_mutex());
        forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(real_);
        fftw_free(spec_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* real() { return real_; }
    cplx* spec() { return reinterpret_cast<cplx*>(spec_); }
    void forward() { fftw_execute(forward_); }
    void backward() { fftw_execute(backward_); }
    int size() const { return n_; }

private:
    int n_;
    double* real_;
    fftw_complex* spec_;
    fftw_plan forward_;
    fftw_plan backward_;
};

RealFft& fft_for(int n) {
    thread_local std::map<int, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

//------------------------------------------------------------------------------
// TorusGrid / SpectralField
//------------------------------------------------------------------------------
TorusGrid::TorusGrid(int n_modes) : n_(n_modes) {
    require(n_modes >= 8 && is_power_of_two(n_modes), ErrorKind::Domain,
            "TorusGrid: n_modes must be a power of two >= 8, got " + std::to_string(n_modes));
}

SpectralField::SpectralField(TorusGrid grid)
    : grid_(grid), c_(static_cast<std::size_t>(grid.nyquist() + 1), cplx(0.0)) {}

SpectralField::SpectralField(TorusGrid grid, std::vector<cplx> half_spectrum)
    : grid_(grid), c_(std::move(half_spectrum)) {
    require(c_.size() == static_cast<std::size_t>(grid.nyquist() + 1), ErrorKind::Dimension,
            "SpectralField: half spectrum must have N/2+1 entries");
    c_.front() = c_.front().real();
    c_.back() = c_.back().real();
}

cplx SpectralField::coeff(int k) const {
    const int nyq = grid_.nyquist();
    require(k >= -nyq && k <= nyq, ErrorKind::OutOfRange,
            "SpectralField::coeff: wavenumber " + std::to_string(k) + " outside grid");
    return k >= 0 ? c_[static_cast<std::size_t>(k)] : std::conj(c_[static_cast<std::size_t>(-k)]);
}

void SpectralField::set_coeff(int k, cplx value) {
    const int nyq = grid_.nyquist();
    require(k >= -nyq && k <= nyq, ErrorKind::OutOfRange,
            "SpectralField::set_coeff: wavenumber " + std::to_string(k) + " outside grid");
    if (k < 0) {
        k = -k;
        value = std::conj(value);
    }
    if (k == 0 || k == nyq) value = value.real();
    c_[static_cast<std::size_t>(k)] = value;
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    require_same_grid(*this, o, "operator+=");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    require_same_grid(*this, o, "operator-=");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    for (auto& c : c_) c *= s;
    return *this;
}

void SpectralField::axpy(double s, const SpectralField& b) {
    require_same_grid(*this, b, "axpy");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * b.c_[i];
}

void require_same_grid(const SpectralField& a, const SpectralField& b, const char* where) {
    require(a.grid() == b.grid(), ErrorKind::Dimension,
            std::string(where) + ": fields live on different grids (" +
                std::to_string(a.n_modes()) + " vs " + std::to_string(b.n_modes()) + ")");
}

//------------------------------------------------------------------------------
// Transforms
//------------------------------------------------------------------------------
SpectralField to_spectral(TorusGrid grid, std::span<const double> samples) {
    const int n = grid.n_modes();
    require(samples.size() == static_cast<std::size_t>(n), ErrorKind::Dimension,
            "to_spectral: expected " + std::to_string(n) + " samples, got " +
                std::to_string(samples.size()));
    auto& fft = fft_for(n);
    std::copy(samples.begin(), samples.end(), fft.real());
    fft.forward();
    std::vector<cplx> half(fft.spec(), fft.spec() + n / 2 + 1);
    for (auto& c : half) c /= static_cast<double>(n);
    return SpectralField(grid, std::move(half));
}

std::vector<double> to_physical(const SpectralField& f) { return to_physical(f, f.n_modes()); }

std::vector<double> to_physical(const SpectralField& f, int n_points) {
    const int n = f.n_modes();
    require(n_points >= n, ErrorKind::Dimension, "to_physical: n_points must be >= N");
    auto& fft = fft_for(n_points);
    cplx* spec = fft.spec();
    std::fill(spec, spec + n_points / 2 + 1, cplx(0.0));
    const auto h = f.half();
    for (int k = 0; k < n / 2; ++k) spec[k] = h[static_cast<std::size_t>(k)];
    // On a finer grid the Nyquist term c_{N/2} e^{i N/2 x} becomes a cosine shared by +-N/2.
    spec[n / 2] = (n_points == n) ? h.back() : 0.5 * h.back();
    fft.backward();
    return {fft.real(), fft.real() + n_points};
}

SpectralField derivative(const SpectralField& f) {
    const int nyq = f.grid().nyquist();
    return apply_multiplier(f, [nyq](int k) { return k == nyq ? cplx(0.0) : cplx(0.0, k); });
}

SpectralField frac_laplacian(const SpectralField& f, double gamma) {
    return apply_multiplier(f, [gamma](int k) { return -std::pow(std::abs(k), gamma); });
}

SpectralField truncate(const SpectralField& f, int k_cut) {
    return apply_multiplier(f, [k_cut](int k) { return std::abs(k) <= k_cut ? 1.0 : 0.0; });
}

SpectralField regrid(const SpectralField& f, TorusGrid target) {
    SpectralField out(target);
    const int keep = std::min(f.grid().nyquist(), target.nyquist());
    auto src = f.half();
    auto dst = out.half();
    for (int k = 0; k <= keep; ++k) dst[static_cast<std::size_t>(k)] = src[static_cast<std::size_t>(k)];
    // A Nyquist coefficient is only meaningful on its own grid.
    if (keep == f.grid().nyquist() && keep != target.nyquist()) dst[static_cast<std::size_t>(keep)] *= 0.5;
    if (keep == target.nyquist() && keep != f.grid().nyquist()) dst.back() = 2.0 * dst.back().real();
    return out;
}

int padded_size(const TorusGrid& grid) { return 3 * grid.n_modes() / 2; }

std::vector<double> to_padded_physical(const SpectralField& f) {
    const int m = padded_size(f.grid());
    auto& fft = fft_for(m);
    cplx* spec = fft.spec();
    std::fill(spec, spec + m / 2 + 1, cplx(0.0));
    const auto h = f.half();
    for (int k = 0; k <= f.grid().k_max(); ++k) spec[k] = h[static_cast<std::size_t>(k)];
    fft.backward();
    return {fft.real(), fft.real() + m};
}

SpectralField from_padded_physical(TorusGrid grid, std::span<const double> samples) {
    const int m = padded_size(grid);
    require(samples.size() == static_cast<std::size_t>(m), ErrorKind::Dimension,
            "from_padded_physical: wrong sample count");
    auto& fft = fft_for(m);
    std::copy(samples.begin(), samples.end(), fft.real());
    fft.forward();
    SpectralField out(grid);
    auto dst = out.half();
    const double scale = 1.0 / m;
    for (int k = 0; k <= grid.k_max(); ++k) dst[static_cast<std::size_t>(k)] = fft.spec()[k] * scale;
    dst.front() = dst.front().real();
    return out;
}

SpectralField dealiased_product(const SpectralField& f, const SpectralField& g) {
    require_same_grid(f, g, "dealiased_product");
    auto a = to_padded_physical(f);
    const auto b = to_padded_physical(g);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
    return from_padded_physical(f.grid(), a);
}

//------------------------------------------------------------------------------
// Norms
//------------------------------------------------------------------------------
double inner(const SpectralField& f, const SpectralField& g) {
    require_same_grid(f, g, "inner");
    const auto a = f.half();
    const auto b = g.half();
    const std::size_t last = a.size() - 1;
    double s = a[0].real() * b[0].real() + a[last].real() * b[last].real();
    for (std::size_t k = 1; k < last; ++k) s += 2.0 * (a[k] * std::conj(b[k])).real();
    return kTorusLength * s;
}

double l2_norm_sq(const SpectralField& f) { return inner(f, f); }
double l2_norm(const SpectralField& f) { return std::sqrt(l2_norm_sq(f)); }

double sobolev_norm(const SpectralField& f, double s) {
    const auto a = f.half();
    const std::size_t last = a.size() - 1;
    double sum = std::norm(a[0]) + std::pow(1.0 + double(last * last), s) * std::norm(a[last]);
    for (std::size_t k = 1; k < last; ++k) sum += 2.0 * std::pow(1.0 + double(k * k), s) * std::norm(a[k]);
    return std::sqrt(kTorusLength * sum);
}

double sup_norm(const SpectralField& f) {
    const auto x = to_physical(f, 4 * f.n_modes());
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_coeff(const SpectralField& f) {
    double m = 0.0;
    for (const auto& c : f.half()) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace frb
