//==============================================================================
// spectral.hpp
// Torus discretization and the spectral representation of real fields.
//
// Convention: u(x) = sum_k c_k e^{ikx} on [0, 2pi), with
//   c_k = (1/|T|) * integral u(x) e^{-ikx} dx   (|T| = 2pi),
// approximated on the uniform grid by c_k = (1/N) sum_j u(x_j) e^{-ik x_j}.
// Only k = 0..N/2 is stored; c_{-k} = conj(c_k) is structural, so every field
// is exactly Hermitian. The Nyquist coefficient c_{N/2} is kept real.
//==============================================================================
#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "frb/error.hpp"

namespace frb {

using cplx = std::complex<double>;

inline constexpr double kTorusLength = 2.0 * std::numbers::pi;

class TorusGrid {
public:
    /// n_modes: physical grid size N, a power of two >= 8.
    explicit TorusGrid(int n_modes);

    int n_modes() const noexcept { return n_; }
    int nyquist() const noexcept { return n_ / 2; }
    /// Largest wavenumber kept by dealiased products.
    int k_max() const noexcept { return n_ / 2 - 1; }
    double length() const noexcept { return kTorusLength; }
    double dx() const noexcept { return kTorusLength / n_; }

    bool operator==(const TorusGrid&) const = default;

private:
    int n_;
};

class SpectralField {
public:
    explicit SpectralField(TorusGrid grid);
    SpectralField(TorusGrid grid, std::vector<cplx> half_spectrum);

    const TorusGrid& grid() const noexcept { return grid_; }
    int n_modes() const noexcept { return grid_.n_modes(); }

    /// Coefficient for any k in [-N/2, N/2]; negative k returns the conjugate.
    cplx coeff(int k) const;
    /// Sets c_k (and implicitly c_{-k}). k = 0 and k = N/2 keep only the real part.
    void set_coeff(int k, cplx value);

    /// Stored half spectrum, index k = 0..N/2.
    std::span<const cplx> half() const noexcept { return c_; }
    std::span<cplx> half() noexcept { return c_; }

    void project_mean_zero() { c_[0] = 0.0; }
    bool is_mean_zero(double tol = 0.0) const { return std::abs(c_[0]) <= tol; }

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double s);

    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
    friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

    /// a += s * b
    void axpy(double s, const SpectralField& b);

private:
    TorusGrid grid_;
    std::vector<cplx> c_;
};

void require_same_grid(const SpectralField& a, const SpectralField& b, const char* where);

/// Samples (one per grid point) to coefficients.
SpectralField to_spectral(TorusGrid grid, std::span<const double> samples);

/// Physical samples on the N-point grid.
std::vector<double> to_physical(const SpectralField& f);

/// Trigonometric interpolant sampled on n_points >= N uniform points
/// (zero-padding; the Nyquist coefficient is split evenly between +-N/2).
std::vector<double> to_physical(const SpectralField& f, int n_points);

/// Multiplies coefficient k by symbol(k) for k = 0..N/2. For a real output the
/// symbol must satisfy symbol(-k) = conj(symbol(k)).
template <typename Symbol>
SpectralField apply_multiplier(const SpectralField& f, Symbol&& symbol) {
    SpectralField out = f;
    auto h = out.half();
    for (int k = 0; k < static_cast<int>(h.size()); ++k) h[k] *= cplx(symbol(k));
    // Nyquist and zero modes must stay real for a real field.
    h.front() = h.front().real();
    h.back() = h.back().real();
    return out;
}

/// d/dx.
SpectralField derivative(const SpectralField& f);

/// Fractional Laplacian Lambda^gamma, symbol -|k|^gamma.
SpectralField frac_laplacian(const SpectralField& f, double gamma);

/// Drops every coefficient with |k| > k_cut.
SpectralField truncate(const SpectralField& f, int k_cut);

/// Moves a field to another grid by zero-padding or truncation of its spectrum.
SpectralField regrid(const SpectralField& f, TorusGrid target);

/// Exact product truncated to |k| <= N/2-1, computed alias-free by
/// zero-padding to 3N/2 points. The inputs' Nyquist coefficients are ignored.
SpectralField dealiased_product(const SpectralField& f, const SpectralField& g);

/// Real L2(T) inner product, integral f g dx.
double inner(const SpectralField& f, const SpectralField& g);

/// ||f||_{L2(T)}^2 = 2pi sum_k |c_k|^2.
double l2_norm_sq(const SpectralField& f);
double l2_norm(const SpectralField& f);

/// Sobolev norm with the Fourier weight (1+k^2)^{s/2}.
double sobolev_norm(const SpectralField& f, double s);

/// Max of |f| over a 4x oversampled grid.
double sup_norm(const SpectralField& f);

/// Max over k of |c_k|; used for tolerance checks.
double max_abs_coeff(const SpectralField& f);

//------------------------------------------------------------------------------
// Padded physical workspace. Shared by the block-wise products of the
// paraproduct module: fields band-limited to |k| <= N/2-1 are evaluated on the
// 3N/2-point grid, multiplied pointwise, and transformed back exactly.
//------------------------------------------------------------------------------
int padded_size(const TorusGrid& grid);

/// Evaluates f (Nyquist dropped) on the padded grid.
std::vector<double> to_padded_physical(const SpectralField& f);

/// Inverse of to_padded_physical for products: transforms samples on the
/// padded grid and keeps |k| <= N/2-1.
SpectralField from_padded_physical(TorusGrid grid, std::span<const double> samples);

}  // namespace frb
