//==============================================================================
// paraproduct.hpp
// Bony decomposition fg = f<g + f>g + f o g on the torus, the time-mollified
// paraproduct f << g, and the commutators used by the paracontrolled solver.
//
// All products are dealiased; each is formed by summing padded physical block
// products and transforming once.
//==============================================================================
#pragma once

#include <vector>

#include "frb/besov.hpp"
#include "frb/time_path.hpp"

namespace frb {

/// Delta_j f on the padded physical grid for every block j = -1..j_max.
class BlockFields {
public:
    explicit BlockFields(const SpectralField& f);

    const TorusGrid& grid() const noexcept { return grid_; }
    int j_max() const noexcept { return j_max_; }
    const std::vector<double>& block(int j) const { return blocks_[static_cast<std::size_t>(j + 1)]; }

private:
    TorusGrid grid_;
    int j_max_;
    std::vector<std::vector<double>> blocks_;
};

/// f < g = sum_{j>=1} S_{j-1}f Delta_j g.
SpectralField para_less(const SpectralField& f, const SpectralField& g);
SpectralField para_less(const BlockFields& f, const BlockFields& g);
/// f o g = sum_{|i-j|<=1} Delta_i f Delta_j g.
SpectralField resonant(const SpectralField& f, const SpectralField& g);
SpectralField resonant(const BlockFields& f, const BlockFields& g);

/// C(f, g, h) = (f < g) o h - f (g o h).
SpectralField commutator_resonant(const SpectralField& f, const SpectralField& g, const SpectralField& h);

/// Mass-one kernel family K_i(tau) = 2^{gamma i} phi(2^{gamma i} tau), phi the
/// polynomial bump (15/4)(1 - s^2)^2, s = 4(t - 1/2), supported on [1/4, 3/4].
struct TemporalMollifier {
    double gamma = 2.0;

    static double profile(double t);
    /// Trapezoidal mass of phi on n_nodes uniform nodes over [0, 1].
    static double profile_mass(int n_nodes);
    double scale(int i) const;
    /// Block i is mollified when its window 2^{-gamma i} spans at least 4 steps.
    bool resolves(int i, double dt) const { return scale(i) >= 4.0 * dt; }
    /// Weights w_m for the lags m*dt, m = 0..size()-1, normalized to sum 1.
    std::vector<double> weights(int i, double dt) const;
};

/// (f << g)(t) = sum_i (Q_i S_{i-1} f)(t) Delta_i g(t), where Q_i convolves in time
/// against K_i with f clamped to f(t_0) before the first time. Unresolved blocks
/// fall back to S_{i-1} f(t).
TimePath modified_para(const TimePath& f, const TimePath& g, const TemporalMollifier& moll);

/// Discrete heat operator (F_{n+1} - F_n)/dt + |k|^gamma F_n, n = 0..size()-2.
TimePath discrete_heat_operator(const TimePath& F, double gamma);

/// L(f << g) - f << (L g), both with the discrete operator; one time shorter than the inputs.
TimePath commutator_heat(const TimePath& f, const TimePath& g, const TemporalMollifier& moll);

}  // namespace frb
