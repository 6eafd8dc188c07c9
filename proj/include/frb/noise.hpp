//==============================================================================
// noise.hpp
// Space-time white noise on the torus and the per-mode Ornstein-Uhlenbeck
// stochastic convolution X(t) = int_0^t P(t-s) xi(s) ds.
//
// Convention: with c_k = (1/N) sum_j u(x_j) e^{-ikx_j}, white noise satisfies
// E[xi_k(t) xi_{-k}(s)] = delta(t-s)/(2pi), so the stationary variance of mode
// k is 1/(4pi|k|^gamma). Multiplying by (2pi)^2 gives |T|/(2|k|^gamma), the same
// quantity for the unnormalized transform.
//==============================================================================
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "frb/rng.hpp"
#include "frb/time_path.hpp"

namespace frb {

inline constexpr const char* kFourierConvention = "c_k=(1/N)sum_j u(x_j)exp(-ikx_j); E[xi_k xi_-k]=delta/(2pi)";
inline constexpr double kCovarianceConversion = 4.0 * std::numbers::pi * std::numbers::pi;
inline constexpr const char* kSubSeedScheme = "philox4x32-10;key=seed;ctr=(k,slot,path_lo,path_hi);slot0=init,slot(n+1)=step n";

enum class NoiseVariant { White, Mollified, BandLimited, Roughened };

std::string to_string(NoiseVariant v);
NoiseVariant noise_variant_from_string(const std::string& s);

struct NoiseConfig {
    double gamma = 2.0;
    std::uint64_t seed = 0;
    double dt = 1e-3;
    int n_steps = 1000;
    TorusGrid grid{64};
    NoiseVariant variant = NoiseVariant::White;
    double epsilon = 0.0;  // Mollified
    int n_band = 0;        // BandLimited
    double beta = 0.0;     // Roughened; BandLimited also applies |k|^beta

    /// Throws Error(Config) on violation.
    void validate() const;
    double horizon() const { return dt * n_steps; }
};

/// Mollifier profile for the mollified variant: 1 on |r| <= 3/4, 0 on |r| >= 4/3.
double noise_mollifier(double r);

/// Deterministic multiplier of mode k relative to white noise (0 at k = 0 and Nyquist).
double noise_scale(const NoiseConfig& cfg, int k);

/// sigma^2_stat(k) = 1/(4pi|k|^gamma) for white noise.
double stationary_variance(int k, double gamma);

/// Source of unit complex normals z(k, slot), k >= 1. Slot 0 seeds the stationary
/// initialization, slot n+1 drives time step n.
class IncrementSource {
public:
    virtual ~IncrementSource() = default;
    virtual cplx unit_normal(int k, std::uint64_t slot) const = 0;
};

class PhiloxSource final : public IncrementSource {
public:
    PhiloxSource(std::uint64_t seed, std::uint64_t path_index);
    cplx unit_normal(int k, std::uint64_t slot) const override;

private:
    PhiloxKey key_;
    std::uint32_t path_lo_, path_hi_;
};

/// Degenerate source: every draw is 0.
class ZeroSource final : public IncrementSource {
public:
    cplx unit_normal(int, std::uint64_t) const override { return 0.0; }
};

/// Time-integrated noise increments int_{t_n}^{t_{n+1}} xi_k dt of one path.
class NoisePath {
public:
    NoisePath(NoiseConfig cfg, std::shared_ptr<const IncrementSource> source);

    const NoiseConfig& config() const noexcept { return cfg_; }
    const IncrementSource& source() const noexcept { return *source_; }
    /// Any k with |k| < N/2; increment(step, -k) = conj(increment(step, k)).
    cplx increment(int step, int k) const;
    SpectralField increment_field(int step) const;

private:
    NoiseConfig cfg_;
    std::shared_ptr<const IncrementSource> source_;
};

NoisePath sample_noise(const NoiseConfig& cfg, std::uint64_t path_index = 0);

/// Exact OU transition over dt for mode k != 0 driven by the unit normal z:
/// e^{-|k|^gamma dt} x + sqrt((1 - e^{-2|k|^gamma dt}) sigma^2_stat(k)) * scale * z.
cplx ou_step(cplx x, int k, double gamma, double dt, cplx z, double scale = 1.0);

struct OUPath {
    TimePath X;                // X(0) = 0
    std::optional<TimePath> Y; // stationary initialization, same increments as X
    int flagged_jumps = 0;     // steps whose innovation exceeds 10 standard deviations
};

OUPath build_X(const NoisePath& noise, bool with_stationary = false);
OUPath build_X(const NoiseConfig& cfg, std::uint64_t path_index = 0, bool with_stationary = false);

/// Temporal exponent kappa with E||X(t + tau) - X(t)||_{L2} ~ tau^kappa, the mean
/// taken over paths and over all start times t of each path.
struct TemporalFit {
    struct Row {
        double lag = 0.0;
        double mean_increment = 0.0;
    };
    double kappa = 0.0;
    double stderr_kappa = 0.0;
    std::vector<Row> rows;
};
TemporalFit fit_temporal_exponent(std::span<const TimePath> paths, std::span<const int> lag_steps);

/// Predicted temporal exponent min(1/2 - 1/(2 gamma), 1/2) - beta/gamma.
double predicted_temporal_exponent(double gamma, double beta = 0.0);

}  // namespace frb
