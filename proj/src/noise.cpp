#include "frb/noise.hpp"

#include <algorithm>
#include <cmath>

#include "frb/besov.hpp"

namespace frb {

std::string to_string(NoiseVariant v) {
    switch (v) {
        case NoiseVariant::White: return "white";
        case NoiseVariant::Mollified: return "mollified";
        case NoiseVariant::BandLimited: return "band_limited";
        case NoiseVariant::Roughened: return "roughened";
    }
    return "?";
}

NoiseVariant noise_variant_from_string(const std::string& s) {
    if (s == "white") return NoiseVariant::White;
    if (s == "mollified") return NoiseVariant::Mollified;
    if (s == "band_limited") return NoiseVariant::BandLimited;
    if (s == "roughened") return NoiseVariant::Roughened;
    throw Error(ErrorKind::Config, "unknown noise variant '" + s + "'");
}

void NoiseConfig::validate() const {
    require(gamma > 1.0 && gamma <= 2.0, ErrorKind::Config, "noise: gamma must lie in (1, 2]");
    require(dt > 0.0 && std::isfinite(dt), ErrorKind::Config, "noise: dt must be positive");
    require(n_steps >= 1, ErrorKind::Config, "noise: n_steps must be >= 1");
    switch (variant) {
        case NoiseVariant::Mollified:
            require(epsilon > 0.0, ErrorKind::Config, "noise: mollified variant needs epsilon > 0");
            break;
        case NoiseVariant::BandLimited:
            require(n_band >= 2 && n_band < grid.nyquist(), ErrorKind::Config,
                    "noise: band_limited needs 2 <= n_band < N/2");
            require(beta >= 0.0, ErrorKind::Config, "noise: band_limited needs beta >= 0");
            break;
        case NoiseVariant::Roughened:
            require(beta >= 0.0, ErrorKind::Config, "noise: roughened variant needs beta >= 0");
            break;
        case NoiseVariant::White: break;
    }
}

double noise_mollifier(double r) { return lp_cutoff(r); }

double noise_scale(const NoiseConfig& cfg, int k) {
    const int a = std::abs(k);
    if (a == 0 || a >= cfg.grid.nyquist()) return 0.0;
    switch (cfg.variant) {
        case NoiseVariant::White: return 1.0;
        case NoiseVariant::Mollified: return noise_mollifier(cfg.epsilon * a);
        case NoiseVariant::BandLimited:
            return (2 * a >= cfg.n_band && a <= cfg.n_band) ? (cfg.beta == 0.0 ? 1.0 : std::pow(double(a), cfg.beta)) : 0.0;
        case NoiseVariant::Roughened: return std::pow(double(a), cfg.beta);
    }
    return 0.0;
}

double stationary_variance(int k, double gamma) {
    require(k != 0, ErrorKind::Domain, "stationary_variance: k = 0 is projected out");
    return 1.0 / (4.0 * std::numbers::pi * std::pow(std::abs(double(k)), gamma));
}

PhiloxSource::PhiloxSource(std::uint64_t seed, std::uint64_t path_index)
    : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
      path_lo_(std::uint32_t(path_index)),
      path_hi_(std::uint32_t(path_index >> 32)) {}

cplx PhiloxSource::unit_normal(int k, std::uint64_t slot) const {
    require(slot < (std::uint64_t(1) << 32), ErrorKind::OutOfRange, "PhiloxSource: step slot exceeds 2^32");
    return philox_complex_normal({std::uint32_t(k), std::uint32_t(slot), path_lo_, path_hi_}, key_);
}

NoisePath::NoisePath(NoiseConfig cfg, std::shared_ptr<const IncrementSource> source)
    : cfg_(cfg), source_(std::move(source)) {
    cfg_.validate();
    require(source_ != nullptr, ErrorKind::Domain, "NoisePath: null increment source");
}

cplx NoisePath::increment(int step, int k) const {
    require(step >= 0 && step < cfg_.n_steps, ErrorKind::OutOfRange, "NoisePath: step out of range");
    const double s = noise_scale(cfg_, k);
    if (s == 0.0) return 0.0;
    const cplx z = std::sqrt(cfg_.dt / kTorusLength) * s * source_->unit_normal(std::abs(k), std::uint64_t(step) + 1);
    return k > 0 ? z : std::conj(z);
}

SpectralField NoisePath::increment_field(int step) const {
    SpectralField f(cfg_.grid);
    for (int k = 1; k < cfg_.grid.nyquist(); ++k) f.set_coeff(k, increment(step, k));
    return f;
}

NoisePath sample_noise(const NoiseConfig& cfg, std::uint64_t path_index) {
    return NoisePath(cfg, std::make_shared<PhiloxSource>(cfg.seed, path_index));
}

cplx ou_step(cplx x, int k, double gamma, double dt, cplx z, double scale) {
    require(k != 0, ErrorKind::Domain, "ou_step: k = 0 is projected out");
    const double lam = std::pow(std::abs(double(k)), gamma);
    const double var = -std::expm1(-2.0 * lam * dt) * stationary_variance(k, gamma);
    return std::exp(-lam * dt) * x + std::sqrt(var) * scale * z;
}

OUPath build_X(const NoisePath& noise, bool with_stationary) {
    const auto& cfg = noise.config();
    const auto n_times = static_cast<std::size_t>(cfg.n_steps) + 1;
    OUPath out{TimePath(cfg.grid, cfg.dt, n_times), std::nullopt, 0};
    if (with_stationary) out.Y.emplace(cfg.grid, cfg.dt, n_times);

    for (int k = 1; k < cfg.grid.nyquist(); ++k) {
        const double scale = noise_scale(cfg, k);
        if (scale == 0.0) continue;
        const double lam = std::pow(double(k), cfg.gamma);
        const double decay = std::exp(-lam * cfg.dt);
        const double sd = std::sqrt(-std::expm1(-2.0 * lam * cfg.dt) * stationary_variance(k, cfg.gamma)) * scale;
        cplx x = 0.0, y = 0.0;
        if (out.Y) {
            y = std::sqrt(stationary_variance(k, cfg.gamma)) * scale * noise.source().unit_normal(k, 0);
            (*out.Y)[0].half()[static_cast<std::size_t>(k)] = y;
        }
        for (int n = 0; n < cfg.n_steps; ++n) {
            const cplx z = noise.source().unit_normal(k, std::uint64_t(n) + 1);
            if (std::abs(z) > 10.0) ++out.flagged_jumps;
            x = decay * x + sd * z;
            out.X[static_cast<std::size_t>(n) + 1].half()[static_cast<std::size_t>(k)] = x;
            if (out.Y) {
                y = decay * y + sd * z;
                (*out.Y)[static_cast<std::size_t>(n) + 1].half()[static_cast<std::size_t>(k)] = y;
            }
        }
    }
    return out;
}

OUPath build_X(const NoiseConfig& cfg, std::uint64_t path_index, bool with_stationary) {
    return build_X(sample_noise(cfg, path_index), with_stationary);
}

TemporalFit fit_temporal_exponent(std::span<const TimePath> paths, std::span<const int> lag_steps) {
    require(!paths.empty(), ErrorKind::InsufficientData, "fit_temporal_exponent: no paths");
    require(lag_steps.size() >= 3, ErrorKind::InsufficientData, "fit_temporal_exponent: need at least 3 lags");
    TemporalFit out;
    std::vector<double> xs, ys;
    for (int lag : lag_steps) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& p : paths) {
            const auto l = static_cast<std::size_t>(lag);
            require(lag >= 1 && l < p.size(), ErrorKind::InsufficientData,
                    "fit_temporal_exponent: lag " + std::to_string(lag) + " does not fit in the path");
            for (std::size_t n = 0; n + l < p.size(); ++n, ++count) sum += l2_norm(p[n + l] - p[n]);
        }
        const double tau = lag * paths.front().dt();
        out.rows.push_back({tau, sum / double(count)});
        xs.push_back(std::log(tau));
        ys.push_back(std::log(out.rows.back().mean_increment));
    }
    const auto lf = least_squares(xs, ys);
    out.kappa = lf.slope;
    out.stderr_kappa = lf.stderr_slope;
    return out;
}

double predicted_temporal_exponent(double gamma, double beta) {
    return std::min(0.5 - 0.5 / gamma, 0.5) - beta / gamma;
}

}  // namespace frb
