#include "frb/besov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace frb {

namespace {

double mollifier_tail(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }

// Smooth step: 0 for x <= 0, 1 for x >= 1.
double smooth_step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double a = mollifier_tail(x);
    const double b = mollifier_tail(1.0 - x);
    return a / (a + b);
}

constexpr double kInner = 3.0 / 4.0;
constexpr double kOuter = 4.0 / 3.0;
constexpr int kOversample = 4;

}  // namespace

double lp_cutoff(double r) { return smooth_step((kOuter - std::abs(r)) / (kOuter - kInner)); }
double lp_chi(double r) { return lp_cutoff(r); }
double lp_rho(double r) { return lp_cutoff(0.5 * r) - lp_cutoff(r); }

int j_max(const TorusGrid& grid) {
    // Block j starts at 2^j * 3/4; keep the last block that starts below N/2.
    int j = 0;
    while (std::ldexp(kInner, j + 1) < grid.nyquist()) ++j;
    return j;
}

DyadicPartition::DyadicPartition(TorusGrid grid) : grid_(grid), j_max_(frb::j_max(grid)) {
    const int nyq = grid.nyquist();
    w_.assign(static_cast<std::size_t>(block_count()), std::vector<double>(static_cast<std::size_t>(nyq + 1), 0.0));
    lo_.assign(static_cast<std::size_t>(block_count()), 0);
    hi_.assign(static_cast<std::size_t>(block_count()), -1);
    for (int j = -1; j <= j_max_; ++j) {
        auto& w = w_[static_cast<std::size_t>(j + 1)];
        int lo = nyq + 1, hi = -1;
        for (int k = 0; k <= nyq; ++k) {
            w[static_cast<std::size_t>(k)] = (j < 0) ? lp_chi(k) : lp_rho(std::ldexp(double(k), -j));
            if (w[static_cast<std::size_t>(k)] > 0.0) {
                lo = std::min(lo, k);
                hi = std::max(hi, k);
            }
        }
        lo_[static_cast<std::size_t>(j + 1)] = lo;
        hi_[static_cast<std::size_t>(j + 1)] = hi;
    }
}

std::span<const double> DyadicPartition::weights(int j) const {
    require(j >= -1 && j <= j_max_, ErrorKind::OutOfRange,
            "dyadic block " + std::to_string(j) + " outside [-1, " + std::to_string(j_max_) + "]");
    return w_[static_cast<std::size_t>(j + 1)];
}

double DyadicPartition::weight(int j, int k) const { return weights(j)[static_cast<std::size_t>(std::abs(k))]; }
int DyadicPartition::k_lo(int j) const { return (void)weights(j), lo_[static_cast<std::size_t>(j + 1)]; }
int DyadicPartition::k_hi(int j) const { return (void)weights(j), hi_[static_cast<std::size_t>(j + 1)]; }

const DyadicPartition& partition_for(const TorusGrid& grid) {
    static std::mutex m;
    static std::map<int, std::unique_ptr<const DyadicPartition>> cache;
    std::lock_guard lock(m);
    auto& slot = cache[grid.n_modes()];
    if (!slot) slot = std::make_unique<const DyadicPartition>(grid);
    return *slot;
}

SpectralField dyadic_block(const SpectralField& f, int j) {
    const auto w = partition_for(f.grid()).weights(j);
    return apply_multiplier(f, [&](int k) { return w[static_cast<std::size_t>(k)]; });
}

SpectralField low_cutoff(const SpectralField& f, int j) {
    const auto& part = partition_for(f.grid());
    if (j <= -1) return SpectralField(f.grid());
    if (j > part.j_max()) return f;
    std::vector<double> w(static_cast<std::size_t>(f.grid().nyquist() + 1), 0.0);
    for (int i = -1; i <= j - 1; ++i) {
        const auto wi = part.weights(i);
        for (std::size_t k = 0; k < w.size(); ++k) w[k] += wi[k];
    }
    return apply_multiplier(f, [&](int k) { return w[static_cast<std::size_t>(k)]; });
}

//------------------------------------------------------------------------------
// Norms
//------------------------------------------------------------------------------
double block_lp_norm(const SpectralField& f, int j, double p) {
    const auto block = dyadic_block(f, j);
    if (p == 2.0) return l2_norm(block);
    const int m = kOversample * f.n_modes();
    const auto x = to_physical(block, m);
    if (std::isinf(p)) {
        double s = 0.0;
        for (double v : x) s = std::max(s, std::abs(v));
        return s;
    }
    double s = 0.0;
    for (double v : x) s += std::pow(std::abs(v), p);
    return std::pow(kTorusLength * s / m, 1.0 / p);
}

double besov_norm(const SpectralField& f, const BesovSpec& spec) {
    const int jm = j_max(f.grid());
    if (spec.p == Integrability::L2) {
        double s = 0.0;
        for (int j = -1; j <= jm; ++j) {
            const double b = std::pow(2.0, j * spec.s) * block_lp_norm(f, j, 2.0);
            s += b * b;
        }
        return std::sqrt(s);
    }
    double s = 0.0;
    const double inf = std::numeric_limits<double>::infinity();
    for (int j = -1; j <= jm; ++j) s = std::max(s, std::pow(2.0, j * spec.s) * block_lp_norm(f, j, inf));
    return s;
}

double besov_norm_p(const SpectralField& f, double s, double p) {
    const int jm = j_max(f.grid());
    double acc = 0.0;
    for (int j = -1; j <= jm; ++j) acc += std::pow(std::pow(2.0, j * s) * block_lp_norm(f, j, p), p);
    return std::pow(acc, 1.0 / p);
}

double w_norm(const SpectralField& f, double s) {
    return besov_norm(f, {s, Integrability::L2}) + besov_norm(f, {s, Integrability::LInf});
}

//------------------------------------------------------------------------------
// Block statistics and fits
//------------------------------------------------------------------------------
BlockStatistics::BlockStatistics(TorusGrid grid) : grid_(grid) {
    const auto nb = static_cast<std::size_t>(partition_for(grid).block_count());
    l2_sum_.assign(nb, 0.0);
    sq_sum_.assign(nb, std::vector<double>(static_cast<std::size_t>(kOversample * grid.n_modes()), 0.0));
}

void BlockStatistics::add(const SpectralField& f) {
    require(f.grid() == grid_, ErrorKind::Dimension, "BlockStatistics::add: grid mismatch");
    const auto& part = partition_for(grid_);
    for (int j = -1; j <= part.j_max(); ++j) {
        const auto block = dyadic_block(f, j);
        l2_sum_[static_cast<std::size_t>(j + 1)] += l2_norm(block);
        const auto x = to_physical(block, kOversample * grid_.n_modes());
        auto& acc = sq_sum_[static_cast<std::size_t>(j + 1)];
        for (std::size_t i = 0; i < x.size(); ++i) acc[i] += x[i] * x[i];
    }
    ++count_;
}

void BlockStatistics::merge(const BlockStatistics& other) {
    require(other.grid_ == grid_, ErrorKind::Dimension, "BlockStatistics::merge: grid mismatch");
    for (std::size_t b = 0; b < l2_sum_.size(); ++b) {
        l2_sum_[b] += other.l2_sum_[b];
        for (std::size_t i = 0; i < sq_sum_[b].size(); ++i) sq_sum_[b][i] += other.sq_sum_[b][i];
    }
    count_ += other.count_;
}

double BlockStatistics::mean_l2(int j) const {
    (void)partition_for(grid_).weights(j);
    return count_ ? l2_sum_[static_cast<std::size_t>(j + 1)] / double(count_) : 0.0;
}

double BlockStatistics::rms_sup(int j) const {
    (void)partition_for(grid_).weights(j);
    if (!count_) return 0.0;
    const auto& acc = sq_sum_[static_cast<std::size_t>(j + 1)];
    return std::sqrt(*std::max_element(acc.begin(), acc.end()) / double(count_));
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorKind::InsufficientData,
            "least_squares: need at least two points");
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.stderr_slope = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return fit;
}

RegularityFit fit_regularity(const BlockStatistics& stats, Integrability p, JRange range) {
    require(stats.count() > 0, ErrorKind::InsufficientData, "fit_regularity: empty ensemble");
    const int jm = partition_for(stats.grid()).j_max();
    const int hi = range.hi < 0 ? jm - 2 : range.hi;
    require(range.lo >= -1 && hi <= jm - 2, ErrorKind::OutOfRange,
            "fit_regularity: block range must stay below the top two blocks (j <= " + std::to_string(jm - 2) + ")");
    require(hi - range.lo + 1 >= 3, ErrorKind::InsufficientData,
            "fit_regularity: fewer than 3 blocks in range [" + std::to_string(range.lo) + ", " + std::to_string(hi) + "]");

    RegularityFit out;
    out.convention = (p == Integrability::L2) ? "sobolev_block_l2" : "holder_moment_sup";
    std::vector<double> xs, ys;
    for (int j = range.lo; j <= hi; ++j) {
        const double v = (p == Integrability::L2) ? stats.mean_l2(j) : stats.rms_sup(j);
        require(v > 0.0, ErrorKind::InsufficientData, "fit_regularity: block " + std::to_string(j) + " is empty");
        out.rows.push_back({j, v, stats.count()});
        xs.push_back(j);
        ys.push_back(std::log2(v));
    }
    const auto lf = least_squares(xs, ys);
    out.alpha = -lf.slope;
    out.stderr_alpha = lf.stderr_slope;
    return out;
}

RegularityFit fit_regularity(std::span<const SpectralField> ensemble, Integrability p, JRange range) {
    require(!ensemble.empty(), ErrorKind::InsufficientData, "fit_regularity: empty ensemble");
    BlockStatistics stats(ensemble.front().grid());
    for (const auto& f : ensemble) stats.add(f);
    return fit_regularity(stats, p, range);
}

}  // namespace frb
