//==============================================================================
// besov.hpp
// Littlewood-Paley blocks on the torus, Besov norms for p in {2, inf}, and
// empirical regularity exponents fitted from block norms.
//==============================================================================
#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "frb/spectral.hpp"

namespace frb {

/// Smooth radial cutoff: 1 on |r| <= 3/4, 0 on |r| >= 4/3, nonincreasing,
/// built from the exp(-1/x) mollifier.
double lp_cutoff(double r);
/// chi = lp_cutoff, supported in |k| <= 4/3.
double lp_chi(double r);
/// rho(r) = lp_cutoff(r/2) - lp_cutoff(r), supported in 3/4 <= |r| <= 8/3.
double lp_rho(double r);

/// Dyadic partition tabulated on one grid. Block -1 has weight chi(k), block
/// j >= 0 has weight rho(2^{-j} k). Blocks -1..j_max() cover every |k| <= N/2.
class DyadicPartition {
public:
    explicit DyadicPartition(TorusGrid grid);

    const TorusGrid& grid() const noexcept { return grid_; }
    int j_max() const noexcept { return j_max_; }
    int block_count() const noexcept { return j_max_ + 2; }

    /// Weights for k = 0..N/2.
    std::span<const double> weights(int j) const;
    double weight(int j, int k) const;
    /// Inclusive range of k >= 0 with nonzero weight in block j.
    int k_lo(int j) const;
    int k_hi(int j) const;

private:
    TorusGrid grid_;
    int j_max_;
    std::vector<std::vector<double>> w_;  // index j+1
    std::vector<int> lo_, hi_;
};

/// Shared, immutable partition for a grid (tabulated once per grid size).
const DyadicPartition& partition_for(const TorusGrid& grid);

/// Largest block index with support on the grid.
int j_max(const TorusGrid& grid);

/// Delta_j f for -1 <= j <= j_max.
SpectralField dyadic_block(const SpectralField& f, int j);

/// S_j f = sum_{i <= j-1} Delta_i f; 0 for j <= -1, f for j > j_max.
SpectralField low_cutoff(const SpectralField& f, int j);

enum class Integrability { L2, LInf };

struct BesovSpec {
    double s = 0.0;
    Integrability p = Integrability::L2;  // r = p: B^s_{2,2} = H^s, B^s_{inf,inf} = C^s
};

/// ||Delta_j f||_{L^p} with p >= 1 or p = infinity; L^inf and p != 2 norms are
/// evaluated on a 4x oversampled grid.
double block_lp_norm(const SpectralField& f, int j, double p);

double besov_norm(const SpectralField& f, const BesovSpec& spec);
/// Non-Besov helper: (sum_j 2^{jsp} ||Delta_j f||_{L^p}^p)^{1/p} for finite p.
double besov_norm_p(const SpectralField& f, double s, double p);
/// W^s = H^s intersect C^s, normed by the sum.
double w_norm(const SpectralField& f, double s);

//------------------------------------------------------------------------------
// Regularity fits
//
// Exponent conventions (recorded in every fit result):
//   sobolev_block_l2  : alpha with  mean_m ||Delta_j f_m||_{L2} ~ 2^{-j alpha}
//   holder_moment_sup : alpha with  sup_x (mean_m |Delta_j f_m(x)|^2)^{1/2} ~ 2^{-j alpha}
// For a single field the second is the ordinary block sup norm. Averaging the
// second moment before taking the sup removes the sqrt(log 2^j) growth of
// Gaussian block maxima, which otherwise biases finite-range slopes by ~0.1.
//------------------------------------------------------------------------------
struct BlockRow {
    int j = 0;
    double mean_norm = 0.0;
    std::size_t count = 0;
};

struct RegularityFit {
    double alpha = 0.0;
    double stderr_alpha = 0.0;
    std::string convention;
    std::vector<BlockRow> rows;  // rows actually used in the fit
};

struct JRange {
    int lo = 2;
    int hi = -1;  // -1: j_max - 2
};

/// Streaming block statistics for an ensemble; merge() is associative.
class BlockStatistics {
public:
    explicit BlockStatistics(TorusGrid grid);

    void add(const SpectralField& f);
    void merge(const BlockStatistics& other);

    std::size_t count() const noexcept { return count_; }
    const TorusGrid& grid() const noexcept { return grid_; }
    /// Ensemble mean of ||Delta_j f||_{L2}.
    double mean_l2(int j) const;
    /// sup_x of the ensemble root-mean-square of Delta_j f(x).
    double rms_sup(int j) const;

private:
    TorusGrid grid_;
    std::size_t count_ = 0;
    std::vector<double> l2_sum_;               // per block
    std::vector<std::vector<double>> sq_sum_;  // per block, per oversampled point
};

RegularityFit fit_regularity(const BlockStatistics& stats, Integrability p, JRange range = {});
RegularityFit fit_regularity(std::span<const SpectralField> ensemble, Integrability p, JRange range = {});

/// Least-squares slope of y against x, with its standard error.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace frb
