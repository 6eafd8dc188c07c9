#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "frb/besov.hpp"
#include "test_util.hpp"

using namespace frb;
using frb::testing::max_diff;
using frb::testing::random_field;
using frb::testing::single_mode;

namespace {

// Gaussian ensemble member with E|c_k|^2 = variance(k).
SpectralField gaussian_field(TorusGrid grid, std::mt19937_64& rng, const std::function<double(int)>& variance) {
    std::normal_distribution<double> n01;
    SpectralField f(grid);
    for (int k = 1; k < grid.nyquist(); ++k) {
        const double s = std::sqrt(variance(k) / 2.0);
        f.set_coeff(k, cplx(s * n01(rng), s * n01(rng)));
    }
    return f;
}

// Block L2 norm by physical-space quadrature, with weights evaluated directly from rho/chi.
double block_l2_by_quadrature(const SpectralField& f, int j) {
    SpectralField b(f.grid());
    for (int k = 0; k <= f.grid().nyquist(); ++k) {
        const double w = (j < 0) ? lp_chi(k) : lp_rho(k / std::pow(2.0, j));
        b.set_coeff(k, w * f.coeff(k));
    }
    const auto x = to_physical(b, 2 * f.n_modes());
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s * kTorusLength / x.size());
}

}  // namespace

TEST_CASE("partition of unity and supports") {
    for (int n = 8; n <= 4096; n *= 2) {
        TorusGrid grid(n);
        const auto& part = partition_for(grid);
        for (int k = 0; k <= grid.nyquist(); ++k) {
            double s = 0.0;
            for (int j = -1; j <= part.j_max(); ++j) s += part.weight(j, k);
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
        for (int j = 0; j <= part.j_max(); ++j) {
            CHECK(part.k_lo(j) >= std::ldexp(0.75, j));
            CHECK(part.k_hi(j) <= std::ldexp(8.0 / 3.0, j));
            CHECK(part.k_lo(j) <= grid.nyquist());
        }
        CHECK(part.k_hi(-1) <= 4.0 / 3.0);
    }
    CHECK(lp_chi(0.0) == 1.0);
    CHECK(lp_rho(0.7) == 0.0);
    CHECK(lp_rho(2.7) == 0.0);
    CHECK(lp_rho(1.4) == 1.0);
}

TEST_CASE("block orthogonality for |i - j| >= 2") {
    const auto& part = partition_for(TorusGrid(1024));
    for (int i = -1; i <= part.j_max(); ++i)
        for (int j = i + 2; j <= part.j_max(); ++j) CHECK(part.k_hi(i) < part.k_lo(j));
}

TEST_CASE("dyadic_block") {
    SUBCASE("full-weight block returns the mode unchanged") {
        // rho(2^{-j}k) = 1 for 2^{-j}k in [4/3, 3/2]: k = 3 sits in block 1, k = 11 in block 3.
        TorusGrid grid(64);
        for (auto [k, j] : {std::pair{3, 1}, std::pair{11, 3}}) {
            auto f = single_mode(grid, k, cplx(0.3, -0.2));
            CHECK(max_diff(dyadic_block(f, j), f) < 1e-15);
        }
    }
    SUBCASE("sum of blocks reconstructs f, N = 256") {
        std::mt19937_64 rng(1);
        TorusGrid grid(256);
        auto f = random_field(grid, rng, 128);
        SpectralField s(grid);
        for (int j = -1; j <= j_max(grid); ++j) s += dyadic_block(f, j);
        CHECK(max_diff(s, f) < 1e-12 * max_abs_coeff(f));
    }
    SUBCASE("block L2 norms match a direct quadrature oracle") {
        TorusGrid grid(512);
        SpectralField f(grid);
        for (int k = 1; k < grid.nyquist(); ++k) f.set_coeff(k, 1.0 / (1.0 + k));
        for (int j = -1; j <= j_max(grid); ++j)
            CHECK(block_lp_norm(f, j, 2.0) == doctest::Approx(block_l2_by_quadrature(f, j)).epsilon(1e-12));
    }
    SUBCASE("out of range") {
        TorusGrid grid(64);
        try {
            (void)dyadic_block(SpectralField(grid), j_max(grid) + 1);
            FAIL("expected out-of-range");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::OutOfRange);
        }
    }
}

TEST_CASE("low_cutoff") {
    TorusGrid grid(64);
    std::mt19937_64 rng(4);
    auto f = random_field(grid, rng, 31);
    CHECK(max_diff(low_cutoff(f, 1000), f) == 0.0);
    for (int j = 0; j <= j_max(grid); ++j) {
        auto rest = low_cutoff(f, j);
        for (int i = j; i <= j_max(grid); ++i) rest += dyadic_block(f, i);
        CHECK(max_diff(rest, f) < 1e-12);
    }
    SUBCASE("support separation") {
        SpectralField g(grid);
        for (int k = 4; k < 20; ++k) g.set_coeff(k, 1.0);
        CHECK(max_abs_coeff(low_cutoff(g, 0)) == 0.0);
    }
    SUBCASE("retained mass of S_3 against weight sums") {
        SpectralField g(grid);
        for (int k : {1, 2, 8}) g.set_coeff(k, 1.0);
        auto s3 = low_cutoff(g, 3);
        for (int k : {1, 2, 8}) {
            const double oracle = lp_chi(k) + lp_rho(k) + lp_rho(k / 2.0) + lp_rho(k / 4.0);
            CHECK(std::abs(s3.coeff(k) - oracle) < 1e-14);
        }
        CHECK(std::abs(s3.coeff(1) - 1.0) < 1e-14);
        CHECK(s3.coeff(8).real() > 0.0);
        CHECK(s3.coeff(8).real() < 1.0);
    }
}

TEST_CASE("besov norms") {
    std::mt19937_64 rng(9);
    TorusGrid grid(256);
    auto f = random_field(grid, rng, 127, [](int k) { return std::pow(k, -1.2); });
    for (auto p : {Integrability::L2, Integrability::LInf}) {
        CHECK(besov_norm(SpectralField(grid), {0.5, p}) == 0.0);
        CHECK(besov_norm(f * 2.0, {0.5, p}) == doctest::Approx(2.0 * besov_norm(f, {0.5, p})).epsilon(1e-12));
        auto g = random_field(grid, rng, 127, [](int k) { return std::pow(k, -1.0); });
        CHECK(besov_norm(f + g, {0.3, p}) <= besov_norm(f, {0.3, p}) + besov_norm(g, {0.3, p}) + 1e-12);
    }
}

TEST_CASE("H^s Besov norm against direct Fourier sums, N = 64..1024") {
    std::mt19937_64 rng(12);
    const double s = 0.6;
    for (int n = 64; n <= 1024; n *= 2) {
        TorusGrid grid(n);
        auto f = random_field(grid, rng, n / 2 - 1, [](int k) { return std::pow(k, -0.8); });
        const auto& part = partition_for(grid);
        double partition_sum = 0.0, sobolev_sum = 0.0;
        for (int k = 1; k < grid.nyquist(); ++k) {
            double w = 0.0;
            for (int j = -1; j <= part.j_max(); ++j) {
                const double wj = (j < 0) ? lp_chi(k) : lp_rho(k / std::pow(2.0, j));
                w += std::pow(2.0, 2.0 * j * s) * wj * wj;
            }
            partition_sum += 2.0 * kTorusLength * w * std::norm(f.coeff(k));
            sobolev_sum += 2.0 * kTorusLength * std::pow(1.0 + double(k) * k, s) * std::norm(f.coeff(k));
        }
        const double h = besov_norm(f, {s, Integrability::L2});
        CHECK(h == doctest::Approx(std::sqrt(partition_sum)).epsilon(1e-12));
        const double ratio = h / std::sqrt(sobolev_sum);
        CHECK(ratio > 0.2);
        CHECK(ratio < 5.0);
    }
}

TEST_CASE("interpolation inequality W^alpha_4 <= H^alpha^{1/2} C^alpha^{1/2}") {
    std::mt19937_64 rng(31);
    TorusGrid grid(256);
    for (int trial = 0; trial < 10; ++trial) {
        auto f = random_field(grid, rng, 127, [](int k) { return std::pow(k, -1.0); });
        for (double alpha : {-0.2, 0.0, 0.3}) {
            const double lhs = besov_norm_p(f, alpha, 4.0);
            const double rhs = std::sqrt(besov_norm(f, {alpha, Integrability::L2}) * besov_norm(f, {alpha, Integrability::LInf}));
            CHECK(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("Moser-type ratio does not blow up with resolution") {
    // Decay |k|^{-(0.7 + 0.5 + 0.4)} keeps the H^0.7 norms bounded as N grows.
    const double s = 0.7;
    std::vector<double> ratios;
    for (int n : {64, 128, 256, 512}) {
        std::mt19937_64 rng(77);
        TorusGrid grid(n);
        double worst = 0.0;
        for (int trial = 0; trial < 5; ++trial) {
            auto f = random_field(grid, rng, n / 2 - 1, [](int k) { return std::pow(k, -1.6); });
            auto g = random_field(grid, rng, n / 2 - 1, [](int k) { return std::pow(k, -1.6); });
            const double r = besov_norm(dealiased_product(f, g), {s, Integrability::L2}) /
                             (besov_norm(f, {s, Integrability::L2}) * besov_norm(g, {s, Integrability::L2}));
            worst = std::max(worst, r);
        }
        ratios.push_back(worst);
    }
    for (double r : ratios) CHECK(r < 2.0 * ratios.front());
}

TEST_CASE("fit_regularity") {
    SUBCASE("deterministic power-law field, H-scale") {
        TorusGrid grid(4096);
        SpectralField f(grid);
        const double alpha = 0.3;
        for (int k = 1; k < grid.nyquist(); ++k) f.set_coeff(k, std::pow(1.0 + k, -(alpha + 0.5)));
        std::vector<SpectralField> ens{f};
        auto fit = fit_regularity(ens, Integrability::L2);
        CHECK(fit.convention == "sobolev_block_l2");
        CHECK(std::abs(fit.alpha - alpha) < 0.05);
    }
    SUBCASE("white spatial noise, C-scale, M = 200") {
        TorusGrid grid(1024);
        std::mt19937_64 rng(2024);
        BlockStatistics stats(grid);
        for (int m = 0; m < 200; ++m) stats.add(gaussian_field(grid, rng, [](int) { return 1.0; }));
        auto fit = fit_regularity(stats, Integrability::LInf);
        CHECK(fit.convention == "holder_moment_sup");
        CHECK(std::abs(fit.alpha + 0.5) < 0.07);
    }
    SUBCASE("stationary OU field, gamma = 2, C-scale") {
        TorusGrid grid(1024);
        std::mt19937_64 rng(99);
        BlockStatistics stats(grid);
        for (int m = 0; m < 200; ++m)
            stats.add(gaussian_field(grid, rng, [](int k) { return 1.0 / (4.0 * std::numbers::pi * k * k); }));
        auto fit = fit_regularity(stats, Integrability::LInf);
        CHECK(std::abs(fit.alpha - 0.5) < 0.07);
        auto fit2 = fit_regularity(stats, Integrability::L2);
        CHECK(std::abs(fit2.alpha - 0.5) < 0.07);
        CHECK(fit.rows.size() == static_cast<std::size_t>(j_max(grid) - 2 - 2 + 1));
        CHECK(fit.rows.front().count == 200);
    }
    SUBCASE("merge is order-insensitive") {
        TorusGrid grid(128);
        std::mt19937_64 rng(5);
        std::vector<SpectralField> ens;
        for (int m = 0; m < 6; ++m) ens.push_back(gaussian_field(grid, rng, [](int k) { return 1.0 / k; }));
        BlockStatistics a(grid), b(grid), all(grid), rev(grid);
        for (int m = 0; m < 3; ++m) a.add(ens[m]);
        for (int m = 3; m < 6; ++m) b.add(ens[m]);
        for (int m = 5; m >= 0; --m) rev.add(ens[m]);
        b.merge(a);
        for (const auto& f : ens) all.add(f);
        for (int j = -1; j <= j_max(grid); ++j) {
            CHECK(b.mean_l2(j) == doctest::Approx(all.mean_l2(j)).epsilon(1e-13));
            CHECK(rev.rms_sup(j) == doctest::Approx(all.rms_sup(j)).epsilon(1e-13));
        }
    }
    SUBCASE("insufficient data") {
        TorusGrid grid(64);  // j_max = 5: range 2..3 has only two blocks
        std::vector<SpectralField> ens{single_mode(grid, 3)};
        try {
            (void)fit_regularity(ens, Integrability::L2);
            FAIL("expected insufficient data");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InsufficientData);
        }
        CHECK_THROWS_AS(fit_regularity(std::span<const SpectralField>{}, Integrability::L2), Error);
    }
}

TEST_CASE("least squares on exact line") {
    std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    auto lf = least_squares(x, y);
    CHECK(lf.slope == doctest::Approx(2.0));
    CHECK(lf.intercept == doctest::Approx(1.0));
    CHECK(lf.stderr_slope < 1e-12);
}
