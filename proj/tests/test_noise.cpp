#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "frb/besov.hpp"
#include "frb/noise.hpp"

using namespace frb;

namespace {

constexpr double kPi = std::numbers::pi;

// Mean and standard error of a sample.
struct Moments {
    double mean = 0.0, se = 0.0;
};

Moments moments(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= double(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= double(xs.size() - 1);
    return {m, std::sqrt(v / double(xs.size()))};
}

NoiseConfig small_config(double gamma, int n_steps, double dt) {
    NoiseConfig c;
    c.gamma = gamma;
    c.seed = 20240611;
    c.dt = dt;
    c.n_steps = n_steps;
    c.grid = TorusGrid(16);
    return c;
}

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("uniforms stay in the open interval") {
    CHECK(philox_open_uniform(0, 0) > 0.0);
    CHECK(philox_open_uniform(0xffffffffu, 0xffffffffu) < 1.0);
}

TEST_CASE("unit complex normals: moments") {
    PhiloxSource src(7, 3);
    std::vector<double> re, im, sq, cross;
    for (int s = 0; s < 20000; ++s) {
        const cplx z = src.unit_normal(5, std::uint64_t(s));
        re.push_back(z.real());
        im.push_back(z.imag());
        sq.push_back(std::norm(z));
        cross.push_back(z.real() * z.imag());
    }
    for (const auto& xs : {re, im, cross}) CHECK(std::abs(moments(xs).mean) < 3.0 * moments(xs).se);
    const auto m = moments(sq);
    CHECK(std::abs(m.mean - 1.0) < 3.0 * m.se);
}

TEST_CASE("determinism and sub-stream independence") {
    auto cfg = small_config(1.5, 8, 0.01);
    auto a = build_X(cfg, 4).X;
    auto b = build_X(cfg, 4).X;
    auto c = build_X(cfg, 5).X;
    bool identical = true, differs = false;
    for (std::size_t n = 0; n < a.size(); ++n)
        for (int k = 0; k <= 8; ++k) {
            identical = identical && a[n].coeff(k) == b[n].coeff(k);
            differs = differs || a[n].coeff(k) != c[n].coeff(k);
        }
    CHECK(identical);
    CHECK(differs);
    cfg.seed += 1;
    CHECK(build_X(cfg, 4).X[3].coeff(2) != a[3].coeff(2));
}

TEST_CASE("noise increments") {
    auto cfg = small_config(2.0, 10, 0.05);
    auto path = sample_noise(cfg, 0);
    SUBCASE("Hermitian pairing and dropped modes") {
        for (int k = 1; k < 8; ++k) CHECK(path.increment(2, -k) == std::conj(path.increment(2, k)));
        CHECK(path.increment(2, 0) == cplx(0.0));
        CHECK(path.increment(2, 8) == cplx(0.0));
        CHECK(path.increment_field(2).is_mean_zero());
    }
    SUBCASE("E|int_0^T xi_k dt|^2 = T/(2pi) over 10^4 paths") {
        const double T = cfg.horizon();
        for (int k : {1, 3, 7}) {
            std::vector<double> xs;
            for (std::uint64_t m = 0; m < 10000; ++m) {
                auto p = sample_noise(cfg, m);
                cplx s = 0.0;
                for (int n = 0; n < cfg.n_steps; ++n) s += p.increment(n, k);
                xs.push_back(std::norm(s));
            }
            const auto mo = moments(xs);
            CHECK(std::abs(mo.mean - T / (2.0 * kPi)) < 3.0 * mo.se);
        }
    }
    SUBCASE("zero stub") {
        NoisePath z(cfg, std::make_shared<ZeroSource>());
        CHECK(max_abs_coeff(z.increment_field(0)) == 0.0);
    }
}

TEST_CASE("noise variants") {
    NoiseConfig cfg = small_config(2.0, 4, 0.1);
    cfg.grid = TorusGrid(64);
    SUBCASE("mollified support") {
        cfg.variant = NoiseVariant::Mollified;
        cfg.epsilon = 4.0 / 30.0;  // phi(eps k) = 0 once eps k >= 4/3, i.e. k >= 10
        auto p = sample_noise(cfg);
        for (int k = 10; k < 32; ++k) CHECK(p.increment(1, k) == cplx(0.0));
        CHECK(p.increment(1, 5) != cplx(0.0));
        CHECK(noise_scale(cfg, 5) == 1.0);  // eps*5 = 2/3 < 3/4
    }
    SUBCASE("band-limited") {
        cfg.variant = NoiseVariant::BandLimited;
        cfg.n_band = 16;
        for (int k = 1; k < 32; ++k) CHECK(noise_scale(cfg, k) == ((k >= 8 && k <= 16) ? 1.0 : 0.0));
    }
    SUBCASE("roughened") {
        cfg.variant = NoiseVariant::Roughened;
        cfg.beta = 0.3;
        CHECK(noise_scale(cfg, 8) == doctest::Approx(std::pow(8.0, 0.3)));
        CHECK(noise_scale(cfg, -8) == doctest::Approx(std::pow(8.0, 0.3)));
    }
    SUBCASE("validation") {
        auto bad = cfg;
        bad.gamma = 1.0;
        CHECK_THROWS_AS(bad.validate(), Error);
        bad = cfg;
        bad.variant = NoiseVariant::Roughened;
        bad.beta = -0.1;
        CHECK_THROWS_AS(bad.validate(), Error);
        bad = cfg;
        bad.variant = NoiseVariant::BandLimited;
        bad.n_band = 32;
        CHECK_THROWS_AS(bad.validate(), Error);
        CHECK_THROWS_AS(noise_variant_from_string("pink"), Error);
    }
}

TEST_CASE("ou_step") {
    const double sigma1 = 1.0 / (4.0 * kPi);
    CHECK(stationary_variance(1, 2.0) == doctest::Approx(sigma1));
    CHECK(stationary_variance(2, 2.0) * kCovarianceConversion == doctest::Approx(2.0 * kPi / (2.0 * 4.0)));
    SUBCASE("closed form at gamma = 2, k = 1, dt = 0.1") {
        CHECK(ou_step(1.0, 1, 2.0, 0.1, 0.0).real() == doctest::Approx(std::exp(-0.1)));
        const cplx eta = ou_step(0.0, 1, 2.0, 0.1, 1.0);
        CHECK(std::norm(eta) == doctest::Approx((1.0 - std::exp(-0.2)) * sigma1).epsilon(1e-14));
    }
    SUBCASE("dt -> 0 continuity") {
        CHECK(std::abs(ou_step(0.0, 3, 1.5, 1e-14, 1.0)) < 1e-7);
        CHECK(ou_step(1.0, 3, 1.5, 1e-14, 0.0).real() == doctest::Approx(1.0));
    }
    SUBCASE("k = 0 rejected") {
        try {
            (void)ou_step(0.0, 0, 2.0, 0.1, 1.0);
            FAIL("expected domain error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Domain);
        }
    }
    SUBCASE("stationary variance reached from zero") {
        for (double gamma : {1.3, 2.0}) {
            const int k = 2;
            const double dt = 0.05, lam = std::pow(2.0, gamma);
            const int steps = int(std::ceil(10.0 / (lam * dt)));
            std::vector<double> xs;
            for (std::uint64_t m = 0; m < 10000; ++m) {
                PhiloxSource src(99, m);
                cplx x = 0.0;
                for (int n = 0; n < steps; ++n) x = ou_step(x, k, gamma, dt, src.unit_normal(k, std::uint64_t(n) + 1));
                xs.push_back(std::norm(x));
            }
            const auto mo = moments(xs);
            CHECK(std::abs(mo.mean - stationary_variance(k, gamma)) < 3.0 * mo.se);
        }
    }
}

TEST_CASE("build_X") {
    SUBCASE("zero stub gives X = 0") {
        auto cfg = small_config(1.5, 10, 0.01);
        NoisePath z(cfg, std::make_shared<ZeroSource>());
        auto ou = build_X(z, true);
        for (std::size_t n = 0; n < ou.X.size(); ++n) {
            CHECK(max_abs_coeff(ou.X[n]) == 0.0);
            CHECK(max_abs_coeff((*ou.Y)[n]) == 0.0);
        }
    }
    SUBCASE("agrees with ou_step mode by mode") {
        auto cfg = small_config(1.7, 6, 0.02);
        auto noise = sample_noise(cfg, 11);
        auto ou = build_X(noise);
        for (int k = 1; k < 8; ++k) {
            cplx x = 0.0;
            for (int n = 0; n < cfg.n_steps; ++n) {
                x = ou_step(x, k, cfg.gamma, cfg.dt, noise.source().unit_normal(k, std::uint64_t(n) + 1));
                CHECK(std::abs(ou.X[std::size_t(n) + 1].coeff(k) - x) < 1e-15);
            }
        }
        CHECK(max_abs_coeff(ou.X[0]) == 0.0);
        CHECK(ou.flagged_jumps == 0);
    }
    SUBCASE("E|X_k(t)|^2 = sigma^2 (1 - e^{-2t|k|^gamma}) over 10^4 paths") {
        auto cfg = small_config(1.5, 10, 0.02);
        const std::size_t n_t = 6;
        for (int k : {1, 2, 5}) {
            std::vector<double> xs;
            for (std::uint64_t m = 0; m < 10000; ++m) xs.push_back(std::norm(build_X(cfg, m).X[n_t].coeff(k)));
            const double t = n_t * cfg.dt;
            const double expect = stationary_variance(k, cfg.gamma) * -std::expm1(-2.0 * t * std::pow(k, cfg.gamma));
            const auto mo = moments(xs);
            CHECK(std::abs(mo.mean - expect) < 3.0 * mo.se);
        }
    }
    SUBCASE("stationary Y: variance and lag correlation") {
        auto cfg = small_config(2.0, 8, 0.05);
        const int k = 2;
        const double lam = 4.0;
        std::vector<double> var0, lag;
        for (std::uint64_t m = 0; m < 10000; ++m) {
            auto ou = build_X(cfg, m, true);
            const auto& Y = *ou.Y;
            var0.push_back(std::norm(Y[0].coeff(k)));
            lag.push_back((Y[4].coeff(k) * std::conj(Y[1].coeff(k))).real());
        }
        const double s2 = stationary_variance(k, cfg.gamma);
        const auto v = moments(var0);
        const auto l = moments(lag);
        CHECK(std::abs(v.mean - s2) < 3.0 * v.se);
        CHECK(std::abs(l.mean - s2 * std::exp(-3 * cfg.dt * lam)) < 3.0 * l.se);
    }
}

TEST_CASE("spatial regularity of X at N = 4096, M = 100") {
    // The OU law is exact, so one step of length T samples X(T) directly.
    for (double gamma : {1.5, 2.0}) {
        NoiseConfig cfg;
        cfg.gamma = gamma;
        cfg.seed = 5;
        cfg.grid = TorusGrid(4096);
        cfg.dt = 1.0;
        cfg.n_steps = 1;
        BlockStatistics stats(cfg.grid);
        for (std::uint64_t m = 0; m < 100; ++m) stats.add(build_X(cfg, m).X.back());
        const auto fit = fit_regularity(stats, Integrability::LInf);
        CHECK(std::abs(fit.alpha - (gamma / 2.0 - 0.5)) < 0.07);
    }
}

TEST_CASE("temporal exponent of X") {
    for (double gamma : {1.5, 2.0}) {
        NoiseConfig cfg;
        cfg.gamma = gamma;
        cfg.seed = 8;
        cfg.grid = TorusGrid(1024);
        cfg.dt = 2e-3;
        cfg.n_steps = 256;
        std::vector<TimePath> paths;
        for (std::uint64_t m = 0; m < 4; ++m) paths.push_back(build_X(cfg, m).X);
        const std::vector<int> lags{1, 2, 4, 8, 16, 32, 64};
        const auto fit = fit_temporal_exponent(paths, lags);
        CHECK(std::abs(fit.kappa - predicted_temporal_exponent(gamma)) < 0.07);
    }
    CHECK(predicted_temporal_exponent(2.0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(fit_temporal_exponent(std::span<const TimePath>{}, std::vector<int>{1, 2, 4}), Error);
}
