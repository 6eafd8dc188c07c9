#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "frb/besov.hpp"
#include "frb/noise.hpp"
#include "frb/paracontrolled.hpp"
#include "test_util.hpp"

using namespace frb;
using frb::testing::max_diff;
using frb::testing::random_field;

namespace {

SolverConfig burgers(double gamma, double T, double dt, int n) {
    SolverConfig c;
    c.gamma = gamma;
    c.T = T;
    c.dt = dt;
    c.grid = TorusGrid{n};
    c.picard_tol = 1e-11;
    c.picard_max_iters = 80;
    return c;
}

TimePath noise_path(const SolverConfig& cfg, std::uint64_t seed, std::uint64_t path = 0) {
    NoiseConfig nc;
    nc.gamma = cfg.gamma;
    nc.seed = seed;
    nc.dt = cfg.dt;
    nc.n_steps = cfg.n_steps();
    nc.grid = cfg.grid;
    return build_X(nc, path).X;
}

SpectralField smooth_u0(TorusGrid grid, unsigned seed, double amp) {
    std::mt19937_64 rng(seed);
    return random_field(grid, rng, 6, [amp](int k) { return amp / (k * k); });
}

double sup_diff(const TimePath& a, const TimePath& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, max_diff(a[n], b[n]));
    return m;
}

}  // namespace

TEST_CASE("build_Q") {
    SUBCASE("constant X = 2cos x gives Q_1(t) = i(1 - e^{-t})") {
        const TorusGrid g{32};
        for (double gamma : {1.3, 2.0}) {
            SpectralField x(g);
            x.set_coeff(1, 1.0);
            const auto Q = build_Q(TimePath::constant(x, 0.01, 101), gamma);
            double err = 0.0;
            for (std::size_t n = 0; n < Q.size(); ++n) {
                const double t = Q.time(n);
                err = std::max(err, std::abs(Q[n].coeff(1) - cplx(0.0, 1.0 - std::exp(-t))));
                CHECK(std::abs(Q[n].coeff(2)) < 1e-15);
            }
            CHECK(err < 1e-13);
        }
    }
    SUBCASE("Q gains gamma - 1 over X") {
        const double gamma = 1.5;
        auto cfg = burgers(gamma, 0.5, 1.0 / 256, 1024);
        BlockStatistics sx(cfg.grid), sq(cfg.grid);
        for (std::uint64_t m = 0; m < 20; ++m) {
            const auto X = noise_path(cfg, 91, m);
            sx.add(X.back());
            sq.add(build_Q(X, gamma).back());
        }
        const double gain = fit_regularity(sq, Integrability::LInf).alpha - fit_regularity(sx, Integrability::LInf).alpha;
        MESSAGE("gain " << gain);
        CHECK(std::abs(gain - (gamma - 1.0)) < 0.1);
    }
}

TEST_CASE("without noise the paracontrolled solve equals the direct one") {
    const auto cfg = burgers(1.5, 0.5, 1e-2, 64);
    const auto u0 = smooth_u0(cfg.grid, 3, 1.0);
    const auto X = TimePath(cfg.grid, cfg.dt, cfg.n_steps() + 1);
    const auto pc = solve_paracontrolled(u0, X, cfg);
    const auto direct = solve_local(u0, X, cfg);
    CHECK(pc.report.converged);
    CHECK(sup_diff(pc.state.u_assembled, direct.v) < 1e-8);
    CHECK(sup_diff(pc.state.Q, X) == 0.0);
    CHECK(sup_diff(pc.state.w, X) == 0.0);
}

TEST_CASE("paracontrolled and direct solvers agree on noisy data") {
    const auto cfg = burgers(1.5, 0.25, 1.0 / 512, 128);
    const auto u0 = smooth_u0(cfg.grid, 5, 0.5);
    const auto X = noise_path(cfg, 17);
    const auto pc = solve_paracontrolled(u0, X, cfg);
    const auto direct = solve_local(u0, X, cfg);
    REQUIRE(pc.report.converged);
    REQUIRE(std::abs(pc.report.t_local - direct.report.t_local) < 1e-12);
    double err = 0.0;
    for (std::size_t n = 0; n < direct.v.size(); ++n)
        err = std::max(err, l2_norm(pc.state.u_assembled[n] - pc.state.X[n] - direct.v[n]));
    MESSAGE("L2 gap " << err << ", iterations " << pc.report.iterations << ", max ratio " << pc.report.max_ratio);
    CHECK(err < 1e-5);
    CHECK(pc.report.max_ratio < 37.0 / 40.0);
    CHECK_FALSE(pc.state.in_proof_range);
    CHECK(!pc.report.notes.empty());

    SUBCASE("assembly identity") {
        const auto& s = pc.state;
        const auto w = modified_para(s.u_prime, s.Q, TemporalMollifier{cfg.gamma});
        double d = 0.0;
        for (std::size_t n = 0; n < s.X.size(); ++n) d = std::max(d, l2_norm(s.u_assembled[n] - (s.X[n] + w[n] + s.u_sharp[n])));
        CHECK(d < 1e-10);
        CHECK(s.assembly_defect < 1e-10);
    }
    SUBCASE("u' = X + u^Q at the fixed point") {
        const auto& s = pc.state;
        double d = 0.0;
        for (std::size_t n = 0; n < s.X.size(); ++n) d = std::max(d, l2_norm(s.u_prime[n] - (s.u_assembled[n])));
        CHECK(d < 1e-8);
    }
    SUBCASE("mild residuals") {
        const auto r = residual_mild(pc.state);
        const auto rd = mild_residual(X.slice(0, direct.v.size()) + direct.v, X.slice(0, direct.v.size()), cfg.gamma,
                                      Equation::Burgers);
        const double rmax = *std::max_element(r.begin(), r.end());
        const double rdmax = *std::max_element(rd.begin(), rd.end());
        MESSAGE("paracontrolled residual " << rmax << ", direct " << rdmax);
        CHECK(rmax < 1e-8);
        CHECK(rdmax < 1e-8);
    }
}

TEST_CASE("gamma in the proof range") {
    const auto cfg = burgers(1.3, 0.1, 1.0 / 640, 256);
    const auto pc = solve_paracontrolled(smooth_u0(cfg.grid, 7, 0.3), noise_path(cfg, 23), cfg);
    CHECK(pc.report.converged);
    CHECK(pc.state.in_proof_range);
    CHECK(pc.report.notes.empty());
}

TEST_CASE("stencil defect is first order in dt") {
    const TorusGrid g{64};
    const double gamma = 1.5;
    auto defect = [&](double dt) {
        const int steps = static_cast<int>(std::lround(0.5 / dt));
        SpectralField base(g);
        for (int k = 1; k < 12; ++k) base.set_coeff(k, cplx(1.0, 0.5) / double(k * k));
        TimePath X(g, dt, static_cast<std::size_t>(steps) + 1);
        for (int n = 0; n <= steps; ++n) X[n] = base * std::sin(3.0 * n * dt);
        auto cfg = burgers(gamma, 0.5, dt, 64);
        return solve_paracontrolled(SpectralField(g), X, cfg).state.stencil_defect;
    };
    const double a = defect(1.0 / 200), b = defect(1.0 / 400);
    MESSAGE("defects " << a << " " << b);
    CHECK(a > 0.0);
    CHECK(a / b > 1.6);
}

TEST_CASE("rejections") {
    auto cfg = burgers(1.5, 0.1, 1e-2, 32);
    const TimePath X(cfg.grid, cfg.dt, 11);
    cfg.equation = Equation::DP;
    CHECK_THROWS_AS(solve_paracontrolled(SpectralField(cfg.grid), X, cfg), Error);
    cfg.equation = Equation::Burgers;
    cfg.gamma = 1.2;
    try {
        solve_paracontrolled(SpectralField(cfg.grid), X, cfg);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    cfg.gamma = 1.5;
    std::vector<ParacontrolledState> few(5, solve_paracontrolled(SpectralField(cfg.grid), X, cfg).state);
    try {
        regularity_report(few);
        FAIL("expected insufficient data");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientData);
    }
}
