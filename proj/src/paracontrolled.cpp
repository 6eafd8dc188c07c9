#include "frb/paracontrolled.hpp"

#include <algorithm>
#include <cmath>

#include "frb/besov.hpp"

namespace frb {

TimePath build_Q(const TimePath& X, double gamma) {
    TimePath h(X.grid(), X.dt(), X.size(), X.t0());
    for (std::size_t n = 0; n < X.size(); ++n) h[n] = derivative(X[n]);
    return duhamel_path(h, gamma);
}

namespace {

double sup_hs(const TimePath& a, const TimePath& b, double s) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, sobolev_norm(a[n] - b[n], s));
    return m;
}

SpectralField half_dx(const SpectralField& f) {
    return apply_multiplier(f, [](int k) { return cplx(0.0, 0.5 * k); });
}

// w - P(t) w(0), the Duhamel image of the continuous L w.
TimePath duhamel_of_heat_operator(const TimePath& w, double gamma) {
    TimePath out = w;
    for (std::size_t n = 0; n < w.size(); ++n) out[n] -= semigroup(w[0], w.dt() * double(n), gamma);
    return out;
}

double stencil_defect(const TimePath& w, double gamma) {
    if (w.size() < 2) return 0.0;
    const auto Lw = discrete_heat_operator(w, gamma);
    TimePath h(w.grid(), w.dt(), w.size(), w.t0());
    for (std::size_t n = 0; n < Lw.size(); ++n) h[n] = Lw[n];
    h[w.size() - 1] = Lw[Lw.size() - 1];
    const auto a = duhamel_path(h, gamma);
    const auto b = duhamel_of_heat_operator(w, gamma);
    double m = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) m = std::max(m, l2_norm(a[n] - b[n]));
    return m;
}

}  // namespace

ParacontrolledSolution solve_paracontrolled(const SpectralField& u0, const TimePath& X, const SolverConfig& cfg) {
    cfg.validate();
    require(cfg.equation == Equation::Burgers, ErrorKind::Config, "solve_paracontrolled: only the Burgers equation is supported");
    require(X.grid() == cfg.grid && u0.grid() == cfg.grid, ErrorKind::Dimension, "solve_paracontrolled: grid mismatch");
    require(std::abs(X.dt() - cfg.dt) <= 1e-12 * cfg.dt, ErrorKind::Dimension, "solve_paracontrolled: X and solver dt differ");
    require(u0.is_mean_zero(1e-14 * (1.0 + max_abs_coeff(u0))), ErrorKind::Domain, "solve_paracontrolled: u0 must be mean-zero");
    require(cfg.gamma > 1.25, ErrorKind::Config, "solve_paracontrolled: gamma must exceed 5/4");

    const double s_sharp = cfg.s_work;
    const double s_prime = 0.125 + (cfg.s_work - 0.5);
    const TemporalMollifier moll{cfg.gamma};

    IterationReport report;
    int n_w = std::min(static_cast<int>(X.size()) - 1, cfg.n_steps());
    require(n_w >= 1, ErrorKind::InsufficientResolution, "solve_paracontrolled: X has no time step");
    constexpr int kMinWindow = 8;

    for (;;) {
        report.t_local = n_w * cfg.dt;
        report.increments.clear();
        report.contraction_ratio = report.max_ratio = 0.0;
        const std::size_t n_t = static_cast<std::size_t>(n_w) + 1;
        const auto Xw = X.slice(0, n_t);
        const auto Q = build_Q(Xw, cfg.gamma);
        const auto lin = semigroup_path(u0, cfg.dt, n_t, cfg.gamma, Xw.t0());

        // Per-time data that does not change across iterations.
        std::vector<BlockFields> dX_blocks;
        TimePath forcing_X(cfg.grid, cfg.dt, n_t, Xw.t0());
        dX_blocks.reserve(n_t);
        for (std::size_t n = 0; n < n_t; ++n) {
            const BlockFields xb(Xw[n]);
            dX_blocks.emplace_back(derivative(Xw[n]));
            // 1/2 d_x(X^2) - X < d_x X in commutator form: d_x(X < X) - X < d_x X + 1/2 d_x(X o X).
            forcing_X[n] = derivative(para_less(xb, xb)) - para_less(xb, dX_blocks.back()) + half_dx(resonant(xb, xb));
        }

        TimePath u_prime = Xw, u_sharp = lin;
        int rising = 0;
        bool contracting = true;
        for (int it = 1; it <= cfg.picard_max_iters; ++it) {
            const auto w = modified_para(u_prime, Q, moll);
            const auto uQ = w + u_sharp;
            TimePath F(cfg.grid, cfg.dt, n_t, Xw.t0());
            for (std::size_t n = 0; n < n_t; ++n) {
                // u' < d_x X - u^Q < d_x X - X < d_x X grouped by bilinearity; X < d_x X already sits in forcing_X.
                F[n] = forcing_X[n] + half_dx(dealiased_product(uQ[n], uQ[n])) + derivative(dealiased_product(uQ[n], Xw[n])) +
                       para_less(BlockFields(u_prime[n] - uQ[n]), dX_blocks[n]);
            }
            TimePath sharp_next = lin + duhamel_path(F, cfg.gamma) - duhamel_of_heat_operator(w, cfg.gamma);
            TimePath prime_next = Xw + uQ;
            const double inc = 2.0 * sup_hs(sharp_next, u_sharp, s_sharp) + sup_hs(prime_next, u_prime, s_prime);
            u_sharp = std::move(sharp_next);
            u_prime = std::move(prime_next);
            report.iterations = it;
            report.increments.push_back(inc);
            if (report.increments.size() >= 2) {
                const double prev = report.increments[report.increments.size() - 2];
                report.contraction_ratio = prev > 0.0 ? inc / prev : 0.0;
                report.max_ratio = std::max(report.max_ratio, report.contraction_ratio);
                rising = (report.contraction_ratio >= 1.0 || !std::isfinite(inc)) ? rising + 1 : 0;
            }
            if (inc < cfg.picard_tol) {
                report.converged = true;
                break;
            }
            if (rising >= 3 || !std::isfinite(inc)) {
                contracting = false;
                break;
            }
        }
        if (report.converged) {
            ParacontrolledSolution out{{Xw, Q, u_prime, u_sharp, modified_para(u_prime, Q, moll), Xw, cfg.gamma,
                                        cfg.gamma > 1.25 && cfg.gamma <= 4.0 / 3.0, 0.0, 0.0},
                                       report};
            auto& st = out.state;
            st.u_assembled = st.X + st.w + st.u_sharp;
            for (std::size_t n = 0; n < n_t; ++n)
                st.assembly_defect = std::max(st.assembly_defect, l2_norm(st.u_assembled[n] - st.X[n] - st.w[n] - st.u_sharp[n]));
            st.stencil_defect = stencil_defect(st.w, cfg.gamma);
            if (!st.in_proof_range) out.report.notes.push_back("gamma outside (5/4, 4/3]: run for cross-validation only");
            return out;
        }
        if (contracting) throw DivergenceError("solve_paracontrolled: no convergence within picard_max_iters", report);
        if (n_w / 2 < kMinWindow) throw DivergenceError("solve_paracontrolled: non-contraction on the smallest admissible window", report);
        n_w /= 2;
        ++report.halvings;
        report.notes.push_back("non-contraction: halved window to " + std::to_string(n_w * cfg.dt));
    }
}

std::vector<double> residual_mild(const ParacontrolledState& state) {
    return mild_residual(state.u_assembled, state.X, state.gamma, Equation::Burgers);
}

std::vector<ExponentRow> regularity_report(std::span<const ParacontrolledState> ensemble, Integrability p) {
    require(ensemble.size() >= 20, ErrorKind::InsufficientData,
            "regularity_report: need at least 20 states, got " + std::to_string(ensemble.size()));
    const auto grid = ensemble.front().X.grid();
    const double gamma = ensemble.front().gamma;
    const double alpha = gamma / 2.0 - 0.5;
    struct Item {
        const char* name;
        double predicted;
        SpectralField (*pick)(const ParacontrolledState&);
    };
    const Item items[] = {
        {"X", alpha, [](const ParacontrolledState& s) { return s.X.back(); }},
        {"Q", alpha + gamma - 1.0, [](const ParacontrolledState& s) { return s.Q.back(); }},
        {"u_prime<<Q", alpha + gamma - 1.0, [](const ParacontrolledState& s) { return s.w.back(); }},
        {"u_sharp", 0.5, [](const ParacontrolledState& s) { return s.u_sharp.back(); }},
        {"u", alpha, [](const ParacontrolledState& s) { return s.u_assembled.back(); }},
        {"u_prime-X", alpha + gamma - 1.0, [](const ParacontrolledState& s) { return s.u_prime.back() - s.X.back(); }},
    };
    std::vector<ExponentRow> rows;
    const int j_top = j_max(grid) - 2;
    for (const auto& item : items) {
        BlockStatistics stats(grid);
        for (const auto& s : ensemble) {
            require(s.X.grid() == grid, ErrorKind::Dimension, "regularity_report: mixed grids");
            stats.add(item.pick(s));
        }
        const auto fit = fit_regularity(stats, p);
        ExponentRow row{item.name, fit.alpha, fit.stderr_alpha, item.predicted, ""};
        // A fit over blocks 2..j_top cannot resolve exponents far above the top block's dynamic range.
        if (item.predicted > 1.0) row.note = "prediction above 1; fit window caps at j<=" + std::to_string(j_top);
        if (std::string(item.name) == "u_sharp") row.note = "lower bound: 1/2 + delta";
        rows.push_back(row);
    }
    return rows;
}

}  // namespace frb
