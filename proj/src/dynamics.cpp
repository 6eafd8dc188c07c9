#include "frb/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace frb {

std::string to_string(Equation e) { return e == Equation::Burgers ? "burgers" : "dp"; }

Equation equation_from_string(const std::string& s) {
    if (s == "burgers") return Equation::Burgers;
    if (s == "dp") return Equation::DP;
    throw Error(ErrorKind::Config, "unknown equation '" + s + "' (expected burgers or dp)");
}

void SolverConfig::validate() const {
    require(gamma > 1.0 && gamma <= 2.0, ErrorKind::Config, "solver: gamma must lie in (1, 2]");
    require(T > 0.0 && std::isfinite(T), ErrorKind::Config, "solver: T must be positive");
    require(dt > 0.0 && dt < T, ErrorKind::Config, "solver: need 0 < dt < T");
    require(picard_tol > 0.0, ErrorKind::Config, "solver: picard_tol must be positive");
    require(picard_max_iters >= 1, ErrorKind::Config, "solver: picard_max_iters must be >= 1");
    require(s_work > 0.5, ErrorKind::Config, "solver: s_work must exceed 1/2");
}

int SolverConfig::n_steps() const { return static_cast<int>(std::lround(T / dt)); }

SpectralField semigroup(const SpectralField& f, double t, double gamma) {
    require(t >= 0.0, ErrorKind::Domain, "semigroup: t must be >= 0");
    return apply_multiplier(f, [&](int k) { return std::exp(-t * std::pow(double(k), gamma)); });
}

SpectralField dp_multiplier(const SpectralField& f) {
    return apply_multiplier(f, [](int k) { return cplx(0.0, k / (1.0 + double(k) * k)); });
}

SpectralField nonlinearity(const SpectralField& u, Equation eq) {
    const auto sq = dealiased_product(u, u);
    if (eq == Equation::Burgers) return apply_multiplier(sq, [](int k) { return cplx(0.0, 0.5 * k); });
    return apply_multiplier(sq, [](int k) { return cplx(0.0, 0.5 * k - 1.5 * k / (1.0 + double(k) * k)); });
}

//------------------------------------------------------------------------------
// Exponential trapezoid
//------------------------------------------------------------------------------
namespace {

// phi1(z) = (1 - e^{-z})/z and psi(z) = (1 - e^{-z}(1 + z))/z^2, by series near 0.
void etd_functions(double z, double& phi1, double& psi) {
    if (z < 0.1) {
        phi1 = psi = 0.0;
        double term = 1.0;  // (-z)^n / n!
        for (int n = 0; n < 14; ++n) {
            phi1 += term / (n + 1);
            psi += term / (n + 2);
            term *= -z / (n + 1);
        }
        return;
    }
    const double e = std::exp(-z);
    phi1 = (1.0 - e) / z;
    psi = (1.0 - e * (1.0 + z)) / (z * z);
}

}  // namespace

EtdStepper::EtdStepper(TorusGrid grid, double gamma, double dt) {
    const auto n = static_cast<std::size_t>(grid.nyquist() + 1);
    e_.resize(n);
    a_.resize(n);
    b_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double z = std::pow(double(k), gamma) * dt;
        double phi1, psi;
        etd_functions(z, phi1, psi);
        e_[k] = std::exp(-z);
        a_[k] = dt * psi;
        b_[k] = dt * (phi1 - psi);
    }
}

void EtdStepper::step(SpectralField& y, const SpectralField& h_n, const SpectralField& h_np1) const {
    auto yh = y.half();
    const auto h0 = h_n.half(), h1 = h_np1.half();
    for (std::size_t k = 0; k < yh.size(); ++k) yh[k] = e_[k] * yh[k] + a_[k] * h0[k] + b_[k] * h1[k];
}

TimePath duhamel_path(const TimePath& h, double gamma) {
    const EtdStepper etd(h.grid(), gamma, h.dt());
    TimePath y(h.grid(), h.dt(), h.size(), h.t0());
    for (std::size_t n = 0; n + 1 < h.size(); ++n) {
        y[n + 1] = y[n];
        etd.step(y[n + 1], h[n], h[n + 1]);
    }
    return y;
}

TimePath semigroup_path(const SpectralField& u0, double dt, std::size_t n_times, double gamma, double t0) {
    TimePath p(u0.grid(), dt, n_times, t0);
    for (std::size_t n = 0; n < n_times; ++n) p[n] = semigroup(u0, dt * double(n), gamma);
    return p;
}

SpectralField duhamel_bilinear(const TimePath& f, const TimePath& g, std::size_t t_index, double gamma) {
    require_aligned(f, g, "duhamel_bilinear");
    require(t_index < f.size(), ErrorKind::OutOfRange, "duhamel_bilinear: t_index out of range");
    TimePath h(f.grid(), f.dt(), t_index + 1, f.t0());
    for (std::size_t n = 0; n <= t_index; ++n)
        h[n] = apply_multiplier(dealiased_product(f[n], g[n]), [](int k) { return cplx(0.0, 0.5 * k); });
    return duhamel_path(h, gamma)[t_index];
}

//------------------------------------------------------------------------------
// Picard iteration
//------------------------------------------------------------------------------
namespace {

TimePath forcing_path(const TimePath& v, const TimePath& X, Equation eq) {
    TimePath h(v.grid(), v.dt(), v.size(), v.t0());
    for (std::size_t n = 0; n < v.size(); ++n) h[n] = nonlinearity(v[n] + X[n], eq);
    return h;
}

double sup_distance_hs(const TimePath& a, const TimePath& b, double s) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, sobolev_norm(a[n] - b[n], s));
    return m;
}

std::string describe(const IterationReport& r) {
    std::ostringstream os;
    os << "T_local=" << r.t_local << " after " << r.halvings << " halvings, " << r.iterations << " iterations";
    if (!r.increments.empty()) os << ", last increment " << r.increments.back();
    return os.str();
}

}  // namespace

LocalSolution solve_local(const SpectralField& u0, const TimePath& X, const SolverConfig& cfg) {
    cfg.validate();
    require(X.grid() == cfg.grid && u0.grid() == cfg.grid, ErrorKind::Dimension, "solve_local: grid mismatch");
    require(std::abs(X.dt() - cfg.dt) <= 1e-12 * cfg.dt, ErrorKind::Dimension, "solve_local: X and solver dt differ");
    require(u0.is_mean_zero(1e-14 * (1.0 + max_abs_coeff(u0))), ErrorKind::Domain, "solve_local: u0 must be mean-zero");

    IterationReport report;
    int n_w = std::min(static_cast<int>(X.size()) - 1, cfg.n_steps());
    require(n_w >= 1, ErrorKind::InsufficientResolution, "solve_local: X has no time step");
    constexpr int kMinWindow = 8;

    for (;;) {
        report.t_local = n_w * cfg.dt;
        report.increments.clear();
        report.contraction_ratio = report.max_ratio = 0.0;
        const auto Xw = X.slice(0, static_cast<std::size_t>(n_w) + 1);
        const auto lin = semigroup_path(u0, cfg.dt, Xw.size(), cfg.gamma, Xw.t0());
        TimePath v = lin;
        int rising = 0;
        bool contracting = true;
        for (int it = 1; it <= cfg.picard_max_iters; ++it) {
            TimePath next = lin + duhamel_path(forcing_path(v, Xw, cfg.equation), cfg.gamma);
            const double inc = sup_distance_hs(next, v, cfg.s_work);
            v = std::move(next);
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
                return {std::move(v), std::move(report)};
            }
            if (rising >= 3 || !std::isfinite(inc)) {
                contracting = false;
                break;
            }
        }
        if (contracting) throw DivergenceError("solve_local: no convergence within picard_max_iters (" + describe(report) + ")", report);
        if (n_w / 2 < kMinWindow)
            throw DivergenceError("solve_local: non-contraction on the smallest admissible window (" + describe(report) + ")", report);
        n_w /= 2;
        ++report.halvings;
        report.notes.push_back("non-contraction: halved window to " + std::to_string(n_w * cfg.dt));
    }
}

GlobalSolution continue_global(const SpectralField& u0, const TimePath& X, const SolverConfig& cfg) {
    cfg.validate();
    const int n_total = std::min(static_cast<int>(X.size()) - 1, cfg.n_steps());
    GlobalSolution out{TimePath(cfg.grid, cfg.dt, static_cast<std::size_t>(n_total) + 1, X.t0()), {}, 0.0, 0.0};
    out.v[0] = u0;

    int s = 0;
    int window = n_total;
    std::vector<SpectralField> tail;  // previous window beyond its midpoint, starting at time index s
    SpectralField start = u0;
    while (s < n_total) {
        auto local_cfg = cfg;
        const int n_w = std::min(window, n_total - s);
        local_cfg.T = n_w * cfg.dt * (1.0 + 1e-12);
        LocalSolution sol{TimePath(cfg.grid, cfg.dt, 1), {}};
        try {
            sol = solve_local(start, X.slice(static_cast<std::size_t>(s), static_cast<std::size_t>(n_w) + 1), local_cfg);
        } catch (const DivergenceError& e) {
            throw ContinuationError(std::string("continue_global: window at t=") + std::to_string(X.time(std::size_t(s))) +
                                        " failed: " + e.what(),
                                    e.report(), std::make_shared<const TimePath>(out.v), X.time(std::size_t(s)));
        }
        const int got = static_cast<int>(sol.v.size()) - 1;

        WindowReport wr;
        wr.t_start = X.time(static_cast<std::size_t>(s));
        wr.t_local = sol.report.t_local;
        wr.join_jump = l2_norm(sol.v[0] - out.v[static_cast<std::size_t>(s)]);
        for (std::size_t m = 0; m < tail.size() && m < sol.v.size(); ++m)
            wr.overlap_mismatch = std::max(wr.overlap_mismatch, l2_norm(tail[m] - sol.v[m]));
        if (s == 0 && cfg.gamma <= 1.5) sol.report.notes.push_back("gamma <= 3/2: global continuation outside its recommended range");
        wr.report = sol.report;
        out.max_join_jump = std::max(out.max_join_jump, wr.join_jump);
        out.max_overlap_mismatch = std::max(out.max_overlap_mismatch, wr.overlap_mismatch);
        out.windows.push_back(std::move(wr));

        const bool last = (s + got == n_total);
        const int keep = last ? got : std::max(1, got / 2);
        for (int m = 1; m <= keep; ++m) out.v[static_cast<std::size_t>(s + m)] = sol.v[static_cast<std::size_t>(m)];
        tail.clear();
        for (int m = keep; m <= got; ++m) tail.push_back(sol.v[static_cast<std::size_t>(m)]);
        start = sol.v[static_cast<std::size_t>(keep)];
        s += keep;
        window = got;
    }
    return out;
}

std::vector<double> mild_residual(const TimePath& u, const TimePath& X, double gamma, Equation eq) {
    require_aligned(u, X, "mild_residual");
    TimePath h(u.grid(), u.dt(), u.size(), u.t0());
    for (std::size_t n = 0; n < u.size(); ++n) h[n] = nonlinearity(u[n], eq);
    const auto duh = duhamel_path(h, gamma);
    const auto v0 = u[0] - X[0];
    std::vector<double> r(u.size());
    for (std::size_t n = 0; n < u.size(); ++n)
        r[n] = l2_norm(u[n] - X[n] - semigroup(v0, u.dt() * double(n), gamma) - duh[n]);
    return r;
}

//------------------------------------------------------------------------------
// Energy
//------------------------------------------------------------------------------
double EnergyLedger::max_abs_residual() const {
    double m = 0.0;
    for (double r : balance_residual) m = std::max(m, std::abs(r));
    return m;
}

EnergyLedger energy_ledger(const TimePath& v, const TimePath& X, double gamma, Equation eq, bool nonlinear) {
    require_aligned(v, X, "energy_ledger");
    const std::size_t n_t = v.size();
    EnergyLedger L;
    L.times.resize(n_t);
    L.l2_sq.resize(n_t);
    L.dissipation.assign(n_t, 0.0);
    L.balance_residual.assign(n_t, 0.0);
    L.dp_functional.resize(n_t);
    L.skew_defect.resize(n_t);
    std::vector<double> diss(n_t), rhs(n_t);
    for (std::size_t n = 0; n < n_t; ++n) {
        L.times[n] = v.time(n);
        L.l2_sq[n] = l2_norm_sq(v[n]);
        diss[n] = -inner(v[n], frac_laplacian(v[n], gamma));
        const double pairing = nonlinear ? inner(v[n], nonlinearity(v[n] + X[n], eq)) : 0.0;
        rhs[n] = -2.0 * diss[n] + 2.0 * pairing;
        L.dp_functional[n] =
            inner(v[n], apply_multiplier(v[n], [](int k) { return (1.0 + double(k) * k) / (4.0 + double(k) * k); }));
        L.skew_defect[n] = inner(v[n], derivative(dealiased_product(v[n], v[n])));
    }
    const double dt = v.dt();
    for (std::size_t n = 0; n + 1 < n_t; ++n) {
        L.dissipation[n + 1] = L.dissipation[n] + 0.5 * dt * (diss[n] + diss[n + 1]);
        L.balance_residual[n + 1] = (L.l2_sq[n + 1] - L.l2_sq[n]) / dt - 0.5 * (rhs[n] + rhs[n + 1]);
    }
    return L;
}

double energy_w_exponent(double gamma) {
    require(gamma > 1.5 && gamma <= 2.0, ErrorKind::Domain, "energy_w_exponent: gamma must lie in (3/2, 2]");
    const double lo = std::max(0.25, 1.0 - gamma / 2.0), hi = gamma / 2.0 - 0.5;
    return 0.5 * (lo + hi);
}

std::vector<double> gronwall_lhs(const TimePath& v, double gamma) {
    std::vector<double> out(v.size());
    double integral = 0.0, prev = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
        const double h = std::pow(sobolev_norm(v[n], gamma / 2.0), 2);
        if (n > 0) integral += 0.5 * v.dt() * (prev + h);
        prev = h;
        out[n] = l2_norm_sq(v[n]) + 0.5 * integral;
    }
    return out;
}

std::vector<double> gronwall_envelope(double C, double u0_sq, const std::vector<double>& x_w_norms, double dt,
                                      double gamma) {
    double sup_x = 0.0;
    for (double x : x_w_norms) sup_x = std::max(sup_x, x);
    const double K = 1.0 + std::pow(sup_x, gamma / (gamma - 1.0));
    const double grow = std::exp(C * K * dt);
    std::vector<double> out(x_w_norms.size());
    double integral = 0.0;
    for (std::size_t n = 0; n < out.size(); ++n) {
        if (n > 0) integral = grow * integral + 0.5 * dt * (grow * std::pow(x_w_norms[n - 1], 4) + std::pow(x_w_norms[n], 4));
        out[n] = u0_sq * std::exp(C * K * dt * double(n)) + C * integral;
    }
    return out;
}

double fit_gronwall_constant(const std::vector<std::vector<double>>& lhs, const std::vector<double>& u0_sq,
                             const std::vector<std::vector<double>>& x_w_norms, double dt, double gamma) {
    require(lhs.size() == u0_sq.size() && lhs.size() == x_w_norms.size() && !lhs.empty(), ErrorKind::InsufficientData,
            "fit_gronwall_constant: need matching, non-empty runs");
    auto holds = [&](double C) {
        for (std::size_t r = 0; r < lhs.size(); ++r) {
            const auto env = gronwall_envelope(C, u0_sq[r], x_w_norms[r], dt, gamma);
            for (std::size_t n = 0; n < env.size(); ++n)
                if (lhs[r][n] > env[n] * (1.0 + 1e-12) + 1e-300) return false;
        }
        return true;
    };
    double lo = 1e-10, hi = 1.0;
    if (holds(lo)) return lo;
    while (!holds(hi)) {
        hi *= 4.0;
        require(hi < 1e12, ErrorKind::Divergence, "fit_gronwall_constant: no finite constant bounds the runs");
    }
    while (hi / lo > 1.0 + 1e-6) {
        const double mid = std::sqrt(lo * hi);
        (holds(mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace frb
