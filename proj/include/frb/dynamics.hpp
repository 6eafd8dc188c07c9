//==============================================================================
// dynamics.hpp
// Mild solutions of
//     d_t u = -|D|^gamma u + 1/2 d_x(u^2) [- 3/2 (1 - d_xx)^{-1} d_x(u^2)] + xi
// through the remainder v = u - X: Picard iteration of
//     v = P(t)u0 + int_0^t P(t-s) N(v + X)(s) ds
// with the time integral done per mode by the exponential trapezoid rule.
//==============================================================================
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "frb/time_path.hpp"

namespace frb {

enum class Equation { Burgers, DP };

std::string to_string(Equation e);
Equation equation_from_string(const std::string& s);

struct SolverConfig {
    double gamma = 2.0;
    double T = 1.0;
    double dt = 1e-3;
    TorusGrid grid{64};
    Equation equation = Equation::Burgers;
    double picard_tol = 1e-9;
    int picard_max_iters = 60;
    double s_work = 0.55;

    /// Throws Error(Config) on violation.
    void validate() const;
    int n_steps() const;
};

/// P(t)f, multiplier e^{-t|k|^gamma}.
SpectralField semigroup(const SpectralField& f, double t, double gamma);
/// (1 - d_xx)^{-1} d_x f, symbol ik/(1 + k^2).
SpectralField dp_multiplier(const SpectralField& f);
/// 1/2 d_x(u^2), and for DP additionally -3/2 (1 - d_xx)^{-1} d_x(u^2).
SpectralField nonlinearity(const SpectralField& u, Equation eq);

/// Per-mode exponential trapezoid step for y' = -|k|^gamma y + h with h linear on the step.
class EtdStepper {
public:
    EtdStepper(TorusGrid grid, double gamma, double dt);
    /// y <- e^{-lam dt} y + a h_n + b h_{n+1}
    void step(SpectralField& y, const SpectralField& h_n, const SpectralField& h_np1) const;
    double decay(int k) const { return e_[static_cast<std::size_t>(k)]; }
    double weight_old(int k) const { return a_[static_cast<std::size_t>(k)]; }
    double weight_new(int k) const { return b_[static_cast<std::size_t>(k)]; }

private:
    std::vector<double> e_, a_, b_;
};

/// y(t_n) = int_0^{t_n} P(t_n - s) h(s) ds with h piecewise linear on the path grid.
TimePath duhamel_path(const TimePath& h, double gamma);
/// P(t_n) u0 for t_n = n dt, n < n_times.
TimePath semigroup_path(const SpectralField& u0, double dt, std::size_t n_times, double gamma, double t0 = 0.0);
/// B(f, g)(t_index) = int_0^t P(t - s) 1/2 d_x(f g)(s) ds.
SpectralField duhamel_bilinear(const TimePath& f, const TimePath& g, std::size_t t_index, double gamma);

struct IterationReport {
    std::vector<double> increments;  // C_T H^{s_work} norm of successive differences
    double contraction_ratio = 0.0;  // last increment over the previous one
    double max_ratio = 0.0;          // over iterations >= 2
    int iterations = 0;
    bool converged = false;
    double t_local = 0.0;
    int halvings = 0;
    std::vector<std::string> notes;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, IterationReport report)
        : Error(ErrorKind::Divergence, what), report_(std::move(report)) {}
    const IterationReport& report() const noexcept { return report_; }

private:
    IterationReport report_;
};

struct LocalSolution {
    TimePath v;
    IterationReport report;
};

/// Fixed point on [0, T_local], T_local = min(T, horizon of X) halved on non-contraction
/// (floor 8 dt). X must share the solver's dt and grid.
LocalSolution solve_local(const SpectralField& u0, const TimePath& X, const SolverConfig& cfg);

struct WindowReport {
    double t_start = 0.0;
    double t_local = 0.0;
    double join_jump = 0.0;         // ||v(t_join-) - v(t_join+)||_{L2}
    double overlap_mismatch = 0.0;  // sup over the overlap of the two windows' L2 distance
    IterationReport report;
};

struct GlobalSolution {
    TimePath v;
    std::vector<WindowReport> windows;
    double max_join_jump = 0.0;
    double max_overlap_mismatch = 0.0;
};

class ContinuationError : public DivergenceError {
public:
    ContinuationError(const std::string& what, IterationReport report, std::shared_ptr<const TimePath> partial,
                      double failed_at)
        : DivergenceError(what, std::move(report)), partial_(std::move(partial)), failed_at_(failed_at) {}
    /// Glued path up to the start of the failing window (later times are zero).
    const TimePath& partial() const noexcept { return *partial_; }
    double failed_at() const noexcept { return failed_at_; }

private:
    std::shared_ptr<const TimePath> partial_;
    double failed_at_;
};

/// Repeated local solves over [0, horizon of X], each restarting from the midpoint of the previous window.
GlobalSolution continue_global(const SpectralField& u0, const TimePath& X, const SolverConfig& cfg);

/// Per-time ||u - P(t)u(0) - int P N(u) - X||_{L2} for a full solution u (X included).
std::vector<double> mild_residual(const TimePath& u, const TimePath& X, double gamma, Equation eq);

//------------------------------------------------------------------------------
// Energy diagnostics
//------------------------------------------------------------------------------
struct EnergyLedger {
    std::vector<double> times;
    std::vector<double> l2_sq;             // ||v||^2
    std::vector<double> dissipation;       // int_0^t ||Lambda^{gamma/2} v||^2
    std::vector<double> balance_residual;  // step defect of d/dt||v||^2 = -2||Lambda^{gamma/2}v||^2 + 2<v, N>; 0 at t_0
    std::vector<double> dp_functional;     // <(1 - d_xx) v, (4 - d_xx)^{-1} v>
    std::vector<double> skew_defect;       // <v, d_x(v^2)>

    double max_abs_residual() const;
};

/// With nonlinear = false the forcing pairing is dropped (pure linear decay).
EnergyLedger energy_ledger(const TimePath& v, const TimePath& X, double gamma, Equation eq, bool nonlinear = true);

/// Midpoint of the admissible W^alpha exponents (max(1/4, 1 - gamma/2), gamma/2 - 1/2) for the
/// energy bound; Error(Domain) for gamma <= 3/2 where the interval is empty.
double energy_w_exponent(double gamma);
/// Energy-type bound  ||v||^2 + 1/2 int ||v||^2_{H^{gamma/2}}  <=  envelope.
std::vector<double> gronwall_lhs(const TimePath& v, double gamma);
/// ||u0||^2 e^{C K t} + C int_0^t e^{C K (t-s)} ||X(s)||_W^4 ds with K = 1 + sup_{[0,T]} ||X||_W^{gamma/(gamma-1)}.
std::vector<double> gronwall_envelope(double C, double u0_sq, const std::vector<double>& x_w_norms, double dt,
                                      double gamma);
/// Smallest C (relative precision 1e-6) with lhs <= envelope at all times, over all runs.
double fit_gronwall_constant(const std::vector<std::vector<double>>& lhs, const std::vector<double>& u0_sq,
                             const std::vector<std::vector<double>>& x_w_norms, double dt, double gamma);

}  // namespace frb
