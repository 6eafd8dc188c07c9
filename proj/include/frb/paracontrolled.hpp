//==============================================================================
// paracontrolled.hpp
// The ansatz u = X + u' << Q + u#, with L Q = d_x X, solved as a coupled fixed
// point for (u', u#) with u^Q = u' << Q + u#:
//     u'  = X + u^Q
//     u#  = P(t)u0 + D[ 1/2 d_x(X^2) - X < d_x X + 1/2 d_x((u^Q)^2)
//                       + d_x(u^Q X) - u^Q < d_x X + u' < d_x X ] - D[L(u' << Q)]
// where D is the Duhamel integral. D[L w] is evaluated as w - P(t)w(0), which is
// exact for the continuous operator; the stencil version is reported as a defect.
//==============================================================================
#pragma once

#include <span>
#include <string>
#include <vector>

#include "frb/besov.hpp"
#include "frb/dynamics.hpp"
#include "frb/paraproduct.hpp"

namespace frb {

/// Q(t) = int_0^t P(t - s) d_x X(s) ds by the exponential trapezoid rule.
TimePath build_Q(const TimePath& X, double gamma);

struct ParacontrolledState {
    TimePath X, Q, u_prime, u_sharp, w, u_assembled;  // w = u' << Q
    double gamma = 0.0;
    bool in_proof_range = false;    // 5/4 < gamma <= 4/3
    double assembly_defect = 0.0;   // sup_t ||u_assembled - X - w - u#||_{L2}
    double stencil_defect = 0.0;    // sup_t ||D[L_h w] - (w - P w(0))||_{L2}, L_h the forward-difference stencil
};

struct ParacontrolledSolution {
    ParacontrolledState state;
    IterationReport report;  // increments in 2||du#||_{H^s} + ||du'||_{H^{s'}}, s' = 1/8 + (s - 1/2)
};

/// Burgers only. Window handling and errors as in solve_local.
ParacontrolledSolution solve_paracontrolled(const SpectralField& u0, const TimePath& X, const SolverConfig& cfg);

/// Per-time L2 residual of u_assembled in the mild Burgers equation.
std::vector<double> residual_mild(const ParacontrolledState& state);

struct ExponentRow {
    std::string name;
    double fitted = 0.0;
    double stderr_fit = 0.0;
    double predicted = 0.0;
    std::string note;
};

/// Fitted exponents (holder_moment_sup for LInf, sobolev_block_l2 for L2) at the final time for X, Q, u'<<Q, u#, u and u'-X,
/// next to the predictions alpha, alpha+gamma-1, alpha+gamma-1, 1/2, alpha, alpha+gamma-1
/// with alpha = gamma/2 - 1/2. Needs at least 20 states on one grid.
std::vector<ExponentRow> regularity_report(std::span<const ParacontrolledState> ensemble,
                                           Integrability p = Integrability::LInf);

}  // namespace frb
