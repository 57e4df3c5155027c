#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "corona/linop.hpp"
#include "corona/movie.hpp"
#include "corona/prox.hpp"

namespace corona {

enum class SolverVariant { Ista, Fista };

struct SolverConfig {
    RegWeights weights;
    int max_iters = 30000;
    double rel_tol = 1e-7;
    std::optional<double> lipschitz;  // nullopt: estimate via power iteration
    SolverVariant variant = SolverVariant::Fista;
};

struct SolverState {
    CasoratiMatrix L, S;
    int iter = 0;
    double momentum_t = 1.0;          // FISTA t_k
    CasoratiMatrix L_extrap, S_extrap;  // FISTA extrapolated point
    std::vector<double> objective_history;  // one entry per completed iteration
    double lipschitz = 0.0;           // value actually used
    bool converged = false;
};

struct SolveResult {
    CasoratiMatrix L, S;
    SolverState state;
};

/// Called after each iteration with the current iterates.
using IterateObserver = std::function<void(int iter, const CasoratiMatrix& L,
                                           const CasoratiMatrix& S)>;

/// One proximal-gradient pre-image: (G1, G2) = (L, S) - (1/L_f) * grad of the
/// quadratic term, i.e.
///   G1 = L - (1/L_f) H1^H (H1 L + H2 S - D)
///   G2 = S - (1/L_f) H2^H (H1 L + H2 S - D)
std::pair<CasoratiMatrix, CasoratiMatrix> gradient_step(const CasoratiMatrix& l,
                                                        const CasoratiMatrix& s,
                                                        const CasoratiMatrix& d,
                                                        const MeasurementOps& ops,
                                                        double lipschitz);

/// Proximal-gradient (ISTA) minimization of the convex objective.
/// Thresholds are lambda1/L_f for SVT and lambda2/L_f for row shrinkage.
/// Stops at max_iters or when the relative change of the stacked iterate
/// falls below rel_tol.
SolveResult ista_solve(const CasoratiMatrix& d, const MeasurementOps& ops,
                       const SolverConfig& cfg, const IterateObserver& observer = nullptr);

/// Momentum-accelerated variant (extrapolation over the stacked pair, no
/// restarting). Objective history is recorded but need not be monotone.
SolveResult fista_solve(const CasoratiMatrix& d, const MeasurementOps& ops,
                        const SolverConfig& cfg, const IterateObserver& observer = nullptr);

/// Dispatch on cfg.variant.
SolveResult solve(const CasoratiMatrix& d, const MeasurementOps& ops, const SolverConfig& cfg,
                  const IterateObserver& observer = nullptr);

}  // namespace corona
