#include "corona/solver.hpp"

#include <cmath>

#include "corona/errors.hpp"

namespace corona {

std::pair<CasoratiMatrix, CasoratiMatrix> gradient_step(const CasoratiMatrix& l,
                                                        const CasoratiMatrix& s,
                                                        const CasoratiMatrix& d,
                                                        const MeasurementOps& ops,
                                                        double lipschitz) {
    if (lipschitz <= 0.0) throw ConfigError("gradient_step: lipschitz must be > 0");
    if (l.rows() != s.rows() || l.cols() != s.cols())
        throw ShapeError("gradient_step: L and S shapes differ");
    const CasoratiMatrix residual = ops.h1_apply(l) + ops.h2_apply(s) - d;
    if (residual.rows() != d.rows() || residual.cols() != d.cols())
        throw ShapeError("gradient_step: measurement output does not match D");
    const double inv = 1.0 / lipschitz;
    CasoratiMatrix g1 = l - inv * ops.h1_adjoint(residual);
    CasoratiMatrix g2 = s - inv * ops.h2_adjoint(residual);
    return {std::move(g1), std::move(g2)};
}

namespace {

SolveResult run_solver(const CasoratiMatrix& d, const MeasurementOps& ops,
                       const SolverConfig& cfg, bool momentum, const IterateObserver& observer) {
    if (cfg.max_iters < 1) throw ConfigError("solver: max_iters must be >= 1");
    if (cfg.rel_tol < 0.0) throw ConfigError("solver: rel_tol must be >= 0");
    if (cfg.weights.lambda1 < 0.0 || cfg.weights.lambda2 < 0.0)
        throw ConfigError("solver: lambda weights must be >= 0");

    const CasoratiMatrix adj1 = ops.h1_adjoint(d);
    const long rows = adj1.rows();
    const long cols = adj1.cols();

    SolverState st;
    st.lipschitz = cfg.lipschitz ? *cfg.lipschitz : lipschitz_constant(ops, rows, cols);
    if (st.lipschitz <= 0.0) throw ConfigError("solver: Lipschitz constant must be > 0");
    const double thr_l = cfg.weights.lambda1 / st.lipschitz;
    const double thr_s = cfg.weights.lambda2 / st.lipschitz;

    st.L = CasoratiMatrix::Zero(rows, cols);
    st.S = CasoratiMatrix::Zero(rows, cols);
    st.L_extrap = st.L;
    st.S_extrap = st.S;
    st.momentum_t = 1.0;

    for (int k = 0; k < cfg.max_iters; ++k) {
        const CasoratiMatrix& l_point = momentum ? st.L_extrap : st.L;
        const CasoratiMatrix& s_point = momentum ? st.S_extrap : st.S;
        auto [g1, g2] = gradient_step(l_point, s_point, d, ops, st.lipschitz);

        SvtResult svt_res = svt(g1, thr_l);
        CasoratiMatrix l_next = std::move(svt_res.value);
        CasoratiMatrix s_next = row_soft_threshold(g2, thr_s);
        if (!l_next.allFinite() || !s_next.allFinite())
            throw ConvergenceError("solver: non-finite iterate at iteration " +
                                   std::to_string(k + 1));

        const double change =
            std::sqrt((l_next - st.L).squaredNorm() + (s_next - st.S).squaredNorm());
        const double scale =
            std::max(std::sqrt(st.L.squaredNorm() + st.S.squaredNorm()), 1e-30);

        if (momentum) {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * st.momentum_t * st.momentum_t));
            const double beta = (st.momentum_t - 1.0) / t_next;
            st.L_extrap = l_next + beta * (l_next - st.L);
            st.S_extrap = s_next + beta * (s_next - st.S);
            st.momentum_t = t_next;
        }
        st.L = std::move(l_next);
        st.S = std::move(s_next);
        st.iter = k + 1;

        // Nuclear norm of the new L is the sum of the shrunk spectrum.
        const double fidelity =
            0.5 * (d - ops.h1_apply(st.L) - ops.h2_apply(st.S)).squaredNorm();
        st.objective_history.push_back(fidelity + cfg.weights.lambda1 * svt_res.shrunk.sum() +
                                       cfg.weights.lambda2 * l12_norm(st.S));

        if (observer) observer(st.iter, st.L, st.S);

        if (change / scale < cfg.rel_tol) {
            st.converged = true;
            break;
        }
    }
    return SolveResult{st.L, st.S, std::move(st)};
}

}  // namespace

SolveResult ista_solve(const CasoratiMatrix& d, const MeasurementOps& ops,
                       const SolverConfig& cfg, const IterateObserver& observer) {
    return run_solver(d, ops, cfg, /*momentum=*/false, observer);
}

SolveResult fista_solve(const CasoratiMatrix& d, const MeasurementOps& ops,
                        const SolverConfig& cfg, const IterateObserver& observer) {
    return run_solver(d, ops, cfg, /*momentum=*/true, observer);
}

SolveResult solve(const CasoratiMatrix& d, const MeasurementOps& ops, const SolverConfig& cfg,
                  const IterateObserver& observer) {
    return run_solver(d, ops, cfg, cfg.variant == SolverVariant::Fista, observer);
}

}  // namespace corona
