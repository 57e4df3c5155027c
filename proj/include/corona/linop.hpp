#pragma once

#include <functional>

#include <Eigen/Dense>

#include "corona/movie.hpp"

namespace corona {

using MatrixOp = std::function<CasoratiMatrix(const CasoratiMatrix&)>;

/// Measurement operators H1, H2 with adjoints, acting on Casorati matrices.
struct MeasurementOps {
    MatrixOp h1_apply, h1_adjoint;
    MatrixOp h2_apply, h2_adjoint;

    /// Identity pair: D = L + S + N acquisition.
    static MeasurementOps identity();

    /// Both operators as explicit dense matrices acting from the left.
    static MeasurementOps from_matrices(const Eigen::MatrixXcd& h1, const Eigen::MatrixXcd& h2);

    /// Verify <H x, y> = <x, H^H y> on `probes` random probe pairs.
    /// Returns the worst relative mismatch over both operators.
    double adjoint_mismatch(long rows, long cols, int probes = 4, unsigned seed = 0x5eed) const;
};

/// Linear operator on stacked (L, S) pairs.
using PairOp = std::function<void(const CasoratiMatrix& l_in, const CasoratiMatrix& s_in,
                                  CasoratiMatrix& l_out, CasoratiMatrix& s_out)>;

struct SpectralNormOptions {
    double rel_tol = 1e-9;
    int max_iters = 20000;
    unsigned seed = 0x9e3779b9;
};

/// Largest eigenvalue of a Hermitian PSD operator on stacked (L, S) pairs,
/// by power iteration. For B = A^H A this is the squared spectral norm of A,
/// i.e. the Lipschitz constant of the quadratic term.
/// Throws ConvergenceError if the iteration cap is reached.
double spectral_norm(const PairOp& apply, long rows, long cols,
                     const SpectralNormOptions& opts = {});

/// Lipschitz constant of the quadratic data term for the given measurements:
/// spectral norm of A^H A with A = [H1 H2] acting on stacked (L, S).
double lipschitz_constant(const MeasurementOps& ops, long rows, long cols,
                          const SpectralNormOptions& opts = {});

}  // namespace corona
