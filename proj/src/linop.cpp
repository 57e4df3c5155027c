#include "corona/linop.hpp"

#include <cmath>
#include <random>

#include "corona/errors.hpp"

namespace corona {

MeasurementOps MeasurementOps::identity() {
    MatrixOp id = [](const CasoratiMatrix& x) { return x; };
    return MeasurementOps{id, id, id, id};
}

MeasurementOps MeasurementOps::from_matrices(const Eigen::MatrixXcd& h1,
                                             const Eigen::MatrixXcd& h2) {
    MeasurementOps ops;
    ops.h1_apply = [h1](const CasoratiMatrix& x) { return CasoratiMatrix(h1 * x); };
    ops.h1_adjoint = [h1](const CasoratiMatrix& y) { return CasoratiMatrix(h1.adjoint() * y); };
    ops.h2_apply = [h2](const CasoratiMatrix& x) { return CasoratiMatrix(h2 * x); };
    ops.h2_adjoint = [h2](const CasoratiMatrix& y) { return CasoratiMatrix(h2.adjoint() * y); };
    return ops;
}

namespace {

CasoratiMatrix random_matrix(long rows, long cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    CasoratiMatrix m(rows, cols);
    for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i) m(i, j) = Complex(gauss(rng), gauss(rng));
    return m;
}

double real_inner(const CasoratiMatrix& a, const CasoratiMatrix& b) {
    return (a.conjugate().cwiseProduct(b)).sum().real();
}

}  // namespace

double MeasurementOps::adjoint_mismatch(long rows, long cols, int probes, unsigned seed) const {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const CasoratiMatrix x = random_matrix(rows, cols, rng);
        for (const auto& [fwd, adj] : {std::pair{h1_apply, h1_adjoint}, {h2_apply, h2_adjoint}}) {
            const CasoratiMatrix hx = fwd(x);
            const CasoratiMatrix y = random_matrix(hx.rows(), hx.cols(), rng);
            const Complex lhs = (hx.conjugate().cwiseProduct(y)).sum();
            const Complex rhs = (x.conjugate().cwiseProduct(adj(y))).sum();
            const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
            worst = std::max(worst, std::abs(lhs - rhs) / scale);
        }
    }
    return worst;
}

double spectral_norm(const PairOp& apply, long rows, long cols, const SpectralNormOptions& opts) {
    std::mt19937_64 rng(opts.seed);
    CasoratiMatrix vl = random_matrix(rows, cols, rng);
    CasoratiMatrix vs = random_matrix(rows, cols, rng);
    CasoratiMatrix wl(rows, cols), ws(rows, cols);

    double lambda = 0.0;
    for (int k = 0; k < opts.max_iters; ++k) {
        const double nrm = std::sqrt(vl.squaredNorm() + vs.squaredNorm());
        if (nrm == 0.0) return 0.0;  // operator annihilated the probe
        vl /= nrm;
        vs /= nrm;
        apply(vl, vs, wl, ws);
        const double next = real_inner(vl, wl) + real_inner(vs, ws);  // Rayleigh quotient
        if (!std::isfinite(next)) throw ConvergenceError("spectral_norm: non-finite iterate");
        if (k > 0 && std::abs(next - lambda) <= opts.rel_tol * std::max(std::abs(next), 1e-30)) {
            return next;
        }
        lambda = next;
        vl = wl;
        vs = ws;
    }
    throw ConvergenceError("spectral_norm: no convergence after " +
                           std::to_string(opts.max_iters) + " iterations");
}

double lipschitz_constant(const MeasurementOps& ops, long rows, long cols,
                          const SpectralNormOptions& opts) {
    PairOp normal_op = [&ops](const CasoratiMatrix& l, const CasoratiMatrix& s,
                              CasoratiMatrix& lo, CasoratiMatrix& so) {
        const CasoratiMatrix r = ops.h1_apply(l) + ops.h2_apply(s);
        lo = ops.h1_adjoint(r);
        so = ops.h2_adjoint(r);
    };
    return spectral_norm(normal_op, rows, cols, opts);
}

}  // namespace corona
