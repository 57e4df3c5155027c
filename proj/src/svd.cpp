#include "corona/svd.hpp"

#include <cmath>

#include "corona/errors.hpp"

namespace corona {

SvdFactors svd(const Eigen::MatrixXcd& mat) {
    if (!mat.allFinite()) throw SvdError("svd: input contains NaN/Inf");

    Eigen::JacobiSVD<Eigen::MatrixXcd> backend(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (backend.info() != Eigen::Success)
        throw SvdError("svd: backend did not converge");

    SvdFactors f;
    f.U = backend.matrixU();
    f.singular_values = backend.singularValues();
    f.V = backend.matrixV();

    // Phase convention: rotate each (u_i, v_i) pair so the largest-magnitude
    // entry of u_i is real positive. Leaves U diag(s) V^H unchanged.
    const long r = f.singular_values.size();
    for (long i = 0; i < r; ++i) {
        long imax = 0;
        f.U.col(i).cwiseAbs().maxCoeff(&imax);
        const Complex pivot = f.U(imax, i);
        const double mag = std::abs(pivot);
        if (mag > 0.0) {
            const Complex phase = std::conj(pivot) / mag;
            f.U.col(i) *= phase;
            f.V.col(i) *= phase;
        }
    }
    return f;
}

}  // namespace corona
