#include "corona/prox.hpp"

#include <cmath>

#include "corona/errors.hpp"

namespace corona {

SvtResult svt(const CasoratiMatrix& mat, double alpha) {
    if (alpha < 0.0) throw ConfigError("svt: alpha must be >= 0");
    SvdFactors f = svd(mat);
    SvtResult res;
    res.shrunk = (f.singular_values.array() - alpha).cwiseMax(0.0);
    res.value = f.U * res.shrunk.asDiagonal() * f.V.adjoint();
    return res;
}

CasoratiMatrix row_soft_threshold(const CasoratiMatrix& mat, double alpha) {
    if (alpha < 0.0) throw ConfigError("row_soft_threshold: alpha must be >= 0");
    CasoratiMatrix out(mat.rows(), mat.cols());
    for (long i = 0; i < mat.rows(); ++i) {
        const double nrm = mat.row(i).norm();
        const double scale = (nrm > alpha) ? 1.0 - alpha / nrm : 0.0;  // 0/0 -> 0
        out.row(i) = scale * mat.row(i);
    }
    return out;
}

double nuclear_norm(const CasoratiMatrix& mat) {
    return svd(mat).singular_values.sum();
}

double l12_norm(const CasoratiMatrix& mat) {
    double acc = 0.0;
    for (long i = 0; i < mat.rows(); ++i) acc += mat.row(i).norm();
    return acc;
}

double objective(const CasoratiMatrix& d, const CasoratiMatrix& l, const CasoratiMatrix& s,
                 const MeasurementOps& ops, const RegWeights& weights) {
    if (l.rows() != s.rows() || l.cols() != s.cols())
        throw ShapeError("objective: L and S shapes differ");
    const CasoratiMatrix predicted = ops.h1_apply(l) + ops.h2_apply(s);
    if (predicted.rows() != d.rows() || predicted.cols() != d.cols())
        throw ShapeError("objective: measurement output does not match D");
    const double fidelity = 0.5 * (d - predicted).squaredNorm();
    return fidelity + weights.lambda1 * nuclear_norm(l) + weights.lambda2 * l12_norm(s);
}

}  // namespace corona
