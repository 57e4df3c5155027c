#pragma once

#include <Eigen/Dense>

#include "corona/movie.hpp"

namespace corona {

/// Thin (economy) SVD factors: input = U * diag(singular_values) * V^H.
/// Column phases of U are fixed so the largest-magnitude entry of each
/// U column is real positive, making the factorization deterministic.
struct SvdFactors {
    Eigen::MatrixXcd U;                // m x r
    Eigen::VectorXd singular_values;   // length r = min(m, n), descending
    Eigen::MatrixXcd V;                // n x r

    Eigen::MatrixXcd reconstruct() const {
        return U * singular_values.asDiagonal() * V.adjoint();
    }
};

/// Thin SVD of a complex matrix. Throws SvdError on non-finite input or
/// backend failure.
SvdFactors svd(const Eigen::MatrixXcd& mat);

}  // namespace corona
