#pragma once

#include <Eigen/Dense>

#include "corona/linop.hpp"
#include "corona/movie.hpp"
#include "corona/svd.hpp"

namespace corona {

/// Regularization weights of the convex program:
///   min 0.5*||D - (H1 L + H2 S)||_F^2 + lambda1*||L||_* + lambda2*||S||_{1,2}
struct RegWeights {
    double lambda1 = 0.02;   // nuclear-norm weight
    double lambda2 = 0.001;  // mixed l1,2 weight
};

/// Result of singular value thresholding, keeping the shrunk spectrum so
/// callers can reuse it (nuclear norm of the result is shrunk.sum()).
struct SvtResult {
    CasoratiMatrix value;
    Eigen::VectorXd shrunk;  // max(sigma - alpha, 0), descending

    /// Rank after shrinkage; values below 1e-12 * max are noise, not rank.
    int rank() const {
        if (shrunk.size() == 0) return 0;
        const double floor = 1e-12 * shrunk(0);
        int r = 0;
        for (long i = 0; i < shrunk.size(); ++i)
            if (shrunk(i) > floor) ++r;
        return r;
    }
};

/// SVT_alpha(X) = U diag(max(0, sigma_i - alpha)) V^H.
SvtResult svt(const CasoratiMatrix& mat, double alpha);

/// Rows scaled by max(0, 1 - alpha/||row||_2); zero rows stay zero.
CasoratiMatrix row_soft_threshold(const CasoratiMatrix& mat, double alpha);

/// Sum of singular values.
double nuclear_norm(const CasoratiMatrix& mat);

/// Sum of l2 norms of the rows.
double l12_norm(const CasoratiMatrix& mat);

/// Value of the convex objective at (L, S).
double objective(const CasoratiMatrix& d, const CasoratiMatrix& l, const CasoratiMatrix& s,
                 const MeasurementOps& ops, const RegWeights& weights);

}  // namespace corona
