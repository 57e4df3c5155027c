#pragma once

#include <utility>
#include <vector>

#include "corona/movie.hpp"
#include "corona/network.hpp"
#include "corona/svd.hpp"

namespace corona {

/// Everything the reverse pass needs from one layer's forward evaluation.
struct LayerTrace {
    MovieTensor l_in, s_in;
    MovieTensor pre_l, pre_s;     // values entering the proximal operators
    SvdFactors pre_l_svd;         // SVD of unfold(pre_l)
    double thr_l = 0.0, thr_s = 0.0;
    double stat_l = 0.0, stat_s = 0.0;  // max|pre_l|, mean|pre_s|
    std::size_t argmax_index = 0;       // flat index of the max-|.| entry of pre_l
    MovieTensor l_out, s_out;
};

struct ForwardTrace {
    MovieTensor d;
    std::vector<LayerTrace> layers;
    const MovieTensor& l_hat() const { return layers.back().l_out; }
    const MovieTensor& s_hat() const { return layers.back().s_out; }
};

/// Forward pass retaining all intermediates (learned thresholds only).
ForwardTrace forward_trace(const MovieTensor& d, const CoronaNetwork& net);

/// Gradients, stored in the same structure as the parameters.
using NetworkGrads = CoronaNetwork;

/// Same architecture with all taps, biases and logits zeroed.
NetworkGrads zeroed_like(const CoronaNetwork& net);

struct BackwardOptions {
    /// Differentiate through the max/mean threshold statistics. Off by
    /// default (straight-through on the statistic); the gradient-check
    /// suite turns it on.
    bool exact_threshold_grad = false;
    /// Pairs with |s_i - s_j| below this fraction of s_max count as
    /// degenerate; their inverse factors are clamped.
    double degenerate_rel = 1e-6;
};

struct BackwardDiagnostics {
    int degenerate_pairs = 0;  // clamp-regularized singular-value pairs seen
};

/// Gradient convention for complex tensors throughout: g = dLoss/dRe + i*dLoss/dIm.
///
/// Reverse pass over a recorded trace. `g_l_hat` / `g_s_hat` are the loss
/// gradients with respect to the network outputs. Gradients are ACCUMULATED
/// into `grads` (callers zero it first).
BackwardDiagnostics backward(const CoronaNetwork& net, const ForwardTrace& trace,
                             const MovieTensor& g_l_hat, const MovieTensor& g_s_hat,
                             NetworkGrads& grads, const BackwardOptions& opts = {});

/// d/dX of Y = U diag(max(sigma - tau, 0)) V^H given dLoss/dY, plus the
/// threshold gradient dLoss/dtau. Exposed for the oracle tests.
std::pair<Eigen::MatrixXcd, double> svt_backward(const SvdFactors& factors, double tau,
                                                 const Eigen::MatrixXcd& g_out,
                                                 const BackwardOptions& opts,
                                                 BackwardDiagnostics& diag);

/// Backward of the row-wise shrinkage y_i = max(0, 1 - tau/||x_i||) x_i.
/// Subgradient zero inside the dead zone.
std::pair<Eigen::MatrixXcd, double> row_soft_threshold_backward(const Eigen::MatrixXcd& input,
                                                                double tau,
                                                                const Eigen::MatrixXcd& g_out);

/// Flat real-parameter view (taps as re/im pairs, biases, threshold logits),
/// shared by the optimizer and the finite-difference checks.
std::size_t param_count(const CoronaNetwork& net);
std::vector<double> flatten_params(const CoronaNetwork& net);
void unflatten_params(CoronaNetwork& net, const std::vector<double>& flat);

}  // namespace corona
