#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "corona/conv.hpp"
#include "corona/movie.hpp"

namespace corona {

/// One unfolded layer: six complex convolution kernels with bias scalars and
/// two learned threshold logits.
struct LayerParams {
    ConvKernel2D p1, p2, p3, p4, p5, p6;
    Complex b1{}, b2{}, b3{}, b4{}, b5{}, b6{};
    double lambda_l = 0.0;  // SVT threshold logit
    double lambda_s = 0.0;  // row-threshold logit
};

/// Unfolded proximal-gradient network (CORONA). Layer k maps (L, S) to
///   L' = SVT_thrL{ p5*L + p3*S + p1*D }   (SVT on the Casorati unfolding)
///   S' = T_thrS { p6*L + p4*S + p2*D }    (row shrinkage on the unfolding)
/// with data-adaptive thresholds
///   thrL = sigmoid(lambda_l) * a_l * max|pre_L|,
///   thrS = sigmoid(lambda_s) * a_s * mean|pre_S|.
struct CoronaNetwork {
    std::vector<LayerParams> layers;
    double a_l = 0.4;
    double a_s = 1.8;

    int depth() const { return static_cast<int>(layers.size()); }
};

/// Kernel extent for each layer under the default schedule: 5x5 for the
/// first three layers, 3x3 after (same padding throughout).
int default_kernel_extent(int layer_index);

/// Thresholds from the tensors entering the proximal operators.
std::pair<double, double> compute_thresholds(const MovieTensor& pre_l, const MovieTensor& pre_s,
                                             const LayerParams& params, double a_l, double a_s);

struct ForwardOptions {
    /// Per-layer pinned (thr_L, thr_S) constants, bypassing the learned
    /// data-adaptive thresholds. Size must equal the network depth.
    std::optional<std::vector<std::pair<double, double>>> pinned_thresholds;
};

/// One layer forward. Pinned thresholds override the learned rule when given.
std::pair<MovieTensor, MovieTensor> forward_layer(const MovieTensor& d, const MovieTensor& l,
                                                  const MovieTensor& s, const LayerParams& params,
                                                  double a_l, double a_s,
                                                  const std::optional<std::pair<double, double>>&
                                                      pinned = std::nullopt);

/// Full forward pass from L = S = 0.
std::pair<MovieTensor, MovieTensor> forward(const MovieTensor& d, const CoronaNetwork& net,
                                            const ForwardOptions& opts = {});

/// Network whose forward pass reproduces K proximal-gradient iterations with
/// identity measurements: p1 = p2 = (1/L_f) delta, p4 = p5 = (1 - 1/L_f) delta,
/// p3 = p6 = -(1/L_f) delta, zero biases, threshold logits at -8 (near-zero
/// initial thresholds).
CoronaNetwork init_from_ista(int depth, double lipschitz);

/// Default training initialization: ISTA kernels with +-1% relative tap
/// jitter to break symmetry.
CoronaNetwork init_default(int depth, double lipschitz, std::mt19937_64& rng);

/// Fully random initialization (ablation path).
CoronaNetwork init_random(int depth, double scale, std::mt19937_64& rng);

/// Versioned binary weight container; save -> load -> save is byte-identical.
void save_weights(const CoronaNetwork& net, const std::filesystem::path& path);
CoronaNetwork load_weights(const std::filesystem::path& path);

}  // namespace corona
