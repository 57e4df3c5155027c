#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corona/autodiff.hpp"
#include "corona/movie.hpp"
#include "corona/network.hpp"
#include "corona/solver.hpp"

namespace corona {

struct PatchShape {
    int frames = 20;
    int height = 32;
    int width = 32;
};

struct TrainConfig {
    double learning_rate = 0.002;
    int epochs_stage1 = 50;
    int epochs_stage2 = 20;
    int batch_size = 8;
    PatchShape patch_shape;
    double overlap = 0.5;
    std::uint64_t seed = 0;
    double loss_weight_s = 0.5;
    double loss_weight_l = 0.5;
    double validation_fraction = 0.1;

    void validate() const;
};

enum class Provenance { Simulated, SolverLabeled };

struct TrainPair {
    MovieTensor d, s_target, l_target;
    Provenance provenance = Provenance::Simulated;
};

/// Bias-corrected first/second moment optimizer state over the flat real
/// parameter view.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(std::size_t dim) {
        AdamState s;
        s.m.assign(dim, 0.0);
        s.v.assign(dim, 0.0);
        return s;
    }
};

/// One optimizer update over flat parameters; advances the step counter.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               double learning_rate);

/// Batch loss: w_s * mean_i ||S_i - Shat_i||_F^2 + w_l * mean_i ||L_i - Lhat_i||_F^2.
/// With the default (0.5, 0.5) weights this is the sum of the two
/// half-mean-squared errors.
double mse_loss(const std::vector<const MovieTensor*>& s_pred,
                const std::vector<const MovieTensor*>& l_pred,
                const std::vector<const MovieTensor*>& s_tgt,
                const std::vector<const MovieTensor*>& l_tgt, double weight_s, double weight_l);

/// Convenience single-pair form.
double mse_loss(const MovieTensor& s_pred, const MovieTensor& l_pred, const MovieTensor& s_tgt,
                const MovieTensor& l_tgt, double weight_s, double weight_l);

struct PatchOrigin {
    int t = 0, y = 0, x = 0;
};

/// Patch origins covering the movie: stride = extent * (1 - overlap) per
/// axis, plus a final flush-to-boundary position when the stride does not
/// land exactly.
std::vector<PatchOrigin> patch_grid(int frames, int height, int width, const PatchShape& shape,
                                    double overlap);

struct Patch {
    MovieTensor data;
    PatchOrigin origin;
};

std::vector<Patch> extract_patches(const MovieTensor& movie, const PatchShape& shape,
                                   double overlap);

/// Uniform-weight average over overlapping patches. Throws if any voxel is
/// uncovered.
MovieTensor recombine_patches(const std::vector<Patch>& patches, int frames, int height,
                              int width);

struct LabelReport {
    std::vector<TrainPair> pairs;
    int skipped = 0;
    std::vector<std::string> messages;
};

/// Decompose each patch with the momentum solver to produce training targets.
LabelReport label_with_solver(const std::vector<MovieTensor>& d_patches, const SolverConfig& cfg);

struct EpochRecord {
    int epoch = 0;  // global epoch index, monotone across stages
    int stage = 1;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::vector<double> lambda_l;  // per-layer threshold logits after the epoch
    std::vector<double> lambda_s;
    double seconds = 0.0;
};

struct TrainResult {
    CoronaNetwork net;
    std::vector<EpochRecord> history;
    AdamState adam;
    bool aborted_non_finite = false;
};

/// Called after every epoch (checkpointing hook).
using EpochCallback = std::function<void(const EpochRecord&, const CoronaNetwork&)>;

/// Two-stage training: `epochs_stage1` over the first dataset, then
/// `epochs_stage2` over the second. A non-finite loss aborts and returns the
/// last finite-loss parameters. Pass a previous AdamState to resume; the
/// step counter continues monotonically.
TrainResult train(CoronaNetwork net, const std::vector<TrainPair>& stage1,
                  const std::vector<TrainPair>& stage2, const TrainConfig& cfg,
                  const EpochCallback& callback = nullptr,
                  std::optional<AdamState> resume_state = std::nullopt);

}  // namespace corona
