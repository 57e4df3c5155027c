#include "corona/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "corona/errors.hpp"

namespace corona {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (epochs_stage1 < 0 || epochs_stage2 < 0)
        throw ConfigError("TrainConfig: epoch counts must be >= 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (overlap < 0.0 || overlap >= 1.0) throw ConfigError("TrainConfig: overlap must be in [0,1)");
    if (loss_weight_s < 0.0 || loss_weight_l < 0.0)
        throw ConfigError("TrainConfig: loss weights must be >= 0");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw ConfigError("TrainConfig: validation_fraction must be in [0,1)");
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               double learning_rate) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: dimension mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

double mse_loss(const std::vector<const MovieTensor*>& s_pred,
                const std::vector<const MovieTensor*>& l_pred,
                const std::vector<const MovieTensor*>& s_tgt,
                const std::vector<const MovieTensor*>& l_tgt, double weight_s, double weight_l) {
    const std::size_t n = s_pred.size();
    if (n == 0 || l_pred.size() != n || s_tgt.size() != n || l_tgt.size() != n)
        throw ShapeError("mse_loss: batch size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!s_pred[i]->same_shape(*s_tgt[i]) || !l_pred[i]->same_shape(*l_tgt[i]))
            throw ShapeError("mse_loss: prediction/target shape mismatch");
        acc += weight_s * (*s_pred[i] - *s_tgt[i]).squared_norm();
        acc += weight_l * (*l_pred[i] - *l_tgt[i]).squared_norm();
    }
    return acc / static_cast<double>(n);
}

double mse_loss(const MovieTensor& s_pred, const MovieTensor& l_pred, const MovieTensor& s_tgt,
                const MovieTensor& l_tgt, double weight_s, double weight_l) {
    return mse_loss({&s_pred}, {&l_pred}, {&s_tgt}, {&l_tgt}, weight_s, weight_l);
}

namespace {

std::vector<int> axis_positions(int dim, int extent, double overlap) {
    const int stride = std::max(1, static_cast<int>(std::lround(extent * (1.0 - overlap))));
    std::vector<int> pos;
    for (int p = 0; p + extent <= dim; p += stride) pos.push_back(p);
    if (pos.empty() || pos.back() != dim - extent) pos.push_back(dim - extent);
    return pos;
}

}  // namespace

std::vector<PatchOrigin> patch_grid(int frames, int height, int width, const PatchShape& shape,
                                    double overlap) {
    if (shape.frames > frames || shape.height > height || shape.width > width)
        throw ShapeError("patch_grid: movie smaller than patch");
    const auto ts = axis_positions(frames, shape.frames, overlap);
    const auto ys = axis_positions(height, shape.height, overlap);
    const auto xs = axis_positions(width, shape.width, overlap);
    std::vector<PatchOrigin> grid;
    grid.reserve(ts.size() * ys.size() * xs.size());
    for (int t : ts)
        for (int y : ys)
            for (int x : xs) grid.push_back(PatchOrigin{t, y, x});
    return grid;
}

std::vector<Patch> extract_patches(const MovieTensor& movie, const PatchShape& shape,
                                   double overlap) {
    const auto grid = patch_grid(movie.frames(), movie.height(), movie.width(), shape, overlap);
    std::vector<Patch> patches;
    patches.reserve(grid.size());
    for (const PatchOrigin& o : grid) {
        Patch p;
        p.origin = o;
        p.data = MovieTensor(shape.frames, shape.height, shape.width);
        for (int t = 0; t < shape.frames; ++t)
            for (int y = 0; y < shape.height; ++y)
                for (int x = 0; x < shape.width; ++x)
                    p.data.at(t, y, x) = movie.at(o.t + t, o.y + y, o.x + x);
        patches.push_back(std::move(p));
    }
    return patches;
}

MovieTensor recombine_patches(const std::vector<Patch>& patches, int frames, int height,
                              int width) {
    MovieTensor acc(frames, height, width);
    std::vector<std::uint32_t> count(acc.size(), 0);
    for (const Patch& p : patches) {
        const PatchOrigin& o = p.origin;
        if (o.t < 0 || o.y < 0 || o.x < 0 || o.t + p.data.frames() > frames ||
            o.y + p.data.height() > height || o.x + p.data.width() > width)
            throw ShapeError("recombine_patches: patch exceeds movie bounds");
        for (int t = 0; t < p.data.frames(); ++t)
            for (int y = 0; y < p.data.height(); ++y)
                for (int x = 0; x < p.data.width(); ++x) {
                    acc.at(o.t + t, o.y + y, o.x + x) += p.data.at(t, y, x);
                    count[(static_cast<std::size_t>(o.t + t) * height + (o.y + y)) * width +
                          (o.x + x)] += 1;
                }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (count[i] == 0) throw ShapeError("recombine_patches: uncovered voxel");
        acc.data()[i] /= static_cast<double>(count[i]);
    }
    return acc;
}

LabelReport label_with_solver(const std::vector<MovieTensor>& d_patches,
                              const SolverConfig& cfg) {
    LabelReport report;
    report.pairs.reserve(d_patches.size());
    for (std::size_t i = 0; i < d_patches.size(); ++i) {
        const MovieTensor& d = d_patches[i];
        try {
            const SolveResult res = fista_solve(unfold(d), MeasurementOps::identity(), cfg);
            TrainPair pair;
            pair.d = d;
            pair.l_target = fold(res.L, d.frames(), d.height(), d.width());
            pair.s_target = fold(res.S, d.frames(), d.height(), d.width());
            pair.provenance = Provenance::SolverLabeled;
            report.pairs.push_back(std::move(pair));
        } catch (const Error& e) {
            report.skipped += 1;
            report.messages.push_back("patch " + std::to_string(i) + " skipped: " + e.what());
        }
    }
    return report;
}

namespace {

double pair_loss(const MovieTensor& s_hat, const MovieTensor& l_hat, const TrainPair& pair,
                 const TrainConfig& cfg) {
    return cfg.loss_weight_s * (s_hat - pair.s_target).squared_norm() +
           cfg.loss_weight_l * (l_hat - pair.l_target).squared_norm();
}

MovieTensor loss_gradient(const MovieTensor& pred, const MovieTensor& target, double weight,
                          int batch_n) {
    MovieTensor g = pred;
    g -= target;
    g *= Complex(2.0 * weight / static_cast<double>(batch_n), 0.0);
    return g;
}

struct EpochPlan {
    const std::vector<TrainPair>* data = nullptr;
    std::vector<std::size_t> train_idx, val_idx;
};

EpochPlan split_dataset(const std::vector<TrainPair>& data, double val_fraction,
                        std::mt19937_64& rng) {
    EpochPlan plan;
    plan.data = &data;
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t val_count =
        static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(data.size())));
    plan.val_idx.assign(idx.begin(), idx.begin() + val_count);
    plan.train_idx.assign(idx.begin() + val_count, idx.end());
    return plan;
}

}  // namespace

TrainResult train(CoronaNetwork net, const std::vector<TrainPair>& stage1,
                  const std::vector<TrainPair>& stage2, const TrainConfig& cfg,
                  const EpochCallback& callback, std::optional<AdamState> resume_state) {
    cfg.validate();
    if (cfg.epochs_stage1 > 0 && stage1.empty())
        throw ConfigError("train: stage-1 dataset is empty");
    if (cfg.epochs_stage2 > 0 && stage2.empty())
        throw ConfigError("train: stage-2 dataset is empty");

    TrainResult result;
    result.adam = resume_state ? std::move(*resume_state) : AdamState::init(param_count(net));
    if (result.adam.m.size() != param_count(net))
        throw ConfigError("train: resumed optimizer state does not match the network");

    std::mt19937_64 rng(cfg.seed);
    std::vector<double> params = flatten_params(net);
    CoronaNetwork last_good = net;
    int global_epoch = 0;

    for (int stage = 1; stage <= 2; ++stage) {
        const int epochs = (stage == 1) ? cfg.epochs_stage1 : cfg.epochs_stage2;
        if (epochs == 0) continue;
        const std::vector<TrainPair>& data = (stage == 1) ? stage1 : stage2;
        EpochPlan plan = split_dataset(data, cfg.validation_fraction, rng);

        for (int e = 0; e < epochs; ++e) {
            const auto t0 = std::chrono::steady_clock::now();
            std::shuffle(plan.train_idx.begin(), plan.train_idx.end(), rng);

            double loss_sum = 0.0;
            bool finite = true;
            for (std::size_t b = 0; b < plan.train_idx.size() && finite;
                 b += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t b_end =
                    std::min(b + static_cast<std::size_t>(cfg.batch_size), plan.train_idx.size());
                const int batch_n = static_cast<int>(b_end - b);

                NetworkGrads grads = zeroed_like(net);
                double batch_loss = 0.0;
                for (std::size_t j = b; j < b_end; ++j) {
                    const TrainPair& pair = data[plan.train_idx[j]];
                    ForwardTrace trace = forward_trace(pair.d, net);
                    batch_loss += pair_loss(trace.s_hat(), trace.l_hat(), pair, cfg);
                    const MovieTensor g_s =
                        loss_gradient(trace.s_hat(), pair.s_target, cfg.loss_weight_s, batch_n);
                    const MovieTensor g_l =
                        loss_gradient(trace.l_hat(), pair.l_target, cfg.loss_weight_l, batch_n);
                    backward(net, trace, g_l, g_s, grads);
                }
                if (!std::isfinite(batch_loss)) {
                    finite = false;
                    break;
                }
                loss_sum += batch_loss;
                const std::vector<double> flat_grads = flatten_params(grads);
                adam_step(params, flat_grads, result.adam, cfg.learning_rate);
                unflatten_params(net, params);
            }

            if (!finite) {
                result.net = last_good;
                result.aborted_non_finite = true;
                result.history.shrink_to_fit();
                return result;
            }

            EpochRecord rec;
            rec.epoch = ++global_epoch;
            rec.stage = stage;
            rec.train_loss =
                plan.train_idx.empty() ? 0.0 : loss_sum / static_cast<double>(plan.train_idx.size());

            double val_sum = 0.0;
            for (std::size_t idx : plan.val_idx) {
                const TrainPair& pair = data[idx];
                const auto [l_hat, s_hat] = forward(pair.d, net);
                val_sum += pair_loss(s_hat, l_hat, pair, cfg);
            }
            rec.val_loss = plan.val_idx.empty()
                               ? rec.train_loss  // no held-out pairs at this dataset size
                               : val_sum / static_cast<double>(plan.val_idx.size());
            for (const LayerParams& layer : net.layers) {
                rec.lambda_l.push_back(layer.lambda_l);
                rec.lambda_s.push_back(layer.lambda_s);
            }
            rec.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.history.push_back(rec);
            last_good = net;
            if (callback) callback(rec, net);
        }
    }

    result.net = std::move(net);
    return result;
}

}  // namespace corona
