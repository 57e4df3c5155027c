#include "corona/sim.hpp"

#include <cmath>
#include <numbers>

#include "corona/conv.hpp"
#include "corona/errors.hpp"

namespace corona::sim {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

void SimConfig::validate() const {
    if (height < 1 || width < 1 || frames < 1)
        throw ConfigError("SimConfig: grid and frame counts must be positive");
    if (pixel_pitch <= 0.0 || dt <= 0.0) throw ConfigError("SimConfig: pitch and dt must be > 0");
    if (max_mb_concentration < 0.0) throw ConfigError("SimConfig: concentration must be >= 0");
    if (v_det < 0.0 || accel_std < 0.0) throw ConfigError("SimConfig: kinematics must be >= 0");
    if (amp_jitter_lo > amp_jitter_hi || amp_jitter_lo < 0.0)
        throw ConfigError("SimConfig: amplitude jitter range out of order");
    if (phase_mean_lo_deg > phase_mean_hi_deg)
        throw ConfigError("SimConfig: phase mean range out of order");
    if (tissue_gaussians < 0 || tissue_lpf_size < 1 || tissue_lpf_sigma <= 0.0)
        throw ConfigError("SimConfig: tissue texture parameters invalid");
    if (flow_kernel_size < 1 || flow_kernel_count < 1 || flow_perturb_std < 0.0 ||
        flow_floor <= 0.0)
        throw ConfigError("SimConfig: flow filter parameters invalid");
    if (psf_std_lateral <= 0.0 || psf_std_axial <= 0.0)
        throw ConfigError("SimConfig: PSF widths must be > 0");
    if (noise_scale < 0.0) throw ConfigError("SimConfig: noise_scale must be >= 0");
    if (tissue_to_mb_db < 10.0 || tissue_to_mb_db > 60.0)
        throw ConfigError("SimConfig: tissue_to_mb_db must lie in [10, 60]");
}

std::vector<BubbleState> spawn_bubbles(const SimConfig& cfg, Rng& rng) {
    const int cap = cfg.bubble_cap();
    std::vector<BubbleState> bubbles;
    if (cap <= 0) return bubbles;

    std::uniform_int_distribution<int> count_dist(0, cap);
    const int count = count_dist(rng);
    bubbles.reserve(count);

    std::uniform_real_distribution<double> ux(0.0, cfg.field_width_mm());
    std::uniform_real_distribution<double> uy(0.0, cfg.field_height_mm());
    std::normal_distribution<double> speed_base(1.0, 1.0);
    std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

    for (int i = 0; i < count; ++i) {
        BubbleState b;
        b.x = ux(rng);
        b.y = uy(rng);
        const double speed = std::max(0.0, cfg.v_det * speed_base(rng));
        const double phi = heading(rng);
        b.vx = speed * std::cos(phi);
        b.vy = speed * std::sin(phi);
        b.amplitude = Complex(gauss(rng) * inv_sqrt2, gauss(rng) * inv_sqrt2);
        bubbles.push_back(b);
    }
    return bubbles;
}

void step_bubbles(std::vector<BubbleState>& bubbles, const SimConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> turn(-cfg.turn_range_deg * kDegToRad,
                                                cfg.turn_range_deg * kDegToRad);
    std::normal_distribution<double> accel(0.0, cfg.accel_std);
    std::uniform_real_distribution<double> jitter(cfg.amp_jitter_lo, cfg.amp_jitter_hi);

    std::vector<BubbleState> kept;
    kept.reserve(bubbles.size());
    for (BubbleState b : bubbles) {
        const double theta = turn(rng);
        const double c = std::cos(theta), s = std::sin(theta);
        const double vx = b.vx * c - b.vy * s;
        const double vy = b.vx * s + b.vy * c;
        b.vx = vx + (cfg.accel_std > 0.0 ? accel(rng) : 0.0);
        b.vy = vy + (cfg.accel_std > 0.0 ? accel(rng) : 0.0);
        b.x += b.vx;
        b.y += b.vy;
        b.amplitude *= jitter(rng);
        if (b.x >= 0.0 && b.x < cfg.field_width_mm() && b.y >= 0.0 && b.y < cfg.field_height_mm())
            kept.push_back(b);
    }
    bubbles = std::move(kept);
}

Eigen::MatrixXcd rasterize_bubbles(const std::vector<BubbleState>& bubbles,
                                   const SimConfig& cfg) {
    Eigen::MatrixXcd frame = Eigen::MatrixXcd::Zero(cfg.height, cfg.width);
    for (const BubbleState& b : bubbles) {
        const int px = static_cast<int>(std::floor(b.x / cfg.pixel_pitch));
        const int py = static_cast<int>(std::floor(b.y / cfg.pixel_pitch));
        if (px >= 0 && px < cfg.width && py >= 0 && py < cfg.height)
            frame(py, px) += b.amplitude;
    }
    return frame;
}

namespace {

Eigen::MatrixXd gaussian_kernel(int rows, int cols, double sigma_y, double sigma_x) {
    Eigen::MatrixXd k(rows, cols);
    const double cy = (rows - 1) / 2.0;
    const double cx = (cols - 1) / 2.0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const double dy = (i - cy) / sigma_y;
            const double dx = (j - cx) / sigma_x;
            k(i, j) = std::exp(-0.5 * (dy * dy + dx * dx));
        }
    return k;
}

}  // namespace

Eigen::MatrixXcd tissue_base_from_fields(const Eigen::MatrixXd& bump_sum,
                                         const Eigen::MatrixXcd& speckle,
                                         const Eigen::MatrixXd& phase_rad,
                                         const SimConfig& cfg) {
    const Eigen::MatrixXcd modulated = bump_sum.cast<Complex>().cwiseProduct(speckle);
    Eigen::MatrixXd lpf = gaussian_kernel(cfg.tissue_lpf_size, cfg.tissue_lpf_size,
                                          cfg.tissue_lpf_sigma, cfg.tissue_lpf_sigma);
    lpf /= lpf.sum();
    const Eigen::MatrixXcd smooth = correlate2d_same(modulated, lpf);

    Eigen::MatrixXcd tissue(bump_sum.rows(), bump_sum.cols());
    for (long i = 0; i < tissue.rows(); ++i)
        for (long j = 0; j < tissue.cols(); ++j) {
            const double envelope = std::abs(smooth(i, j));
            tissue(i, j) = envelope * std::exp(Complex(0.0, phase_rad(i, j)));
        }
    return tissue;
}

Eigen::MatrixXcd gen_tissue_base(const SimConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> upos_y(0.0, cfg.height - 1.0);
    std::uniform_real_distribution<double> upos_x(0.0, cfg.width - 1.0);
    // Bump extents between ~5% and ~50% of the frame.
    std::uniform_real_distribution<double> usigma_y(0.05 * cfg.height, 0.5 * cfg.height);
    std::uniform_real_distribution<double> usigma_x(0.05 * cfg.width, 0.5 * cfg.width);

    Eigen::MatrixXd bumps = Eigen::MatrixXd::Zero(cfg.height, cfg.width);
    for (int g = 0; g < cfg.tissue_gaussians; ++g) {
        const double cy = upos_y(rng), cx = upos_x(rng);
        const double sy = usigma_y(rng), sx = usigma_x(rng);
        for (int i = 0; i < cfg.height; ++i)
            for (int j = 0; j < cfg.width; ++j) {
                const double dy = (i - cy) / sy;
                const double dx = (j - cx) / sx;
                bumps(i, j) += std::exp(-0.5 * (dy * dy + dx * dx));
            }
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd speckle(cfg.height, cfg.width);
    for (int i = 0; i < cfg.height; ++i)
        for (int j = 0; j < cfg.width; ++j) speckle(i, j) = Complex(gauss(rng), gauss(rng));

    std::uniform_real_distribution<double> mean_dist(cfg.phase_mean_lo_deg * kDegToRad,
                                                     cfg.phase_mean_hi_deg * kDegToRad);
    const double alpha = mean_dist(rng);
    std::normal_distribution<double> phase_dist(alpha, cfg.phase_std_deg * kDegToRad);
    Eigen::MatrixXd phase(cfg.height, cfg.width);
    for (int i = 0; i < cfg.height; ++i)
        for (int j = 0; j < cfg.width; ++j) phase(i, j) = phase_dist(rng);

    return tissue_base_from_fields(bumps, speckle, phase, cfg);
}

FlowFilters init_flow_filters(const SimConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    FlowFilters filters(cfg.flow_kernel_count);
    for (auto& f : filters) {
        f.resize(cfg.flow_kernel_size, cfg.flow_kernel_size);
        for (long i = 0; i < f.rows(); ++i)
            for (long j = 0; j < f.cols(); ++j) f(i, j) = uni(rng);
        f /= f.sum();
    }
    return filters;
}

Eigen::MatrixXcd deform_tissue(const Eigen::MatrixXcd& t_prev, FlowFilters& filters,
                               const SimConfig& cfg, Rng& rng) {
    if (cfg.flow_perturb_std > 0.0) {
        std::normal_distribution<double> perturb(0.0, cfg.flow_perturb_std);
        for (auto& f : filters) {
            for (long i = 0; i < f.rows(); ++i)
                for (long j = 0; j < f.cols(); ++j)
                    f(i, j) = std::max(f(i, j) + perturb(rng), cfg.flow_floor);
            f /= f.sum();
        }
    }

    std::vector<Eigen::MatrixXcd> candidates;
    candidates.reserve(filters.size());
    for (const auto& f : filters) candidates.push_back(correlate2d_same(t_prev, f));

    std::uniform_int_distribution<int> pick(0, static_cast<int>(candidates.size()) - 1);
    const int block = cfg.flow_kernel_size;
    Eigen::MatrixXcd next(t_prev.rows(), t_prev.cols());
    for (long by = 0; by < t_prev.rows(); by += block)
        for (long bx = 0; bx < t_prev.cols(); bx += block) {
            const long h = std::min<long>(block, t_prev.rows() - by);
            const long w = std::min<long>(block, t_prev.cols() - bx);
            next.block(by, bx, h, w) = candidates[pick(rng)].block(by, bx, h, w);
        }
    return next;
}

Eigen::MatrixXcd apply_psf(const Eigen::MatrixXcd& frame, const SimConfig& cfg) {
    const double sy = cfg.psf_std_axial / cfg.pixel_pitch;    // rows are axial
    const double sx = cfg.psf_std_lateral / cfg.pixel_pitch;  // cols are lateral
    auto odd_extent = [](double sigma) {
        int e = static_cast<int>(std::lround(3.0 * sigma));
        return 2 * std::max(e, 1) + 1;
    };
    Eigen::MatrixXd k = gaussian_kernel(odd_extent(sy), odd_extent(sx), sy, sx);
    k /= k.sum();
    return correlate2d_same(frame, k);
}

MovieTensor apply_psf(const MovieTensor& movie, const SimConfig& cfg) {
    MovieTensor out(movie.frames(), movie.height(), movie.width());
    for (int t = 0; t < movie.frames(); ++t) {
        Eigen::MatrixXcd frame(movie.height(), movie.width());
        for (int i = 0; i < movie.height(); ++i)
            for (int j = 0; j < movie.width(); ++j) frame(i, j) = movie.at(t, i, j);
        const Eigen::MatrixXcd blurred = apply_psf(frame, cfg);
        for (int i = 0; i < movie.height(); ++i)
            for (int j = 0; j < movie.width(); ++j) out.at(t, i, j) = blurred(i, j);
    }
    return out;
}

namespace {

void store_frame(MovieTensor& movie, int t, const Eigen::MatrixXcd& frame) {
    for (int i = 0; i < movie.height(); ++i)
        for (int j = 0; j < movie.width(); ++j) movie.at(t, i, j) = frame(i, j);
}

}  // namespace

SimSample simulate(const SimConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    // Bubble movie.
    MovieTensor mb_movie(cfg.frames, cfg.height, cfg.width);
    std::vector<BubbleState> bubbles = spawn_bubbles(cfg, rng);
    store_frame(mb_movie, 0, rasterize_bubbles(bubbles, cfg));
    for (int t = 1; t < cfg.frames; ++t) {
        step_bubbles(bubbles, cfg, rng);
        store_frame(mb_movie, t, rasterize_bubbles(bubbles, cfg));
    }

    // Tissue movie: base texture deformed frame to frame.
    MovieTensor tissue_movie(cfg.frames, cfg.height, cfg.width);
    Eigen::MatrixXcd tissue = gen_tissue_base(cfg, rng);
    FlowFilters filters = init_flow_filters(cfg, rng);
    store_frame(tissue_movie, 0, tissue);
    for (int t = 1; t < cfg.frames; ++t) {
        tissue = deform_tissue(tissue, filters, cfg, rng);
        store_frame(tissue_movie, t, tissue);
    }

    // Complex Gaussian noise movie.
    MovieTensor noise_movie(cfg.frames, cfg.height, cfg.width);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (Complex& z : noise_movie.data())
        z = Complex(gauss(rng) * inv_sqrt2, gauss(rng) * inv_sqrt2);

    SimSample sample;
    sample.config = cfg;
    sample.S = apply_psf(mb_movie, cfg);
    sample.L = apply_psf(tissue_movie, cfg);
    sample.N = apply_psf(noise_movie, cfg);

    // Scale tissue to the requested power ratio over the bubble signal,
    // then noise relative to tissue.
    const double s_power = sample.S.squared_norm();
    const double l_power = sample.L.squared_norm();
    if (s_power > 0.0 && l_power > 0.0) {
        const double target = std::pow(10.0, cfg.tissue_to_mb_db / 10.0);
        sample.L *= Complex(std::sqrt(target * s_power / l_power), 0.0);
    }
    const double n_power = sample.N.squared_norm();
    if (n_power > 0.0) {
        const double l_now = sample.L.squared_norm();
        const double target_n = cfg.noise_scale * cfg.noise_scale * l_now;
        sample.N *= Complex(std::sqrt(target_n / n_power), 0.0);
    }

    sample.D = sample.L + sample.S + sample.N;
    return sample;
}

}  // namespace corona::sim
