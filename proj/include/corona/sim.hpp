#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "corona/movie.hpp"

namespace corona::sim {

using Rng = std::mt19937_64;

/// Synthetic contrast-enhanced-ultrasound generator configuration.
/// Lengths are mm, times are frames (dt seconds per frame).
struct SimConfig {
    int height = 128;
    int width = 128;
    double pixel_pitch = 0.12;  // mm per pixel
    int frames = 50;
    double dt = 0.01;  // seconds per frame

    double max_mb_concentration = 130.0;  // bubbles per cm^2 cap
    double v_det = 0.24;                  // mm per frame, speed scale
    // Per-frame acceleration std in mm/frame^2; the stated law
    // 0.05 * 0.12 / dt^2 mm/s^2 times dt^2.
    double accel_std = 0.05 * 0.12;
    double turn_range_deg = 30.0;   // heading change ~ U[-range, range]
    double amp_jitter_lo = 0.9;     // per-frame amplitude factor ~ U[lo, hi]
    double amp_jitter_hi = 1.1;

    int tissue_gaussians = 5;
    int tissue_lpf_size = 11;       // low-pass kernel extent, pixels
    double tissue_lpf_sigma = 2.0;  // low-pass Gaussian std, pixels
    double phase_mean_lo_deg = 0.0;
    double phase_mean_hi_deg = 180.0;
    double phase_std_deg = 15.0;

    int flow_kernel_size = 4;
    int flow_kernel_count = 4;
    double flow_perturb_std = 0.1;  // 0 disables the per-frame filter update
    double flow_floor = 0.1;

    double psf_std_lateral = 0.14;  // mm
    double psf_std_axial = 0.32;    // mm

    double noise_scale = 0.01;      // noise amplitude relative to tissue (-40 dB power)
    double tissue_to_mb_db = 30.0;  // 10*log10(||L||^2 / ||S||^2)
    std::uint64_t seed = 0;

    void validate() const;

    double field_height_mm() const { return height * pixel_pitch; }
    double field_width_mm() const { return width * pixel_pitch; }
    double field_area_cm2() const { return field_height_mm() * field_width_mm() / 100.0; }
    int bubble_cap() const { return static_cast<int>(max_mb_concentration * field_area_cm2()); }
};

/// One microbubble: continuous position/velocity in mm and mm per frame.
struct BubbleState {
    double x = 0.0, y = 0.0;    // lateral, axial position (mm)
    double vx = 0.0, vy = 0.0;  // mm per frame
    Complex amplitude;
};

struct SimSample {
    MovieTensor D, L, S, N;  // mixture = tissue + bubbles + noise
    SimConfig config;
};

/// Random bubble population, count uniform in [0, concentration cap],
/// positions uniform over the field, speeds max(0, v_det * N(1, 1)) with
/// uniform headings, complex-normal amplitudes.
std::vector<BubbleState> spawn_bubbles(const SimConfig& cfg, Rng& rng);

/// Advance every bubble one frame: rotate the velocity by a uniform
/// heading change, add per-axis Gaussian acceleration, advance the
/// position, jitter the amplitude. Bubbles that left the field are dropped.
void step_bubbles(std::vector<BubbleState>& bubbles, const SimConfig& cfg, Rng& rng);

/// Deposit each in-field bubble's amplitude at the nearest pixel
/// (amplitudes sum on collision).
Eigen::MatrixXcd rasterize_bubbles(const std::vector<BubbleState>& bubbles, const SimConfig& cfg);

/// Tissue texture from explicit fields: |lowpass(bump_sum .* speckle)| * e^{i phase}.
Eigen::MatrixXcd tissue_base_from_fields(const Eigen::MatrixXd& bump_sum,
                                         const Eigen::MatrixXcd& speckle,
                                         const Eigen::MatrixXd& phase_rad,
                                         const SimConfig& cfg);

/// Random tissue base frame per the texture recipe: sum of random real 2D
/// Gaussians modulated by a complex-normal field, low-pass filtered, with
/// Gaussian phase around a uniformly drawn mean.
Eigen::MatrixXcd gen_tissue_base(const SimConfig& cfg, Rng& rng);

/// Flow filters: nonnegative kernels summing to one.
using FlowFilters = std::vector<Eigen::MatrixXd>;

FlowFilters init_flow_filters(const SimConfig& cfg, Rng& rng);

/// One tissue deformation step: perturb + floor + renormalize each flow
/// filter (skipped when flow_perturb_std == 0), convolve the previous frame
/// with each, then assemble the next frame from 4x4-pixel blocks each copied
/// from a uniformly chosen convolved candidate.
Eigen::MatrixXcd deform_tissue(const Eigen::MatrixXcd& t_prev, FlowFilters& filters,
                               const SimConfig& cfg, Rng& rng);

/// Unit-sum anisotropic Gaussian blur; extent +-3 sigma rounded to odd size.
Eigen::MatrixXcd apply_psf(const Eigen::MatrixXcd& frame, const SimConfig& cfg);
MovieTensor apply_psf(const MovieTensor& movie, const SimConfig& cfg);

/// Full generator: S = PSF(bubbles), L = PSF(tissue) scaled to the configured
/// tissue-to-bubble power ratio, N = PSF(noise) scaled relative to tissue,
/// D = L + S + N. Deterministic under cfg.seed.
SimSample simulate(const SimConfig& cfg);

}  // namespace corona::sim
