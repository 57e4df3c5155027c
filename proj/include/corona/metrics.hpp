#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corona/movie.hpp"

namespace corona {

/// Rectangular region of interest in image pixels.
struct RoiBox {
    int row = 0, col = 0;
    int rows = 1, cols = 1;

    void validate(long image_rows, long image_cols) const;
    long count() const { return static_cast<long>(rows) * cols; }
};

/// Maximum intensity projection: per-pixel max magnitude across frames.
Eigen::MatrixXd mip(const MovieTensor& movie);

/// 20*log10(pixel / max pixel), clipped below at floor_db; an all-zero image
/// maps to all-floor.
Eigen::MatrixXd to_db(const Eigen::MatrixXd& image, double floor_db);

/// Contrast-to-noise ratio |mu_s - mu_b| / sqrt(var_s + var_b) on linear
/// pixels, reported in dB. nullopt when the joint variance is zero;
/// -inf when the means coincide.
std::optional<double> cnr_db(const Eigen::MatrixXd& image, const RoiBox& signal,
                             const RoiBox& background);

/// Contrast ratio mu_s / mu_b in dB. nullopt when mu_b is zero.
std::optional<double> cr_db(const Eigen::MatrixXd& image, const RoiBox& signal,
                            const RoiBox& background);

struct MetricReport {
    std::string method;
    std::optional<double> cnr_db;
    std::optional<double> cr_db;
};

/// One image row in dB relative to the image maximum, unclipped; exact-zero
/// pixels are reported as -infinity so plots can show gaps.
std::vector<double> intensity_profile(const Eigen::MatrixXd& linear_image, int row);

struct MseCurvePoint {
    int k = 0;
    double mse_s = 0.0;
    double mse_l = 0.0;
    double mse_avg = 0.0;
};

/// Squared-Frobenius-error curve over per-iteration (or per-depth) outputs
/// against a fixed ground truth; mse_avg weights the two parts equally.
std::vector<MseCurvePoint> mse_curve(const std::vector<std::pair<MovieTensor, MovieTensor>>&
                                         outputs_ls,  // (L_k, S_k) per k
                                     const std::vector<int>& ks, const MovieTensor& l_truth,
                                     const MovieTensor& s_truth);

}  // namespace corona
