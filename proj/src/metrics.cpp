#include "corona/metrics.hpp"

#include <cmath>
#include <limits>

#include "corona/errors.hpp"

namespace corona {

void RoiBox::validate(long image_rows, long image_cols) const {
    if (row < 0 || col < 0 || rows < 1 || cols < 1 || row + rows > image_rows ||
        col + cols > image_cols)
        throw ShapeError("RoiBox: region outside image bounds");
}

Eigen::MatrixXd mip(const MovieTensor& movie) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(movie.height(), movie.width());
    for (int t = 0; t < movie.frames(); ++t)
        for (int y = 0; y < movie.height(); ++y)
            for (int x = 0; x < movie.width(); ++x)
                out(y, x) = std::max(out(y, x), std::abs(movie.at(t, y, x)));
    return out;
}

Eigen::MatrixXd to_db(const Eigen::MatrixXd& image, double floor_db) {
    if (floor_db >= 0.0) throw ConfigError("to_db: floor_db must be negative");
    const double peak = image.maxCoeff();
    Eigen::MatrixXd out(image.rows(), image.cols());
    if (peak <= 0.0) {
        out.setConstant(floor_db);
        return out;
    }
    for (long i = 0; i < image.rows(); ++i)
        for (long j = 0; j < image.cols(); ++j) {
            const double v = image(i, j);
            out(i, j) = (v > 0.0) ? std::max(20.0 * std::log10(v / peak), floor_db) : floor_db;
        }
    return out;
}

namespace {

struct RoiStats {
    double mean = 0.0;
    double var = 0.0;  // population variance
};

RoiStats roi_stats(const Eigen::MatrixXd& image, const RoiBox& roi) {
    roi.validate(image.rows(), image.cols());
    const auto block = image.block(roi.row, roi.col, roi.rows, roi.cols);
    RoiStats st;
    st.mean = block.mean();
    st.var = (block.array() - st.mean).square().sum() / static_cast<double>(roi.count());
    return st;
}

}  // namespace

std::optional<double> cnr_db(const Eigen::MatrixXd& image, const RoiBox& signal,
                             const RoiBox& background) {
    if (signal.count() < 2 || background.count() < 2)
        throw ShapeError("cnr: each ROI needs at least 2 pixels");
    const RoiStats s = roi_stats(image, signal);
    const RoiStats b = roi_stats(image, background);
    const double joint = s.var + b.var;
    if (joint <= 0.0) return std::nullopt;
    const double ratio = std::abs(s.mean - b.mean) / std::sqrt(joint);
    if (ratio == 0.0) return -std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(ratio);
}

std::optional<double> cr_db(const Eigen::MatrixXd& image, const RoiBox& signal,
                            const RoiBox& background) {
    const RoiStats s = roi_stats(image, signal);
    const RoiStats b = roi_stats(image, background);
    if (b.mean <= 0.0) return std::nullopt;
    if (s.mean == 0.0) return -std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(s.mean / b.mean);
}

std::vector<double> intensity_profile(const Eigen::MatrixXd& linear_image, int row) {
    if (row < 0 || row >= linear_image.rows())
        throw ShapeError("intensity_profile: row out of range");
    const double peak = linear_image.maxCoeff();
    std::vector<double> profile(linear_image.cols());
    for (long j = 0; j < linear_image.cols(); ++j) {
        const double v = linear_image(row, j);
        profile[j] = (v > 0.0 && peak > 0.0) ? 20.0 * std::log10(v / peak)
                                             : -std::numeric_limits<double>::infinity();
    }
    return profile;
}

std::vector<MseCurvePoint> mse_curve(
    const std::vector<std::pair<MovieTensor, MovieTensor>>& outputs_ls, const std::vector<int>& ks,
    const MovieTensor& l_truth, const MovieTensor& s_truth) {
    if (outputs_ls.size() != ks.size()) throw ShapeError("mse_curve: outputs/ks length mismatch");
    std::vector<MseCurvePoint> curve;
    curve.reserve(outputs_ls.size());
    for (std::size_t i = 0; i < outputs_ls.size(); ++i) {
        MseCurvePoint p;
        p.k = ks[i];
        p.mse_l = (outputs_ls[i].first - l_truth).squared_norm();
        p.mse_s = (outputs_ls[i].second - s_truth).squared_norm();
        p.mse_avg = 0.5 * (p.mse_l + p.mse_s);
        curve.push_back(p);
    }
    return curve;
}

}  // namespace corona
