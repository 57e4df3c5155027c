#pragma once

#include <vector>

#include <Eigen/Dense>

#include "corona/movie.hpp"

namespace corona {

/// 2D complex convolution kernel, stride 1, zero padding.
/// Orientation is cross-correlation (no kernel flip): learned-kernel
/// convention, so file-loaded kernels are unambiguous.
struct ConvKernel2D {
    int kh = 0, kw = 0;          // odd extents
    int ph = 0, pw = 0;          // zero padding
    std::vector<Complex> taps;   // row-major, kh*kw

    ConvKernel2D() = default;
    ConvKernel2D(int kh_, int kw_, int ph_, int pw_);

    /// Kernel with same-size output: padding (kh-1)/2, (kw-1)/2.
    static ConvKernel2D same(int kh_, int kw_);

    /// Same-size kernel whose only nonzero tap is `value` at the center.
    static ConvKernel2D impulse(int kh_, int kw_, Complex value);

    Complex& tap(int i, int j) { return taps[static_cast<std::size_t>(i) * kw + j]; }
    const Complex& tap(int i, int j) const { return taps[static_cast<std::size_t>(i) * kw + j]; }
};

/// Cross-correlation of one frame with a kernel, zero padding as stored.
/// Output size: (rows - kh + 1 + 2*ph) x (cols - kw + 1 + 2*pw).
Eigen::MatrixXcd conv2d(const Eigen::MatrixXcd& frame, const ConvKernel2D& kernel);

/// conv2d applied independently to every frame with the shared kernel.
MovieTensor conv2d_movie(const MovieTensor& movie, const ConvKernel2D& kernel);

/// Same-size cross-correlation with an arbitrary (possibly even) kernel,
/// zero padding, anchor at (kh/2, kw/2). Used by the simulator's flow
/// filters, which are 4x4.
Eigen::MatrixXcd correlate2d_same(const Eigen::MatrixXcd& frame, const Eigen::MatrixXd& kernel);

}  // namespace corona
