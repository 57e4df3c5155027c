#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "corona/errors.hpp"

namespace corona {

using Complex = std::complex<double>;

/// Casorati matrix: one row per pixel, one column per frame.
using CasoratiMatrix = Eigen::MatrixXcd;

/// Complex-valued image sequence, stored frame-major with row-major frames.
class MovieTensor {
public:
    MovieTensor() = default;
    MovieTensor(int frames, int height, int width)
        : frames_(frames), height_(height), width_(width),
          data_(static_cast<std::size_t>(frames) * height * width) {
        if (frames < 1 || height < 1 || width < 1)
            throw ShapeError("MovieTensor: all dimensions must be >= 1");
    }

    int frames() const { return frames_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    Complex& at(int t, int y, int x) {
        return data_[(static_cast<std::size_t>(t) * height_ + y) * width_ + x];
    }
    const Complex& at(int t, int y, int x) const {
        return data_[(static_cast<std::size_t>(t) * height_ + y) * width_ + x];
    }

    Complex* frame_data(int t) {
        return data_.data() + static_cast<std::size_t>(t) * height_ * width_;
    }
    const Complex* frame_data(int t) const {
        return data_.data() + static_cast<std::size_t>(t) * height_ * width_;
    }

    std::vector<Complex>& data() { return data_; }
    const std::vector<Complex>& data() const { return data_; }

    bool same_shape(const MovieTensor& other) const {
        return frames_ == other.frames_ && height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const;

    /// Squared Frobenius norm over all entries.
    double squared_norm() const;

    MovieTensor& operator+=(const MovieTensor& rhs);
    MovieTensor& operator-=(const MovieTensor& rhs);
    MovieTensor& operator*=(Complex scale);

    friend MovieTensor operator+(MovieTensor lhs, const MovieTensor& rhs) { return lhs += rhs; }
    friend MovieTensor operator-(MovieTensor lhs, const MovieTensor& rhs) { return lhs -= rhs; }
    friend MovieTensor operator*(Complex scale, MovieTensor m) { return m *= scale; }

private:
    int frames_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<Complex> data_;
};

/// Stack movie frames as columns: column t is frame t vectorized in
/// row-major pixel order. Result is (height*width) x frames.
CasoratiMatrix unfold(const MovieTensor& movie);

/// Inverse of unfold. `mat` must be (height*width) x frames.
MovieTensor fold(const CasoratiMatrix& mat, int frames, int height, int width);

}  // namespace corona
