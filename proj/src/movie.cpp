#include "corona/movie.hpp"

#include <cmath>

namespace corona {

bool MovieTensor::all_finite() const {
    for (const Complex& z : data_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

double MovieTensor::squared_norm() const {
    double acc = 0.0;
    for (const Complex& z : data_) acc += std::norm(z);
    return acc;
}

MovieTensor& MovieTensor::operator+=(const MovieTensor& rhs) {
    if (!same_shape(rhs)) throw ShapeError("MovieTensor +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

MovieTensor& MovieTensor::operator-=(const MovieTensor& rhs) {
    if (!same_shape(rhs)) throw ShapeError("MovieTensor -=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

MovieTensor& MovieTensor::operator*=(Complex scale) {
    for (Complex& z : data_) z *= scale;
    return *this;
}

CasoratiMatrix unfold(const MovieTensor& movie) {
    const int pixels = movie.height() * movie.width();
    CasoratiMatrix mat(pixels, movie.frames());
    for (int t = 0; t < movie.frames(); ++t) {
        const Complex* frame = movie.frame_data(t);
        for (int p = 0; p < pixels; ++p) mat(p, t) = frame[p];
    }
    return mat;
}

MovieTensor fold(const CasoratiMatrix& mat, int frames, int height, int width) {
    const long pixels = static_cast<long>(height) * width;
    if (mat.rows() != pixels || mat.cols() != frames)
        throw ShapeError("fold: matrix is " + std::to_string(mat.rows()) + "x" +
                         std::to_string(mat.cols()) + ", expected " + std::to_string(pixels) +
                         "x" + std::to_string(frames));
    MovieTensor movie(frames, height, width);
    for (int t = 0; t < frames; ++t) {
        Complex* frame = movie.frame_data(t);
        for (long p = 0; p < pixels; ++p) frame[p] = mat(p, t);
    }
    return movie;
}

}  // namespace corona
