#pragma once

#include <filesystem>

#include <Eigen/Dense>

#include "corona/movie.hpp"

namespace corona {

enum class NpyComplexDtype { Complex64, Complex128 };

/// Write a movie as an NPY version 1.0 array, shape (frames, height, width),
/// C-contiguous, little-endian complex. Complex64 (the default) stores
/// single-precision components. Writes are atomic (temp file + rename).
void write_movie(const MovieTensor& movie, const std::filesystem::path& path,
                 NpyComplexDtype dtype = NpyComplexDtype::Complex64);

/// Read a movie from an NPY file. Accepts '<c8' and '<c16' rank-3
/// C-contiguous arrays; anything else is an IoError.
MovieTensor read_movie(const std::filesystem::path& path);

/// Real 2D array output (metric images and dB maps).
void write_matrix(const Eigen::MatrixXd& mat, const std::filesystem::path& path);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

}  // namespace corona
