#pragma once

#include <complex>
#include <vector>

#include "corona/movie.hpp"

namespace corona {

/// Rank-threshold SVD clutter filter.
struct SvdFilterConfig {
    int cut_rank = 1;  // number of leading singular components zeroed
};

/// Unfold -> SVD -> zero the cut_rank largest singular values -> fold.
MovieTensor svd_filter(const MovieTensor& movie, const SvdFilterConfig& cfg);

/// Temporal high-pass (wall) filter.
struct WallFilterConfig {
    int order = 6;
    double cutoff = 0.2;  // normalized, fraction of pi rad/sample, in (0,1)
};

/// Recursive filter coefficients, a[0] == 1.
struct IirCoeffs {
    std::vector<double> b;  // feedforward, length order+1
    std::vector<double> a;  // feedback, length order+1
};

/// Digital Butterworth high-pass via the analog prototype and the bilinear
/// transform with frequency prewarping.
IirCoeffs design_butterworth_highpass(const WallFilterConfig& cfg);

/// |H(e^{j omega})| of the recursive filter at the given frequency (rad/sample).
double iir_magnitude(const IirCoeffs& coeffs, double omega);

/// Zero-phase (forward-backward) application of the high-pass filter along
/// the temporal axis of every pixel. Symmetric-reflection padding of 3*order
/// samples suppresses transients; requires frames > 3*order.
MovieTensor wall_filter(const MovieTensor& movie, const WallFilterConfig& cfg);

/// Zero-phase filtering of a single complex sequence (exposed for tests).
std::vector<Complex> filtfilt(const IirCoeffs& coeffs, const std::vector<Complex>& x);

}  // namespace corona
