#include "corona/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "corona/errors.hpp"
#include "corona/svd.hpp"

namespace corona {

MovieTensor svd_filter(const MovieTensor& movie, const SvdFilterConfig& cfg) {
    const CasoratiMatrix mat = unfold(movie);
    const long r_max = std::min(mat.rows(), mat.cols());
    if (cfg.cut_rank < 0 || cfg.cut_rank > r_max)
        throw ConfigError("svd_filter: cut_rank must be in [0, min(pixels, frames)]");

    const SvdFactors f = svd(mat);
    const long r = f.singular_values.size();
    CasoratiMatrix filtered = CasoratiMatrix::Zero(mat.rows(), mat.cols());
    if (cfg.cut_rank < r) {
        const long keep = r - cfg.cut_rank;
        filtered = f.U.rightCols(keep) *
                   f.singular_values.tail(keep).asDiagonal() *
                   f.V.rightCols(keep).adjoint();
    }
    return fold(filtered, movie.frames(), movie.height(), movie.width());
}

IirCoeffs design_butterworth_highpass(const WallFilterConfig& cfg) {
    if (cfg.order < 1) throw ConfigError("butterworth: order must be >= 1");
    if (!(cfg.cutoff > 0.0 && cfg.cutoff < 1.0))
        throw ConfigError("butterworth: cutoff must lie in (0, 1)");

    const int n = cfg.order;
    using Cplx = std::complex<double>;
    const double pi = std::numbers::pi;

    // Analog low-pass prototype poles on the unit circle, left half plane.
    std::vector<Cplx> p_lp(n);
    for (int k = 1; k <= n; ++k)
        p_lp[k - 1] = std::exp(Cplx(0.0, pi * (2.0 * k + n - 1.0) / (2.0 * n)));

    // Low-pass -> high-pass at the prewarped analog cutoff (bilinear T = 2).
    const double wa = std::tan(pi * cfg.cutoff / 2.0);
    std::vector<Cplx> p_hp(n), z_hp(n, Cplx(0.0, 0.0));
    Cplx prod_neg_p(1.0, 0.0);
    for (int k = 0; k < n; ++k) {
        p_hp[k] = wa / p_lp[k];
        prod_neg_p *= -p_lp[k];
    }
    double gain = (1.0 / prod_neg_p).real();

    // Bilinear transform z = (1 + s) / (1 - s).
    std::vector<Cplx> z_d(n), p_d(n);
    Cplx num(1.0, 0.0), den(1.0, 0.0);
    for (int k = 0; k < n; ++k) {
        z_d[k] = (1.0 + z_hp[k]) / (1.0 - z_hp[k]);
        p_d[k] = (1.0 + p_hp[k]) / (1.0 - p_hp[k]);
        num *= 1.0 - z_hp[k];
        den *= 1.0 - p_hp[k];
    }
    gain *= (num / den).real();

    // Expand (z - r_1)...(z - r_n) into polynomial coefficients.
    auto poly = [n](const std::vector<Cplx>& roots) {
        std::vector<Cplx> c(n + 1, Cplx(0.0, 0.0));
        c[0] = 1.0;
        for (int k = 0; k < n; ++k)
            for (int i = k + 1; i >= 1; --i) c[i] -= roots[k] * c[i - 1];
        return c;
    };
    const auto bc = poly(z_d);
    const auto ac = poly(p_d);
    IirCoeffs out;
    out.b.resize(n + 1);
    out.a.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        out.b[i] = gain * bc[i].real();
        out.a[i] = ac[i].real();
    }
    return out;
}

double iir_magnitude(const IirCoeffs& coeffs, double omega) {
    using Cplx = std::complex<double>;
    Cplx num(0, 0), den(0, 0);
    for (std::size_t i = 0; i < coeffs.b.size(); ++i)
        num += coeffs.b[i] * std::exp(Cplx(0.0, -omega * static_cast<double>(i)));
    for (std::size_t i = 0; i < coeffs.a.size(); ++i)
        den += coeffs.a[i] * std::exp(Cplx(0.0, -omega * static_cast<double>(i)));
    return std::abs(num / den);
}

namespace {

// Steady-state initial conditions for a unit-amplitude step input
// (direct form II transposed), so constant inputs produce the exact
// steady-state output from sample 0.
Eigen::VectorXd steady_state_init(const IirCoeffs& c) {
    const int n = static_cast<int>(c.a.size()) - 1;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        sys(i, 0) = -c.a[i + 1];
        if (i + 1 < n) sys(i, i + 1) = 1.0;
        rhs(i) = c.b[i + 1] - c.b[0] * c.a[i + 1];
    }
    return (Eigen::MatrixXd::Identity(n, n) - sys).colPivHouseholderQr().solve(rhs);
}

void lfilter(const IirCoeffs& c, const Eigen::VectorXd& zi_unit, std::vector<Complex>& x) {
    const int n = static_cast<int>(c.a.size()) - 1;
    std::vector<Complex> state(n);
    for (int i = 0; i < n; ++i) state[i] = zi_unit(i) * x[0];
    for (Complex& sample : x) {
        const Complex xn = sample;
        const Complex yn = c.b[0] * xn + state[0];
        for (int i = 0; i < n - 1; ++i) state[i] = c.b[i + 1] * xn + state[i + 1] - c.a[i + 1] * yn;
        if (n > 0) state[n - 1] = c.b[n] * xn - c.a[n] * yn;
        sample = yn;
    }
}

}  // namespace

std::vector<Complex> filtfilt(const IirCoeffs& coeffs, const std::vector<Complex>& x) {
    const int order = static_cast<int>(coeffs.a.size()) - 1;
    const int pad = 3 * order;
    if (static_cast<int>(x.size()) <= pad)
        throw ShapeError("filtfilt: need more than 3*order samples");

    // Symmetric reflection (excluding the edge sample) continues both DC and
    // Nyquist content exactly, keeping joint transients out of the segment.
    const Eigen::VectorXd zi = steady_state_init(coeffs);
    std::vector<Complex> y;
    y.reserve(x.size() + 2 * pad);
    for (int i = pad; i >= 1; --i) y.push_back(x[i]);
    y.insert(y.end(), x.begin(), x.end());
    for (int i = 2; i <= pad + 1; ++i) y.push_back(x[x.size() - i]);

    lfilter(coeffs, zi, y);
    std::reverse(y.begin(), y.end());
    lfilter(coeffs, zi, y);
    std::reverse(y.begin(), y.end());
    return {y.begin() + pad, y.end() - pad};
}

MovieTensor wall_filter(const MovieTensor& movie, const WallFilterConfig& cfg) {
    if (movie.frames() <= 3 * cfg.order)
        throw ShapeError("wall_filter: movie must have more than 3*order frames");
    const IirCoeffs coeffs = design_butterworth_highpass(cfg);

    MovieTensor out(movie.frames(), movie.height(), movie.width());
    std::vector<Complex> trace(movie.frames());
    for (int y = 0; y < movie.height(); ++y) {
        for (int x = 0; x < movie.width(); ++x) {
            for (int t = 0; t < movie.frames(); ++t) trace[t] = movie.at(t, y, x);
            const std::vector<Complex> filtered = filtfilt(coeffs, trace);
            for (int t = 0; t < movie.frames(); ++t) out.at(t, y, x) = filtered[t];
        }
    }
    return out;
}

}  // namespace corona
