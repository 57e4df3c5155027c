#include "corona/conv.hpp"

namespace corona {

ConvKernel2D::ConvKernel2D(int kh_, int kw_, int ph_, int pw_)
    : kh(kh_), kw(kw_), ph(ph_), pw(pw_), taps(static_cast<std::size_t>(kh_) * kw_) {
    if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0)
        throw ShapeError("ConvKernel2D: extents must be odd and >= 1");
    if (ph < 0 || pw < 0) throw ShapeError("ConvKernel2D: padding must be >= 0");
}

ConvKernel2D ConvKernel2D::same(int kh_, int kw_) {
    return ConvKernel2D(kh_, kw_, (kh_ - 1) / 2, (kw_ - 1) / 2);
}

ConvKernel2D ConvKernel2D::impulse(int kh_, int kw_, Complex value) {
    ConvKernel2D k = same(kh_, kw_);
    k.tap(kh_ / 2, kw_ / 2) = value;
    return k;
}

namespace {

// out[u,v] = sum_{i,j} k[i,j] * in[u+i-ph, v+j-pw], zero outside.
void correlate(const Complex* in, int rows, int cols, const Complex* taps, int kh, int kw,
               int ph, int pw, Complex* out, int orows, int ocols) {
    for (int u = 0; u < orows; ++u) {
        for (int v = 0; v < ocols; ++v) {
            Complex acc(0.0, 0.0);
            const int y0 = u - ph;
            const int x0 = v - pw;
            const int ilo = std::max(0, -y0), ihi = std::min(kh, rows - y0);
            const int jlo = std::max(0, -x0), jhi = std::min(kw, cols - x0);
            for (int i = ilo; i < ihi; ++i) {
                const Complex* row = in + static_cast<std::size_t>(y0 + i) * cols;
                const Complex* krow = taps + static_cast<std::size_t>(i) * kw;
                for (int j = jlo; j < jhi; ++j) acc += krow[j] * row[x0 + j];
            }
            out[static_cast<std::size_t>(u) * ocols + v] = acc;
        }
    }
}

}  // namespace

Eigen::MatrixXcd conv2d(const Eigen::MatrixXcd& frame, const ConvKernel2D& kernel) {
    const int rows = static_cast<int>(frame.rows());
    const int cols = static_cast<int>(frame.cols());
    const int orows = rows - kernel.kh + 1 + 2 * kernel.ph;
    const int ocols = cols - kernel.kw + 1 + 2 * kernel.pw;
    if (orows < 1 || ocols < 1) throw ShapeError("conv2d: kernel larger than padded input");

    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> in = frame;
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(orows, ocols);
    correlate(in.data(), rows, cols, kernel.taps.data(), kernel.kh, kernel.kw, kernel.ph,
              kernel.pw, out.data(), orows, ocols);
    return out;
}

MovieTensor conv2d_movie(const MovieTensor& movie, const ConvKernel2D& kernel) {
    const int rows = movie.height();
    const int cols = movie.width();
    const int orows = rows - kernel.kh + 1 + 2 * kernel.ph;
    const int ocols = cols - kernel.kw + 1 + 2 * kernel.pw;
    if (orows < 1 || ocols < 1) throw ShapeError("conv2d_movie: kernel larger than padded input");

    MovieTensor out(movie.frames(), orows, ocols);
    for (int t = 0; t < movie.frames(); ++t)
        correlate(movie.frame_data(t), rows, cols, kernel.taps.data(), kernel.kh, kernel.kw,
                  kernel.ph, kernel.pw, out.frame_data(t), orows, ocols);
    return out;
}

Eigen::MatrixXcd correlate2d_same(const Eigen::MatrixXcd& frame, const Eigen::MatrixXd& kernel) {
    const int rows = static_cast<int>(frame.rows());
    const int cols = static_cast<int>(frame.cols());
    const int kh = static_cast<int>(kernel.rows());
    const int kw = static_cast<int>(kernel.cols());
    std::vector<Complex> taps(static_cast<std::size_t>(kh) * kw);
    for (int i = 0; i < kh; ++i)
        for (int j = 0; j < kw; ++j) taps[static_cast<std::size_t>(i) * kw + j] = kernel(i, j);

    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> in = frame;
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(rows, cols);
    correlate(in.data(), rows, cols, taps.data(), kh, kw, kh / 2, kw / 2, out.data(), rows, cols);
    return out;
}

}  // namespace corona
