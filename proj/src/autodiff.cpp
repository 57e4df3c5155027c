#include "corona/autodiff.hpp"

#include <cmath>

#include "corona/errors.hpp"
#include "corona/prox.hpp"

namespace corona {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MovieTensor conv_bias(const MovieTensor& in, const ConvKernel2D& k, Complex bias) {
    MovieTensor out = conv2d_movie(in, k);
    for (Complex& z : out.data()) z += bias;
    return out;
}

}  // namespace

ForwardTrace forward_trace(const MovieTensor& d, const CoronaNetwork& net) {
    if (net.depth() < 1) throw ConfigError("forward_trace: empty network");
    ForwardTrace trace;
    trace.d = d;
    trace.layers.resize(net.depth());

    MovieTensor l(d.frames(), d.height(), d.width());
    MovieTensor s(d.frames(), d.height(), d.width());
    for (int k = 0; k < net.depth(); ++k) {
        const LayerParams& p = net.layers[k];
        LayerTrace& lt = trace.layers[k];
        lt.l_in = l;
        lt.s_in = s;

        lt.pre_l = conv_bias(l, p.p5, p.b5);
        lt.pre_l += conv_bias(s, p.p3, p.b3);
        lt.pre_l += conv_bias(d, p.p1, p.b1);
        lt.pre_s = conv_bias(l, p.p6, p.b6);
        lt.pre_s += conv_bias(s, p.p4, p.b4);
        lt.pre_s += conv_bias(d, p.p2, p.b2);

        lt.stat_l = 0.0;
        lt.argmax_index = 0;
        for (std::size_t i = 0; i < lt.pre_l.size(); ++i) {
            const double mag = std::abs(lt.pre_l.data()[i]);
            if (mag > lt.stat_l) {
                lt.stat_l = mag;
                lt.argmax_index = i;
            }
        }
        lt.stat_s = 0.0;
        for (const Complex& z : lt.pre_s.data()) lt.stat_s += std::abs(z);
        lt.stat_s /= static_cast<double>(lt.pre_s.size());

        lt.thr_l = sigmoid(p.lambda_l) * net.a_l * lt.stat_l;
        lt.thr_s = sigmoid(p.lambda_s) * net.a_s * lt.stat_s;

        lt.pre_l_svd = svd(unfold(lt.pre_l));
        Eigen::VectorXd shrunk = (lt.pre_l_svd.singular_values.array() - lt.thr_l).cwiseMax(0.0);
        const CasoratiMatrix l_next =
            lt.pre_l_svd.U * shrunk.asDiagonal() * lt.pre_l_svd.V.adjoint();
        const CasoratiMatrix s_next = row_soft_threshold(unfold(lt.pre_s), lt.thr_s);

        lt.l_out = fold(l_next, d.frames(), d.height(), d.width());
        lt.s_out = fold(s_next, d.frames(), d.height(), d.width());
        l = lt.l_out;
        s = lt.s_out;
    }
    return trace;
}

NetworkGrads zeroed_like(const CoronaNetwork& net) {
    NetworkGrads grads = net;
    for (LayerParams& layer : grads.layers) {
        for (ConvKernel2D* k : {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6})
            for (Complex& tap : k->taps) tap = Complex(0, 0);
        layer.b1 = layer.b2 = layer.b3 = layer.b4 = layer.b5 = layer.b6 = Complex(0, 0);
        layer.lambda_l = 0.0;
        layer.lambda_s = 0.0;
    }
    return grads;
}

std::pair<Eigen::MatrixXcd, double> svt_backward(const SvdFactors& factors, double tau,
                                                 const Eigen::MatrixXcd& g_out,
                                                 const BackwardOptions& opts,
                                                 BackwardDiagnostics& diag) {
    const Eigen::MatrixXcd& U = factors.U;
    const Eigen::MatrixXcd& V = factors.V;
    const Eigen::VectorXd& s = factors.singular_values;
    const long r = s.size();
    const long m = U.rows();
    const long n = V.rows();
    const double s_max = (r > 0) ? s(0) : 0.0;

    if (s_max == 0.0) {
        // SVT of the zero matrix: identity when tau == 0, locally constant otherwise.
        if (tau == 0.0) return {g_out, 0.0};
        return {Eigen::MatrixXcd::Zero(m, n), 0.0};
    }

    Eigen::VectorXd h(r), hp(r), hs(r);
    for (long i = 0; i < r; ++i) {
        h(i) = std::max(s(i) - tau, 0.0);
        if (tau == 0.0) {
            hp(i) = 1.0;  // SVT_0 is the identity; derivative must reflect that
            hs(i) = 1.0;
        } else {
            hp(i) = (s(i) > tau) ? 1.0 : 0.0;
            hs(i) = h(i) / std::max(s(i), 1e-300);
        }
    }

    const Eigen::MatrixXcd W = U.adjoint() * g_out * V;  // r x r

    // Degenerate pairs: inverse factors clamped while keeping the sign.
    const double clamp = 1e-8 * s_max * s_max;
    const double degen = opts.degenerate_rel * s_max;

    Eigen::MatrixXcd gM(r, r);
    for (long i = 0; i < r; ++i) {
        for (long j = 0; j < r; ++j) {
            if (i == j) {
                gM(i, i) = Complex(hp(i) * W(i, i).real(), hs(i) * W(i, i).imag());
                continue;
            }
            if (std::abs(s(i) - s(j)) < degen) ++diag.degenerate_pairs;
            double den = s(j) * s(j) - s(i) * s(i);
            const double sign = (den >= 0.0) ? 1.0 : -1.0;
            den = sign * std::max(std::abs(den), clamp);
            const double c1 = (h(j) * s(j) - h(i) * s(i)) / den;
            const double c2 = (h(j) * s(i) - h(i) * s(j)) / den;
            gM(i, j) = c1 * W(i, j) + c2 * std::conj(W(j, i));
        }
    }

    Eigen::MatrixXcd g_in = U * gM * V.adjoint();
    if (m > r) {  // (I - U U^H) g_out V diag(h/s) V^H
        Eigen::MatrixXcd B = g_out * V;
        B -= U * (U.adjoint() * B);
        g_in += B * hs.asDiagonal() * V.adjoint();
    }
    if (n > r) {  // U diag(h/s) U^H g_out (I - V V^H)
        Eigen::MatrixXcd C = U.adjoint() * g_out;
        C -= (C * V) * V.adjoint();
        g_in += U * hs.asDiagonal() * C;
    }

    double g_tau = 0.0;
    for (long i = 0; i < r; ++i) g_tau -= hp(i) * W(i, i).real();
    return {std::move(g_in), g_tau};
}

std::pair<Eigen::MatrixXcd, double> row_soft_threshold_backward(const Eigen::MatrixXcd& input,
                                                                double tau,
                                                                const Eigen::MatrixXcd& g_out) {
    Eigen::MatrixXcd g_in = Eigen::MatrixXcd::Zero(input.rows(), input.cols());
    double g_tau = 0.0;
    for (long i = 0; i < input.rows(); ++i) {
        const double nrm = input.row(i).norm();
        if (nrm <= tau) continue;  // dead zone: subgradient zero
        const Complex ip_c = (g_out.row(i).conjugate().cwiseProduct(input.row(i))).sum();
        const double ip = ip_c.real();
        g_in.row(i) = (1.0 - tau / nrm) * g_out.row(i) +
                      (tau / (nrm * nrm * nrm)) * ip * input.row(i);
        g_tau -= ip / nrm;
    }
    return {std::move(g_in), g_tau};
}

namespace {

// g_kernel[i,j] += sum_t sum_{u,v} conj(in[t, u+i-ph, v+j-pw]) * g_out[t, u, v]
void accumulate_kernel_grad(const MovieTensor& in, const MovieTensor& g_out,
                            const ConvKernel2D& kernel, ConvKernel2D& g_kernel) {
    const int rows = in.height(), cols = in.width();
    for (int t = 0; t < in.frames(); ++t) {
        const Complex* inf = in.frame_data(t);
        const Complex* gof = g_out.frame_data(t);
        for (int i = 0; i < kernel.kh; ++i) {
            for (int j = 0; j < kernel.kw; ++j) {
                Complex acc(0, 0);
                for (int u = 0; u < g_out.height(); ++u) {
                    const int y = u + i - kernel.ph;
                    if (y < 0 || y >= rows) continue;
                    for (int v = 0; v < g_out.width(); ++v) {
                        const int x = v + j - kernel.pw;
                        if (x < 0 || x >= cols) continue;
                        acc += std::conj(inf[static_cast<std::size_t>(y) * cols + x]) *
                               gof[static_cast<std::size_t>(u) * g_out.width() + v];
                    }
                }
                g_kernel.tap(i, j) += acc;
            }
        }
    }
}

// g_in[t,y,x] += sum_{i,j} conj(k[i,j]) * g_out[t, y-i+ph, x-j+pw]
void accumulate_input_grad(const MovieTensor& g_out, const ConvKernel2D& kernel,
                           MovieTensor& g_in) {
    for (int t = 0; t < g_in.frames(); ++t) {
        const Complex* gof = g_out.frame_data(t);
        Complex* gif = g_in.frame_data(t);
        for (int y = 0; y < g_in.height(); ++y) {
            for (int x = 0; x < g_in.width(); ++x) {
                Complex acc(0, 0);
                for (int i = 0; i < kernel.kh; ++i) {
                    const int u = y - i + kernel.ph;
                    if (u < 0 || u >= g_out.height()) continue;
                    for (int j = 0; j < kernel.kw; ++j) {
                        const int v = x - j + kernel.pw;
                        if (v < 0 || v >= g_out.width()) continue;
                        acc += std::conj(kernel.tap(i, j)) *
                               gof[static_cast<std::size_t>(u) * g_out.width() + v];
                    }
                }
                gif[static_cast<std::size_t>(y) * g_in.width() + x] += acc;
            }
        }
    }
}

Complex tensor_sum(const MovieTensor& m) {
    Complex acc(0, 0);
    for (const Complex& z : m.data()) acc += z;
    return acc;
}

}  // namespace

BackwardDiagnostics backward(const CoronaNetwork& net, const ForwardTrace& trace,
                             const MovieTensor& g_l_hat, const MovieTensor& g_s_hat,
                             NetworkGrads& grads, const BackwardOptions& opts) {
    if (static_cast<int>(trace.layers.size()) != net.depth() ||
        grads.depth() != net.depth())
        throw ShapeError("backward: trace/grads depth mismatch");

    BackwardDiagnostics diag;
    const int frames = trace.d.frames(), height = trace.d.height(), width = trace.d.width();

    MovieTensor gl = g_l_hat;
    MovieTensor gs = g_s_hat;
    for (int k = net.depth() - 1; k >= 0; --k) {
        const LayerParams& p = net.layers[k];
        const LayerTrace& lt = trace.layers[k];
        LayerParams& g = grads.layers[k];

        // Through the proximal operators (Casorati space).
        auto [g_pre_l_cas, g_thr_l] =
            svt_backward(lt.pre_l_svd, lt.thr_l, unfold(gl), opts, diag);
        auto [g_pre_s_cas, g_thr_s] =
            row_soft_threshold_backward(unfold(lt.pre_s), lt.thr_s, unfold(gs));
        MovieTensor g_pre_l = fold(g_pre_l_cas, frames, height, width);
        MovieTensor g_pre_s = fold(g_pre_s_cas, frames, height, width);

        // Threshold logits: thr = sigmoid(lambda) * a * stat.
        const double sig_l = sigmoid(p.lambda_l);
        const double sig_s = sigmoid(p.lambda_s);
        g.lambda_l += g_thr_l * sig_l * (1.0 - sig_l) * net.a_l * lt.stat_l;
        g.lambda_s += g_thr_s * sig_s * (1.0 - sig_s) * net.a_s * lt.stat_s;

        if (opts.exact_threshold_grad) {
            // Route the threshold gradient through the statistics themselves.
            const Complex zmax = lt.pre_l.data()[lt.argmax_index];
            const double mag = std::abs(zmax);
            if (mag > 0.0)
                g_pre_l.data()[lt.argmax_index] += g_thr_l * sig_l * net.a_l * (zmax / mag);
            const double mean_coef =
                g_thr_s * sig_s * net.a_s / static_cast<double>(lt.pre_s.size());
            for (std::size_t i = 0; i < lt.pre_s.size(); ++i) {
                const Complex z = lt.pre_s.data()[i];
                const double zm = std::abs(z);
                if (zm > 0.0) g_pre_s.data()[i] += mean_coef * (z / zm);
            }
        }

        // Through the three convolution branches of each pre-activation.
        accumulate_kernel_grad(lt.l_in, g_pre_l, p.p5, g.p5);
        accumulate_kernel_grad(lt.s_in, g_pre_l, p.p3, g.p3);
        accumulate_kernel_grad(trace.d, g_pre_l, p.p1, g.p1);
        accumulate_kernel_grad(lt.l_in, g_pre_s, p.p6, g.p6);
        accumulate_kernel_grad(lt.s_in, g_pre_s, p.p4, g.p4);
        accumulate_kernel_grad(trace.d, g_pre_s, p.p2, g.p2);

        const Complex sum_gl = tensor_sum(g_pre_l);
        const Complex sum_gs = tensor_sum(g_pre_s);
        g.b1 += sum_gl;
        g.b3 += sum_gl;
        g.b5 += sum_gl;
        g.b2 += sum_gs;
        g.b4 += sum_gs;
        g.b6 += sum_gs;

        if (k > 0) {
            MovieTensor gl_next(frames, height, width);
            MovieTensor gs_next(frames, height, width);
            accumulate_input_grad(g_pre_l, p.p5, gl_next);
            accumulate_input_grad(g_pre_s, p.p6, gl_next);
            accumulate_input_grad(g_pre_l, p.p3, gs_next);
            accumulate_input_grad(g_pre_s, p.p4, gs_next);
            gl = std::move(gl_next);
            gs = std::move(gs_next);
        }
    }
    return diag;
}

std::size_t param_count(const CoronaNetwork& net) {
    std::size_t count = 0;
    for (const LayerParams& layer : net.layers)
        count += 6 * 2 * layer.p1.taps.size()  // kernel taps, re/im
                 + 6 * 2                       // biases
                 + 2;                          // threshold logits
    return count;
}

std::vector<double> flatten_params(const CoronaNetwork& net) {
    std::vector<double> flat;
    for (const LayerParams& layer : net.layers) {
        for (const ConvKernel2D* k :
             {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6})
            for (const Complex& tap : k->taps) {
                flat.push_back(tap.real());
                flat.push_back(tap.imag());
            }
        for (const Complex* b : {&layer.b1, &layer.b2, &layer.b3, &layer.b4, &layer.b5, &layer.b6}) {
            flat.push_back(b->real());
            flat.push_back(b->imag());
        }
        flat.push_back(layer.lambda_l);
        flat.push_back(layer.lambda_s);
    }
    return flat;
}

void unflatten_params(CoronaNetwork& net, const std::vector<double>& flat) {
    std::size_t off = 0;
    auto next = [&flat, &off]() {
        if (off >= flat.size()) throw ShapeError("unflatten_params: vector too short");
        return flat[off++];
    };
    for (LayerParams& layer : net.layers) {
        for (ConvKernel2D* k : {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6})
            for (Complex& tap : k->taps) {
                const double re = next();
                const double im = next();
                tap = Complex(re, im);
            }
        for (Complex* b : {&layer.b1, &layer.b2, &layer.b3, &layer.b4, &layer.b5, &layer.b6}) {
            const double re = next();
            const double im = next();
            *b = Complex(re, im);
        }
        layer.lambda_l = next();
        layer.lambda_s = next();
    }
    if (off != flat.size()) throw ShapeError("unflatten_params: vector too long");
}

}  // namespace corona
