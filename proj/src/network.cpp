#include "corona/network.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "corona/errors.hpp"
#include "corona/prox.hpp"

namespace corona {

int default_kernel_extent(int layer_index) { return layer_index < 3 ? 5 : 3; }

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MovieTensor conv_bias(const MovieTensor& in, const ConvKernel2D& k, Complex bias) {
    MovieTensor out = conv2d_movie(in, k);
    for (Complex& z : out.data()) z += bias;
    return out;
}

MovieTensor preactivation(const MovieTensor& d, const MovieTensor& l, const MovieTensor& s,
                          const ConvKernel2D& kd, Complex bd, const ConvKernel2D& kl, Complex bl,
                          const ConvKernel2D& ks, Complex bs) {
    MovieTensor out = conv_bias(l, kl, bl);
    out += conv_bias(s, ks, bs);
    out += conv_bias(d, kd, bd);
    return out;
}

}  // namespace

std::pair<double, double> compute_thresholds(const MovieTensor& pre_l, const MovieTensor& pre_s,
                                             const LayerParams& params, double a_l, double a_s) {
    double max_abs = 0.0;
    for (const Complex& z : pre_l.data()) max_abs = std::max(max_abs, std::abs(z));
    double mean_abs = 0.0;
    for (const Complex& z : pre_s.data()) mean_abs += std::abs(z);
    mean_abs /= static_cast<double>(pre_s.size());

    const double thr_l = sigmoid(params.lambda_l) * a_l * max_abs;
    const double thr_s = sigmoid(params.lambda_s) * a_s * mean_abs;
    return {thr_l, thr_s};
}

std::pair<MovieTensor, MovieTensor> forward_layer(
    const MovieTensor& d, const MovieTensor& l, const MovieTensor& s, const LayerParams& params,
    double a_l, double a_s, const std::optional<std::pair<double, double>>& pinned) {
    MovieTensor pre_l = preactivation(d, l, s, params.p1, params.b1, params.p5, params.b5,
                                      params.p3, params.b3);
    MovieTensor pre_s = preactivation(d, l, s, params.p2, params.b2, params.p6, params.b6,
                                      params.p4, params.b4);

    const auto [thr_l, thr_s] =
        pinned ? *pinned : compute_thresholds(pre_l, pre_s, params, a_l, a_s);

    const CasoratiMatrix l_next =
        svt(unfold(pre_l), thr_l).value;
    const CasoratiMatrix s_next = row_soft_threshold(unfold(pre_s), thr_s);
    return {fold(l_next, d.frames(), d.height(), d.width()),
            fold(s_next, d.frames(), d.height(), d.width())};
}

std::pair<MovieTensor, MovieTensor> forward(const MovieTensor& d, const CoronaNetwork& net,
                                            const ForwardOptions& opts) {
    if (net.depth() < 1) throw ConfigError("forward: network must have at least one layer");
    if (opts.pinned_thresholds &&
        static_cast<int>(opts.pinned_thresholds->size()) != net.depth())
        throw ConfigError("forward: pinned threshold count must equal depth");

    MovieTensor l(d.frames(), d.height(), d.width());
    MovieTensor s(d.frames(), d.height(), d.width());
    for (int k = 0; k < net.depth(); ++k) {
        std::optional<std::pair<double, double>> pinned;
        if (opts.pinned_thresholds) pinned = (*opts.pinned_thresholds)[k];
        std::tie(l, s) = forward_layer(d, l, s, net.layers[k], net.a_l, net.a_s, pinned);
    }
    return {std::move(l), std::move(s)};
}

CoronaNetwork init_from_ista(int depth, double lipschitz) {
    if (depth < 1) throw ConfigError("init_from_ista: depth must be >= 1");
    if (lipschitz <= 0.0) throw ConfigError("init_from_ista: lipschitz must be > 0");

    const double inv = 1.0 / lipschitz;
    CoronaNetwork net;
    net.layers.resize(depth);
    for (int k = 0; k < depth; ++k) {
        const int e = default_kernel_extent(k);
        LayerParams& p = net.layers[k];
        p.p1 = ConvKernel2D::impulse(e, e, Complex(inv, 0.0));
        p.p2 = ConvKernel2D::impulse(e, e, Complex(inv, 0.0));
        p.p3 = ConvKernel2D::impulse(e, e, Complex(-inv, 0.0));
        p.p6 = ConvKernel2D::impulse(e, e, Complex(-inv, 0.0));
        p.p4 = ConvKernel2D::impulse(e, e, Complex(1.0 - inv, 0.0));
        p.p5 = ConvKernel2D::impulse(e, e, Complex(1.0 - inv, 0.0));
        p.lambda_l = -8.0;
        p.lambda_s = -8.0;
    }
    return net;
}

CoronaNetwork init_default(int depth, double lipschitz, std::mt19937_64& rng) {
    CoronaNetwork net = init_from_ista(depth, lipschitz);
    const double base = 1.0 / lipschitz;  // reference tap magnitude
    std::uniform_real_distribution<double> jitter(-0.01 * base, 0.01 * base);
    for (LayerParams& layer : net.layers)
        for (ConvKernel2D* k : {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6})
            for (Complex& tap : k->taps) tap += Complex(jitter(rng), jitter(rng));
    return net;
}

CoronaNetwork init_random(int depth, double scale, std::mt19937_64& rng) {
    CoronaNetwork net = init_from_ista(depth, 2.0);
    std::normal_distribution<double> gauss(0.0, scale);
    for (LayerParams& layer : net.layers) {
        for (ConvKernel2D* k : {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6})
            for (Complex& tap : k->taps) tap = Complex(gauss(rng), gauss(rng));
        layer.b1 = layer.b2 = layer.b3 = layer.b4 = layer.b5 = layer.b6 = Complex(0, 0);
    }
    return net;
}

// ---------------------------------------------------------------------------
// Weight container: little-endian binary.
//   magic 'CRNW' | u32 version | u32 depth | f64 a_l | f64 a_s |
//   per layer: u32 extent | 6 kernels x extent^2 x (f64 re, f64 im)
//              | 6 x (f64 re, f64 im) biases | f64 lambda_l | f64 lambda_s
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kMagic = 0x43524e57;  // 'CRNW'
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
    if (off + sizeof(T) > buf.size()) throw IoError("weight container: truncated file");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

void save_weights(const CoronaNetwork& net, const std::filesystem::path& path) {
    std::string buf;
    put<std::uint32_t>(buf, kMagic);
    put<std::uint32_t>(buf, kVersion);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(net.depth()));
    put<double>(buf, net.a_l);
    put<double>(buf, net.a_s);
    for (const LayerParams& layer : net.layers) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(layer.p1.kh));
        for (const ConvKernel2D* k :
             {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6})
            for (const Complex& tap : k->taps) {
                put<double>(buf, tap.real());
                put<double>(buf, tap.imag());
            }
        for (const Complex* b : {&layer.b1, &layer.b2, &layer.b3, &layer.b4, &layer.b5, &layer.b6}) {
            put<double>(buf, b->real());
            put<double>(buf, b->imag());
        }
        put<double>(buf, layer.lambda_l);
        put<double>(buf, layer.lambda_s);
    }

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("save_weights: cannot open " + tmp.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("save_weights: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

CoronaNetwork load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_weights: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t off = 0;
    if (take<std::uint32_t>(buf, off) != kMagic)
        throw IoError("weight container: bad magic (corrupt file)");
    const std::uint32_t version = take<std::uint32_t>(buf, off);
    if (version != kVersion)
        throw IoError("weight container: unsupported version " + std::to_string(version));
    const std::uint32_t depth = take<std::uint32_t>(buf, off);
    if (depth < 1 || depth > 10000) throw IoError("weight container: implausible depth");

    CoronaNetwork net;
    net.a_l = take<double>(buf, off);
    net.a_s = take<double>(buf, off);
    net.layers.resize(depth);
    for (LayerParams& layer : net.layers) {
        const std::uint32_t extent = take<std::uint32_t>(buf, off);
        if (extent < 1 || extent % 2 == 0 || extent > 999)
            throw IoError("weight container: invalid kernel extent");
        const int e = static_cast<int>(extent);
        for (ConvKernel2D* k : {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6}) {
            *k = ConvKernel2D::same(e, e);
            for (Complex& tap : k->taps) {
                const double re = take<double>(buf, off);
                const double im = take<double>(buf, off);
                tap = Complex(re, im);
            }
        }
        for (Complex* b : {&layer.b1, &layer.b2, &layer.b3, &layer.b4, &layer.b5, &layer.b6}) {
            const double re = take<double>(buf, off);
            const double im = take<double>(buf, off);
            *b = Complex(re, im);
        }
        layer.lambda_l = take<double>(buf, off);
        layer.lambda_s = take<double>(buf, off);
    }
    if (off != buf.size()) throw IoError("weight container: trailing bytes (corrupt file)");
    return net;
}

}  // namespace corona
