#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "corona/errors.hpp"
#include "corona/network.hpp"
#include "corona/solver.hpp"
#include "test_util.hpp"

using namespace corona;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("compute_thresholds: sigmoid scaling and zero input") {
    std::mt19937_64 rng(51);
    MovieTensor l = test::random_movie(3, 4, 4, rng);
    MovieTensor s = test::random_movie(3, 4, 4, rng);
    LayerParams p;
    p.lambda_l = 0.0;
    p.lambda_s = 0.0;
    const auto [thr_l, thr_s] = compute_thresholds(l, s, p, 0.4, 1.8);

    double max_abs = 0.0, mean_abs = 0.0;
    for (const Complex& z : l.data()) max_abs = std::max(max_abs, std::abs(z));
    for (const Complex& z : s.data()) mean_abs += std::abs(z);
    mean_abs /= static_cast<double>(s.size());
    CHECK(thr_l == doctest::Approx(0.5 * 0.4 * max_abs).epsilon(1e-14));
    CHECK(thr_s == doctest::Approx(0.5 * 1.8 * mean_abs).epsilon(1e-14));

    MovieTensor zero(3, 4, 4);
    const auto [z_l, z_s] = compute_thresholds(zero, zero, p, 0.4, 1.8);
    CHECK(z_l == 0.0);
    CHECK(z_s == 0.0);

    // Saturated logit: sigmoid(20) within 1e-8 of 1.
    p.lambda_s = 20.0;
    const auto [unused, sat_s] = compute_thresholds(l, s, p, 0.4, 1.8);
    (void)unused;
    CHECK(sat_s == doctest::Approx(1.8 * mean_abs).epsilon(1e-8));
}

TEST_CASE("forward_layer: zero parameters give zero outputs, shapes preserved") {
    std::mt19937_64 rng(52);
    const MovieTensor d = test::random_movie(4, 6, 5, rng);
    MovieTensor l(4, 6, 5), s(4, 6, 5);
    LayerParams p;
    const int e = 3;
    for (ConvKernel2D* k : {&p.p1, &p.p2, &p.p3, &p.p4, &p.p5, &p.p6})
        *k = ConvKernel2D::same(e, e);
    const auto [l_next, s_next] = forward_layer(d, l, s, p, 0.4, 1.8);
    CHECK(l_next.squared_norm() == 0.0);
    CHECK(s_next.squared_norm() == 0.0);
    CHECK(l_next.same_shape(d));
    CHECK(s_next.same_shape(d));
}

TEST_CASE("init_from_ista: impulse taps and center values") {
    const CoronaNetwork net = init_from_ista(4, 2.0);
    REQUIRE(net.depth() == 4);
    CHECK(net.layers[0].p1.kh == 5);
    CHECK(net.layers[3].p1.kh == 3);

    for (const LayerParams& layer : net.layers) {
        for (const ConvKernel2D* k :
             {&layer.p1, &layer.p2, &layer.p3, &layer.p4, &layer.p5, &layer.p6}) {
            int nonzero = 0;
            for (const Complex& t : k->taps)
                if (t != Complex(0, 0)) ++nonzero;
            CHECK(nonzero == 1);
        }
        CHECK(layer.p1.tap(layer.p1.kh / 2, layer.p1.kw / 2) == Complex(0.5, 0.0));
        CHECK(layer.p5.tap(layer.p5.kh / 2, layer.p5.kw / 2) == Complex(0.5, 0.0));
        CHECK(layer.p3.tap(layer.p3.kh / 2, layer.p3.kw / 2) == Complex(-0.5, 0.0));
    }
}

TEST_CASE("forward: zero input stays zero; identical runs are bitwise equal") {
    const CoronaNetwork net = init_from_ista(3, 2.0);
    MovieTensor zero(4, 6, 6);
    const auto [l, s] = forward(zero, net);
    CHECK(l.squared_norm() == 0.0);
    CHECK(s.squared_norm() == 0.0);

    std::mt19937_64 rng(53);
    const MovieTensor d = test::random_movie(4, 6, 6, rng);
    const auto [l1, s1] = forward(d, net);
    const auto [l2, s2] = forward(d, net);
    CHECK(l1.data() == l2.data());
    CHECK(s1.data() == s2.data());
}

TEST_CASE("ISTA equivalence: pinned-threshold forward tracks the solver") {
    std::mt19937_64 rng(54);
    const MovieTensor d = test::random_movie(8, 16, 16, rng);
    const double lipschitz = 2.0;
    const RegWeights weights{0.4, 0.08};

    const int depth = 3;
    const CoronaNetwork net = init_from_ista(depth, lipschitz);
    ForwardOptions opts;
    opts.pinned_thresholds = std::vector<std::pair<double, double>>(
        depth, {weights.lambda1 / lipschitz, weights.lambda2 / lipschitz});

    // Solver iterates after k iterations, k = depth.
    SolverConfig cfg;
    cfg.weights = weights;
    cfg.lipschitz = lipschitz;
    cfg.max_iters = depth;
    cfg.rel_tol = 0.0;
    const SolveResult res = ista_solve(unfold(d), MeasurementOps::identity(), cfg);
    const MovieTensor l_want = fold(res.L, 8, 16, 16);
    const MovieTensor s_want = fold(res.S, 8, 16, 16);

    const auto [l_got, s_got] = forward(d, net, opts);
    CHECK(test::rel_err(l_got, l_want) <= 1e-5);
    CHECK(test::rel_err(s_got, s_want) <= 1e-5);
}

TEST_CASE("single pinned layer reproduces one solver iteration") {
    std::mt19937_64 rng(55);
    const MovieTensor d = test::random_movie(5, 8, 8, rng);
    const RegWeights weights{0.3, 0.05};
    const double lipschitz = 2.0;

    const CoronaNetwork net = init_from_ista(1, lipschitz);
    ForwardOptions opts;
    opts.pinned_thresholds = std::vector<std::pair<double, double>>(
        1, {weights.lambda1 / lipschitz, weights.lambda2 / lipschitz});
    const auto [l_got, s_got] = forward(d, net, opts);

    SolverConfig cfg;
    cfg.weights = weights;
    cfg.lipschitz = lipschitz;
    cfg.max_iters = 1;
    cfg.rel_tol = 0.0;
    const SolveResult res = ista_solve(unfold(d), MeasurementOps::identity(), cfg);
    CHECK(test::rel_err(l_got, fold(res.L, 5, 8, 8)) <= 1e-6);
    CHECK(test::rel_err(s_got, fold(res.S, 5, 8, 8)) <= 1e-6);
}

TEST_CASE("weight container: save -> load -> save is byte-identical") {
    std::mt19937_64 rng(56);
    CoronaNetwork net = init_default(3, 2.0, rng);
    net.layers[1].lambda_l = 0.37;
    net.layers[2].b4 = Complex(0.1, -0.2);

    const auto path_a = temp_file("weights_a.bin");
    const auto path_b = temp_file("weights_b.bin");
    save_weights(net, path_a);
    const CoronaNetwork loaded = load_weights(path_a);
    save_weights(loaded, path_b);

    std::ifstream fa(path_a, std::ios::binary), fb(path_b, std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);

    // Loaded network's forward pass is bitwise identical.
    const MovieTensor d = test::random_movie(3, 6, 6, rng);
    const auto [l1, s1] = forward(d, net);
    const auto [l2, s2] = forward(d, loaded);
    CHECK(l1.data() == l2.data());
    CHECK(s1.data() == s2.data());

    std::filesystem::remove(path_a);
    std::filesystem::remove(path_b);
}

TEST_CASE("weight container: truncation and bad magic are corrupt-file errors") {
    std::mt19937_64 rng(57);
    const CoronaNetwork net = init_default(2, 2.0, rng);
    const auto path = temp_file("weights_trunc.bin");
    save_weights(net, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_weights(path), IoError);

    std::ofstream bad(path, std::ios::binary | std::ios::trunc);
    bad.write("NOPE", 4);
    bad.write(bytes.data() + 4, static_cast<std::streamsize>(bytes.size() - 4));
    bad.close();
    CHECK_THROWS_AS(load_weights(path), IoError);

    std::filesystem::remove(path);
}

TEST_CASE("thresholds scale with the data (1-homogeneous)") {
    std::mt19937_64 rng(58);
    MovieTensor l = test::random_movie(3, 5, 5, rng);
    MovieTensor s = test::random_movie(3, 5, 5, rng);
    LayerParams p;
    p.lambda_l = 0.3;
    p.lambda_s = -0.7;
    const auto [tl, ts] = compute_thresholds(l, s, p, 0.4, 1.8);
    MovieTensor lc = l, sc = s;
    lc *= Complex(3.0, 0.0);
    sc *= Complex(3.0, 0.0);
    const auto [tlc, tsc] = compute_thresholds(lc, sc, p, 0.4, 1.8);
    CHECK(tlc == doctest::Approx(3.0 * tl).epsilon(1e-12));
    CHECK(tsc == doctest::Approx(3.0 * ts).epsilon(1e-12));
}

TEST_CASE("forward preserves shapes through many layers") {
    std::mt19937_64 rng(59);
    const MovieTensor d = test::random_movie(6, 10, 7, rng);
    const CoronaNetwork net = init_from_ista(6, 2.0);
    const auto [l, s] = forward(d, net);
    CHECK(l.same_shape(d));
    CHECK(s.same_shape(d));
}
