#include <doctest.h>

#include "corona/movie.hpp"
#include "test_util.hpp"

using namespace corona;

TEST_CASE("unfold: single-frame movie becomes one column") {
    MovieTensor m(1, 2, 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) m.at(0, y, x) = Complex(y * 3 + x, 0);
    const CasoratiMatrix mat = unfold(m);
    REQUIRE(mat.rows() == 6);
    REQUIRE(mat.cols() == 1);
    for (int p = 0; p < 6; ++p) CHECK(mat(p, 0) == Complex(p, 0));
}

TEST_CASE("unfold: hand-enumerated 2x2x2 column order") {
    MovieTensor m(2, 2, 2);
    m.at(0, 0, 0) = 1; m.at(0, 0, 1) = 2; m.at(0, 1, 0) = 3; m.at(0, 1, 1) = 4;
    m.at(1, 0, 0) = 5; m.at(1, 0, 1) = 6; m.at(1, 1, 0) = 7; m.at(1, 1, 1) = 8;
    const CasoratiMatrix mat = unfold(m);
    for (int p = 0; p < 4; ++p) {
        CHECK(mat(p, 0) == Complex(p + 1, 0));
        CHECK(mat(p, 1) == Complex(p + 5, 0));
    }
}

TEST_CASE("fold/unfold round trips") {
    std::mt19937_64 rng(42);
    const MovieTensor m = test::random_movie(3, 4, 5, rng);
    const MovieTensor back = fold(unfold(m), 3, 4, 5);
    CHECK(back.data() == m.data());

    const CasoratiMatrix mat = test::random_complex(12, 5, rng);
    const CasoratiMatrix mat_back = unfold(fold(mat, 5, 3, 4));
    CHECK(mat_back == mat);
}

TEST_CASE("fold: zero matrix and degenerate dims") {
    const MovieTensor zero = fold(CasoratiMatrix::Zero(6, 2), 2, 2, 3);
    for (const Complex& z : zero.data()) CHECK(z == Complex(0, 0));

    CasoratiMatrix single(1, 3);
    single << Complex(1, 1), Complex(2, 2), Complex(3, 3);
    const MovieTensor m = fold(single, 3, 1, 1);
    CHECK(m.at(0, 0, 0) == Complex(1, 1));
    CHECK(m.at(1, 0, 0) == Complex(2, 2));
    CHECK(m.at(2, 0, 0) == Complex(3, 3));
}

TEST_CASE("fold: shape mismatch is an error") {
    CHECK_THROWS_AS(fold(CasoratiMatrix::Zero(6, 2), 2, 2, 2), ShapeError);
    CHECK_THROWS_AS(fold(CasoratiMatrix::Zero(6, 3), 2, 2, 3), ShapeError);
}

TEST_CASE("fold/unfold identity over assorted shapes") {
    std::mt19937_64 rng(7);
    for (auto [t, h, w] : {std::tuple{1, 1, 1}, {4, 1, 7}, {2, 8, 3}, {6, 5, 5}}) {
        const MovieTensor m = test::random_movie(t, h, w, rng);
        CHECK(fold(unfold(m), t, h, w).data() == m.data());
    }
}
