#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tsvc/transform.hpp"

namespace {

using tsvc::MatrixX;
using tsvc::VectorX;

MatrixX<double> random_orthonormal(int n, int k, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixX<double> a(n, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < n; ++i) a(i, j) = gauss(rng);
    const Eigen::HouseholderQR<MatrixX<double>> qr(a);
    MatrixX<double> q = qr.householderQ() * MatrixX<double>::Identity(n, k);
    return q;
}

}  // namespace

TEST_CASE("zig-zag order walks the frequency diagonals") {
    const auto order = tsvc::zigzag_order(4);
    REQUIRE(order.size() == 16);
    CHECK(order[0] == std::pair<int, int>{0, 0});
    CHECK(order[1] == std::pair<int, int>{0, 1});
    CHECK(order[2] == std::pair<int, int>{1, 0});
    CHECK(order[3] == std::pair<int, int>{2, 0});
    CHECK(order[4] == std::pair<int, int>{1, 1});
    CHECK(order[5] == std::pair<int, int>{0, 2});

    // Permutation of the full index grid, for several sizes.
    for (int bs : {2, 3, 8, 16}) {
        const auto o = tsvc::zigzag_order(bs);
        REQUIRE(static_cast<int>(o.size()) == bs * bs);
        std::vector<int> seen(static_cast<std::size_t>(bs * bs), 0);
        for (auto [u, v] : o) {
            REQUIRE(u >= 0);
            REQUIRE(v >= 0);
            REQUIRE(u < bs);
            REQUIRE(v < bs);
            ++seen[static_cast<std::size_t>(u * bs + v)];
        }
        for (int s : seen) CHECK(s == 1);
        // Diagonal index never decreases along the scan.
        for (std::size_t i = 1; i < o.size(); ++i) CHECK(o[i].first + o[i].second >= o[i - 1].first + o[i - 1].second);
    }
}

TEST_CASE("dct basis is orthonormal with a constant first vector") {
    for (int bs : {4, 8, 16}) {
        CAPTURE(bs);
        const MatrixX<double> dct = tsvc::dct_basis<double>(bs);
        const int n = bs * bs;
        REQUIRE(dct.rows() == n);
        REQUIRE(dct.cols() == n);

        const MatrixX<double> gram = dct.transpose() * dct;
        CHECK((gram - MatrixX<double>::Identity(n, n)).lpNorm<Eigen::Infinity>() <= 1e-12);

        const double dc = 1.0 / std::sqrt(static_cast<double>(n));
        CHECK((dct.col(0).array() - dc).abs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("no chosen atoms leaves the basis untouched") {
    const MatrixX<double> dct = tsvc::dct_basis<double>(8);
    const MatrixX<double> empty(64, 0);
    const auto altered = tsvc::orthonormalize_against<double>(dct, empty);
    REQUIRE(altered.count() == 64);
    // Bit-identical, not merely close: the decoder depends on this shortcut.
    CHECK((altered.vectors - dct).lpNorm<Eigen::Infinity>() == 0.0);
    std::vector<int> iota(64);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(altered.kept == iota);
}

TEST_CASE("projecting out one basis vector drops exactly that vector") {
    const MatrixX<double> dct = tsvc::dct_basis<double>(8);
    MatrixX<double> chosen(64, 1);
    chosen.col(0) = dct.col(0);
    const auto altered = tsvc::orthonormalize_against<double>(dct, chosen);
    REQUIRE(altered.count() == 63);
    for (int j = 0; j < altered.count(); ++j) {
        CHECK(altered.kept[static_cast<std::size_t>(j)] == j + 1);
        CHECK((altered.vectors.col(j) - dct.col(j + 1)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("altered basis is orthonormal and orthogonal to the chosen atoms") {
    std::mt19937_64 rng(42);
    const int n = 64;
    const MatrixX<double> dct = tsvc::dct_basis<double>(8);
    for (int k : {1, 5, 12}) {
        CAPTURE(k);
        const MatrixX<double> b = random_orthonormal(n, k, rng);
        const auto altered = tsvc::orthonormalize_against<double>(dct, b);
        CHECK(altered.count() == n - k);

        const MatrixX<double>& t = altered.vectors;
        CHECK((t.transpose() * t - MatrixX<double>::Identity(n - k, n - k)).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((b.transpose() * t).lpNorm<Eigen::Infinity>() <= 1e-9);

        // kept ids ascend and index into the zig-zag enumeration.
        for (std::size_t j = 1; j < altered.kept.size(); ++j) CHECK(altered.kept[j] > altered.kept[j - 1]);
        CHECK(altered.kept.back() < n);
    }
}

TEST_CASE("alteration is deterministic") {
    std::mt19937_64 rng(5);
    const MatrixX<double> dct = tsvc::dct_basis<double>(8);
    const MatrixX<double> b = random_orthonormal(64, 4, rng);
    const auto first = tsvc::orthonormalize_against<double>(dct, b);
    const auto second = tsvc::orthonormalize_against<double>(dct, b);
    CHECK(first.kept == second.kept);
    CHECK((first.vectors - second.vectors).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("residual projection") {
    std::mt19937_64 rng(11);
    const int n = 64;
    const MatrixX<double> dct = tsvc::dct_basis<double>(8);
    const MatrixX<double> b = random_orthonormal(n, 5, rng);
    const auto altered = tsvc::orthonormalize_against<double>(dct, b);
    REQUIRE(altered.count() == n - 5);

    const VectorX<double> zero = VectorX<double>::Zero(n);
    CHECK(tsvc::project_residual<double>(altered, zero).lpNorm<Eigen::Infinity>() == 0.0);

    VectorX<double> r = 3.0 * altered.vectors.col(0);
    VectorX<double> lambda = tsvc::project_residual<double>(altered, r);
    CHECK(lambda[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(lambda.tail(lambda.size() - 1).lpNorm<Eigen::Infinity>() <= 1e-12);

    // Random vector inside span(T) is reproduced by T * lambda.
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorX<double> w(altered.count());
    for (int i = 0; i < altered.count(); ++i) w[i] = gauss(rng);
    r = altered.vectors * w;
    lambda = tsvc::project_residual<double>(altered, r);
    CHECK((altered.vectors * lambda - r).norm() <= 1e-9 * r.norm());

    // Energy: coefficients never exceed the residual energy; with the
    // complement exact (K + survivors = N) and r orthogonal to the chosen
    // atoms, the projection captures everything.
    VectorX<double> full(n);
    for (int i = 0; i < n; ++i) full[i] = gauss(rng);
    full -= b * (b.transpose() * full);  // make r orthogonal to span(B)
    lambda = tsvc::project_residual<double>(altered, full);
    CHECK(lambda.squaredNorm() <= full.squaredNorm() + 1e-12);
    CHECK(std::abs(lambda.squaredNorm() - full.squaredNorm()) <= 1e-9 * full.squaredNorm());

    VectorX<double> wrong(n + 1);
    wrong.setZero();
    CHECK_THROWS_AS(tsvc::project_residual<double>(altered, wrong), std::invalid_argument);
}
