#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "omv/errors.hpp"
#include "omv/measures.hpp"

using namespace omv;

namespace {

double brute_w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const std::size_t n = mu.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += norm_squared(subtract(mu.atom(i), nu.atom(perm[i])));
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / static_cast<double>(n));
}

}  // namespace

TEST_CASE("Hungarian W2 equals the permutation minimum") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t n = 1 + inst % 6, dim = 2;
        std::vector<double> a(n * dim), b(n * dim);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        const EmpiricalMeasure mu(dim, a), nu(dim, b);
        CHECK(wasserstein2(mu, nu) == doctest::Approx(brute_w2(mu, nu)).epsilon(1e-14));
    }
}

TEST_CASE("1D quantile matching handles unequal weights") {
    const EmpiricalMeasure mu(1, {0.0});
    const EmpiricalMeasure nu(1, {0.0, 1.0}, {0.5, 0.5});
    CHECK(wasserstein2(mu, nu) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    const EmpiricalMeasure a(1, {3.0, -1.0, 2.0});
    const EmpiricalMeasure b(1, {0.0, 1.0, 5.0});
    CHECK(std::abs(wasserstein2(a, b) - wasserstein2_assignment(a, b)) <= 1e-12);
}

TEST_CASE("moments and the distance to the origin") {
    const EmpiricalMeasure mu(2, {1.0, 0.0, 0.0, 3.0});
    CHECK(mu.mean() == Vector{0.5, 1.5});
    CHECK(mu.second_moment() == 5.0);
    CHECK(w2_to_origin(mu) == doctest::Approx(std::sqrt(5.0)));
    CHECK(wasserstein2(mu, dirac(Vector{0.0, 0.0})) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("hungarian on a known matrix") {
    const std::vector<double> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
    const auto a = hungarian(cost, 3);
    CHECK(a == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("multi-dimensional W2 rejects unequal sizes") {
    const EmpiricalMeasure mu(2, {0.0, 0.0, 1.0, 0.0});
    const EmpiricalMeasure nu(2, {0.0, 0.0, 1.0, 1.0, 2.0, 2.0});
    CHECK_THROWS_AS((void)wasserstein2(mu, nu), UnsupportedInputError);
}
