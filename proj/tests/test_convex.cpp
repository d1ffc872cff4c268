#include <cmath>
#include <random>

#include "doctest.h"
#include "omv/convex.hpp"
#include "omv/errors.hpp"

using namespace omv;
using namespace omv::convex;

namespace {

// Brute-force infimum over a fine 1D grid.
double grid_envelope(const std::function<double(double)>& pi, double eps, double x) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = -400000; i <= 400000; ++i) {
        const double z = x + i * 1e-5;
        best = std::min(best, (z - x) * (z - x) / (2.0 * eps) + pi(z));
    }
    return best;
}

std::vector<Vector> random_points(std::size_t n, std::size_t dim, double half, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half, half);
    std::vector<Vector> out(n, Vector(dim));
    for (auto& p : out)
        for (double& v : p) v = u(rng);
    return out;
}

}  // namespace

TEST_CASE("envelope of the half-line indicator") {
    const auto c = ConvexConstraint::half_space({-1.0}, 0.0);
    const Vector x{-1.0};
    CHECK(yosida_value(c, 0.5, x) == doctest::Approx(1.0).epsilon(1e-12));
    const auto g = yosida_gradient(c, 0.5, x);
    CHECK(g[0] == doctest::Approx(-2.0));
    CHECK(resolvent(c, 0.5, x)[0] == doctest::Approx(0.0));
    const auto pi = [](double z) { return z >= 0.0 ? 0.0 : 1e300; };
    CHECK(yosida_value(c, 0.5, x) == doctest::Approx(grid_envelope(pi, 0.5, -1.0)).epsilon(1e-8));
}

TEST_CASE("quadratic envelope matches the closed form and a grid") {
    const double q = 3.0;
    const auto c = ConvexConstraint::quadratic(Matrix(1, 1, {q}));
    for (double x : {-2.0, -0.3, 0.0, 1.7}) {
        for (double eps : {0.1, 0.5}) {
            const double exact = q * x * x / (2.0 * (1.0 + q * eps));
            CHECK(yosida_value(c, eps, Vector{x}) == doctest::Approx(exact).epsilon(1e-12));
            const auto pi = [q](double z) { return 0.5 * q * z * z; };
            CHECK(std::abs(grid_envelope(pi, eps, x) - exact) <= 1e-5);
        }
    }
}

TEST_CASE("grid brute force in the library agrees with the closed form") {
    const auto c = ConvexConstraint::quadratic(Matrix(2, 2, {2.0, 0.5, 0.5, 1.0}));
    const Vector x{0.4, -0.7};
    CHECK(std::abs(yosida_value_grid(c, 0.2, x, 1.5, 1e-3) - yosida_value(c, 0.2, x)) <= 1e-5);
}

TEST_CASE("projections onto simple sets") {
    const auto box = ConvexConstraint::box({-1.0, 0.0}, {1.0, 2.0});
    const auto p = project(box, Vector{3.0, -1.0});
    CHECK(p == Vector{1.0, 0.0});
    const auto ball = ConvexConstraint::ball({0.0, 0.0}, 2.0);
    const auto b = project(ball, Vector{3.0, 4.0});
    CHECK(b[0] == doctest::Approx(1.2));
    CHECK(b[1] == doctest::Approx(1.6));
    const auto poly = ConvexConstraint::polytope({{{1.0, 0.0}, 1.0}, {{0.0, 1.0}, 1.0}});
    const auto q = project(poly, Vector{2.0, 3.0});
    CHECK(q[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(q[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("constructors reject sets that miss the origin") {
    CHECK_THROWS_AS((void)ConvexConstraint::half_space({1.0}, -0.5), ConfigError);
    CHECK_THROWS_AS((void)ConvexConstraint::box({0.5}, {1.0}), ConfigError);
    CHECK_THROWS_AS((void)ConvexConstraint::ball({3.0, 0.0}, 1.0), ConfigError);
    CHECK_THROWS_AS((void)ConvexConstraint::quadratic(Matrix(2, 2, {1.0, 0.0, 0.0, -1.0})),
                    ConfigError);
}

TEST_CASE("all seven envelope properties hold on every geometry") {
    const auto samples = random_points(60, 2, 2.5, 7);
    const std::vector<double> eps{0.3, 0.05, 0.002};
    for (const auto& c : {ConvexConstraint::half_space({1.0, -1.0}, 0.2),
                          ConvexConstraint::box({-1.0, -1.0}, {0.5, 2.0}),
                          ConvexConstraint::ball({0.1, 0.1}, 1.0),
                          ConvexConstraint::polytope({{{1.0, 1.0}, 1.0}, {{-1.0, 0.5}, 1.0}}),
                          ConvexConstraint::quadratic(Matrix(2, 2, {1.0, 0.2, 0.2, 0.5}))}) {
        const auto rep = check_yosida_properties(c, eps, samples);
        for (std::size_t i = 0; i < 7; ++i) {
            INFO(c.describe() << " " << PropertyReport::kNames[i]);
            CHECK(rep.passed(i));
        }
    }
}

TEST_CASE("smooth constraints without a closed form use the grid tolerance") {
    SmoothFunction fn;
    fn.value = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += std::log(std::cosh(v));
        return s;
    };
    fn.gradient = [](std::span<const double> x, std::span<double> g) {
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = std::tanh(x[i]);
    };
    fn.gradient_lipschitz = 1.0;
    const auto c = ConvexConstraint::smooth(2, fn);
    const auto rep = check_yosida_properties(c, std::vector<double>{0.1, 0.01},
                                             random_points(30, 2, 2.0, 3));
    CHECK(rep.tolerance == kGridTol);
    CHECK(rep.all_passed());
}

TEST_CASE("normal cone residual separates outward and inward directions") {
    const auto c = ConvexConstraint::half_space({-1.0, 0.0}, 0.0);
    const Vector x{0.0, 0.5};
    const auto probes = probe_points(c, x);
    CHECK(normal_cone_residual(c, x, Vector{-1.0, 0.0}, probes) <= 1e-12);
    CHECK(normal_cone_residual(c, x, Vector{1.0, 0.0}, probes) > 0.1);
    CHECK(std::isinf(normal_cone_residual(c, Vector{-1.0, 0.0}, Vector{-1.0, 0.0}, probes)));
}

TEST_CASE("interior constants of indicators") {
    const auto c = ConvexConstraint::ball({0.0, 0.0}, 2.0);
    const auto k = interior_constants(c, {{0.5, 0.0}, 1.0});
    CHECK(k.lambda1 == 1.0);
    CHECK(k.lambda2 == 0.0);
    CHECK(k.lambda3 == 0.0);
    CHECK_THROWS_AS((void)interior_constants(c, {{1.5, 0.0}, 1.0}), CertificateError);
}
