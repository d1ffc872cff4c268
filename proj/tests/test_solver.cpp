#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "omv/errors.hpp"
#include "omv/measures.hpp"
#include "omv/mvsolver.hpp"
#include "support.hpp"

using namespace omv;
using namespace omv::solver;

TEST_CASE("oblique step on a half-plane with diagonal H") {
    const auto c = convex::ConvexConstraint::half_space({-1.0, 0.0}, 0.0);
    const auto s = oblique_skorohod_step(c, Matrix::diagonal(Vector{2.0, 1.0}), Vector{-2.0, 3.0});
    CHECK(s.x[0] == doctest::Approx(0.0));
    CHECK(s.x[1] == doctest::Approx(3.0));
    CHECK(s.dk[0] == doctest::Approx(-1.0));
    CHECK(s.dk[1] == doctest::Approx(0.0));
}

TEST_CASE("oblique steps satisfy x + H dk = y on every geometry") {
    const Matrix h(2, 2, {2.0, 0.7, 0.7, 1.0});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (const auto& c : {convex::ConvexConstraint::box({-1.0, -0.5}, {1.0, 0.5}),
                          convex::ConvexConstraint::ball({0.0, 0.2}, 1.0),
                          convex::ConvexConstraint::polytope(
                              {{{1.0, 1.0}, 1.0}, {{1.0, -1.0}, 1.0}, {{-1.0, 0.0}, 0.5}})}) {
        for (int i = 0; i < 200; ++i) {
            const Vector y{u(rng), u(rng)};
            const auto s = oblique_skorohod_step(c, h, y);
            CHECK(c.distance_to_domain(s.x) <= 1e-9);
            CHECK(distance(add(s.x, multiply(h, s.dk)), y) <= 1e-9);
            CHECK(convex::normal_cone_residual(c, s.x, s.dk, convex::probe_points(c, s.x)) <= 1e-7);
        }
    }
}

TEST_CASE("penalized relaxation follows the exact exponential") {
    const auto sys = test::half_line_system(0.0, 0.0, -1.0);
    const double eps = 0.1;
    const TimeGrid grid(0.0, 0.5, 50'000);
    SimOptions opt;
    opt.particles = 1;
    const auto e = simulate_penalized(sys, eps, grid, opt, 0);
    for (std::size_t k = 0; k <= grid.steps(); k += 5000) {
        const double exact = -std::exp(-grid.time(k) / eps);
        CHECK(std::abs(e.paths[0].state(k)[0] - exact) <= 1e-4);
    }
}

TEST_CASE("stability rule and divergence guard") {
    const auto sys = dynamics::make_system("ou");
    SimOptions opt;
    opt.particles = 2;
    CHECK_THROWS_AS((void)simulate_penalized(sys, 0.01, TimeGrid(0.0, 1.0, 16), opt, 0), ConfigError);
    CHECK_NOTHROW((void)simulate_penalized(sys, 0.01, TimeGrid(0.0, 1.0, 200), opt, 0));
    CHECK_THROWS_AS((void)simulate_penalized(sys, 0.0, TimeGrid(0.0, 1.0, 200), opt, 0),
                    DomainError);
    opt.enforce_stability = false;
    auto strip = test::half_line_system(0.0, 0.0, -1.0);
    strip.constraint = convex::ConvexConstraint::box({0.0}, {0.5});
    CHECK_THROWS_AS((void)simulate_penalized(strip, 0.01, TimeGrid(0.0, 1.0, 16), opt, 0),
                    DivergenceError);
}

TEST_CASE("reflected Brownian motion has mean sqrt(2T/pi)") {
    const auto sys = dynamics::make_system("reflected_bm");
    SimOptions opt;
    opt.particles = 512;
    opt.replications = 4;
    opt.noise = NoiseSource(3);
    const auto ens = simulate_projected(sys, TimeGrid(0.0, 1.0, 4096), opt);
    std::vector<double> xt;
    for (const auto& e : ens)
        for (const auto& p : e.paths) xt.push_back(p.state(p.steps())[0]);
    const double exact = std::sqrt(2.0 / std::numbers::pi);
    CHECK(std::abs(test::mean(xt) - exact) <= 3.0 * test::stderr_of(xt));
}

TEST_CASE("results do not depend on the thread count") {
    const auto sys = dynamics::make_system("example31");
    SimOptions opt;
    opt.particles = 32;
    opt.replications = 5;
    opt.noise = NoiseSource(8);
    const TimeGrid grid(0.0, 0.25, 128);
    auto csv = [&](std::size_t threads) {
        opt.threads = threads;
        std::ostringstream os;
        write_trajectories(os, simulate_projected(sys, grid, opt));
        return os.str();
    };
    const auto one = csv(1);
    CHECK(one == csv(2));
    CHECK(one == csv(8));
}

TEST_CASE("grids on a common lattice share increments") {
    const auto sys = test::half_line_system(0.0, 1.0, 5.0);
    SimOptions opt;
    opt.particles = 4;
    const double h = 1.0 / 64.0;
    const auto full = simulate_projected(sys, TimeGrid::with_step(0.0, 1.0, h), opt, 0);
    opt.x0 = Vector(full.paths[2].state(32).begin(), full.paths[2].state(32).end());
    const auto tail = simulate_projected(sys, TimeGrid::with_step(0.5, 1.0, h), opt, 0);
    // Far from the boundary both runs are free Brownian paths.
    CHECK(tail.paths[2].state(32)[0] == doctest::Approx(full.paths[2].state(64)[0]).epsilon(1e-12));
}

TEST_CASE("control schedules switch at the switch time") {
    const ControlSchedule s{{0.5}, {{-1.0}, {1.0}}};
    CHECK(s.at(0.49)[0] == -1.0);
    CHECK(s.at(0.5)[0] == 1.0);
    CHECK(ControlSchedule::constant({2.0}).at(10.0)[0] == 2.0);
}

TEST_CASE("dyadic snapping and frozen iterates") {
    CHECK(TimeGrid::dyadic_snap(0.7, 1) == 0.5);
    CHECK(TimeGrid::dyadic_snap(0.7, 3) == 0.625);
    const auto sys = test::half_line_system(0.3, 0.5, 0.2);
    SimOptions opt;
    opt.particles = 16;
    const auto it = euler_iteration(sys, 4, 3, TimeGrid(0.0, 1.0, 256), opt);
    REQUIRE(it.iterates.size() == 4);
    // Constant coefficients: freezing has no effect after the first iterate.
    CHECK(it.sup_distance[1] == 0.0);
    CHECK(it.sup_distance[2] == 0.0);
}

TEST_CASE("iteration on the box benchmark contracts") {
    const auto sys = dynamics::make_system("example31");
    SimOptions opt;
    opt.particles = 32;
    opt.noise = NoiseSource(6);
    const auto it = euler_iteration(sys, 6, 5, TimeGrid(0.0, 0.5, 256), opt);
    for (std::size_t n = 2; n + 1 < it.sup_distance.size(); ++n)
        CHECK(it.sup_distance[n + 1] <= it.sup_distance[n]);
}

TEST_CASE("projected solutions pass the residual checks") {
    const auto sys = dynamics::make_system("ball_oblique");
    SimOptions opt;
    opt.particles = 16;
    opt.noise = NoiseSource(12);
    const auto e = simulate_projected(sys, TimeGrid(0.0, 0.5, 256), opt, 0);
    const auto d = residual_report(e, sys, opt);
    CHECK(d.feasibility <= 1e-10);
    CHECK(d.equation <= 1e-8);
    CHECK(d.variational <= 1e-8);
    CHECK(d.normal_cone <= 1e-8);
    CHECK(d.complementarity <= 1e-8);
    CHECK(d.variation_consistent);
}

TEST_CASE("penalized solutions pass the residual checks at the resolvent") {
    const auto sys = dynamics::make_system("ou");
    SimOptions opt;
    opt.particles = 16;
    opt.noise = NoiseSource(13);
    const auto e = simulate_penalized(sys, 0.05, TimeGrid(0.0, 0.5, 512), opt, 0);
    const auto d = residual_report(e, sys, opt);
    CHECK(d.equation <= 1e-8);
    CHECK(d.variational <= 1e-8);
    CHECK(d.variation_consistent);
}

TEST_CASE("interior estimate on reflected paths") {
    const auto sys = dynamics::make_system("linear");
    SimOptions opt;
    opt.particles = 32;
    opt.replications = 2;
    const auto ens = simulate_projected(sys, TimeGrid(0.0, 1.0, 256), opt);
    CHECK(interior_estimate_check(ens, sys.constraint, *sys.certificate) >= -1e-8);
}

TEST_CASE("penalty energy vanishes away from the boundary") {
    const auto sys = test::half_line_system(1.0, 0.0, 1.0);
    SimOptions opt;
    opt.particles = 4;
    const auto e = simulate_penalized(sys, 0.1, TimeGrid(0.0, 1.0, 64), opt, 0);
    CHECK(penalty_energy(e) == 0.0);
}
