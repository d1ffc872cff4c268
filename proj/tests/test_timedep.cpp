#include <cmath>

#include "doctest.h"
#include "omv/errors.hpp"
#include "omv/timedep.hpp"
#include "support.hpp"

using namespace omv;
using namespace omv::timedep;

namespace {

MovingConstraintProblem problem_with(dynamics::ObliqueField h, double drift = 0.0) {
    auto base = test::half_line_system(drift, 0.0, 0.5);
    return {"test", convex::ConvexConstraint::box({0.0}, {1.0}), std::move(h),
            std::move(base.coefficients), {0.5}, 0.0, 1.0};
}

}  // namespace

TEST_CASE("identity H leaves the problem unchanged") {
    auto prob = problem_with(affine_family(1, 1.0, 0.0, 0.0, 1.0), 0.37);
    const auto r = reduce_time_dependent(prob, Correction::DriftOnly);
    const EmpiricalMeasure mu = dirac(Vector{0.2});
    const Vector x{0.2};
    CHECK(r.system.coefficients.f(x, mu, 0.4)[0] == prob.coefficients.f(x, mu, 0.4)[0]);
    CHECK(r.system.oblique.at_time(0.4)(0, 0) == 1.0);
    CHECK_FALSE(r.derivative_approximated);
}

TEST_CASE("reduced drift for H(t) = (1 + t) I") {
    const auto prob = problem_with(affine_family(1, 1.0, 1.0, 0.0, 1.0));
    const EmpiricalMeasure mu = dirac(Vector{0.0});
    const Vector xbar{0.8};
    const double t = 0.5;
    const auto chain = reduce_time_dependent(prob, Correction::DriftOnly);
    CHECK(chain.system.coefficients.f(xbar, mu, t)[0] == doctest::Approx(-0.8 / 1.5));
    CHECK(chain.system.coefficients.g(xbar, mu, t)(0, 0) == doctest::Approx(0.0));
    const auto printed = reduce_time_dependent(prob, Correction::AsPrinted);
    CHECK(printed.system.coefficients.f(xbar, mu, t)[0] == doctest::Approx(0.8 / 1.5));
    CHECK(printed.system.coefficients.g(xbar, mu, t)(0, 0) == doctest::Approx(0.8 / 1.5));
    CHECK(chain.system.oblique.at_time(t)(0, 0) == doctest::Approx(1.0 / 2.25));
}

TEST_CASE("reduced drift for H(t) = e^t") {
    const auto prob = problem_with(exponential_family(1, 1.0, 0.0, 1.0), 0.3);
    const auto r = reduce_time_dependent(prob, Correction::AsPrinted);
    const EmpiricalMeasure mu = dirac(Vector{0.0});
    const double t = 0.7;
    const Vector xbar{0.25};
    CHECK(r.system.coefficients.f(xbar, mu, t)[0] ==
          doctest::Approx(std::exp(-t) * 0.3 + 0.25).epsilon(1e-12));
}

TEST_CASE("finite-difference derivative is flagged") {
    auto h = affine_family(1, 1.0, 0.5, 0.0, 1.0);
    h.derivative.reset();
    const auto r = reduce_time_dependent(problem_with(std::move(h)), Correction::DriftOnly);
    CHECK(r.derivative_approximated);
    CHECK(r.derivative_bound == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("bands are checked on the horizon") {
    auto h = affine_family(1, 1.0, 1.0, 0.0, 1.0);
    h.b_h = 1.5;
    CHECK_THROWS_AS((void)reduce_time_dependent(problem_with(std::move(h)), Correction::DriftOnly),
                    SpectralError);
    const auto rot = rotation_scaled_family(1.0, 2.0, 1.0, 0.5, 0.0, 1.0);
    const auto m = rot.at_time(0.3);
    CHECK(m.asymmetry() <= 1e-14);
}

TEST_CASE("lifted solutions stay in the moving interval") {
    const auto prob = moving_interval_problem();
    const auto reduced = reduce_time_dependent(prob, Correction::DriftOnly);
    solver::SimOptions opt;
    opt.particles = 32;
    const TimeGrid grid(0.0, 1.0, 256);
    const auto lifted =
        lift_solution(solver::simulate_projected(reduced.system, grid, opt, 0), prob.h);
    double worst = 0.0;
    for (const auto& p : lifted.paths)
        for (std::size_t k = 0; k <= grid.steps(); ++k)
            worst = std::max(worst, moving_set_distance(prob, grid.time(k), p.state(k)));
    CHECK(worst <= 1e-8);
    CHECK(moving_set_distance(prob, 1.0, Vector{2.5}) == doctest::Approx(0.5));
}

TEST_CASE("reduced and direct solvers converge together") {
    const auto prob = moving_interval_problem();
    solver::SimOptions opt;
    opt.particles = 64;
    const std::vector<std::size_t> ladder{64, 128, 256};
    const auto r = equivalence_check(prob, ladder, opt, Correction::DriftOnly);
    CHECK(r.has_direct);
    CHECK(r.monotone());
}
