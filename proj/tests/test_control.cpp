#include <cmath>

#include "doctest.h"
#include "omv/control.hpp"
#include "omv/errors.hpp"

using omv::NoiseSource;
using omv::Vector;
using omv::TimeGrid;
namespace dynamics = omv::dynamics;
namespace solver = omv::solver;
using namespace omv::control;

namespace {

SimConfig small(std::size_t reps = 4) {
    SimConfig c;
    c.step = 1.0 / 256.0;
    c.particles = 64;
    c.replications = reps;
    c.noise = NoiseSource(17);
    return c;
}

ControlProblem scaled_costs(ControlProblem p, double s) {
    auto run = p.costs.running;
    auto term = p.costs.terminal;
    p.costs.running = [run, s](std::span<const double> x, std::span<const double> u) {
        return s * run(x, u);
    };
    p.costs.terminal = [term, s](std::span<const double> x) { return s * term(x); };
    return p;
}

}  // namespace

TEST_CASE("deterministic two-control oracle") {
    // x0 = 0.5: drift -1 reaches 0 at t = 0.5 and stays, cost 1/8;
    // drift +1 gives 1 + 1.5.
    const auto prob = two_control_problem({{"sigma", 0.0}});
    const auto v = value(prob, Scheme::projected(), small(1));
    CHECK(v.control_index == 0);
    CHECK(v.value == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(v.costs[1].value == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("more switch times never raise the value") {
    const auto prob = two_control_problem();
    auto cfg = small();
    const auto v0 = value(prob, Scheme::projected(), cfg);
    cfg.switches = 1;
    const auto v1 = value(prob, Scheme::projected(), cfg);
    CHECK(v1.value <= v0.value);
}

TEST_CASE("cost is linear in the running and terminal costs") {
    const auto prob = two_control_problem();
    const auto cfg = small();
    const auto a = value(prob, Scheme::projected(), cfg);
    const auto b = value(scaled_costs(prob, 2.0), Scheme::projected(), cfg);
    for (std::size_t c = 0; c < a.costs.size(); ++c)
        CHECK(b.costs[c].value == 2.0 * a.costs[c].value);
    const auto c3 = value(scaled_costs(prob, 3.0), Scheme::projected(), cfg);
    CHECK(c3.control_index == a.control_index);
}

TEST_CASE("zero costs and a single control give a zero value") {
    auto prob = two_control_problem();
    prob.controls = {{-1.0}};
    prob = scaled_costs(prob, 0.0);
    const auto cfg = small();
    CHECK(value(prob, Scheme::projected(), cfg).value == 0.0);
    CHECK(value(prob, Scheme::penalty(0.125), cfg).value == 0.0);
    const std::vector<double> ladder{0.125, 0.0625, 0.03125};
    CHECK(value_rate_probe(prob, ladder, cfg, false).degenerate);
}

TEST_CASE("dynamic programming residual") {
    auto prob = two_control_problem();
    const auto cfg = small();
    CHECK(dpp_residual(prob, prob.start, Scheme::projected(), cfg).residual == 0.0);
    prob.controls = {{-1.0}};
    const auto r = dpp_residual(prob, 0.5, Scheme::projected(), cfg);
    CHECK(r.residual <= std::max(3.0 * r.stderr, 5.0 * cfg.step));
    auto tight = cfg;
    tight.budget = 10.0;
    CHECK_THROWS_AS((void)dpp_residual(prob, 0.5, Scheme::projected(), tight), omv::BudgetError);
}

TEST_CASE("control enumeration") {
    const std::vector<Vector> u{{-1.0}, {0.0}, {1.0}};
    const auto all = enumerate_controls(u, {0.25, 0.5});
    CHECK(all.size() == 27);
    CHECK(all[5].values[0][0] == 1.0);
    CHECK(all[5].values[1][0] == 0.0);
    CHECK_THROWS_AS((void)enumerate_controls(u, switch_points(0.0, 1.0, 11)), omv::ConfigError);
    CHECK(switch_points(0.0, 1.0, 3) == std::vector<double>{0.25, 0.5, 0.75});
}

TEST_CASE("line fit") {
    const std::vector<double> x{0.0, 1.0, 2.0}, y{1.0, 3.0, 5.0};
    const auto f = fit_line(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r_squared == doctest::Approx(1.0));
}

TEST_CASE("rate probes need three ladder points") {
    const auto prob = two_control_problem();
    const std::vector<double> ladder{0.1, 0.05};
    CHECK_THROWS_AS((void)value_rate_probe(prob, ladder, small()), omv::ConfigError);
}

TEST_CASE("penalization probe flags a system that never reaches the boundary") {
    auto sys = dynamics::make_system("reflected_bm", {{"sigma", 0.0}, {"x0", 1.0}});
    solver::SimOptions opt;
    opt.particles = 8;
    const std::vector<double> ladder{0.125, 0.0625, 0.03125};
    const auto r = penalization_rate_probe(sys, TimeGrid(0.0, 1.0, 128), ladder, opt);
    CHECK(r.degenerate);
}

TEST_CASE("regularity probe on a deterministic linear value") {
    // sigma = 0, x0 well inside, drift -1 keeps away from 0 over [0, 1]:
    // V(s, x) = (x - (1-s)/2)(1-s) + x - (1-s), linear in x.
    auto prob = two_control_problem({{"sigma", 0.0}, {"x0", 3.0}});
    const std::vector<double> scales{0.1, 0.01};
    const auto r = value_regularity_probe(prob, scales, small(1));
    CHECK(r.passed);
    CHECK(r.probes[0].ratio == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r.probes[3].ratio == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("state-dependent H is rejected") {
    auto prob = two_control_problem();
    prob.system.oblique.state_dependent = true;
    CHECK_THROWS_AS(validate(prob), omv::ConfigError);
}
