#pragma once

// Monte-Carlo optimal control of the constrained equation: costs, value
// functions over piecewise-constant controls, the dynamic programming
// residual, and log-log rate probes. All comparisons use common random
// numbers: every run keys its noise on absolute grid indices.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omv/dynamics.hpp"
#include "omv/mvsolver.hpp"
#include "omv/noise.hpp"
#include "omv/paths.hpp"

namespace omv::control {

struct ControlProblem {
    std::string name;
    /// Controlled coefficients f(x, μ, u), g(x, μ, u); H must depend on time only.
    dynamics::System system;
    dynamics::CostField costs;
    /// Finite control set U.
    std::vector<Vector> controls;
    double start = 0.0;
    double horizon = 1.0;
};

/// Throws ConfigError for an empty control set, state- or law-dependent H,
/// non-normalized costs, or an empty horizon.
void validate(const ControlProblem& problem);

struct SimConfig {
    /// Time step; every start time must be a multiple of it.
    double step = 1.0 / 2048.0;
    std::size_t particles = 256;
    std::size_t replications = 64;
    std::size_t threads = 1;
    NoiseSource noise{};
    /// Equally spaced switch points in (start, horizon).
    std::size_t switches = 0;
    /// Nested Monte Carlo of the DPP residual.
    std::size_t inner_replications = 16;
    std::size_t clusters = 8;
    /// Upper bound on particle-steps spent in nested simulations.
    double budget = 4e9;
};

struct Scheme {
    bool penalized = false;
    double eps = 0.0;

    [[nodiscard]] static Scheme projected() { return {}; }
    [[nodiscard]] static Scheme penalty(double eps) { return {true, eps}; }
};

struct CostEstimate {
    double value = 0.0;
    double stderr = 0.0;
};

/// J = E[∫ b(x, u) dt + α(x(T))], trapezoid in time with u taken at the
/// left endpoint, averaged over particles; the standard error is over
/// replication means (over particles when there is one replication).
[[nodiscard]] CostEstimate cost(std::span<const PathEnsemble> ensembles,
                                const solver::ControlSchedule& control,
                                const dynamics::CostField& costs);

/// All schedules with values in `controls` on the pieces cut by `switch_times`.
/// Throws ConfigError when there are more than 1e5 of them.
[[nodiscard]] std::vector<solver::ControlSchedule> enumerate_controls(
    const std::vector<Vector>& controls, const std::vector<double>& switch_times);

/// config.switches equally spaced points strictly inside (start, end).
[[nodiscard]] std::vector<double> switch_points(double start, double end, std::size_t switches);

struct ValueEstimate {
    double value = 0.0;
    double mc_stderr = 0.0;
    std::size_t replications = 0;
    solver::ControlSchedule control;
    std::size_t control_index = 0;
    /// Cost of every enumerated control, in enumeration order.
    std::vector<CostEstimate> costs;
    /// Per-replication costs of the minimizing control, for paired comparisons
    /// under common noise.
    std::vector<double> replication_values;
};

/// min over the enumerated controls of the cost, started at (start, x0)
/// (the problem's when not given).
[[nodiscard]] ValueEstimate value(const ControlProblem& problem, const Scheme& scheme,
                                  const SimConfig& config, std::optional<double> start = {},
                                  std::optional<Vector> x0 = {});

/// Value with explicit switch times (used for the DPP split at τ).
[[nodiscard]] ValueEstimate value_with_switches(const ControlProblem& problem, const Scheme& scheme,
                                                const SimConfig& config, double start,
                                                const Vector& x0,
                                                const std::vector<double>& switch_times);

struct DppResult {
    double residual = 0.0;
    double stderr = 0.0;
    double lhs = 0.0;
    double lhs_stderr = 0.0;
    double rhs = 0.0;
    double rhs_stderr = 0.0;
    std::size_t clusters = 0;
};

/// |V(s, x0) - min_u E[∫_s^τ b dt + V(τ, x(τ))]|. V(τ, ·) is estimated by
/// inner value runs at k-means centres of the simulated x(τ) and looked up
/// by nearest centre. The left side uses switch times that include τ.
[[nodiscard]] DppResult dpp_residual(const ControlProblem& problem, double tau,
                                     const Scheme& scheme, const SimConfig& config);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares of y on x.
[[nodiscard]] LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct RatePoint {
    double abscissa = 0.0;  // ε + ε' or ε
    double value = 0.0;     // distance or |V_ε - V|
    double stderr = 0.0;
};

struct RateReport {
    std::vector<RatePoint> points;
    LinearFit fit;
    /// Some value vanished or sits at round-off, so no log-log fit is meaningful.
    bool degenerate = false;
    /// Difference between the reference value on steps h and h/2.
    double quadrature_floor = 0.0;
    /// Some |V_ε - V| is below the quadrature floor.
    bool floor_reached = false;
};

/// Fits log E sup|x^ε - x^ε'|^2 against log(ε + ε') over consecutive ladder
/// pairs, common noise across ε. Needs at least three ladder points.
[[nodiscard]] RateReport penalization_rate_probe(const dynamics::System& system,
                                                 const TimeGrid& grid,
                                                 std::span<const double> eps_ladder,
                                                 const solver::SimOptions& options);

/// Fits log|V_ε - V| against log ε with V from the projected scheme.
/// `measure_floor` also evaluates V on the halved step.
[[nodiscard]] RateReport value_rate_probe(const ControlProblem& problem,
                                          std::span<const double> eps_ladder,
                                          const SimConfig& config, bool measure_floor = true);

struct RegularityProbe {
    double scale = 0.0;
    double dx = 0.0;
    double ds = 0.0;
    double dv = 0.0;
    double stderr = 0.0;
    double ratio = 0.0;  // |ΔV| / (|Δx| + |Δs|^{1/2})
};

struct RegularityReport {
    double base_value = 0.0;
    double base_stderr = 0.0;
    std::vector<RegularityProbe> probes;
    /// Largest ratio per scale, in the order of `scales`.
    std::vector<double> max_ratio;
    /// Noise allowance on the ratio at each scale: 3 stderr / denominator.
    std::vector<double> allowance;
    /// Smallest-scale max ratio <= 3 x largest-scale max ratio + allowance.
    bool passed = false;
};

/// Perturbs (s, x0) by (δ, 0), (0, δ), (δ, δ) per scale δ (Δx along the
/// first axis, Δs rounded to the time step) under common noise.
[[nodiscard]] RegularityReport value_regularity_probe(const ControlProblem& problem,
                                                      std::span<const double> scales,
                                                      const SimConfig& config);

/// One-dimensional problem on [0, inf): dx = u dt + sigma dB, u in {-1, +1},
/// H(t) = 1 + h_slope t, b = alpha = |x|.
[[nodiscard]] ControlProblem two_control_problem(const dynamics::Parameters& params = {});

}  // namespace omv::control
