#pragma once

// Particle schemes for the constrained McKean-Vlasov equation
//   dx + H(x, μ) ∂Π(x) dt ∋ f(x, μ) dt + g(x, μ) dB,
// the penalized explicit Euler scheme with ∂Π replaced by ∇Π_ε, the
// projected scheme built from one oblique Skorohod step per time step, the
// dyadic frozen-coefficient iteration, and diagnostics of the solution
// clauses on the resulting paths.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "omv/convex.hpp"
#include "omv/dynamics.hpp"
#include "omv/linalg.hpp"
#include "omv/noise.hpp"
#include "omv/paths.hpp"

namespace omv::solver {

/// Divergence guard of the explicit schemes.
inline constexpr double kBlowUp = 1e8;

struct SkorohodStep {
    Vector x;
    Vector dk;
};

/// Solves x + H Δk = y with x in the set and Δk in the normal cone at x,
/// i.e. x is the projection of y in the metric <u, v> = u^T H^{-1} v.
/// Half-spaces are closed form, boxes use face enumeration (clamping when H
/// is diagonal), balls a secular equation in the multiplier, polytopes an
/// active-set enumeration (Dykstra in the H^{-1} metric when there are more
/// than 4096 candidate sets). Throws StepError tagged with `step` when
/// the solve does not reach the set.
[[nodiscard]] SkorohodStep oblique_skorohod_step(const convex::ConvexConstraint& c,
                                                 const Matrix& h, std::span<const double> y,
                                                 std::size_t step = 0);

/// Allocation-free variant writing into x and dk.
void oblique_skorohod_step(const convex::ConvexConstraint& c, const Matrix& h,
                           std::span<const double> y, std::span<double> x, std::span<double> dk,
                           std::size_t step = 0);

/// Piecewise-constant control: values[i] on [switch_times[i-1], switch_times[i]).
struct ControlSchedule {
    std::vector<double> switch_times;
    std::vector<Vector> values;

    [[nodiscard]] static ControlSchedule constant(Vector u) { return {{}, {std::move(u)}}; }
    [[nodiscard]] std::span<const double> at(double t) const;
};

struct SimOptions {
    std::size_t particles = 256;
    std::size_t replications = 1;
    std::size_t threads = 1;
    NoiseSource noise{};
    std::optional<ControlSchedule> control;
    /// Overrides the system's initial state.
    std::optional<Vector> x0;
    /// Reject penalized runs with h > ε / (2 b_H).
    bool enforce_stability = true;
};

/// Throws ConfigError unless h <= ε / (2 b_H).
void check_penalized_stability(const dynamics::System& system, double eps, const TimeGrid& grid);

/// x_{k+1} = x_k + h [f - H ∇Π_ε(x_k)] + g ΔB_k with μ_k the empirical law
/// of the replication's particles at node k. Records U_k = ∇Π_ε(x_k).
[[nodiscard]] PathEnsemble simulate_penalized(const dynamics::System& system, double eps,
                                              const TimeGrid& grid, const SimOptions& options,
                                              std::size_t replication);
[[nodiscard]] std::vector<PathEnsemble> simulate_penalized(const dynamics::System& system,
                                                           double eps, const TimeGrid& grid,
                                                           const SimOptions& options);

/// Free Euler increment followed by one oblique Skorohod step with H frozen
/// at the left endpoint. Requires an indicator constraint.
[[nodiscard]] PathEnsemble simulate_projected(const dynamics::System& system, const TimeGrid& grid,
                                              const SimOptions& options, std::size_t replication);
[[nodiscard]] std::vector<PathEnsemble> simulate_projected(const dynamics::System& system,
                                                           const TimeGrid& grid,
                                                           const SimOptions& options);

struct EulerIteration {
    /// iterates[0] is the constant path x0 (law δ_{x0}).
    std::vector<PathEnsemble> iterates;
    /// sup_distance[n] = max over particles and nodes of |x^{n+1} - x^n|.
    std::vector<double> sup_distance;
};

/// Iterate n is the projected scheme whose f, g, H are evaluated at
/// (x^{n-1}(t_n), μ^{n-1}_{t_n}), t_n = 2^{-level} floor(2^level t). All
/// iterates share the same Brownian increments.
[[nodiscard]] EulerIteration euler_iteration(const dynamics::System& system, int level,
                                             std::size_t iterations, const TimeGrid& grid,
                                             const SimOptions& options,
                                             std::size_t replication = 0);

struct SolutionDiagnostics {
    /// max over probe paths y, particles and subintervals of
    /// ∫<y - x, dk> + ∫Π(x) dt - ∫Π(y) dt (clause of the subgradient inclusion).
    double variational = 0.0;
    /// max dist(x(t), D(∂Π)) over nodes.
    double feasibility = 0.0;
    /// max |x(t) + ∫H dk - x0 - ∫f dt - ∫g dB| over nodes.
    double equation = 0.0;
    /// Σ dist(x, boundary) |Δk| / ↕k↕(T), worst particle (indicator only).
    double complementarity = 0.0;
    /// max normal_cone_residual(x, Δk) over reflecting steps (projected only).
    double normal_cone = 0.0;
    /// k(t0) = 0, ↕k↕ nondecreasing and ↕k↕(t) - ↕k↕(r) >= |k(t) - k(r)| (spot checks).
    bool variation_consistent = true;
};

/// Recomputes the scheme's coefficients and noise along the stored paths.
/// Probe paths are the constants at `probes` (default: probe_points around
/// x0) plus each particle's own path shifted along the coordinate axes and
/// projected back onto the set.
[[nodiscard]] SolutionDiagnostics residual_report(const PathEnsemble& ensemble,
                                                  const dynamics::System& system,
                                                  const SimOptions& options,
                                                  const std::vector<Vector>& probes = {});

/// min over particles and subintervals of
///   ∫<x - a, dk> - λ1 Δ↕k↕ + λ2 ∫|x - a| dt + λ3 Δt,
/// which is nonnegative when the interior estimate holds.
[[nodiscard]] double interior_estimate_check(std::span<const PathEnsemble> ensembles,
                                   const convex::ConvexConstraint& constraint,
                                   const convex::InteriorCertificate& certificate);

/// Mean over particles of sup_k |a_i(k) - b_i(k)|^2. Ensembles must share
/// grid and particle count.
[[nodiscard]] double mean_sup_squared_distance(const PathEnsemble& a, const PathEnsemble& b);

/// Mean over particles of Σ_k |U_k|^2 h, the energy ∫|∇Π_ε(x)|^2 dt.
[[nodiscard]] double penalty_energy(const PathEnsemble& ensemble);

/// Columns replication, particle, t, x_1..x_m, k_1..k_m, variation.
void write_trajectories(std::ostream& os, std::span<const PathEnsemble> ensembles);

}  // namespace omv::solver
