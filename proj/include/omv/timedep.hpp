#pragma once

// Constraints that move in time, x(t) ∈ H(t)Ξ. The substitution
// x̄ = H^{-1}(t) x turns them into a fixed-set problem on Ξ with oblique
// matrix (H^{-1}(t))^2, which the projected scheme can solve.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "omv/convex.hpp"
#include "omv/dynamics.hpp"
#include "omv/mvsolver.hpp"
#include "omv/paths.hpp"

namespace omv::timedep {

/// Form of the reduced coefficients.
///   AsPrinted:  f̄ = H^{-1}(f + H'x̄),  ḡ = H^{-1}(g + H'x̄)
///   DriftOnly:  f̄ = H^{-1}(f - H'x̄),  ḡ = H^{-1} g   (Itô chain rule)
/// In AsPrinted mode H'x̄ is added to every column of g.
enum class Correction { AsPrinted, DriftOnly };

[[nodiscard]] std::string_view to_string(Correction c);

struct MovingConstraintProblem {
    std::string name;
    /// Fixed set Ξ (indicator kind).
    convex::ConvexConstraint base;
    /// Time-only H(t), ideally with an analytic derivative.
    dynamics::ObliqueField h;
    /// f(x, μ̄), g(x, μ̄) with μ̄ the law of H^{-1}(t) x.
    dynamics::CoefficientField coefficients;
    Vector x0;
    double t0 = 0.0;
    double horizon = 1.0;
};

struct ReducedSystem {
    dynamics::System system;
    /// H' was not supplied and is replaced by central differences.
    bool derivative_approximated = false;
    /// sup_t |H'(t)|_F over the sampled times.
    double derivative_bound = 0.0;
};

/// Builds the fixed-set problem. Throws SpectralError when H(t) is not
/// symmetric or leaves [a_H, b_H] at one of the sampled times.
[[nodiscard]] ReducedSystem reduce_time_dependent(const MovingConstraintProblem& problem,
                                                  Correction correction);

// Matrix families H(t).

/// (a + b t) I on [t0, t1].
[[nodiscard]] dynamics::ObliqueField affine_family(std::size_t dim, double a, double b, double t0,
                                                   double t1);
/// e^{rate t} I on [t0, t1].
[[nodiscard]] dynamics::ObliqueField exponential_family(std::size_t dim, double rate, double t0,
                                                        double t1);
/// (1 + growth t) R(ω t) diag(l1, l2) R(ω t)^T in the plane.
[[nodiscard]] dynamics::ObliqueField rotation_scaled_family(double l1, double l2, double omega,
                                                            double growth, double t0, double t1);

/// x(t_k) = H(t_k) x̄(t_k); reflection increments become H^{-1}(t_k) Δk̄.
[[nodiscard]] PathEnsemble lift_solution(const PathEnsemble& reduced,
                                         const dynamics::ObliqueField& h);

/// dist(x, H(t)Ξ). Exact for scalar H; otherwise the bound b_H dist(H^{-1}x, Ξ).
[[nodiscard]] double moving_set_distance(const MovingConstraintProblem& problem, double t,
                                         std::span<const double> x);

/// Direct Euler scheme for a one-dimensional moving interval: free step,
/// then clamp onto H(t_{k+1})Ξ. Uses the same noise keys as the solver.
[[nodiscard]] PathEnsemble simulate_moving_interval(const MovingConstraintProblem& problem,
                                                    const TimeGrid& grid,
                                                    const solver::SimOptions& options,
                                                    std::size_t replication);

struct EquivalenceLevel {
    std::size_t steps = 0;
    double step = 0.0;
    /// Mean over particles of sup_t |x_lifted - x_direct| (NaN without a direct solver).
    double mean_sup_distance = 0.0;
    /// Max over particles and nodes of |x_lifted - x_direct|.
    double max_distance = 0.0;
    /// Max dist(x_lifted(t), H(t)Ξ).
    double lifted_feasibility = 0.0;
};

struct ConvergenceReport {
    Correction correction = Correction::DriftOnly;
    bool derivative_approximated = false;
    bool has_direct = false;
    std::vector<EquivalenceLevel> levels;

    /// mean_sup_distance strictly decreasing along the ladder.
    [[nodiscard]] bool monotone() const;
};

/// Solves the reduced problem with the projected scheme on each grid of
/// the ladder, lifts it, and compares with the direct solver (1D only)
/// under common noise.
[[nodiscard]] ConvergenceReport equivalence_check(const MovingConstraintProblem& problem,
                                                  std::span<const std::size_t> steps_ladder,
                                                  const solver::SimOptions& options,
                                                  Correction correction);

/// Bundled 1D problem: Ξ = [0, 1], H(t) = a + b t, f = drift + kappa E[x̄],
/// g = sigma. Defaults give the interval [0, 1 + t] with an outward push.
[[nodiscard]] MovingConstraintProblem moving_interval_problem(const dynamics::Parameters& params = {});

}  // namespace omv::timedep
