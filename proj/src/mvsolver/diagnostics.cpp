#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include "omv/csv.hpp"
#include "omv/errors.hpp"
#include "omv/mvsolver.hpp"

namespace omv::solver {
namespace {

using convex::ConvexConstraint;

// Point at which Δk_k is a subgradient: x_{k+1} for the projected scheme,
// J_ε x_k = x_k - ε U_k for the penalized one.
Vector paired_point(const PathEnsemble& e, const ConstrainedPath& p, std::size_t k) {
    if (e.scheme == Scheme::Projected) {
        const auto s = p.state(k + 1);
        return Vector(s.begin(), s.end());
    }
    Vector out(p.state(k).begin(), p.state(k).end());
    axpy(-e.epsilon, p.density(k), out);
    return out;
}

// Distance from a point of the set to its boundary (0 for points outside).
double boundary_distance(const ConvexConstraint& c, std::span<const double> x) {
    if (!c.has_set()) return std::numeric_limits<double>::infinity();
    return std::visit(
        [&](const auto& geo) -> double {
            using T = std::decay_t<decltype(geo)>;
            if constexpr (std::is_same_v<T, convex::HalfSpace>) {
                return std::max(0.0, (geo.offset - dot(geo.normal, x)) / norm(geo.normal));
            } else if constexpr (std::is_same_v<T, convex::Box>) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < x.size(); ++i)
                    best = std::min({best, x[i] - geo.lower[i], geo.upper[i] - x[i]});
                return std::max(0.0, best);
            } else if constexpr (std::is_same_v<T, convex::Ball>) {
                return std::max(0.0, geo.radius - distance(x, geo.center));
            } else {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& f : geo.faces)
                    best = std::min(best, (f.offset - dot(f.normal, x)) / norm(f.normal));
                return std::max(0.0, best);
            }
        },
        c.geometry());
}

Vector to_domain(const ConvexConstraint& c, Vector y) {
    return c.has_set() ? convex::project(c, y) : y;
}

// Largest sum over contiguous runs (0 for the empty run).
double max_subarray(std::span<const double> terms) {
    double best = 0.0, run = 0.0;
    for (double v : terms) {
        run = std::max(0.0, run + v);
        best = std::max(best, run);
    }
    return best;
}

double min_subarray(std::span<const double> terms) {
    double best = 0.0, run = 0.0;
    for (double v : terms) {
        run = std::min(0.0, run + v);
        best = std::min(best, run);
    }
    return best;
}

}  // namespace

SolutionDiagnostics residual_report(const PathEnsemble& ens, const dynamics::System& sys,
                                    const SimOptions& opt, const std::vector<Vector>& probes) {
    SolutionDiagnostics out;
    const ConvexConstraint& c = sys.constraint;
    const std::size_t m = ens.dimension;
    const std::size_t d = sys.coefficients.noise_dim;
    const std::size_t steps = ens.grid.steps();
    const double h = ens.grid.step();
    const double sqrt_h = std::sqrt(h);
    if (ens.size() == 0) return out;
    const bool indicator = c.kind() == convex::Kind::Indicator;

    std::vector<Vector> constants = probes;
    if (constants.empty()) {
        const Vector& x0 = opt.x0 ? *opt.x0 : sys.x0;
        constants = convex::probe_points(c, x0, 2.0);
        if (c.has_set()) constants.push_back(convex::project(c, Vector(m, 0.0)));
    }
    std::vector<double> probe_values;
    for (const auto& v : constants) probe_values.push_back(c.value(v));

    // Equation residual: replay f, g, H and the noise along the stored states.
    const bool use_measure = sys.coefficients.measure_dependent || sys.oblique.measure_dependent;
    const Vector zero(m, 0.0);
    const EmpiricalMeasure origin = dirac(zero);
    std::vector<Vector> drive(ens.size(), Vector(m));
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const auto s = ens.paths[i].state(0);
        std::copy(s.begin(), s.end(), drive[i].begin());
    }
    Matrix hm(m, m);
    Vector f(m), g(m * d), db(d);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = ens.grid.time(k);
        std::optional<EmpiricalMeasure> mu_k;
        if (use_measure) mu_k.emplace(m, ens.states_at(k));
        const EmpiricalMeasure& mu = use_measure ? *mu_k : origin;
        const auto u = opt.control ? opt.control->at(t) : std::span<const double>{};
        for (std::size_t i = 0; i < ens.size(); ++i) {
            const ConstrainedPath& p = ens.paths[i];
            const auto x = p.state(k);
            sys.oblique.matrix(x, mu, t, hm.data());
            sys.coefficients.drift(x, mu, t, u, f);
            sys.coefficients.diffusion(x, mu, t, u, g);
            opt.noise.increment(ens.replication, i,
                                ens.grid.step_offset() + static_cast<std::int64_t>(k), sqrt_h, db);
            const Vector dk = p.increment(k);
            for (std::size_t r = 0; r < m; ++r) {
                double v = h * f[r];
                for (std::size_t q = 0; q < d; ++q) v += g[r * d + q] * db[q];
                for (std::size_t q = 0; q < m; ++q) v -= hm(r, q) * dk[q];
                drive[i][r] += v;
            }
            out.equation = std::max(out.equation, distance(p.state(k + 1), drive[i]));
        }
    }

    std::vector<double> terms(steps);
    for (const auto& p : ens.paths) {
        for (std::size_t k = 0; k <= steps; ++k)
            out.feasibility = std::max(out.feasibility, c.distance_to_domain(p.state(k)));

        // Variation bookkeeping.
        if (norm(p.reflection(0)) != 0.0 || p.variation(0) != 0.0) out.variation_consistent = false;
        for (std::size_t k = 0; k < steps; ++k) {
            const double gain = p.variation(k + 1) - p.variation(k);
            if (gain < 0.0 || gain + 1e-12 < distance(p.reflection(k + 1), p.reflection(k)))
                out.variation_consistent = false;
        }

        std::vector<Vector> paired(steps);
        std::vector<Vector> dks(steps);
        std::vector<double> paired_value(steps);
        for (std::size_t k = 0; k < steps; ++k) {
            paired[k] = paired_point(ens, p, k);
            dks[k] = p.increment(k);
            paired_value[k] = c.value(paired[k]);
        }

        // Subgradient inequality against constant probe paths...
        for (std::size_t v = 0; v < constants.size(); ++v) {
            if (!std::isfinite(probe_values[v])) continue;
            for (std::size_t k = 0; k < steps; ++k)
                terms[k] = dot(subtract(constants[v], paired[k]), dks[k]) +
                           h * (paired_value[k] - probe_values[v]);
            out.variational = std::max(out.variational, max_subarray(terms));
        }
        // ...and against the path itself shifted along each axis.
        for (std::size_t axis = 0; axis < 2 * m; ++axis) {
            const double delta = axis % 2 == 0 ? 0.1 : -0.1;
            for (std::size_t k = 0; k < steps; ++k) {
                Vector y = paired[k];
                y[axis / 2] += delta;
                y = to_domain(c, std::move(y));
                terms[k] = dot(subtract(y, paired[k]), dks[k]) + h * (paired_value[k] - c.value(y));
            }
            out.variational = std::max(out.variational, max_subarray(terms));
        }

        if (indicator) {
            double weighted = 0.0;
            for (std::size_t k = 0; k < steps; ++k) {
                const double jump = norm(dks[k]);
                if (jump == 0.0) continue;
                weighted += boundary_distance(c, paired[k]) * jump;
                out.normal_cone =
                    std::max(out.normal_cone,
                             convex::normal_cone_residual(c, paired[k], dks[k],
                                                          convex::probe_points(c, paired[k])));
            }
            const double total = p.variation(steps);
            if (total > 0.0) out.complementarity = std::max(out.complementarity, weighted / total);
        }
    }
    return out;
}

double interior_estimate_check(std::span<const PathEnsemble> ensembles, const ConvexConstraint& constraint,
                     const convex::InteriorCertificate& cert) {
    const convex::InteriorConstants lambda = convex::interior_constants(constraint, cert);
    double worst = 0.0;
    for (const auto& e : ensembles) {
        const double h = e.grid.step();
        std::vector<double> terms(e.grid.steps());
        for (const auto& p : e.paths) {
            for (std::size_t k = 0; k < p.steps(); ++k) {
                const Vector x = paired_point(e, p, k);
                const Vector rel = subtract(x, cert.anchor);
                const Vector dk = p.increment(k);
                terms[k] = dot(rel, dk) - lambda.lambda1 * norm(dk) +
                           lambda.lambda2 * norm(rel) * h + lambda.lambda3 * h;
            }
            worst = std::min(worst, min_subarray(terms));
        }
    }
    return worst;
}

void write_trajectories(std::ostream& os, std::span<const PathEnsemble> ensembles) {
    if (ensembles.empty()) return;
    const std::size_t m = ensembles.front().dimension;
    os << "replication,particle,t";
    for (std::size_t i = 1; i <= m; ++i) os << ",x_" << i;
    for (std::size_t i = 1; i <= m; ++i) os << ",k_" << i;
    os << ",variation\n";
    for (const auto& e : ensembles) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            const ConstrainedPath& p = e.paths[i];
            for (std::size_t k = 0; k <= p.steps(); ++k) {
                os << e.replication << ',' << i << ',' << fmt17(e.grid.time(k));
                for (double v : p.state(k)) os << ',' << fmt17(v);
                for (double v : p.reflection(k)) os << ',' << fmt17(v);
                os << ',' << fmt17(p.variation(k)) << '\n';
            }
        }
    }
}

}  // namespace omv::solver
