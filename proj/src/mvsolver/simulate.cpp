#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "omv/errors.hpp"
#include "omv/mvsolver.hpp"
#include "omv/parallel.hpp"

namespace omv::solver {
namespace {

using dynamics::System;

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// ∇Π_ε(x) with closed forms for half-spaces and boxes.
void penalty_gradient(const convex::ConvexConstraint& c, double eps, std::span<const double> x,
                      std::span<double> out) {
    if (c.kind() == convex::Kind::Indicator) {
        if (const auto* hs = std::get_if<convex::HalfSpace>(&c.geometry())) {
            const double excess = dot(hs->normal, x) - hs->offset;
            const double scale = excess > 0.0 ? excess / (norm_squared(hs->normal) * eps) : 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * hs->normal[i];
            return;
        }
        if (const auto* box = std::get_if<convex::Box>(&c.geometry())) {
            for (std::size_t i = 0; i < x.size(); ++i)
                out[i] = (x[i] - std::clamp(x[i], box->lower[i], box->upper[i])) / eps;
            return;
        }
    }
    const Vector g = convex::yosida_gradient(c, eps, x);
    std::copy(g.begin(), g.end(), out.begin());
}

struct Frozen {
    const PathEnsemble* source = nullptr;
    int level = 0;
};

PathEnsemble initial_ensemble(const TimeGrid& grid, Scheme scheme, double eps, std::size_t m,
                              std::size_t rep, std::size_t n, std::span<const double> x0) {
    PathEnsemble ens{grid, scheme, scheme == Scheme::Penalized ? eps : 0.0, m, rep, {}};
    ens.paths.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ens.paths.emplace_back(m, grid.steps());
        std::copy(x0.begin(), x0.end(), ens.paths.back().state(0).begin());
    }
    return ens;
}

const Vector& initial_state(const System& sys, const SimOptions& opt) {
    const Vector& x0 = opt.x0 ? *opt.x0 : sys.x0;
    if (x0.size() != sys.coefficients.state_dim)
        throw ShapeError("initial state has the wrong dimension");
    return x0;
}

PathEnsemble run(const System& sys, const TimeGrid& grid, const SimOptions& opt, std::size_t rep,
                 Scheme scheme, double eps, Frozen frozen = {}) {
    const std::size_t m = sys.coefficients.state_dim;
    const std::size_t d = sys.coefficients.noise_dim;
    const std::size_t n = opt.particles;
    if (n == 0) throw ConfigError("particle count must be positive");
    if (sys.constraint.dimension() != m || sys.oblique.dim != m)
        throw ShapeError("system '" + sys.name +
                         "': constraint, coefficients and H disagree on the dimension");
    if (scheme == Scheme::Projected && sys.constraint.kind() != convex::Kind::Indicator)
        throw ConfigError("the projected scheme needs an indicator constraint");
    if (frozen.source && (frozen.source->size() != n || frozen.source->grid.steps() != grid.steps()))
        throw ShapeError("frozen iterate does not match the grid or particle count");

    const std::size_t steps = grid.steps();
    const double h = grid.step();
    const double sqrt_h = std::sqrt(h);
    PathEnsemble ens = initial_ensemble(grid, scheme, eps, m, rep, n, initial_state(sys, opt));

    const bool use_measure =
        sys.coefficients.measure_dependent || sys.oblique.measure_dependent;
    const bool h_per_particle = sys.oblique.state_dependent;
    const Vector zero(m, 0.0);
    const EmpiricalMeasure origin = dirac(zero);
    std::optional<EmpiricalMeasure> mu_cache;
    std::size_t cached = kNone;

    Matrix hm(m, m);
    Vector f(m), g(m * d), db(d), y(m), grad(m), dk(m), next(m);

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = grid.time(k);
        const PathEnsemble* src = &ens;
        std::size_t j = k;
        if (frozen.source) {
            src = frozen.source;
            j = src->grid.index_at_or_before(TimeGrid::dyadic_snap(t, frozen.level));
        }
        const double t_src = src->grid.time(j);
        if (use_measure && j != cached) {
            mu_cache.emplace(m, src->states_at(j));
            cached = j;
        }
        const EmpiricalMeasure& mu = use_measure ? *mu_cache : origin;
        const std::span<const double> u =
            opt.control ? opt.control->at(t) : std::span<const double>{};
        if (!h_per_particle) sys.oblique.matrix(zero, mu, t_src, hm.data());

        for (std::size_t i = 0; i < n; ++i) {
            ConstrainedPath& path = ens.paths[i];
            const auto xk = path.state(k);
            const auto xs = src->paths[i].state(j);
            if (h_per_particle) sys.oblique.matrix(xs, mu, t_src, hm.data());
            sys.coefficients.drift(xs, mu, t_src, u, f);
            sys.coefficients.diffusion(xs, mu, t_src, u, g);
            opt.noise.increment(rep, i, grid.step_offset() + static_cast<std::int64_t>(k), sqrt_h,
                                db);
            for (std::size_t r = 0; r < m; ++r) {
                double noise = 0.0;
                for (std::size_t c = 0; c < d; ++c) noise += g[r * d + c] * db[c];
                y[r] = xk[r] + h * f[r] + noise;
            }
            if (scheme == Scheme::Projected) {
                oblique_skorohod_step(sys.constraint, hm, y, next, dk, k);
            } else {
                penalty_gradient(sys.constraint, eps, xk, grad);
                for (std::size_t r = 0; r < m; ++r) {
                    double hg = 0.0;
                    for (std::size_t c = 0; c < m; ++c) hg += hm(r, c) * grad[c];
                    next[r] = y[r] - h * hg;
                    dk[r] = h * grad[r];
                }
            }
            const double size = norm(next);
            if (!(size <= kBlowUp))
                throw DivergenceError("state of particle " + std::to_string(i) +
                                          " left the ball of radius 1e8",
                                      k);
            std::copy(next.begin(), next.end(), path.state(k + 1).begin());
            path.record_increment(k, dk, h);
        }
    }
    return ens;
}

template <typename One>
std::vector<PathEnsemble> all_replications(const SimOptions& opt, One one) {
    std::vector<std::optional<PathEnsemble>> slots(opt.replications);
    parallel_for(opt.replications, opt.threads, [&](std::size_t r) { slots[r].emplace(one(r)); });
    std::vector<PathEnsemble> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace

void check_penalized_stability(const System& system, double eps, const TimeGrid& grid) {
    if (!(eps > 0.0)) throw DomainError("penalty parameter must be positive");
    const double limit = eps / (2.0 * system.oblique.b_h);
    if (grid.step() > limit * (1.0 + 1e-12))
        throw ConfigError("penalized scheme is unstable: step " + std::to_string(grid.step()) +
                          " exceeds eps / (2 b_H) = " + std::to_string(limit));
}

PathEnsemble simulate_penalized(const System& system, double eps, const TimeGrid& grid,
                                const SimOptions& options, std::size_t replication) {
    if (!(eps > 0.0)) throw DomainError("penalty parameter must be positive");
    if (options.enforce_stability) check_penalized_stability(system, eps, grid);
    return run(system, grid, options, replication, Scheme::Penalized, eps);
}

std::vector<PathEnsemble> simulate_penalized(const System& system, double eps,
                                             const TimeGrid& grid, const SimOptions& options) {
    if (options.enforce_stability) check_penalized_stability(system, eps, grid);
    return all_replications(options, [&](std::size_t r) {
        return simulate_penalized(system, eps, grid, options, r);
    });
}

PathEnsemble simulate_projected(const System& system, const TimeGrid& grid,
                                const SimOptions& options, std::size_t replication) {
    return run(system, grid, options, replication, Scheme::Projected, 0.0);
}

std::vector<PathEnsemble> simulate_projected(const System& system, const TimeGrid& grid,
                                             const SimOptions& options) {
    return all_replications(options, [&](std::size_t r) {
        return simulate_projected(system, grid, options, r);
    });
}

EulerIteration euler_iteration(const System& system, int level, std::size_t iterations,
                               const TimeGrid& grid, const SimOptions& options,
                               std::size_t replication) {
    if (iterations == 0) throw ConfigError("euler_iteration needs at least one iterate");
    if (level < 0) throw ConfigError("dyadic level must be nonnegative");
    EulerIteration out;
    out.iterates.reserve(iterations + 1);
    out.iterates.push_back(initial_ensemble(grid, Scheme::Projected, 0.0,
                                            system.coefficients.state_dim, replication,
                                            options.particles, initial_state(system, options)));
    for (auto& p : out.iterates.back().paths)
        for (std::size_t k = 1; k <= grid.steps(); ++k)
            std::copy(p.state(0).begin(), p.state(0).end(), p.state(k).begin());
    for (std::size_t it = 1; it <= iterations; ++it) {
        out.iterates.push_back(run(system, grid, options, replication, Scheme::Projected, 0.0,
                                   Frozen{&out.iterates[it - 1], level}));
        const PathEnsemble& a = out.iterates[it - 1];
        const PathEnsemble& b = out.iterates[it];
        double sup = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t k = 0; k <= grid.steps(); ++k)
                sup = std::max(sup, distance(a.paths[i].state(k), b.paths[i].state(k)));
        out.sup_distance.push_back(sup);
    }
    return out;
}

double mean_sup_squared_distance(const PathEnsemble& a, const PathEnsemble& b) {
    if (a.size() != b.size() || a.grid.steps() != b.grid.steps() || a.size() == 0)
        throw ShapeError("ensembles differ in size or grid");
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double sup = 0.0;
        for (std::size_t k = 0; k <= a.grid.steps(); ++k)
            sup = std::max(sup, norm_squared(subtract(a.paths[i].state(k), b.paths[i].state(k))));
        total += sup;
    }
    return total / static_cast<double>(a.size());
}

double penalty_energy(const PathEnsemble& ensemble) {
    if (ensemble.size() == 0) throw DomainError("penalty_energy of an empty ensemble");
    const double h = ensemble.grid.step();
    double total = 0.0;
    for (const auto& p : ensemble.paths)
        for (std::size_t k = 0; k < p.steps(); ++k) total += norm_squared(p.density(k)) * h;
    return total / static_cast<double>(ensemble.size());
}

}  // namespace omv::solver
