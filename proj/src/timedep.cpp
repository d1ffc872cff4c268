#include "omv/timedep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "omv/errors.hpp"
#include "omv/parallel.hpp"

namespace omv::timedep {
namespace {

using dynamics::ObliqueField;

constexpr std::size_t kSampledTimes = 257;

Matrix at(const ObliqueField& h, double t) {
    Matrix out(h.dim, h.dim);
    const Vector zero(h.dim, 0.0);
    h.matrix(zero, dirac(zero), t, out.data());
    return out;
}

// H'(t), analytic when available, else central differences with step
// 1e-6 (t1 - t0).
std::function<Matrix(double)> derivative_of(const ObliqueField& h, double t0, double t1,
                                            bool& approximated) {
    if (h.derivative) {
        approximated = false;
        return [d = *h.derivative, n = h.dim](double t) {
            Matrix out(n, n);
            d(t, out.data());
            return out;
        };
    }
    approximated = true;
    const double delta = 1e-6 * (t1 - t0);
    return [h, delta](double t) {
        return (1.0 / (2.0 * delta)) * (at(h, t + delta) - at(h, t - delta));
    };
}

std::pair<double, double> interval_of(const convex::ConvexConstraint& c) {
    if (c.dimension() != 1 || c.kind() != convex::Kind::Indicator)
        throw ConfigError("moving-interval solver needs a one-dimensional indicator constraint");
    constexpr double inf = std::numeric_limits<double>::infinity();
    return std::visit(
        [&](const auto& geo) -> std::pair<double, double> {
            using T = std::decay_t<decltype(geo)>;
            if constexpr (std::is_same_v<T, convex::Box>) {
                return {geo.lower[0], geo.upper[0]};
            } else if constexpr (std::is_same_v<T, convex::HalfSpace>) {
                const double bound = geo.offset / geo.normal[0];
                return geo.normal[0] > 0.0 ? std::pair{-inf, bound} : std::pair{bound, inf};
            } else if constexpr (std::is_same_v<T, convex::Ball>) {
                return {geo.center[0] - geo.radius, geo.center[0] + geo.radius};
            } else {
                double lo = -inf, hi = inf;
                for (const auto& f : geo.faces) {
                    const double bound = f.offset / f.normal[0];
                    if (f.normal[0] > 0.0) hi = std::min(hi, bound);
                    else if (f.normal[0] < 0.0) lo = std::max(lo, bound);
                }
                return {lo, hi};
            }
        },
        c.geometry());
}

}  // namespace

std::string_view to_string(Correction c) {
    return c == Correction::AsPrinted ? "as-printed" : "drift-only-correction";
}

ReducedSystem reduce_time_dependent(const MovingConstraintProblem& prob, Correction correction) {
    const std::size_t m = prob.coefficients.state_dim;
    const std::size_t d = prob.coefficients.noise_dim;
    if (prob.base.kind() != convex::Kind::Indicator)
        throw ConfigError("the fixed set of a moving constraint must be an indicator");
    if (prob.base.dimension() != m || prob.h.dim != m || prob.x0.size() != m)
        throw ShapeError("moving-constraint problem: dimensions disagree");
    if (prob.h.state_dependent || prob.h.measure_dependent)
        throw ConfigError("moving constraints need H depending on time only");
    if (!(prob.horizon > prob.t0)) throw ConfigError("moving-constraint horizon must exceed t0");

    bool approximated = false;
    double derivative_bound = 0.0;
    const auto hprime = derivative_of(prob.h, prob.t0, prob.horizon, approximated);

    for (std::size_t s = 0; s < kSampledTimes; ++s) {
        const double t = prob.t0 + (prob.horizon - prob.t0) * static_cast<double>(s) /
                                       static_cast<double>(kSampledTimes - 1);
        const Matrix h = at(prob.h, t);
        if (h.asymmetry() > convex::kGeometricTol * std::max(1.0, h.frobenius()))
            throw SpectralError("H(" + std::to_string(t) + ") is not symmetric");
        const auto eig = jacobi_eigen(h);
        if (eig.values.front() < prob.h.a_h - 1e-10 || eig.values.back() > prob.h.b_h + 1e-10)
            throw SpectralError("H(" + std::to_string(t) + ") has eigenvalues outside [a_H, b_H]",
                                eig.values.front() < prob.h.a_h ? eig.values.front()
                                                                : eig.values.back());
        derivative_bound = std::max(derivative_bound, hprime(t).frobenius());
    }

    const ObliqueField h = prob.h;
    const dynamics::CoefficientField base = prob.coefficients;
    const bool printed = correction == Correction::AsPrinted;

    dynamics::CoefficientField coeffs;
    coeffs.state_dim = m;
    coeffs.noise_dim = d;
    coeffs.normalized = base.normalized;
    coeffs.measure_dependent = base.measure_dependent;
    coeffs.drift = [h, base, hprime, printed, m](std::span<const double> xb,
                                                 const EmpiricalMeasure& mu, double t,
                                                 std::span<const double> u, std::span<double> out) {
        const Matrix ht = at(h, t);
        const Vector x = multiply(ht, xb);
        Vector fv(m);
        base.drift(x, mu, t, u, fv);
        const Vector dv = multiply(hprime(t), xb);
        for (std::size_t i = 0; i < m; ++i) fv[i] = printed ? fv[i] + dv[i] : fv[i] - dv[i];
        const Vector r = multiply(dynamics::inverse_spd(ht), fv);
        std::copy(r.begin(), r.end(), out.begin());
    };
    coeffs.diffusion = [h, base, hprime, printed, m, d](std::span<const double> xb,
                                                        const EmpiricalMeasure& mu, double t,
                                                        std::span<const double> u,
                                                        std::span<double> out) {
        const Matrix ht = at(h, t);
        const Vector x = multiply(ht, xb);
        Matrix gv(m, d);
        base.diffusion(x, mu, t, u, gv.data());
        if (printed) {
            const Vector dv = multiply(hprime(t), xb);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < d; ++j) gv(i, j) += dv[i];
        }
        const Matrix r = dynamics::inverse_spd(ht) * gv;
        std::copy(r.data().begin(), r.data().end(), out.begin());
    };
    const double a = prob.h.a_h, b = prob.h.b_h, mder = derivative_bound;
    coeffs.lipschitz = (base.lipschitz * std::max(1.0, b) + 2.0 * mder) / a;

    ObliqueField oblique = ObliqueField::time_only(
        m,
        [h](double t, std::span<double> o) {
            const Matrix inv = dynamics::inverse_spd(at(h, t));
            const Matrix sq = inv * inv;
            std::copy(sq.data().begin(), sq.data().end(), o.begin());
        },
        1.0 / (b * b), 1.0 / (a * a));
    // d(H^{-2}) = -H^{-2} H' H^{-1} - H^{-1} H' H^{-2} and d(H^2) = H' H + H H'.
    oblique.lipschitz = 2.0 * mder / (a * a * a) + 2.0 * b * mder;

    const Vector x0 = multiply(dynamics::inverse_spd(at(prob.h, prob.t0)), prob.x0);
    dynamics::System system{prob.name + "_reduced",
                                  "fixed-set reduction of " + prob.name + " (" +
                                      std::string(to_string(correction)) + ")",
                                  prob.base,
                                  std::move(coeffs),
                                  std::move(oblique),
                                  x0,
                                  std::nullopt};
    return ReducedSystem{std::move(system), approximated, derivative_bound};
}

ObliqueField affine_family(std::size_t dim, double a, double b, double t0, double t1) {
    const double lo = std::min(a + b * t0, a + b * t1);
    const double hi = std::max(a + b * t0, a + b * t1);
    if (!(lo > 0.0)) throw ConfigError("affine family a + b t must stay positive on the horizon");
    ObliqueField f = ObliqueField::time_only(
        dim,
        [a, b, dim](double t, std::span<double> o) {
            std::fill(o.begin(), o.end(), 0.0);
            for (std::size_t i = 0; i < dim; ++i) o[i * dim + i] = a + b * t;
        },
        lo, hi,
        [b, dim](double, std::span<double> o) {
            std::fill(o.begin(), o.end(), 0.0);
            for (std::size_t i = 0; i < dim; ++i) o[i * dim + i] = b;
        });
    f.lipschitz = std::abs(b) * std::sqrt(static_cast<double>(dim)) * (1.0 + 1.0 / (lo * lo));
    return f;
}

ObliqueField exponential_family(std::size_t dim, double rate, double t0, double t1) {
    const double lo = std::exp(std::min(rate * t0, rate * t1));
    const double hi = std::exp(std::max(rate * t0, rate * t1));
    ObliqueField f = ObliqueField::time_only(
        dim,
        [rate, dim](double t, std::span<double> o) {
            std::fill(o.begin(), o.end(), 0.0);
            for (std::size_t i = 0; i < dim; ++i) o[i * dim + i] = std::exp(rate * t);
        },
        lo, hi,
        [rate, dim](double t, std::span<double> o) {
            std::fill(o.begin(), o.end(), 0.0);
            for (std::size_t i = 0; i < dim; ++i) o[i * dim + i] = rate * std::exp(rate * t);
        });
    f.lipschitz = std::abs(rate) * std::sqrt(static_cast<double>(dim)) * (hi + 1.0 / lo);
    return f;
}

ObliqueField rotation_scaled_family(double l1, double l2, double omega, double growth, double t0,
                                    double t1) {
    const double s_lo = std::min(1.0 + growth * t0, 1.0 + growth * t1);
    const double s_hi = std::max(1.0 + growth * t0, 1.0 + growth * t1);
    if (!(l1 > 0.0 && l2 > 0.0 && s_lo > 0.0))
        throw ConfigError("rotation-scaled family needs positive eigenvalues on the horizon");
    auto value = [=](double t, std::span<double> o) {
        const double c = std::cos(omega * t), s = std::sin(omega * t);
        const double k = 1.0 + growth * t;
        o[0] = k * (l1 * c * c + l2 * s * s);
        o[1] = o[2] = k * (l1 - l2) * c * s;
        o[3] = k * (l1 * s * s + l2 * c * c);
    };
    auto derivative = [=](double t, std::span<double> o) {
        const double c = std::cos(omega * t), s = std::sin(omega * t);
        const double k = 1.0 + growth * t;
        const double c2 = std::cos(2.0 * omega * t), s2 = std::sin(2.0 * omega * t);
        // S(t) = R diag(l1, l2) R^T has S11 = (l1+l2)/2 + (l1-l2)/2 cos 2ωt,
        // S12 = (l1-l2)/2 sin 2ωt, S22 = (l1+l2)/2 - (l1-l2)/2 cos 2ωt.
        const double half = 0.5 * (l1 - l2);
        const double ds11 = -2.0 * omega * half * s2;
        const double ds12 = 2.0 * omega * half * c2;
        o[0] = growth * (l1 * c * c + l2 * s * s) + k * ds11;
        o[1] = o[2] = growth * (l1 - l2) * c * s + k * ds12;
        o[3] = growth * (l1 * s * s + l2 * c * c) - k * ds11;
    };
    ObliqueField f = ObliqueField::time_only(2, value, std::min(l1, l2) * s_lo,
                                             std::max(l1, l2) * s_hi, derivative);
    const double a = std::min(l1, l2) * s_lo, b = std::max(l1, l2) * s_hi;
    const double m = std::sqrt(2.0) * (std::abs(growth) * std::max(l1, l2) +
                                       s_hi * std::abs(omega) * std::abs(l1 - l2));
    f.lipschitz = m * (1.0 + 1.0 / (a * a));
    (void)b;
    return f;
}

PathEnsemble lift_solution(const PathEnsemble& reduced, const ObliqueField& h) {
    if (h.dim != reduced.dimension) throw ShapeError("lift: H and path dimensions differ");
    PathEnsemble out{reduced.grid, reduced.scheme, reduced.epsilon, reduced.dimension,
                     reduced.replication, {}};
    const std::size_t steps = reduced.grid.steps();
    std::vector<Matrix> hk(steps + 1), hinv(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        hk[k] = at(h, reduced.grid.time(k));
        hinv[k] = dynamics::inverse_spd(hk[k]);
    }
    out.paths.reserve(reduced.size());
    for (const auto& p : reduced.paths) {
        if (p.steps() != steps) throw ShapeError("lift: path and grid lengths differ");
        ConstrainedPath q(reduced.dimension, steps);
        for (std::size_t k = 0; k <= steps; ++k) {
            const Vector x = multiply(hk[k], p.state(k));
            std::copy(x.begin(), x.end(), q.state(k).begin());
            if (k < steps) q.record_increment(k, multiply(hinv[k], p.increment(k)), reduced.grid.step());
        }
        out.paths.push_back(std::move(q));
    }
    return out;
}

double moving_set_distance(const MovingConstraintProblem& prob, double t, std::span<const double> x) {
    const Matrix h = at(prob.h, t);
    if (prob.h.dim == 1) {
        const auto [lo, hi] = interval_of(prob.base);
        const double a = h(0, 0) * lo, b = h(0, 0) * hi;
        return std::max({0.0, a - x[0], x[0] - b});
    }
    const Vector xb = multiply(dynamics::inverse_spd(h), x);
    return prob.h.b_h * prob.base.distance_to_domain(xb);
}

PathEnsemble simulate_moving_interval(const MovingConstraintProblem& prob, const TimeGrid& grid,
                                      const solver::SimOptions& opt, std::size_t rep) {
    const auto [lo, hi] = interval_of(prob.base);
    const auto& cf = prob.coefficients;
    if (cf.state_dim != 1 || prob.h.dim != 1)
        throw ConfigError("the direct moving-set solver handles one-dimensional intervals only");
    const std::size_t d = cf.noise_dim;
    const std::size_t n = opt.particles;
    const std::size_t steps = grid.steps();
    const double h = grid.step();
    const double sqrt_h = std::sqrt(h);
    const Vector& x0 = opt.x0 ? *opt.x0 : prob.x0;

    PathEnsemble ens{grid, Scheme::Projected, 0.0, 1, rep, {}};
    for (std::size_t i = 0; i < n; ++i) {
        ens.paths.emplace_back(1, steps);
        ens.paths.back().state(0)[0] = x0[0];
    }
    Vector f(1), g(d), db(d);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = grid.time(k);
        const double hk = at(prob.h, t)(0, 0);
        const double hn = at(prob.h, grid.time(k + 1))(0, 0);
        std::vector<double> scaled_atoms = ens.states_at(k);
        for (double& v : scaled_atoms) v /= hk;
        const EmpiricalMeasure mu(1, std::move(scaled_atoms));
        const auto u = opt.control ? opt.control->at(t) : std::span<const double>{};
        for (std::size_t i = 0; i < n; ++i) {
            ConstrainedPath& p = ens.paths[i];
            const auto x = p.state(k);
            cf.drift(x, mu, t, u, f);
            cf.diffusion(x, mu, t, u, g);
            opt.noise.increment(rep, i, grid.step_offset() + static_cast<std::int64_t>(k), sqrt_h,
                                db);
            double noise = 0.0;
            for (std::size_t c = 0; c < d; ++c) noise += g[c] * db[c];
            const double y = x[0] + h * f[0] + noise;
            const double next = std::clamp(y, hn * lo, hn * hi);
            p.state(k + 1)[0] = next;
            const double dk = y - next;
            p.record_increment(k, std::span<const double>(&dk, 1), h);
        }
    }
    return ens;
}

bool ConvergenceReport::monotone() const {
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i].mean_sup_distance < levels[i - 1].mean_sup_distance)) return false;
    return true;
}

ConvergenceReport equivalence_check(const MovingConstraintProblem& prob,
                                    std::span<const std::size_t> ladder,
                                    const solver::SimOptions& options, Correction correction) {
    const ReducedSystem reduced = reduce_time_dependent(prob, correction);
    ConvergenceReport report;
    report.correction = correction;
    report.derivative_approximated = reduced.derivative_approximated;
    report.has_direct = prob.coefficients.state_dim == 1;

    solver::SimOptions opt = options;
    opt.x0 = reduced.system.x0;
    solver::SimOptions direct_opt = options;
    direct_opt.x0 = prob.x0;

    struct Partial {
        double sup_sum = 0.0;
        double max_distance = 0.0;
        double feasibility = 0.0;
    };
    for (std::size_t steps : ladder) {
        const TimeGrid grid(prob.t0, prob.horizon, steps);
        std::vector<Partial> partial(opt.replications);
        parallel_for(opt.replications, opt.threads, [&](std::size_t r) {
            const PathEnsemble bar = solver::simulate_projected(reduced.system, grid, opt, r);
            const PathEnsemble lifted = lift_solution(bar, prob.h);
            Partial& acc = partial[r];
            for (const auto& p : lifted.paths)
                for (std::size_t k = 0; k <= steps; ++k)
                    acc.feasibility = std::max(acc.feasibility,
                                               moving_set_distance(prob, grid.time(k), p.state(k)));
            if (!report.has_direct) return;
            const PathEnsemble direct = simulate_moving_interval(prob, grid, direct_opt, r);
            for (std::size_t i = 0; i < lifted.size(); ++i) {
                double sup = 0.0;
                for (std::size_t k = 0; k <= steps; ++k)
                    sup = std::max(sup, distance(lifted.paths[i].state(k), direct.paths[i].state(k)));
                acc.sup_sum += sup;
                acc.max_distance = std::max(acc.max_distance, sup);
            }
        });
        EquivalenceLevel level;
        level.steps = steps;
        level.step = grid.step();
        double sup_sum = 0.0;
        for (const auto& p : partial) {
            sup_sum += p.sup_sum;
            level.max_distance = std::max(level.max_distance, p.max_distance);
            level.lifted_feasibility = std::max(level.lifted_feasibility, p.feasibility);
        }
        level.mean_sup_distance =
            report.has_direct
                ? sup_sum / static_cast<double>(opt.replications * opt.particles)
                : std::numeric_limits<double>::quiet_NaN();
        report.levels.push_back(level);
    }
    return report;
}

MovingConstraintProblem moving_interval_problem(const dynamics::Parameters& params) {
    auto get = [&](const std::string& key, double fallback) {
        const auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    for (const auto& [key, value] : params)
        if (key != "a" && key != "b" && key != "drift" && key != "kappa" && key != "sigma" &&
            key != "x0" && key != "horizon")
            throw ConfigError("moving interval has no parameter '" + key +
                              "' (accepted: a, b, drift, kappa, sigma, x0, horizon)");
    const double a = get("a", 1.0), b = get("b", 1.0);
    const double drift = get("drift", 1.0), kappa = get("kappa", 0.25), sigma = get("sigma", 0.5);
    const double horizon = get("horizon", 1.0);

    dynamics::CoefficientField cf;
    cf.drift = [drift, kappa](std::span<const double>, const EmpiricalMeasure& mu, double,
                              std::span<const double>, std::span<double> out) {
        out[0] = drift + kappa * mu.mean()[0];
    };
    cf.diffusion = [sigma](std::span<const double>, const EmpiricalMeasure&, double,
                           std::span<const double>, std::span<double> out) { out[0] = sigma; };
    cf.lipschitz = std::max(std::abs(kappa), 1e-12);
    cf.normalized = false;
    cf.measure_dependent = kappa != 0.0;

    MovingConstraintProblem prob{"moving_interval",
                                 convex::ConvexConstraint::box({0.0}, {1.0}),
                                 affine_family(1, a, b, 0.0, horizon),
                                 std::move(cf),
                                 {get("x0", 0.5)},
                                 0.0,
                                 horizon};
    if (moving_set_distance(prob, 0.0, prob.x0) > 0.0)
        throw ConfigError("moving interval: x0 must lie in H(0)[0, 1]");
    return prob;
}

}  // namespace omv::timedep
