#include "omv/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "omv/errors.hpp"
#include "omv/parallel.hpp"

namespace omv::control {
namespace {

constexpr double kMaxControls = 1e5;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // sample variance
};

MeanVar mean_var(std::span<const double> v) {
    MeanVar out;
    if (v.empty()) return out;
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return out;
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.var = ss / static_cast<double>(v.size() - 1);
    return out;
}

double stderr_of(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    return std::sqrt(mean_var(v).var / static_cast<double>(v.size()));
}

// Per-particle J on one replication: trapezoid with u at the left endpoint.
std::vector<double> particle_costs(const PathEnsemble& e, const solver::ControlSchedule& control,
                                   const dynamics::CostField& costs, bool terminal) {
    const double h = e.grid.step();
    std::vector<double> out;
    out.reserve(e.size());
    for (const auto& p : e.paths) {
        double j = 0.0;
        for (std::size_t k = 0; k < p.steps(); ++k) {
            const auto u = control.at(e.grid.time(k));
            j += 0.5 * h * (costs.running(p.state(k), u) + costs.running(p.state(k + 1), u));
        }
        if (terminal) j += costs.terminal(p.state(p.steps()));
        out.push_back(j);
    }
    return out;
}

double replication_cost(const PathEnsemble& e, const solver::ControlSchedule& control,
                        const dynamics::CostField& costs, bool terminal = true) {
    const auto v = particle_costs(e, control, costs, terminal);
    return mean_var(v).mean;
}

PathEnsemble simulate(const ControlProblem& prob, const Scheme& scheme, const SimConfig& config,
                      const TimeGrid& grid, const solver::ControlSchedule& control,
                      const Vector& x0, std::size_t rep, const NoiseSource& noise) {
    solver::SimOptions opt;
    opt.particles = config.particles;
    opt.replications = 1;
    opt.threads = 1;
    opt.noise = noise;
    opt.control = control;
    opt.x0 = x0;
    return scheme.penalized ? solver::simulate_penalized(prob.system, scheme.eps, grid, opt, rep)
                            : solver::simulate_projected(prob.system, grid, opt, rep);
}

TimeGrid grid_on(double start, double end, double step) {
    return TimeGrid::with_step(start, end, step);
}

// Deterministic k-means: farthest-point seeding from the point nearest the
// mean, then Lloyd iterations.
std::vector<Vector> kmeans(const std::vector<Vector>& points, std::size_t k) {
    const std::size_t m = points.front().size();
    Vector mean(m, 0.0);
    for (const auto& p : points) axpy(1.0 / static_cast<double>(points.size()), p, mean);
    std::vector<Vector> centers;
    std::size_t first = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
        if (distance(points[i], mean) < distance(points[first], mean)) first = i;
    centers.push_back(points[first]);
    std::vector<double> nearest(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) nearest[i] = distance(points[i], centers[0]);
    while (centers.size() < k) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < points.size(); ++i)
            if (nearest[i] > nearest[far]) far = i;
        if (nearest[far] <= 0.0) break;
        centers.push_back(points[far]);
        for (std::size_t i = 0; i < points.size(); ++i)
            nearest[i] = std::min(nearest[i], distance(points[i], centers.back()));
    }
    std::vector<std::size_t> label(points.size(), 0);
    for (int it = 0; it < 100; ++it) {
        bool changed = it == 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < centers.size(); ++c)
                if (distance(points[i], centers[c]) < distance(points[i], centers[best])) best = c;
            if (best != label[i]) changed = true;
            label[i] = best;
        }
        if (!changed) break;
        std::vector<Vector> sum(centers.size(), Vector(m, 0.0));
        std::vector<std::size_t> count(centers.size(), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            axpy(1.0, points[i], sum[label[i]]);
            ++count[label[i]];
        }
        for (std::size_t c = 0; c < centers.size(); ++c)
            if (count[c] > 0) centers[c] = scaled(sum[c], 1.0 / static_cast<double>(count[c]));
    }
    return centers;
}

std::size_t nearest_center(const std::vector<Vector>& centers, std::span<const double> x) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < centers.size(); ++c)
        if (distance(x, centers[c]) < distance(x, centers[best])) best = c;
    return best;
}

std::vector<double> inside(const std::vector<double>& times, double lo, double hi) {
    std::vector<double> out;
    for (double t : times)
        if (t > lo && t < hi) out.push_back(t);
    return out;
}

}  // namespace

void validate(const ControlProblem& prob) {
    if (prob.controls.empty()) throw ConfigError("control set must not be empty");
    if (prob.system.oblique.state_dependent || prob.system.oblique.measure_dependent)
        throw ConfigError("controlled problems need H depending on time only");
    if (!(prob.horizon > prob.start)) throw ConfigError("control horizon must exceed the start time");
    dynamics::check_normalization(prob.costs, prob.system.coefficients.state_dim, prob.controls);
    dynamics::check_normalization(prob.system.coefficients, prob.controls);
}

CostEstimate cost(std::span<const PathEnsemble> ensembles, const solver::ControlSchedule& control,
                  const dynamics::CostField& costs) {
    if (ensembles.empty()) throw DomainError("cost of an empty ensemble");
    if (ensembles.size() == 1) {
        const auto v = particle_costs(ensembles.front(), control, costs, true);
        return {mean_var(v).mean, stderr_of(v)};
    }
    std::vector<double> reps;
    for (const auto& e : ensembles) reps.push_back(replication_cost(e, control, costs));
    return {mean_var(reps).mean, stderr_of(reps)};
}

std::vector<double> switch_points(double start, double end, std::size_t switches) {
    std::vector<double> out;
    for (std::size_t j = 1; j <= switches; ++j)
        out.push_back(start + (end - start) * static_cast<double>(j) /
                                  static_cast<double>(switches + 1));
    return out;
}

std::vector<solver::ControlSchedule> enumerate_controls(const std::vector<Vector>& controls,
                                                        const std::vector<double>& switch_times) {
    if (controls.empty()) throw ConfigError("control set must not be empty");
    const std::size_t pieces = switch_times.size() + 1;
    const double total = std::pow(static_cast<double>(controls.size()), static_cast<double>(pieces));
    if (total > kMaxControls)
        throw ConfigError("control family has " + std::to_string(total) +
                          " members; at most 1e5 are enumerated");
    const auto count = static_cast<std::size_t>(total);
    std::vector<solver::ControlSchedule> out;
    out.reserve(count);
    for (std::size_t code = 0; code < count; ++code) {
        solver::ControlSchedule s{switch_times, {}};
        std::size_t rest = code;
        for (std::size_t p = 0; p < pieces; ++p) {
            s.values.push_back(controls[rest % controls.size()]);
            rest /= controls.size();
        }
        out.push_back(std::move(s));
    }
    return out;
}

ValueEstimate value_with_switches(const ControlProblem& prob, const Scheme& scheme,
                                  const SimConfig& config, double start, const Vector& x0,
                                  const std::vector<double>& switch_times) {
    validate(prob);
    if (config.replications == 0) throw ConfigError("replication count must be positive");
    const TimeGrid grid = grid_on(start, prob.horizon, config.step);
    const auto schedules = enumerate_controls(prob.controls, switch_times);

    ValueEstimate best;
    best.replications = config.replications;
    best.value = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < schedules.size(); ++c) {
        std::vector<double> reps(config.replications);
        parallel_for(config.replications, config.threads, [&](std::size_t r) {
            const PathEnsemble e =
                simulate(prob, scheme, config, grid, schedules[c], x0, r, config.noise);
            reps[r] = replication_cost(e, schedules[c], prob.costs);
        });
        CostEstimate est{mean_var(reps).mean, stderr_of(reps)};
        if (config.replications == 1) {
            const PathEnsemble e =
                simulate(prob, scheme, config, grid, schedules[c], x0, 0, config.noise);
            est.stderr = stderr_of(particle_costs(e, schedules[c], prob.costs, true));
        }
        best.costs.push_back(est);
        if (est.value < best.value) {
            best.value = est.value;
            best.mc_stderr = est.stderr;
            best.control = schedules[c];
            best.control_index = c;
            best.replication_values = reps;
        }
    }
    return best;
}

ValueEstimate value(const ControlProblem& prob, const Scheme& scheme, const SimConfig& config,
                    std::optional<double> start, std::optional<Vector> x0) {
    const double s = start.value_or(prob.start);
    return value_with_switches(prob, scheme, config, s, x0.value_or(prob.system.x0),
                               switch_points(s, prob.horizon, config.switches));
}

DppResult dpp_residual(const ControlProblem& prob, double tau, const Scheme& scheme,
                       const SimConfig& config) {
    validate(prob);
    const double s = prob.start;
    if (tau < s || tau > prob.horizon) throw DomainError("τ must lie in [s, T]");
    DppResult out;
    if (tau == s) return out;
    if (tau == prob.horizon) throw DomainError("τ must be strictly before T");

    const std::vector<double> base = switch_points(s, prob.horizon, config.switches);
    std::vector<double> lhs_switches = base;
    lhs_switches.push_back(tau);
    std::sort(lhs_switches.begin(), lhs_switches.end());
    lhs_switches.erase(std::unique(lhs_switches.begin(), lhs_switches.end()), lhs_switches.end());
    const ValueEstimate lhs =
        value_with_switches(prob, scheme, config, s, prob.system.x0, lhs_switches);
    out.lhs = lhs.value;
    out.lhs_stderr = lhs.mc_stderr;

    // Outer runs on [s, τ].
    const TimeGrid pre_grid = grid_on(s, tau, config.step);
    const auto pre = enumerate_controls(prob.controls, inside(base, s, tau));
    const auto post_count = enumerate_controls(prob.controls, inside(base, tau, prob.horizon)).size();
    std::vector<std::vector<double>> running(pre.size(), std::vector<double>());
    std::vector<std::vector<std::vector<Vector>>> states(
        pre.size(), std::vector<std::vector<Vector>>(config.replications));
    std::vector<std::vector<std::vector<double>>> particle_running(
        pre.size(), std::vector<std::vector<double>>(config.replications));
    for (std::size_t c = 0; c < pre.size(); ++c) {
        parallel_for(config.replications, config.threads, [&](std::size_t r) {
            const PathEnsemble e =
                simulate(prob, scheme, config, pre_grid, pre[c], prob.system.x0, r, config.noise);
            particle_running[c][r] = particle_costs(e, pre[c], prob.costs, false);
            auto& xs = states[c][r];
            for (const auto& p : e.paths) {
                const auto x = p.state(p.steps());
                xs.emplace_back(x.begin(), x.end());
            }
        });
    }
    std::vector<Vector> all;
    for (const auto& per_c : states)
        for (const auto& per_r : per_c) all.insert(all.end(), per_r.begin(), per_r.end());
    const std::vector<Vector> centers = kmeans(all, std::max<std::size_t>(1, config.clusters));
    out.clusters = centers.size();

    const double steps_after = std::round((prob.horizon - tau) / config.step);
    const double nested = static_cast<double>(centers.size()) * static_cast<double>(post_count) *
                          static_cast<double>(config.inner_replications) *
                          static_cast<double>(config.particles) * steps_after;
    if (nested > config.budget)
        throw BudgetError("nested simulation needs " + std::to_string(nested) +
                          " particle-steps, budget is " + std::to_string(config.budget));

    SimConfig inner = config;
    inner.replications = config.inner_replications;
    const NoiseSource inner_noise = config.noise.derive("dpp-inner");
    std::vector<ValueEstimate> v_tau;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        inner.noise = inner_noise.derive(j);
        v_tau.push_back(value_with_switches(prob, scheme, inner, tau, centers[j],
                                            inside(base, tau, prob.horizon)));
    }

    out.rhs = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < pre.size(); ++c) {
        std::vector<double> reps(config.replications);
        std::vector<double> weight(centers.size(), 0.0);
        double total = 0.0;
        for (std::size_t r = 0; r < config.replications; ++r) {
            double acc = 0.0;
            for (std::size_t i = 0; i < states[c][r].size(); ++i) {
                const std::size_t j = nearest_center(centers, states[c][r][i]);
                acc += particle_running[c][r][i] + v_tau[j].value;
                weight[j] += 1.0;
                total += 1.0;
            }
            reps[r] = acc / static_cast<double>(states[c][r].size());
        }
        const double est = mean_var(reps).mean;
        if (est < out.rhs) {
            double inner_var = 0.0;
            for (std::size_t j = 0; j < centers.size(); ++j) {
                const double w = weight[j] / total;
                inner_var += w * w * v_tau[j].mc_stderr * v_tau[j].mc_stderr;
            }
            const double outer = stderr_of(reps);
            out.rhs = est;
            out.rhs_stderr = std::sqrt(outer * outer + inner_var);
        }
    }
    out.residual = std::abs(out.lhs - out.rhs);
    out.stderr = std::hypot(out.lhs_stderr, out.rhs_stderr);
    return out;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("line fit needs two or more points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw ConfigError("line fit needs distinct abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
    return fit;
}

namespace {

void fit_report(RateReport& report) {
    std::vector<double> lx, ly;
    for (const auto& p : report.points) {
        if (!(p.value > 1e-28) || !std::isfinite(p.value)) report.degenerate = true;
        lx.push_back(std::log(p.abscissa));
        ly.push_back(std::log(p.value));
    }
    if (report.degenerate) {
        report.fit = {kNaN, kNaN, kNaN};
        return;
    }
    report.fit = fit_line(lx, ly);
}

}  // namespace

RateReport penalization_rate_probe(const dynamics::System& system, const TimeGrid& grid,
                                   std::span<const double> ladder,
                                   const solver::SimOptions& options) {
    if (ladder.size() < 3) throw ConfigError("an ε ladder needs at least three points");
    for (double eps : ladder) solver::check_penalized_stability(system, eps, grid);
    const std::size_t pairs = ladder.size() - 1;
    std::vector<std::vector<double>> dist(pairs, std::vector<double>(options.replications));
    parallel_for(options.replications, options.threads, [&](std::size_t r) {
        std::optional<PathEnsemble> prev;
        for (std::size_t j = 0; j < ladder.size(); ++j) {
            PathEnsemble cur = solver::simulate_penalized(system, ladder[j], grid, options, r);
            if (prev) dist[j - 1][r] = solver::mean_sup_squared_distance(*prev, cur);
            prev.emplace(std::move(cur));
        }
    });
    RateReport report;
    for (std::size_t j = 0; j < pairs; ++j)
        report.points.push_back(
            {ladder[j] + ladder[j + 1], mean_var(dist[j]).mean, stderr_of(dist[j])});
    fit_report(report);
    return report;
}

RateReport value_rate_probe(const ControlProblem& prob, std::span<const double> ladder,
                            const SimConfig& config, bool measure_floor) {
    if (ladder.size() < 3) throw ConfigError("an ε ladder needs at least three points");
    const ValueEstimate ref = value(prob, Scheme::projected(), config);
    RateReport report;
    for (double eps : ladder) {
        const ValueEstimate v = value(prob, Scheme::penalty(eps), config);
        std::vector<double> diff(v.replication_values.size());
        for (std::size_t r = 0; r < diff.size(); ++r)
            diff[r] = v.replication_values[r] - ref.replication_values[r];
        report.points.push_back({eps, std::abs(v.value - ref.value), stderr_of(diff)});
    }
    if (measure_floor) {
        SimConfig half = config;
        half.step = config.step / 2.0;
        report.quadrature_floor = std::abs(value(prob, Scheme::projected(), half).value - ref.value);
        for (const auto& p : report.points)
            if (p.value < report.quadrature_floor) report.floor_reached = true;
    }
    fit_report(report);
    return report;
}

RegularityReport value_regularity_probe(const ControlProblem& prob, std::span<const double> scales,
                                        const SimConfig& config) {
    if (scales.empty()) throw ConfigError("regularity probe needs at least one scale");
    const ValueEstimate base = value(prob, Scheme::projected(), config);
    RegularityReport report;
    report.base_value = base.value;
    report.base_stderr = base.mc_stderr;
    for (double delta : scales) {
        if (!(delta > 0.0)) throw ConfigError("perturbation scales must be positive");
        double worst = 0.0, allowance = 0.0;
        for (int kind = 0; kind < 3; ++kind) {
            const double dx = kind == 1 ? 0.0 : delta;
            const double ds = kind == 0 ? 0.0 : std::round(delta / config.step) * config.step;
            Vector x0 = prob.system.x0;
            x0[0] += dx;
            const ValueEstimate v = value(prob, Scheme::projected(), config, prob.start + ds, x0);
            std::vector<double> diff(v.replication_values.size());
            for (std::size_t r = 0; r < diff.size(); ++r)
                diff[r] = v.replication_values[r] - base.replication_values[r];
            RegularityProbe probe;
            probe.scale = delta;
            probe.dx = dx;
            probe.ds = ds;
            probe.dv = v.value - base.value;
            probe.stderr = stderr_of(diff);
            const double denom = std::abs(dx) + std::sqrt(ds);
            probe.ratio = std::abs(probe.dv) / denom;
            worst = std::max(worst, probe.ratio);
            allowance = std::max(allowance, 3.0 * probe.stderr / denom);
            report.probes.push_back(probe);
        }
        report.max_ratio.push_back(worst);
        report.allowance.push_back(allowance);
    }
    const auto small = static_cast<std::size_t>(
        std::min_element(scales.begin(), scales.end()) - scales.begin());
    const auto large = static_cast<std::size_t>(
        std::max_element(scales.begin(), scales.end()) - scales.begin());
    report.passed =
        report.max_ratio[small] <= 3.0 * report.max_ratio[large] + report.allowance[small];
    return report;
}

ControlProblem two_control_problem(const dynamics::Parameters& params) {
    auto get = [&](const std::string& key, double fallback) {
        const auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    for (const auto& [key, v] : params)
        if (key != "sigma" && key != "x0" && key != "h_slope" && key != "horizon")
            throw ConfigError("two-control problem has no parameter '" + key +
                              "' (accepted: sigma, x0, h_slope, horizon)");
    const double sigma = get("sigma", 0.5);
    const double x0 = get("x0", 0.5);
    const double slope = get("h_slope", 0.5);
    const double horizon = get("horizon", 1.0);
    if (!(1.0 + slope * horizon > 0.0)) throw ConfigError("H(t) = 1 + h_slope t must stay positive");

    dynamics::CoefficientField cf;
    cf.drift = [](std::span<const double>, const EmpiricalMeasure&, double,
                  std::span<const double> u, std::span<double> out) { out[0] = u[0]; };
    cf.diffusion = [sigma](std::span<const double>, const EmpiricalMeasure&, double,
                           std::span<const double>, std::span<double> out) { out[0] = sigma; };
    cf.lipschitz = 1.0;
    cf.normalized = false;
    cf.measure_dependent = false;

    dynamics::ObliqueField h = dynamics::ObliqueField::time_only(
        1, [slope](double t, std::span<double> o) { o[0] = 1.0 + slope * t; },
        std::min(1.0, 1.0 + slope * horizon), std::max(1.0, 1.0 + slope * horizon),
        [slope](double, std::span<double> o) { o[0] = slope; });
    h.lipschitz = std::abs(slope) * 2.0;

    dynamics::CostField costs;
    costs.running = [](std::span<const double> x, std::span<const double>) { return norm(x); };
    costs.terminal = [](std::span<const double> x) { return norm(x); };
    costs.lipschitz = 1.0;

    ControlProblem prob{
        "two_control",
        dynamics::System{"two_control",
                         "dx = u dt + sigma dB on [0, inf), u in {-1, +1}, H(t) = 1 + h_slope t, "
                         "b = alpha = |x|",
                         convex::ConvexConstraint::half_space({-1.0}, 0.0),
                         std::move(cf),
                         std::move(h),
                         {x0},
                         convex::InteriorCertificate{{1.0}, 1.0}},
        std::move(costs),
        {{-1.0}, {1.0}},
        0.0,
        horizon};
    validate(prob);
    return prob;
}

}  // namespace omv::control
