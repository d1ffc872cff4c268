// Acceptance runner: one PASS/FAIL line per criterion, tables under --out.
//
//   omv_acceptance [--only N[,N...]] [--out DIR] [--threads N] [--seed S]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "omv/control.hpp"
#include "omv/convex.hpp"
#include "omv/csv.hpp"
#include "omv/dynamics.hpp"
#include "omv/errors.hpp"
#include "omv/measures.hpp"
#include "omv/mvsolver.hpp"
#include "omv/parallel.hpp"
#include "omv/timedep.hpp"

namespace fs = std::filesystem;
using namespace omv;

namespace {

struct Context {
    fs::path out;
    std::size_t threads = 1;
    std::uint64_t seed = 20240611;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

/// Tables written by the criteria; criterion 12 compares them across thread counts.
void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi / *lo - 1.0;
}

// 1. Yosida properties.
Outcome yosida_suite(const Context&) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<Vector> samples(200);
    for (auto& s : samples) s = {u(rng), u(rng)};
    const std::vector<double> eps{0.1, 0.01, 0.001};
    const std::vector<std::pair<std::string, convex::ConvexConstraint>> cases{
        {"half-space", convex::ConvexConstraint::half_space({1.0, 2.0}, 0.5)},
        {"box", convex::ConvexConstraint::box({-1.0, -0.5}, {0.75, 1.0})},
        {"ball", convex::ConvexConstraint::ball({0.2, -0.1}, 0.8)},
        {"quadratic", convex::ConvexConstraint::quadratic(Matrix(2, 2, {2.0, 0.5, 0.5, 1.0}))},
    };
    Outcome o{true, ""};
    for (const auto& [name, c] : cases) {
        const auto rep = convex::check_yosida_properties(c, eps, samples);
        o.pass = o.pass && rep.all_passed();
        o.detail += name + " " + num(rep.max_violation()) + " ";
    }
    return o;
}

// 2. W2: Hungarian against permutations, 1D quantiles against Hungarian.
Outcome wasserstein_suite(const Context&) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::size_t mismatches = 0;
    double worst_1d = 0.0;
    for (int inst = 0; inst < 500; ++inst) {
        const std::size_t n = 1 + inst % 6;
        const std::size_t dim = 1 + (inst / 6) % 3;
        std::vector<double> a(n * dim), b(n * dim);
        for (auto& v : a) v = u(rng);
        for (auto& v : b) v = u(rng);
        const EmpiricalMeasure mu(dim, a), nu(dim, b);
        std::vector<double> cost(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                cost[i * n + j] = norm_squared(subtract(mu.atom(i), nu.atom(j)));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (wasserstein2_assignment(mu, nu) != std::sqrt(best / static_cast<double>(n)))
            ++mismatches;
        if (dim == 1)
            worst_1d = std::max(worst_1d,
                                std::abs(wasserstein2(mu, nu) - wasserstein2_assignment(mu, nu)));
    }
    return {mismatches == 0 && worst_1d <= 1e-12,
            "mismatches " + std::to_string(mismatches) + ", 1D gap " + num(worst_1d)};
}

// 3. Skorohod step post-conditions.
Matrix random_spd(std::size_t m, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Matrix a(m, m);
    for (double& v : a.data()) v = g(rng);
    const auto q = jacobi_eigen(a.transpose() * a).vectors;
    std::uniform_real_distribution<double> e(0.0, std::log(100.0));
    Vector lam(m);
    for (std::size_t i = 0; i < m; ++i) lam[i] = std::exp(e(rng));
    lam[0] = 1.0;
    if (m > 1) lam[1] = 100.0;
    Matrix h = q * Matrix::diagonal(lam) * q.transpose();
    return 0.5 * (h + h.transpose());
}

Outcome skorohod_suite(const Context&) {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double feas = 0.0, cone = 0.0, linear = 0.0;
    for (int i = 0; i < 10'000; ++i) {
        const std::size_t m = 2 + i % 3;
        const Matrix h = random_spd(m, rng);
        Vector y(m);
        for (double& v : y) v = u(rng);
        convex::ConvexConstraint c = [&] {
            if (i % 2 == 0) {
                Vector n(m);
                for (double& v : n) v = u(rng);
                return convex::ConvexConstraint::half_space(n, std::abs(u(rng)) * 0.3);
            }
            Vector lo(m), hi(m);
            for (std::size_t j = 0; j < m; ++j) {
                lo[j] = -0.2 - std::abs(u(rng)) * 0.5;
                hi[j] = 0.2 + std::abs(u(rng)) * 0.5;
            }
            return convex::ConvexConstraint::box(lo, hi);
        }();
        const auto step = solver::oblique_skorohod_step(c, h, y);
        feas = std::max(feas, c.distance_to_domain(step.x));
        cone = std::max(cone, convex::normal_cone_residual(c, step.x, step.dk,
                                                            convex::probe_points(c, step.x)));
        linear = std::max(linear, distance(add(step.x, multiply(h, step.dk)), y));
    }
    return {feas <= 1e-10 && cone <= 1e-8 && linear <= 1e-10,
            "feasibility " + num(feas) + ", normal cone " + num(cone) + ", linear " + num(linear)};
}

std::vector<double> dyadic_ladder(int from, int to) {
    std::vector<double> out;
    for (int p = from; p <= to; ++p) out.push_back(std::ldexp(1.0, -p));
    return out;
}

std::string rate_table(const control::RateReport& r, const std::string& x, const std::string& y) {
    std::ostringstream os;
    os << x << "," << y << ",stderr\n";
    for (const auto& p : r.points)
        os << fmt17(p.abscissa) << "," << fmt17(p.value) << "," << fmt17(p.stderr) << "\n";
    os << "# slope," << fmt17(r.fit.slope) << "\n# r_squared," << fmt17(r.fit.r_squared) << "\n";
    return os.str();
}

// 4. Cauchy rate of the penalized scheme.
Outcome penalization_rate(const Context& ctx) {
    const auto sys = dynamics::make_system("ou");
    const TimeGrid grid(0.0, 1.0, 2048);
    solver::SimOptions opt;
    opt.particles = 256;
    opt.replications = 64;
    opt.threads = ctx.threads;
    opt.noise = NoiseSource(ctx.seed).derive("penalization-rate");
    const auto ladder = dyadic_ladder(3, 8);
    const auto r = control::penalization_rate_probe(sys, grid, ladder, opt);
    write_file(ctx.out / "penalization_rate.csv", rate_table(r, "eps_sum", "sup_sq_distance"));
    return {!r.degenerate && r.fit.slope >= 0.7 && r.fit.slope <= 1.3 && r.fit.r_squared >= 0.9,
            "slope " + num(r.fit.slope) + ", R^2 " + num(r.fit.r_squared)};
}

control::SimConfig control_config(const Context& ctx, const std::string& tag) {
    control::SimConfig cfg;
    cfg.step = 1.0 / 2048.0;
    cfg.particles = 256;
    cfg.replications = 64;
    cfg.threads = ctx.threads;
    cfg.noise = NoiseSource(ctx.seed).derive(tag);
    return cfg;
}

// 5. |V_ε - V|.
Outcome value_rate(const Context& ctx) {
    const auto prob = control::two_control_problem();
    const auto ladder = dyadic_ladder(3, 8);
    const auto r = control::value_rate_probe(prob, ladder, control_config(ctx, "value-rate"));
    std::string table = rate_table(r, "eps", "value_gap");
    table += "# quadrature_floor," + fmt17(r.quadrature_floor) + "\n";
    write_file(ctx.out / "value_rate.csv", table);
    return {!r.degenerate && r.fit.slope >= 0.35 && r.fit.r_squared >= 0.8,
            "slope " + num(r.fit.slope) + ", R^2 " + num(r.fit.r_squared) + ", floor " +
                num(r.quadrature_floor) + (r.floor_reached ? " (reached)" : "")};
}

// 6. Dynamic programming residual at the midpoint.
Outcome dpp(const Context& ctx) {
    const auto prob = control::two_control_problem();
    const auto cfg = control_config(ctx, "dpp");
    const double tau = 0.5 * (prob.start + prob.horizon);
    const auto r = control::dpp_residual(prob, tau, control::Scheme::projected(), cfg);
    const double bound = std::max(3.0 * r.stderr, 5.0 * cfg.step);
    std::ostringstream os;
    os << "lhs,lhs_stderr,rhs,rhs_stderr,residual,stderr,clusters\n"
       << fmt17(r.lhs) << "," << fmt17(r.lhs_stderr) << "," << fmt17(r.rhs) << ","
       << fmt17(r.rhs_stderr) << "," << fmt17(r.residual) << "," << fmt17(r.stderr) << ","
       << r.clusters << "\n";
    write_file(ctx.out / "dpp.csv", os.str());
    return {r.residual <= bound, "residual " + num(r.residual) + " <= " + num(bound) + " (lhs " +
                                     num(r.lhs) + ", rhs " + num(r.rhs) + ")"};
}

// 7. Moment bounds on the box benchmark.
Outcome moments(const Context& ctx) {
    const auto sys = dynamics::make_system("example31");
    solver::SimOptions opt;
    opt.particles = 256;
    opt.replications = 8;
    opt.threads = ctx.threads;
    opt.noise = NoiseSource(ctx.seed).derive("moments");
    const double horizon = 0.5;
    std::vector<double> sup;
    for (std::size_t steps : {1024u, 2048u}) {
        const auto ens = solver::simulate_projected(sys, TimeGrid(0.0, horizon, steps), opt);
        sup.push_back(second_moment_sup(ens));
    }
    const double change = std::abs(sup[1] - sup[0]) / sup[0];

    std::vector<double> bound;
    std::ostringstream os;
    os << "eps,sup_moment,gradient_energy\n";
    const TimeGrid grid(0.0, horizon, 2048);
    for (double eps : dyadic_ladder(3, 8)) {
        const auto ens = solver::simulate_penalized(sys, eps, grid, opt);
        double energy = 0.0;
        for (const auto& e : ens) energy += solver::penalty_energy(e);
        energy /= static_cast<double>(ens.size());
        const double m = second_moment_sup(ens);
        bound.push_back(m + energy);
        os << fmt17(eps) << "," << fmt17(m) << "," << fmt17(energy) << "\n";
    }
    os << "# projected_sup_moment_1024," << fmt17(sup[0]) << "\n# projected_sup_moment_2048,"
       << fmt17(sup[1]) << "\n";
    write_file(ctx.out / "moments.csv", os.str());
    const double var = spread(bound);
    return {change < 0.10 && var < 0.25,
            "sup-moment change " + num(change) + ", penalized bound spread " + num(var)};
}

// 8. Hölder regularity of V.
Outcome regularity(const Context& ctx) {
    const auto prob = control::two_control_problem();
    const std::vector<double> scales{0.1, 0.01};
    const auto r =
        control::value_regularity_probe(prob, scales, control_config(ctx, "regularity"));
    std::ostringstream os;
    os << "scale,dx,ds,dv,stderr,ratio\n";
    for (const auto& p : r.probes)
        os << fmt17(p.scale) << "," << fmt17(p.dx) << "," << fmt17(p.ds) << "," << fmt17(p.dv)
           << "," << fmt17(p.stderr) << "," << fmt17(p.ratio) << "\n";
    write_file(ctx.out / "regularity.csv", os.str());
    return {r.passed, "max ratio " + num(r.max_ratio[0]) + " (0.1), " + num(r.max_ratio[1]) +
                          " (0.01), allowance " + num(r.allowance[1])};
}

// 9. Interior estimate along projected paths.
Outcome interior_estimate(const Context& ctx) {
    solver::SimOptions opt;
    opt.particles = 256;
    opt.replications = 4;
    opt.threads = ctx.threads;
    opt.noise = NoiseSource(ctx.seed).derive("interior");
    double worst = std::numeric_limits<double>::infinity();
    std::string detail;
    for (const std::string name : {"reflected_bm", "linear"}) {
        const auto sys = dynamics::make_system(name);
        const auto ens = solver::simulate_projected(sys, TimeGrid(0.0, 1.0, 1024), opt);
        const double margin = solver::interior_estimate_check(ens, sys.constraint, *sys.certificate);
        worst = std::min(worst, margin);
        detail += name + " " + num(margin) + " ";
    }
    return {worst >= -1e-8, "margins " + detail};
}

// 10. Moving interval against the reduced fixed-set problem.
Outcome moving_interval(const Context& ctx) {
    const auto prob = timedep::moving_interval_problem();
    solver::SimOptions opt;
    opt.particles = 256;
    opt.replications = 8;
    opt.threads = ctx.threads;
    opt.noise = NoiseSource(ctx.seed).derive("moving-interval");
    const std::vector<std::size_t> ladder{256, 512, 1024};
    const auto r = timedep::equivalence_check(prob, ladder, opt, timedep::Correction::DriftOnly);
    std::ostringstream os;
    os << "steps,step,mean_sup_distance,max_distance,lifted_feasibility\n";
    double feas = 0.0;
    for (const auto& l : r.levels) {
        os << l.steps << "," << fmt17(l.step) << "," << fmt17(l.mean_sup_distance) << ","
           << fmt17(l.max_distance) << "," << fmt17(l.lifted_feasibility) << "\n";
        feas = std::max(feas, l.lifted_feasibility);
    }
    write_file(ctx.out / "moving_interval.csv", os.str());
    const auto& fine = r.levels.back();
    const double bound = 10.0 * std::sqrt(fine.step);
    return {r.monotone() && fine.mean_sup_distance <= bound && feas <= 1e-8,
            "distances " + num(r.levels[0].mean_sup_distance) + " > " +
                num(r.levels[1].mean_sup_distance) + " > " + num(fine.mean_sup_distance) +
                " (bound " + num(bound) + "), feasibility " + num(feas)};
}

// 11. Reflected Brownian motion at T.
Outcome reflected_bm(const Context& ctx) {
    const auto sys = dynamics::make_system("reflected_bm");
    solver::SimOptions opt;
    opt.particles = 256;
    opt.replications = 16;
    opt.threads = ctx.threads;
    opt.noise = NoiseSource(ctx.seed).derive("reflected-bm");
    const double horizon = 1.0;
    const auto ens = solver::simulate_projected(sys, TimeGrid(0.0, horizon, 16384), opt);
    std::vector<double> xt;
    for (const auto& e : ens)
        for (const auto& p : e.paths) xt.push_back(p.state(p.steps())[0]);
    const double n = static_cast<double>(xt.size());
    const double mean = std::accumulate(xt.begin(), xt.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : xt) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (n - 1.0) / n);
    const double exact = std::sqrt(2.0 * horizon / std::numbers::pi);
    std::ostringstream os;
    os << "mean,stderr,exact\n" << fmt17(mean) << "," << fmt17(se) << "," << fmt17(exact) << "\n";
    write_file(ctx.out / "reflected_bm.csv", os.str());
    return {std::abs(mean - exact) <= 3.0 * se,
            "mean " + num(mean) + " vs " + num(exact) + ", 3 se " + num(3.0 * se)};
}

// 12. Byte-identical tables under 1, 2 and 8 threads.
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const Context& ctx) {
    const std::vector<std::pair<std::string, Outcome (*)(const Context&)>> runs{
        {"penalization_rate.csv", penalization_rate},
        {"moving_interval.csv", moving_interval},
        {"reflected_bm.csv", reflected_bm},
        {"moments.csv", moments},
    };
    std::string detail;
    bool pass = true;
    for (const auto& [file, fn] : runs) {
        std::vector<std::string> texts;
        for (std::size_t threads : {1u, 2u, 8u}) {
            Context c = ctx;
            c.threads = threads;
            c.out = ctx.out / ("threads" + std::to_string(threads));
            (void)fn(c);
            texts.push_back(slurp(c.out / file));
        }
        const bool same = !texts[0].empty() && texts[0] == texts[1] && texts[0] == texts[2];
        pass = pass && same;
        detail += file + (same ? " identical " : " DIFFERS ");
    }
    return {pass, detail};
}

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    Outcome (*run)(const Context&);
};

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    ctx.out = "acceptance_out";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << a << " needs a value\n";
                std::exit(2);
            }
            return argv[++i];
        };
        if (a == "--only") {
            std::stringstream ss(next());
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        } else if (a == "--out") {
            ctx.out = next();
        } else if (a == "--threads") {
            ctx.threads = static_cast<std::size_t>(std::stoi(next()));
        } else if (a == "--seed") {
            ctx.seed = std::stoull(next());
        } else {
            std::cerr << "unknown argument " << a << "\n";
            return 2;
        }
    }
    if (ctx.threads == 0) ctx.threads = resolve_threads();

    const std::vector<Criterion> criteria{
        {1, "Yosida property suite", 10, yosida_suite},
        {2, "Wasserstein oracle equivalence", 30, wasserstein_suite},
        {3, "Skorohod step contract", 30, skorohod_suite},
        {4, "penalization Cauchy rate", 300, penalization_rate},
        {5, "penalized value rate", 600, value_rate},
        {6, "dynamic programming residual", 600, dpp},
        {7, "moment bound stability", 180, moments},
        {8, "value regularity", 600, regularity},
        {9, "interior path estimate", 120, interior_estimate},
        {10, "moving interval reduction", 180, moving_interval},
        {11, "reflected Brownian motion mean", 60, reflected_bm},
        {12, "thread-count determinism", 1e9, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("criterion %2d %-32s %s  %s  [%.1f s%s]\n", c.id, c.name.c_str(),
                    pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                    in_time ? "" : ", over time budget");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
