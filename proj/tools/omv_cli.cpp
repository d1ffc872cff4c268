// Batch front end.
//
//   oblique-mv --config run.json [--seed S] [--threads N] [--strict] [--out DIR]
//   oblique-mv describe <system>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "omv/control.hpp"
#include "omv/csv.hpp"
#include "omv/errors.hpp"
#include "omv/measures.hpp"
#include "omv/mvsolver.hpp"
#include "omv/parallel.hpp"
#include "omv/timedep.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace omv;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kStrict = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool strict = false;
    std::string out;
};

/// Rejects keys outside `allowed`, naming the full path.
void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(path + "." + key + ": unknown key (allowed: " + list + ")");
        }
}

template <typename T>
T field(const json& obj, const std::string& path, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

std::size_t positive(const json& obj, const std::string& path, const std::string& key,
                     std::size_t fallback) {
    const auto v = field<long long>(obj, path, key, static_cast<long long>(fallback));
    if (v <= 0) throw ConfigError(path + "." + key + ": must be a positive integer");
    return static_cast<std::size_t>(v);
}

struct ExperimentConfig {
    std::string mode;
    std::string system = "ou";
    dynamics::Parameters params;
    std::string scheme = "projected";
    double epsilon = 0.0;
    std::size_t steps = 1024;
    double horizon = 1.0;
    std::size_t particles = 256;
    std::size_t replications = 4;
    std::vector<double> eps_ladder;
    std::uint64_t seed = 1;
    std::string output = "omv_out";
    std::size_t threads = 0;
    // control mode
    std::size_t switches = 0;
    std::optional<double> tau;
    std::vector<double> scales;
    std::size_t inner_replications = 16;
    std::size_t clusters = 8;
    // properties mode
    std::optional<json> constraint;
    std::size_t samples = 200;
    json raw;
};

const std::set<std::string> kModes{"simulate", "converge",       "control",
                                   "validate", "transform-demo", "properties"};

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "config",
               {"mode", "system", "scheme", "epsilon", "grid", "particles", "replications",
                "eps_ladder", "seed", "output", "threads", "control", "constraint", "samples"});
    ExperimentConfig c;
    c.raw = j;
    if (!j.contains("mode")) throw ConfigError("config.mode: required");
    c.mode = field<std::string>(j, "config", "mode", "");
    if (!kModes.count(c.mode)) throw ConfigError("config.mode: unknown mode '" + c.mode + "'");
    if (j.contains("system")) {
        const auto& s = j.at("system");
        check_keys(s, "config.system", {"name", "params"});
        c.system = field<std::string>(s, "config.system", "name", c.system);
        if (s.contains("params")) {
            if (!s.at("params").is_object())
                throw ConfigError("config.system.params: expected an object");
            for (const auto& [k, v] : s.at("params").items()) {
                if (!v.is_number()) throw ConfigError("config.system.params." + k + ": expected a number");
                c.params[k] = v.get<double>();
            }
        }
    }
    c.scheme = field<std::string>(j, "config", "scheme", c.scheme);
    if (c.scheme != "projected" && c.scheme != "penalized")
        throw ConfigError("config.scheme: expected 'projected' or 'penalized'");
    c.epsilon = field<double>(j, "config", "epsilon", c.epsilon);
    if (c.scheme == "penalized" && !(c.epsilon > 0.0))
        throw ConfigError("config.epsilon: the penalized scheme needs epsilon > 0");
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_keys(g, "config.grid", {"steps", "horizon"});
        c.steps = positive(g, "config.grid", "steps", c.steps);
        c.horizon = field<double>(g, "config.grid", "horizon", c.horizon);
        if (!(c.horizon > 0.0)) throw ConfigError("config.grid.horizon: must be positive");
    }
    c.particles = positive(j, "config", "particles", c.particles);
    c.replications = positive(j, "config", "replications", c.replications);
    c.eps_ladder = field<std::vector<double>>(j, "config", "eps_ladder", {});
    for (double e : c.eps_ladder)
        if (!(e > 0.0)) throw ConfigError("config.eps_ladder: entries must be positive");
    c.seed = field<std::uint64_t>(j, "config", "seed", c.seed);
    c.output = field<std::string>(j, "config", "output", c.output);
    c.threads = field<std::size_t>(j, "config", "threads", 0);
    if (j.contains("control")) {
        const auto& k = j.at("control");
        check_keys(k, "config.control",
                   {"switches", "tau", "scales", "inner_replications", "clusters"});
        c.switches = field<std::size_t>(k, "config.control", "switches", 0);
        if (k.contains("tau")) c.tau = field<double>(k, "config.control", "tau", 0.0);
        c.scales = field<std::vector<double>>(k, "config.control", "scales", {});
        c.inner_replications = positive(k, "config.control", "inner_replications", 16);
        c.clusters = positive(k, "config.control", "clusters", 8);
    }
    if (j.contains("constraint")) c.constraint = j.at("constraint");
    c.samples = positive(j, "config", "samples", c.samples);
    if (c.mode == "converge" && c.eps_ladder.size() < 3)
        throw ConfigError("config.eps_ladder: converge mode needs at least three values");
    return c;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : s) h = (h ^ static_cast<unsigned char>(ch)) * 0x100000001b3ULL;
    return h;
}

convex::ConvexConstraint constraint_from(const json& j) {
    const std::string path = "config.constraint";
    const auto type = field<std::string>(j, path, "type", "");
    auto vec = [&](const std::string& key) {
        if (!j.contains(key)) throw ConfigError(path + "." + key + ": required");
        return field<Vector>(j, path, key, {});
    };
    if (type == "half_space") {
        check_keys(j, path, {"type", "normal", "offset"});
        return convex::ConvexConstraint::half_space(vec("normal"), field<double>(j, path, "offset", 0.0));
    }
    if (type == "box") {
        check_keys(j, path, {"type", "lower", "upper"});
        return convex::ConvexConstraint::box(vec("lower"), vec("upper"));
    }
    if (type == "ball") {
        check_keys(j, path, {"type", "center", "radius"});
        return convex::ConvexConstraint::ball(vec("center"), field<double>(j, path, "radius", 1.0));
    }
    if (type == "quadratic") {
        check_keys(j, path, {"type", "matrix"});
        const auto rows = field<std::vector<Vector>>(j, path, "matrix", {});
        if (rows.empty()) throw ConfigError(path + ".matrix: required");
        Matrix q(rows.size(), rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size()) throw ConfigError(path + ".matrix: must be square");
            for (std::size_t k = 0; k < rows.size(); ++k) q(i, k) = rows[i][k];
        }
        return convex::ConvexConstraint::quadratic(q);
    }
    throw ConfigError(path + ".type: expected half_space, box, ball or quadratic");
}

/// Files are held in memory and written only once the whole run succeeded.
class Outputs {
public:
    void add(const std::string& name, std::string text) { files_[name] = std::move(text); }
    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [n, _] : files_) out.push_back(n);
        return out;
    }

    void commit(const fs::path& dir) const {
        fs::create_directories(dir);
        for (const auto& [name, text] : files_) {
            const fs::path target = dir / name;
            const fs::path tmp = dir / ("." + name + ".tmp");
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                out << text;
                if (!out) throw Error("cannot write " + tmp.string());
            }
            fs::rename(tmp, target);
        }
    }

private:
    std::map<std::string, std::string> files_;
};

struct RunResult {
    bool acceptable = true;
    std::string summary;
};

solver::SimOptions sim_options(const ExperimentConfig& c, std::size_t threads) {
    solver::SimOptions o;
    o.particles = c.particles;
    o.replications = c.replications;
    o.threads = threads;
    o.noise = NoiseSource(c.seed);
    return o;
}

std::string rate_csv(const control::RateReport& r, const std::string& x, const std::string& y) {
    std::ostringstream os;
    os << x << "," << y << ",stderr\n";
    for (const auto& p : r.points)
        os << fmt17(p.abscissa) << "," << fmt17(p.value) << "," << fmt17(p.stderr) << "\n";
    return os.str();
}

RunResult run_simulate(const ExperimentConfig& c, std::size_t threads, Outputs& out) {
    const auto sys = dynamics::make_system(c.system, c.params);
    const TimeGrid grid(0.0, c.horizon, c.steps);
    const auto opt = sim_options(c, threads);
    const auto ens = c.scheme == "penalized" ? solver::simulate_penalized(sys, c.epsilon, grid, opt)
                                             : solver::simulate_projected(sys, grid, opt);
    std::ostringstream traj;
    solver::write_trajectories(traj, ens);
    out.add("trajectories.csv", traj.str());
    const auto d = solver::residual_report(ens.front(), sys, opt);
    std::ostringstream s;
    s << "metric,value\n"
      << "sup_second_moment," << fmt17(second_moment_sup(ens)) << "\n"
      << "feasibility," << fmt17(d.feasibility) << "\n"
      << "equation," << fmt17(d.equation) << "\n"
      << "variational," << fmt17(d.variational) << "\n"
      << "complementarity," << fmt17(d.complementarity) << "\n"
      << "normal_cone," << fmt17(d.normal_cone) << "\n"
      << "variation_consistent," << (d.variation_consistent ? 1 : 0) << "\n";
    out.add("summary.csv", s.str());
    const bool ok = d.equation <= convex::kCompositeTol && d.variational <= convex::kCompositeTol &&
                    d.variation_consistent &&
                    (c.scheme == "penalized" || d.feasibility <= convex::kGeometricTol);
    return {ok, "simulated " + std::to_string(ens.size()) + " replications; residual checks " +
                    (ok ? "passed" : "failed")};
}

RunResult run_converge(const ExperimentConfig& c, std::size_t threads, Outputs& out) {
    const auto sys = dynamics::make_system(c.system, c.params);
    const auto r = control::penalization_rate_probe(sys, TimeGrid(0.0, c.horizon, c.steps),
                                                    c.eps_ladder, sim_options(c, threads));
    out.add("rate.csv", rate_csv(r, "eps_sum", "sup_sq_distance"));
    std::ostringstream s;
    s << "slope," << fmt17(r.fit.slope) << "\nr_squared," << fmt17(r.fit.r_squared)
      << "\ndegenerate," << (r.degenerate ? 1 : 0) << "\n";
    out.add("fit.csv", s.str());
    const bool ok = !r.degenerate && r.fit.slope >= 0.7 && r.fit.slope <= 1.3 &&
                    r.fit.r_squared >= 0.9;
    return {ok, "slope " + fmt17(r.fit.slope) + ", R^2 " + fmt17(r.fit.r_squared)};
}

RunResult run_control(const ExperimentConfig& c, std::size_t threads, Outputs& out) {
    if (c.system != "two_control")
        throw ConfigError("config.system.name: control mode supports 'two_control'");
    auto prob = control::two_control_problem(c.params);
    control::SimConfig cfg;
    cfg.step = (prob.horizon - prob.start) / static_cast<double>(c.steps);
    cfg.particles = c.particles;
    cfg.replications = c.replications;
    cfg.threads = threads;
    cfg.noise = NoiseSource(c.seed);
    cfg.switches = c.switches;
    cfg.inner_replications = c.inner_replications;
    cfg.clusters = c.clusters;
    const auto scheme = c.scheme == "penalized" ? control::Scheme::penalty(c.epsilon)
                                                : control::Scheme::projected();
    const auto v = control::value(prob, scheme, cfg);
    std::ostringstream vs;
    vs << "control_index,cost,stderr\n";
    for (std::size_t i = 0; i < v.costs.size(); ++i)
        vs << i << "," << fmt17(v.costs[i].value) << "," << fmt17(v.costs[i].stderr) << "\n";
    out.add("value.csv", vs.str());
    bool ok = true;
    std::string summary = "V = " + fmt17(v.value) + " (control " + std::to_string(v.control_index) + ")";
    if (c.eps_ladder.size() >= 3) {
        const auto r = control::value_rate_probe(prob, c.eps_ladder, cfg);
        out.add("value_rate.csv", rate_csv(r, "eps", "value_gap"));
        ok = ok && !r.degenerate && r.fit.slope >= 0.35 && r.fit.r_squared >= 0.8;
        summary += "; value rate slope " + fmt17(r.fit.slope);
    }
    if (c.tau) {
        const auto d = control::dpp_residual(prob, *c.tau, scheme, cfg);
        std::ostringstream ds;
        ds << "lhs,rhs,residual,stderr\n"
           << fmt17(d.lhs) << "," << fmt17(d.rhs) << "," << fmt17(d.residual) << ","
           << fmt17(d.stderr) << "\n";
        out.add("dpp.csv", ds.str());
        ok = ok && d.residual <= std::max(3.0 * d.stderr, 5.0 * cfg.step);
        summary += "; DPP residual " + fmt17(d.residual);
    }
    if (!c.scales.empty()) {
        const auto r = control::value_regularity_probe(prob, c.scales, cfg);
        std::ostringstream rs;
        rs << "scale,dx,ds,dv,stderr,ratio\n";
        for (const auto& p : r.probes)
            rs << fmt17(p.scale) << "," << fmt17(p.dx) << "," << fmt17(p.ds) << ","
               << fmt17(p.dv) << "," << fmt17(p.stderr) << "," << fmt17(p.ratio) << "\n";
        out.add("regularity.csv", rs.str());
        ok = ok && r.passed;
        summary += std::string("; regularity ") + (r.passed ? "bounded" : "not bounded");
    }
    return {ok, summary};
}

RunResult run_validate(const ExperimentConfig& c, std::size_t, Outputs& out) {
    const auto sys = dynamics::make_system(c.system, c.params);
    const std::size_t m = sys.coefficients.state_dim;
    const auto sampler = dynamics::cube_sampler(m, 2.0, 8, 0.0, c.horizon);
    const auto lip = dynamics::validate_lipschitz(sys.coefficients, sampler, c.samples, c.seed);
    const auto obl = dynamics::validate_oblique(sys.oblique, sampler, c.samples, c.seed);
    std::ostringstream s;
    s << "check,estimate,declared,min_eigenvalue,max_eigenvalue,symmetry,passed\n"
      << "lipschitz," << fmt17(lip.estimate) << "," << fmt17(lip.declared) << ",,,,"
      << lip.passed() << "\n"
      << "oblique," << fmt17(obl.estimate) << "," << fmt17(obl.declared) << ","
      << fmt17(obl.min_eigenvalue) << "," << fmt17(obl.max_eigenvalue) << ","
      << fmt17(obl.symmetry_residual) << "," << obl.passed() << "\n";
    out.add("validation.csv", s.str());
    std::string summary = "assumption checks ";
    for (const auto& v : lip.violations) summary += "[" + v + "] ";
    for (const auto& v : obl.violations) summary += "[" + v + "] ";
    const bool ok = lip.passed() && obl.passed();
    return {ok, summary + (ok ? "passed" : "failed")};
}

RunResult run_transform(const ExperimentConfig& c, std::size_t threads, Outputs& out) {
    const auto prob = timedep::moving_interval_problem(c.params);
    const std::vector<std::size_t> ladder{c.steps, 2 * c.steps, 4 * c.steps};
    const auto r = timedep::equivalence_check(prob, ladder, sim_options(c, threads),
                                              timedep::Correction::DriftOnly);
    std::ostringstream s;
    s << "steps,step,mean_sup_distance,max_distance,lifted_feasibility\n";
    double feas = 0.0;
    for (const auto& l : r.levels) {
        s << l.steps << "," << fmt17(l.step) << "," << fmt17(l.mean_sup_distance) << ","
          << fmt17(l.max_distance) << "," << fmt17(l.lifted_feasibility) << "\n";
        feas = std::max(feas, l.lifted_feasibility);
    }
    out.add("equivalence.csv", s.str());
    const bool ok = r.monotone() && feas <= convex::kCompositeTol;
    return {ok, std::string("reduced and direct solutions ") +
                    (r.monotone() ? "converge together" : "do not converge monotonically")};
}

RunResult run_properties(const ExperimentConfig& c, std::size_t, Outputs& out) {
    const auto constraint = c.constraint ? constraint_from(*c.constraint)
                                         : dynamics::make_system(c.system, c.params).constraint;
    const std::vector<double> eps =
        c.eps_ladder.empty() ? std::vector<double>{0.1, 0.01, 0.001} : c.eps_ladder;
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<Vector> pts(c.samples, Vector(constraint.dimension()));
    for (auto& p : pts)
        for (double& v : p) v = u(rng);
    const auto rep = convex::check_yosida_properties(constraint, eps, pts);
    std::ostringstream s;
    s << "property,max_violation,tolerance,passed\n";
    for (std::size_t i = 0; i < 7; ++i)
        s << convex::PropertyReport::kNames[i] << "," << fmt17(rep.violation[i]) << ","
          << fmt17(rep.tolerance) << "," << rep.passed(i) << "\n";
    out.add("properties.csv", s.str());
    return {rep.all_passed(), constraint.describe() + ": max violation " +
                                  fmt17(rep.max_violation())};
}

int run(const Options& o) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("cannot read config file '" + o.config + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(o.config + ": " + e.what());
    }
    ExperimentConfig c = parse_config(j);
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.output = o.out;
    const std::size_t threads =
        o.threads > 0 ? static_cast<std::size_t>(o.threads)
                      : (c.threads > 0 ? c.threads : resolve_threads());

    Outputs out;
    RunResult r;
    if (c.mode == "simulate") r = run_simulate(c, threads, out);
    else if (c.mode == "converge") r = run_converge(c, threads, out);
    else if (c.mode == "control") r = run_control(c, threads, out);
    else if (c.mode == "validate") r = run_validate(c, threads, out);
    else if (c.mode == "transform-demo") r = run_transform(c, threads, out);
    else r = run_properties(c, threads, out);

    json manifest;
    manifest["mode"] = c.mode;
    manifest["config_hash"] = [&] {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a(c.raw.dump())));
        return std::string(buf);
    }();
    manifest["seed"] = c.seed;
    manifest["version"] = OMV_VERSION;
    manifest["outputs"] = out.names();
    manifest["acceptable"] = r.acceptable;
    out.add("manifest.json", manifest.dump(2) + "\n");
    out.commit(c.output);

    std::cout << c.mode << ": " << r.summary << "\n";
    if (o.strict && !r.acceptable) {
        std::cerr << "strict: acceptance probe failed\n";
        return kStrict;
    }
    return kOk;
}

int describe_system(const std::string& name) {
    if (name == "two_control") {
        const auto p = control::two_control_problem();
        std::cout << dynamics::describe(p.system);
        return kOk;
    }
    if (name == "moving_interval") {
        const auto p = timedep::moving_interval_problem();
        std::cout << p.name << ": interval H(t)[0, 1] with H(t) = a + b t\n"
                  << "constraint: " << p.base.describe() << "\n";
        return kOk;
    }
    std::cout << dynamics::describe(dynamics::make_system(name));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained McKean-Vlasov simulations and probes"};
    Options o;
    app.add_option("--config", o.config, "experiment configuration (JSON)");
    app.add_option("--seed", o.seed, "overrides the configured seed");
    app.add_option("--threads", o.threads, "worker threads (default OBLIQUE_MV_THREADS or 1)");
    app.add_flag("--strict", o.strict, "exit 4 when an acceptance probe fails");
    app.add_option("--out", o.out, "output directory");
    std::string name;
    auto* describe = app.add_subcommand("describe", "describe a bundled system");
    describe->add_option("name", name)->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }
    try {
        if (*describe) return describe_system(name);
        if (o.config.empty()) throw ConfigError("--config is required");
        return run(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const UnsupportedInputError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const CertificateError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kDivergence;
    } catch (const StepError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
