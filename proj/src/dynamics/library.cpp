#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "omv/dynamics.hpp"
#include "omv/errors.hpp"

namespace omv::dynamics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class ParamReader {
public:
    ParamReader(std::string system, const Parameters& params)
        : system_(std::move(system)), params_(params) {}

    double get(const std::string& key, double fallback) {
        known_.insert(key);
        const auto it = params_.find(key);
        return it == params_.end() ? fallback : it->second;
    }

    void finish() const {
        for (const auto& [key, value] : params_) {
            if (known_.count(key)) continue;
            std::string list;
            for (const auto& k : known_) list += (list.empty() ? "" : ", ") + k;
            throw ConfigError("system '" + system_ + "' has no parameter '" + key +
                              "' (accepted: " + list + ")");
        }
    }

private:
    std::string system_;
    const Parameters& params_;
    std::set<std::string> known_;
};

convex::ConvexConstraint half_line() { return convex::ConvexConstraint::half_space({-1.0}, 0.0); }

// Example with H(x, μ) = diag(sin x1 + 5 + cos W, e^{cos x2} + 4 + (W ∧ 1)),
// W = W2(μ, δ0). f and g are shifted by their values at (0, δ0) so that the
// normalization f(0, δ0) = g(0, δ0) = 0 holds; the scalar f is applied to
// every coordinate and the scalar g to every diffusion column.
System example31(const Parameters& params, bool strong) {
    const std::string name = strong ? "example31_strong" : "example31";
    ParamReader p(name, params);
    const double half_width = p.get("half_width", 1.0);
    const Vector x0{p.get("x0_1", 0.5), p.get("x0_2", 0.5)};
    p.finish();

    const double sqrt5 = std::sqrt(5.0);
    const double e = std::numbers::e;

    CoefficientField coeffs;
    coeffs.state_dim = 2;
    coeffs.noise_dim = 2;
    coeffs.drift = [sqrt5](std::span<const double> x, const EmpiricalMeasure& mu, double,
                           std::span<const double>, std::span<double> out) {
        const double w = w2_to_origin(mu);
        const double s = std::sqrt(norm_squared(x) + 5.0) - sqrt5 + w;
        out[0] = s;
        out[1] = s;
    };
    coeffs.diffusion = [](std::span<const double> x, const EmpiricalMeasure& mu, double,
                          std::span<const double>, std::span<double> out) {
        const double w = w2_to_origin(mu);
        const double s = std::exp(std::min(1.0, norm(x))) - 1.0 + std::sin(w);
        out[0] = s;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = s;
    };
    // |Δf| <= √2 (|Δx| + ΔW), |Δg|_F <= √2 (e |Δx| + ΔW).
    coeffs.lipschitz = std::numbers::sqrt2 * (1.0 + e);

    ObliqueField h;
    h.dim = 2;
    h.state_dependent = true;
    if (strong) {
        h.measure_dependent = false;
        h.matrix = [](std::span<const double> x, const EmpiricalMeasure&, double,
                      std::span<double> out) {
            out[0] = std::sin(x[0]) + 5.0;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = std::exp(std::min(x[1], 1.0)) + 4.0 + std::cos(x[1]);
        };
        h.a_h = 3.0;
        h.b_h = 5.0 + e;
        // |ΔH|_F <= (1 + e + 1) |Δx|, |ΔH^{-1}|_F <= |ΔH|_F / 9.
        h.lipschitz = (2.0 + e) * (1.0 + 1.0 / 9.0);
    } else {
        h.measure_dependent = true;
        h.matrix = [](std::span<const double> x, const EmpiricalMeasure& mu, double,
                      std::span<double> out) {
            const double w = w2_to_origin(mu);
            out[0] = std::sin(x[0]) + 5.0 + std::cos(w);
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = std::exp(std::cos(x[1])) + 4.0 + std::min(w, 1.0);
        };
        // Diagonal entries range over [3, 7] and [4 + 1/e, 5 + e].
        h.a_h = 3.0;
        h.b_h = 5.0 + e;
        h.lipschitz = (1.0 + e) * (1.0 + 1.0 / 9.0);
    }

    const double w = half_width;
    System sys{name,
               strong ? "Box benchmark, strong-solution variant: state-dependent diagonal H(x), "
                        "measure-dependent f and g, box constraint"
                      : "Box benchmark: diagonal H(x, mu) with sin/cos/exp entries, "
                        "f = sqrt(|x|^2 + 5) + W2(mu, delta0), g = e^{1 ^ |x|} + sin W2(mu, delta0), "
                        "box constraint",
               convex::ConvexConstraint::box({-w, -w}, {w, w}),
               std::move(coeffs),
               std::move(h),
               x0,
               convex::InteriorCertificate{{0.0, 0.0}, w}};
    return sys;
}

System ou(const Parameters& params) {
    ParamReader p("ou", params);
    const double theta = p.get("theta", 1.0);
    const double kappa = p.get("kappa", 0.5);
    const double sigma = p.get("sigma", 1.0);
    const double x0 = p.get("x0", 0.5);
    p.finish();

    CoefficientField coeffs;
    coeffs.drift = [theta, kappa](std::span<const double> x, const EmpiricalMeasure& mu, double,
                                  std::span<const double>, std::span<double> out) {
        out[0] = -theta * (x[0] - kappa * mu.mean()[0]);
    };
    coeffs.diffusion = [sigma](std::span<const double>, const EmpiricalMeasure&, double,
                               std::span<const double>, std::span<double> out) { out[0] = sigma; };
    coeffs.lipschitz = std::abs(theta) * std::max(1.0, std::abs(kappa));
    coeffs.normalized = false;
    return System{"ou",
                  "1D mean-field Ornstein-Uhlenbeck dx = -theta (x - kappa E[x]) dt + sigma dB "
                  "reflected on [0, inf), H = 1",
                  half_line(),
                  std::move(coeffs),
                  ObliqueField::identity(1),
                  {x0},
                  convex::InteriorCertificate{{1.0}, 1.0}};
}

System reflected_bm(const Parameters& params) {
    ParamReader p("reflected_bm", params);
    const double sigma = p.get("sigma", 1.0);
    const double x0 = p.get("x0", 0.0);
    const double h = p.get("h", 1.0);
    p.finish();
    if (!(h > 0.0)) throw ConfigError("reflected_bm: h must be positive");

    CoefficientField coeffs;
    coeffs.drift = [](std::span<const double>, const EmpiricalMeasure&, double,
                      std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    coeffs.diffusion = [sigma](std::span<const double>, const EmpiricalMeasure&, double,
                               std::span<const double>, std::span<double> out) { out[0] = sigma; };
    coeffs.lipschitz = 0.0;
    coeffs.normalized = false;
    coeffs.measure_dependent = false;
    return System{"reflected_bm",
                  "1D Brownian motion reflected at 0 on [0, inf) with scalar H",
                  half_line(),
                  std::move(coeffs),
                  ObliqueField::constant(Matrix(1, 1, {h})),
                  {x0},
                  convex::InteriorCertificate{{1.0}, 1.0}};
}

System linear(const Parameters& params) {
    ParamReader p("linear", params);
    const auto dim = static_cast<std::size_t>(p.get("dim", 2.0));
    const double a = p.get("a", 1.0);
    const double b = p.get("b", 0.5);
    const double sigma = p.get("sigma", 0.3);
    const double radius = p.get("radius", 1.0);
    const double x0 = p.get("x0", 0.3);
    p.finish();
    if (dim == 0 || dim > 16) throw ConfigError("linear: dim must be in [1, 16]");

    CoefficientField coeffs;
    coeffs.state_dim = dim;
    coeffs.noise_dim = dim;
    coeffs.drift = [a, b](std::span<const double> x, const EmpiricalMeasure& mu, double,
                          std::span<const double>, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -a * x[i] + b * mu.mean()[i];
    };
    coeffs.diffusion = [sigma, dim](std::span<const double> x, const EmpiricalMeasure&, double,
                                    std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = sigma * x[i];
    };
    coeffs.lipschitz = std::abs(a) + std::abs(b) + std::abs(sigma);
    return System{"linear",
                  "linear mean-field drift -a x + b E[x], multiplicative noise sigma diag(x), "
                  "ball constraint, H = I",
                  convex::ConvexConstraint::ball(Vector(dim, 0.0), radius),
                  std::move(coeffs),
                  ObliqueField::identity(dim),
                  Vector(dim, x0),
                  convex::InteriorCertificate{Vector(dim, 0.0), radius}};
}

System ball_oblique(const Parameters& params) {
    ParamReader p("ball_oblique", params);
    const double sigma = p.get("sigma", 1.0);
    const double radius = p.get("radius", 1.0);
    const double h11 = p.get("h11", 2.0);
    const double h12 = p.get("h12", 0.5);
    const double h22 = p.get("h22", 1.0);
    p.finish();

    CoefficientField coeffs;
    coeffs.state_dim = 2;
    coeffs.noise_dim = 2;
    coeffs.drift = [](std::span<const double>, const EmpiricalMeasure&, double,
                      std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
        out[1] = 0.0;
    };
    coeffs.diffusion = [sigma](std::span<const double>, const EmpiricalMeasure&, double,
                               std::span<const double>, std::span<double> out) {
        out[0] = sigma;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = sigma;
    };
    coeffs.lipschitz = 0.0;
    coeffs.normalized = false;
    coeffs.measure_dependent = false;
    const Matrix h(2, 2, {h11, h12, h12, h22});
    return System{"ball_oblique",
                  "2D Brownian motion in a ball with constant oblique reflection matrix H",
                  convex::ConvexConstraint::ball({0.0, 0.0}, radius),
                  std::move(coeffs),
                  ObliqueField::constant(h),
                  {0.0, 0.0},
                  convex::InteriorCertificate{{0.0, 0.0}, 0.9 * radius}};
}

}  // namespace

std::vector<std::string> system_names() {
    return {"example31", "example31_strong", "ou", "reflected_bm", "linear", "ball_oblique"};
}

System make_system(const std::string& name, const Parameters& params) {
    System sys = [&] {
        if (name == "example31") return example31(params, false);
        if (name == "example31_strong") return example31(params, true);
        if (name == "ou") return ou(params);
        if (name == "reflected_bm") return reflected_bm(params);
        if (name == "linear") return linear(params);
        if (name == "ball_oblique") return ball_oblique(params);
        std::string list;
        for (const auto& n : system_names()) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("unknown system '" + name + "' (available: " + list + ")");
    }();
    check_normalization(sys.coefficients);
    if (!sys.constraint.contains(sys.x0))
        throw ConfigError("initial state of system '" + name + "' lies outside the constraint");
    return sys;
}

std::string describe(const System& s) {
    std::ostringstream os;
    os.precision(6);
    os << "system: " << s.name << '\n'
       << "  " << s.description << '\n'
       << "  constraint: " << s.constraint.describe() << '\n'
       << "  state dim m = " << s.coefficients.state_dim
       << ", noise dim d = " << s.coefficients.noise_dim << '\n'
       << "  declared L = " << s.coefficients.lipschitz
       << (s.coefficients.normalized ? " (f(0,delta0) = g(0,delta0) = 0)"
                                     : " (affine: normalization at the origin waived)")
       << '\n'
       << "  oblique H: a_H = " << s.oblique.a_h << ", b_H = " << s.oblique.b_h
       << (s.oblique.state_dependent ? ", state-dependent" : "")
       << (s.oblique.measure_dependent ? ", measure-dependent" : "") << '\n'
       << "  x0 = (";
    for (std::size_t i = 0; i < s.x0.size(); ++i) os << (i ? ", " : "") << s.x0[i];
    os << ")\n";
    if (s.certificate)
        os << "  interior certificate radius r0 = " << s.certificate->radius << '\n';
    return os.str();
}

}  // namespace omv::dynamics
