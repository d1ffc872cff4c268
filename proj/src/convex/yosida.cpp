#include <algorithm>
#include <cmath>
#include <limits>

#include "omv/convex.hpp"
#include "omv/errors.hpp"

namespace omv::convex {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw DomainError("Moreau-Yosida parameter must be positive, got " + std::to_string(eps));
}

// Minimizes |z - x|^2 / (2 eps) + phi(z) (+ indicator of the set) by
// projected gradient steps of length 1 / (1/eps + L).
Vector prox_iterative(const ConvexConstraint& c, const SmoothFunction& fn, double eps,
                      std::span<const double> x) {
    const double step = 1.0 / (1.0 / eps + fn.gradient_lipschitz);
    Vector z(x.begin(), x.end());
    if (c.has_set()) z = project(c, z);
    Vector grad(z.size()), next(z.size());
    constexpr int kMaxIterations = 200'000;
    for (int it = 0; it < kMaxIterations; ++it) {
        fn.gradient(z, grad);
        for (std::size_t i = 0; i < z.size(); ++i)
            next[i] = z[i] - step * ((z[i] - x[i]) / eps + grad[i]);
        if (c.has_set()) next = project(c, next);
        const double move = distance(next, z);
        z.swap(next);
        if (move <= 1e-15 * (1.0 + norm(z))) break;
    }
    return z;
}

Vector prox(const ConvexConstraint& c, double eps, std::span<const double> x) {
    const SmoothFunction* fn = c.smooth_part();
    if (fn == nullptr) return project(c, x);
    if (c.kind() == Kind::Smooth && fn->quadratic) {
        // (I + eps Q) z = x
        Matrix a = eps * *fn->quadratic;
        for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += 1.0;
        return solve(std::move(a), Vector(x.begin(), x.end()));
    }
    return prox_iterative(c, *fn, eps, x);
}

bool has_closed_form_prox(const ConvexConstraint& c) {
    return c.kind() == Kind::Indicator ||
           (c.kind() == Kind::Smooth && c.smooth_part()->quadratic.has_value());
}

}  // namespace

YosidaEval yosida(const ConvexConstraint& c, double eps, std::span<const double> x) {
    require_positive_eps(eps);
    if (x.size() != c.dimension()) throw ShapeError("yosida: dimension mismatch");
    YosidaEval out;
    out.resolvent = prox(c, eps, x);
    out.gradient.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.gradient[i] = (x[i] - out.resolvent[i]) / eps;
    const double d2 = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - out.resolvent[i];
            s += d * d;
        }
        return s;
    }();
    double phi = 0.0;
    if (const SmoothFunction* fn = c.smooth_part()) phi = fn->value(out.resolvent);
    out.value = d2 / (2.0 * eps) + phi;
    return out;
}

Vector resolvent(const ConvexConstraint& c, double eps, std::span<const double> x) {
    return yosida(c, eps, x).resolvent;
}

double yosida_value(const ConvexConstraint& c, double eps, std::span<const double> x) {
    return yosida(c, eps, x).value;
}

Vector yosida_gradient(const ConvexConstraint& c, double eps, std::span<const double> x) {
    return yosida(c, eps, x).gradient;
}

double yosida_value_grid(const ConvexConstraint& c, double eps, std::span<const double> x,
                         double half_width, double step) {
    require_positive_eps(eps);
    if (!(step > 0.0) || !(half_width > 0.0)) throw DomainError("grid step and width must be positive");
    const std::size_t m = c.dimension();
    if (m != 1 && m != 2) throw UnsupportedInputError("grid fallback supports dimension 1 or 2");
    const auto n = static_cast<long>(std::floor(half_width / step));
    double best = kInf;
    Vector z(m);
    auto eval = [&] {
        const double p = c.value(z);
        if (!std::isfinite(p)) return;
        best = std::min(best, norm_squared(subtract(z, x)) / (2.0 * eps) + p);
    };
    for (long i = -n; i <= n; ++i) {
        z[0] = x[0] + static_cast<double>(i) * step;
        if (m == 1) {
            eval();
            continue;
        }
        for (long j = -n; j <= n; ++j) {
            z[1] = x[1] + static_cast<double>(j) * step;
            eval();
        }
    }
    return best;
}

bool PropertyReport::all_passed() const {
    for (std::size_t i = 0; i < violation.size(); ++i)
        if (!passed(i)) return false;
    return true;
}

double PropertyReport::max_violation() const {
    return *std::max_element(violation.begin(), violation.end());
}

PropertyReport check_yosida_properties(const ConvexConstraint& c, std::span<const double> eps_list,
                                       const std::vector<Vector>& samples) {
    PropertyReport report;
    report.tolerance = has_closed_form_prox(c) ? kCompositeTol : kGridTol;
    for (double eps : eps_list) require_positive_eps(eps);
    for (const auto& s : samples)
        for (double v : s)
            if (!std::isfinite(v)) throw DomainError("non-finite sample point");

    auto& viol = report.violation;
    auto bump = [&](std::size_t i, double v) { viol[i] = std::max(viol[i], v); };

    std::vector<std::vector<YosidaEval>> evals;
    for (double eps : eps_list) {
        std::vector<YosidaEval> row;
        row.reserve(samples.size());
        for (const auto& x : samples) row.push_back(yosida(c, eps, x));
        evals.push_back(std::move(row));
    }

    // Points of D(Π) used as test points v in the subgradient inequality.
    std::vector<Vector> probes;
    std::vector<double> probe_values;
    auto add_probe = [&](const Vector& v) {
        const double p = c.value(v);
        if (std::isfinite(p)) {
            probes.push_back(v);
            probe_values.push_back(p);
        }
    };
    add_probe(Vector(c.dimension(), 0.0));
    for (const auto& x : samples) add_probe(x);
    for (const auto& row : evals)
        for (const auto& e : row) add_probe(e.resolvent);

    const Vector zero(c.dimension(), 0.0);
    for (std::size_t a = 0; a < eps_list.size(); ++a) {
        const double eps = eps_list[a];
        const auto origin = yosida(c, eps, zero);
        bump(5, std::abs(origin.value) + norm(origin.resolvent) + norm(origin.gradient));

        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& x = samples[i];
            const auto& ex = evals[a][i];
            ++report.evaluations;
            const double g2 = norm_squared(ex.gradient);
            const double pj = c.value(ex.resolvent);

            bump(0, std::abs(ex.value - 0.5 * eps * g2 - pj));

            for (std::size_t p = 0; p < probes.size(); ++p) {
                const double lhs = dot(ex.gradient, subtract(probes[p], ex.resolvent)) + pj -
                                   probe_values[p];
                bump(1, lhs);
            }

            bump(5, std::max(0.0, -ex.value));
            bump(6, std::max(0.0, 0.5 * eps * g2 - ex.value));
            bump(6, std::max(0.0, ex.value - dot(ex.gradient, x)));

            for (std::size_t j = 0; j < samples.size(); ++j) {
                const auto& y = samples[j];
                const Vector dxy = subtract(x, y);
                const double dist = norm(dxy);
                const auto& ey = evals[a][j];
                const Vector dg = subtract(ex.gradient, ey.gradient);
                bump(2, norm(dg) - dist / eps);
                bump(3, -dot(dg, dxy));
                for (std::size_t b = 0; b < eps_list.size(); ++b) {
                    const auto& eyb = evals[b][j];
                    const double lhs = dot(subtract(ex.gradient, eyb.gradient), dxy);
                    const double rhs = -(eps + eps_list[b]) * dot(ex.gradient, eyb.gradient);
                    bump(4, rhs - lhs);
                }
            }
        }
    }
    return report;
}

double normal_cone_residual(const ConvexConstraint& c, std::span<const double> x,
                            std::span<const double> u, const std::vector<Vector>& probes) {
    if (!c.has_set()) throw ConfigError("normal_cone_residual needs an indicator constraint");
    if (x.size() != c.dimension() || u.size() != c.dimension())
        throw ShapeError("normal_cone_residual: dimension mismatch");
    if (c.distance_to_domain(x) > kGeometricTol) return kInf;
    const double scale = 1.0 + norm(u);
    double worst = 0.0;
    for (const auto& v : probes) worst = std::max(worst, dot(u, subtract(v, x)) / scale);
    return worst;
}

std::vector<Vector> probe_points(const ConvexConstraint& c, std::span<const double> x,
                                 double reach) {
    if (!c.has_set()) throw ConfigError("probe_points needs an indicator constraint");
    const std::size_t m = c.dimension();
    std::vector<Vector> out;
    out.emplace_back(m, 0.0);
    const Vector base = project(c, x);
    out.push_back(base);

    std::visit(
        [&](const auto& geo) {
            using T = std::decay_t<decltype(geo)>;
            if constexpr (std::is_same_v<T, Box>) {
                if (m <= 12) {
                    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
                        Vector v(m);
                        for (std::size_t i = 0; i < m; ++i) {
                            const double lo = std::max(geo.lower[i], base[i] - reach);
                            const double hi = std::min(geo.upper[i], base[i] + reach);
                            v[i] = (mask >> i) & 1U ? hi : lo;
                        }
                        out.push_back(std::move(v));
                    }
                }
            } else if constexpr (std::is_same_v<T, HalfSpace>) {
                const double nn = norm(geo.normal);
                Vector inward = base;
                axpy(-reach / nn, geo.normal, inward);
                out.push_back(std::move(inward));
                // Tangent directions: coordinate axes with the normal component removed.
                for (std::size_t i = 0; i < m; ++i) {
                    Vector t(m, 0.0);
                    t[i] = 1.0;
                    axpy(-geo.normal[i] / (nn * nn), geo.normal, t);
                    const double tn = norm(t);
                    if (tn <= 1e-8) continue;
                    for (double sign : {-1.0, 1.0}) {
                        Vector v = base;
                        axpy(sign * reach / tn, t, v);
                        out.push_back(project(c, v));
                    }
                }
            } else if constexpr (std::is_same_v<T, Ball>) {
                for (std::size_t i = 0; i < m; ++i)
                    for (double sign : {-1.0, 1.0}) {
                        Vector v = geo.center;
                        v[i] += sign * geo.radius;
                        out.push_back(std::move(v));
                    }
                const Vector d = subtract(base, geo.center);
                const double dn = norm(d);
                if (dn > 0.0) {
                    // Points on the sphere close to base, where the support is tight.
                    for (std::size_t i = 0; i < m; ++i)
                        for (double sign : {-1.0, 1.0}) {
                            Vector dir = scaled(d, 1.0 / dn);
                            dir[i] += sign * 0.05;
                            Vector v = geo.center;
                            axpy(geo.radius / norm(dir), dir, v);
                            out.push_back(std::move(v));
                        }
                }
            } else {
                for (std::size_t i = 0; i < m; ++i)
                    for (double sign : {-1.0, 1.0}) {
                        Vector v = base;
                        v[i] += sign * reach;
                        out.push_back(project(c, v));
                    }
            }
        },
        c.geometry());
    return out;
}

InteriorConstants interior_constants(const ConvexConstraint& c, const InteriorCertificate& cert) {
    if (cert.anchor.size() != c.dimension()) throw ShapeError("certificate anchor dimension");
    if (!(cert.radius >= 0.0)) throw CertificateError("certificate radius must be nonnegative");
    InteriorConstants out{cert.radius, 0.0, 0.0, c.kind() == Kind::Indicator};
    if (!c.has_set()) return out;

    const double r0 = cert.radius;
    const auto& a = cert.anchor;
    const double slack = std::visit(
        [&](const auto& geo) -> double {
            using T = std::decay_t<decltype(geo)>;
            if constexpr (std::is_same_v<T, HalfSpace>) {
                return (geo.offset - dot(geo.normal, a)) / norm(geo.normal) - r0;
            } else if constexpr (std::is_same_v<T, Box>) {
                double s = kInf;
                for (std::size_t i = 0; i < a.size(); ++i)
                    s = std::min({s, a[i] - geo.lower[i] - r0, geo.upper[i] - a[i] - r0});
                return s;
            } else if constexpr (std::is_same_v<T, Ball>) {
                return geo.radius - distance(a, geo.center) - r0;
            } else {
                double s = kInf;
                for (const auto& f : geo.faces)
                    s = std::min(s, (f.offset - dot(f.normal, a)) / norm(f.normal) - r0);
                return s;
            }
        },
        c.geometry());
    if (slack < -kArithmeticTol)
        throw CertificateError("ball around the anchor leaves the constraint set by " +
                               std::to_string(-slack));
    return out;
}

}  // namespace omv::convex
