#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "omv/convex.hpp"
#include "omv/errors.hpp"

namespace omv::convex {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dimension(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got)
        throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
}

void validate_half_space(const HalfSpace& h) {
    if (h.normal.empty()) throw ConfigError("half-space normal is empty");
    if (norm(h.normal) <= kArithmeticTol) throw ConfigError("half-space normal is zero");
    if (h.offset < 0.0)
        throw ConfigError("half-space {<n,x> <= " + std::to_string(h.offset) +
                          "} excludes the origin");
}

double face_excess(const HalfSpace& h, std::span<const double> x) {
    return (dot(h.normal, x) - h.offset) / norm(h.normal);
}

Vector project_half_space(const HalfSpace& h, std::span<const double> x) {
    Vector out(x.begin(), x.end());
    const double s = dot(h.normal, x) - h.offset;
    if (s <= 0.0) return out;
    axpy(-s / norm_squared(h.normal), h.normal, out);
    return out;
}

Vector project_box(const Box& b, std::span<const double> x) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], b.lower[i], b.upper[i]);
    return out;
}

Vector project_ball(const Ball& b, std::span<const double> x) {
    Vector d = subtract(x, b.center);
    const double r = norm(d);
    if (r <= b.radius) return Vector(x.begin(), x.end());
    Vector out = b.center;
    axpy(b.radius / r, d, out);
    return out;
}

}  // namespace

std::string_view to_string(Kind kind) {
    switch (kind) {
        case Kind::Indicator: return "indicator";
        case Kind::Smooth: return "smooth";
        case Kind::Sum: return "sum";
    }
    return "unknown";
}

ConvexConstraint ConvexConstraint::half_space(Vector normal, double offset) {
    HalfSpace h{std::move(normal), offset};
    validate_half_space(h);
    ConvexConstraint c;
    c.dim_ = h.normal.size();
    c.geometry_ = std::move(h);
    return c;
}

ConvexConstraint ConvexConstraint::box(Vector lower, Vector upper) {
    if (lower.size() != upper.size() || lower.empty())
        throw ConfigError("box bounds must be non-empty and of equal length");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower[i]) || std::isnan(upper[i])) throw ConfigError("box bound is NaN");
        if (lower[i] > 0.0 || upper[i] < 0.0)
            throw ConfigError("box excludes the origin in coordinate " + std::to_string(i));
    }
    ConvexConstraint c;
    c.dim_ = lower.size();
    c.geometry_ = Box{std::move(lower), std::move(upper)};
    return c;
}

ConvexConstraint ConvexConstraint::ball(Vector center, double radius) {
    if (center.empty()) throw ConfigError("ball center is empty");
    if (!(radius > 0.0)) throw ConfigError("ball radius must be positive");
    if (norm(center) > radius + kArithmeticTol) throw ConfigError("ball excludes the origin");
    ConvexConstraint c;
    c.dim_ = center.size();
    c.geometry_ = Ball{std::move(center), radius};
    return c;
}

ConvexConstraint ConvexConstraint::polytope(std::vector<HalfSpace> faces) {
    if (faces.empty()) throw ConfigError("polytope needs at least one face");
    const std::size_t dim = faces.front().normal.size();
    for (const auto& f : faces) {
        validate_half_space(f);
        require_dimension(dim, f.normal.size(), "polytope face");
    }
    ConvexConstraint c;
    c.dim_ = dim;
    c.geometry_ = Polytope{std::move(faces)};
    return c;
}

ConvexConstraint ConvexConstraint::quadratic(Matrix q) {
    if (!q.is_square() || q.rows() == 0) throw ConfigError("quadratic form must be square");
    if (q.asymmetry() > kGeometricTol * std::max(1.0, q.frobenius()))
        throw ConfigError("quadratic form must be symmetric");
    const auto eig = jacobi_eigen(q);
    if (eig.values.front() < -kArithmeticTol * std::max(1.0, q.frobenius()))
        throw ConfigError("quadratic form must be positive semidefinite");
    SmoothFunction fn;
    fn.gradient_lipschitz = std::max(eig.values.back(), 0.0);
    fn.value = [q](std::span<const double> x) { return 0.5 * dot(x, multiply(q, x)); };
    fn.gradient = [q](std::span<const double> x, std::span<double> out) {
        multiply_into(q.data(), q.rows(), q.cols(), x, out);
    };
    fn.quadratic = q;
    return smooth(q.rows(), std::move(fn));
}

ConvexConstraint ConvexConstraint::smooth(std::size_t dim, SmoothFunction fn) {
    if (dim == 0) throw ConfigError("smooth function needs a positive dimension");
    if (!fn.value || !fn.gradient) throw ConfigError("smooth function needs value and gradient");
    const Vector zero(dim, 0.0);
    if (std::abs(fn.value(zero)) > kArithmeticTol)
        throw ConfigError("smooth function must vanish at the origin");
    Vector g(dim);
    fn.gradient(zero, g);
    if (norm(g) > kArithmeticTol)
        throw ConfigError("smooth function must be minimized at the origin");
    if (!fn.quadratic && !(fn.gradient_lipschitz > 0.0))
        throw ConfigError("smooth function needs a positive gradient Lipschitz constant");
    ConvexConstraint c;
    c.kind_ = Kind::Smooth;
    c.dim_ = dim;
    c.smooth_ = std::move(fn);
    return c;
}

ConvexConstraint ConvexConstraint::sum(const ConvexConstraint& set, SmoothFunction fn) {
    if (set.kind_ != Kind::Indicator) throw ConfigError("sum needs an indicator constraint");
    ConvexConstraint smooth_part = smooth(set.dim_, std::move(fn));
    ConvexConstraint c;
    c.kind_ = Kind::Sum;
    c.dim_ = set.dim_;
    c.geometry_ = set.geometry_;
    c.smooth_ = std::move(smooth_part.smooth_);
    return c;
}

const Geometry& ConvexConstraint::geometry() const {
    if (!geometry_) throw ConfigError("constraint of kind smooth has no set geometry");
    return *geometry_;
}

double set_distance(const Geometry& g, std::span<const double> x) {
    return std::visit(
        [&](const auto& geo) -> double {
            using T = std::decay_t<decltype(geo)>;
            if constexpr (std::is_same_v<T, HalfSpace>) {
                return std::max(0.0, face_excess(geo, x));
            } else if constexpr (std::is_same_v<T, Box>) {
                double s = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double d = std::max({geo.lower[i] - x[i], x[i] - geo.upper[i], 0.0});
                    s += d * d;
                }
                return std::sqrt(s);
            } else if constexpr (std::is_same_v<T, Ball>) {
                return std::max(0.0, distance(x, geo.center) - geo.radius);
            } else {
                // Exact distance requires the projection; the max face excess
                // is a lower bound that is zero exactly on the set.
                double worst = 0.0;
                for (const auto& f : geo.faces) worst = std::max(worst, face_excess(f, x));
                if (worst == 0.0) return 0.0;
                return distance(x, dykstra_project(geo.faces, x, nullptr));
            }
        },
        g);
}

double ConvexConstraint::value(std::span<const double> x) const {
    require_dimension(dim_, x.size(), "constraint value");
    double v = 0.0;
    if (geometry_ && set_distance(*geometry_, x) > kGeometricTol) return kInf;
    if (smooth_) v += smooth_->value(x);
    return v;
}

bool ConvexConstraint::contains(std::span<const double> x, double tol) const {
    require_dimension(dim_, x.size(), "constraint membership");
    if (!geometry_) return true;
    return set_distance(*geometry_, x) <= tol;
}

double ConvexConstraint::distance_to_domain(std::span<const double> x) const {
    require_dimension(dim_, x.size(), "constraint distance");
    if (!geometry_) return 0.0;
    return set_distance(*geometry_, x);
}

std::string ConvexConstraint::describe() const {
    std::ostringstream os;
    os.precision(6);
    auto vec = [&](const Vector& v) {
        os << '(';
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
        os << ')';
    };
    if (geometry_) {
        std::visit(
            [&](const auto& geo) {
                using T = std::decay_t<decltype(geo)>;
                if constexpr (std::is_same_v<T, HalfSpace>) {
                    os << "half-space {x : <";
                    vec(geo.normal);
                    os << ", x> <= " << geo.offset << "}";
                } else if constexpr (std::is_same_v<T, Box>) {
                    os << "box lower=";
                    vec(geo.lower);
                    os << " upper=";
                    vec(geo.upper);
                } else if constexpr (std::is_same_v<T, Ball>) {
                    os << "ball center=";
                    vec(geo.center);
                    os << " radius=" << geo.radius;
                } else {
                    os << "polytope with " << geo.faces.size() << " faces";
                }
            },
            *geometry_);
    }
    if (smooth_) {
        if (geometry_) os << " + ";
        os << (smooth_->quadratic ? "quadratic x^T Q x / 2" : "smooth convex function");
    }
    os << " [" << to_string(kind_) << ", dim " << dim_ << "]";
    return os.str();
}

Vector dykstra_project(const std::vector<HalfSpace>& faces, std::span<const double> y,
                       const Matrix* oblique) {
    const std::size_t m = y.size();
    Vector x(y.begin(), y.end());
    bool feasible = true;
    for (const auto& f : faces)
        if (dot(f.normal, x) > f.offset) feasible = false;
    if (feasible) return x;

    // Projection onto one face in the metric <u, v>_A with A = H^{-1}:
    // z = v - λ H n, λ = (<n, v> - c) / <n, H n>.
    std::vector<Vector> directions;
    std::vector<double> curvature;
    for (const auto& f : faces) {
        Vector dir = oblique ? multiply(*oblique, f.normal) : f.normal;
        curvature.push_back(dot(f.normal, dir));
        directions.push_back(std::move(dir));
    }

    std::vector<Vector> increments(faces.size(), Vector(m, 0.0));
    Vector v(m), prev(m);
    constexpr int kMaxSweeps = 10'000;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        prev = x;
        for (std::size_t i = 0; i < faces.size(); ++i) {
            for (std::size_t j = 0; j < m; ++j) v[j] = x[j] + increments[i][j];
            const double s = dot(faces[i].normal, v) - faces[i].offset;
            x = v;
            if (s > 0.0) axpy(-s / curvature[i], directions[i], x);
            for (std::size_t j = 0; j < m; ++j) increments[i][j] = v[j] - x[j];
        }
        if (distance(x, prev) <= kGeometricTol) return x;
    }
    double worst = 0.0;
    for (const auto& f : faces) worst = std::max(worst, face_excess(f, x));
    if (worst > kCompositeTol)
        throw InfeasibleSetError("Dykstra projection did not reach the intersection (excess " +
                                 std::to_string(worst) + ")");
    return x;
}

Vector project(const ConvexConstraint& c, std::span<const double> x) {
    require_dimension(c.dimension(), x.size(), "project");
    if (!c.has_set()) throw ConfigError("project needs a constraint with a set geometry");
    return std::visit(
        [&](const auto& geo) -> Vector {
            using T = std::decay_t<decltype(geo)>;
            if constexpr (std::is_same_v<T, HalfSpace>) return project_half_space(geo, x);
            else if constexpr (std::is_same_v<T, Box>) return project_box(geo, x);
            else if constexpr (std::is_same_v<T, Ball>) return project_ball(geo, x);
            else return dykstra_project(geo.faces, x, nullptr);
        },
        c.geometry());
}

}  // namespace omv::convex
