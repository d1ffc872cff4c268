#pragma once

// Convex constraints Π, their Moreau-Yosida regularization, and the
// subdifferential diagnostics built on top of them.
//
// Every constraint satisfies Π(x) >= Π(0) = 0: set geometries must contain
// the origin and smooth functions must vanish there. Constructors reject
// anything else instead of translating it.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "omv/linalg.hpp"

namespace omv::convex {

/// Tolerance hierarchy shared by the whole library.
inline constexpr double kArithmeticTol = 1e-12;
inline constexpr double kGeometricTol = 1e-10;
inline constexpr double kCompositeTol = 1e-8;
inline constexpr double kGridTol = 1e-5;

/// {x : <normal, x> <= offset}
struct HalfSpace {
    Vector normal;
    double offset = 0.0;
};

/// Componentwise lower <= x <= upper; infinite bounds are allowed.
struct Box {
    Vector lower;
    Vector upper;
};

struct Ball {
    Vector center;
    double radius = 1.0;
};

/// Finite intersection of half-spaces.
struct Polytope {
    std::vector<HalfSpace> faces;
};

using Geometry = std::variant<HalfSpace, Box, Ball, Polytope>;

/// User-supplied smooth convex function. When `quadratic` is set the
/// function is x^T Q x / 2 and the proximal map is solved in closed form.
struct SmoothFunction {
    std::function<double(std::span<const double>)> value;
    std::function<void(std::span<const double>, std::span<double>)> gradient;
    double gradient_lipschitz = 0.0;
    std::optional<Matrix> quadratic;
};

enum class Kind { Indicator, Smooth, Sum };

[[nodiscard]] std::string_view to_string(Kind kind);

class ConvexConstraint {
public:
    [[nodiscard]] static ConvexConstraint half_space(Vector normal, double offset);
    [[nodiscard]] static ConvexConstraint box(Vector lower, Vector upper);
    [[nodiscard]] static ConvexConstraint ball(Vector center, double radius);
    [[nodiscard]] static ConvexConstraint polytope(std::vector<HalfSpace> faces);
    /// Π(x) = x^T Q x / 2 with Q symmetric positive semidefinite.
    [[nodiscard]] static ConvexConstraint quadratic(Matrix q);
    [[nodiscard]] static ConvexConstraint smooth(std::size_t dim, SmoothFunction fn);
    /// Indicator of `set` plus the smooth function `fn`.
    [[nodiscard]] static ConvexConstraint sum(const ConvexConstraint& set, SmoothFunction fn);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] bool has_set() const noexcept { return geometry_.has_value(); }
    [[nodiscard]] const Geometry& geometry() const;
    [[nodiscard]] const SmoothFunction* smooth_part() const noexcept {
        return smooth_ ? &*smooth_ : nullptr;
    }

    /// Π(x); +inf outside D(Π).
    [[nodiscard]] double value(std::span<const double> x) const;
    /// Membership in D(∂Π) up to `tol`.
    [[nodiscard]] bool contains(std::span<const double> x, double tol = kGeometricTol) const;
    /// Euclidean distance to D(∂Π); zero for smooth kind.
    [[nodiscard]] double distance_to_domain(std::span<const double> x) const;
    [[nodiscard]] std::string describe() const;

private:
    ConvexConstraint() = default;

    Kind kind_ = Kind::Indicator;
    std::size_t dim_ = 0;
    std::optional<Geometry> geometry_;
    std::optional<SmoothFunction> smooth_;
};

/// Euclidean projection onto the set of an indicator (or sum) constraint.
/// Intersections use Dykstra's algorithm (stop at |Δx| <= 1e-10 or 10,000 sweeps).
[[nodiscard]] Vector project(const ConvexConstraint& c, std::span<const double> x);

/// Dykstra's alternating projections onto an intersection of half-spaces.
/// With `oblique` = H the projection is taken in the metric <u, v> = u^T H^{-1} v.
[[nodiscard]] Vector dykstra_project(const std::vector<HalfSpace>& faces,
                                     std::span<const double> y, const Matrix* oblique);

/// Distance from x to the closed set of a geometry.
[[nodiscard]] double set_distance(const Geometry& g, std::span<const double> x);

// Moreau-Yosida regularization.
//   Π_ε(x) = inf_z { |z - x|^2 / (2ε) + Π(z) },  J_ε x = x - ε ∇Π_ε(x).

[[nodiscard]] Vector resolvent(const ConvexConstraint& c, double eps, std::span<const double> x);
[[nodiscard]] double yosida_value(const ConvexConstraint& c, double eps, std::span<const double> x);
[[nodiscard]] Vector yosida_gradient(const ConvexConstraint& c, double eps,
                                     std::span<const double> x);

/// Value, gradient and resolvent from one proximal solve.
struct YosidaEval {
    double value = 0.0;
    Vector gradient;
    Vector resolvent;
};
[[nodiscard]] YosidaEval yosida(const ConvexConstraint& c, double eps, std::span<const double> x);

/// Grid brute force of the infimum over the cube x ± half_width (dimension
/// 1 or 2). Used as a cross-check for the smooth case.
[[nodiscard]] double yosida_value_grid(const ConvexConstraint& c, double eps,
                                       std::span<const double> x, double half_width,
                                       double step);

/// Max violation of each of the seven Moreau-Yosida properties (a)-(g).
struct PropertyReport {
    static constexpr std::array<std::string_view, 7> kNames{
        "a:decomposition", "b:subgradient", "c:lipschitz", "d:monotone",
        "e:cross-monotone", "f:origin", "g:sandwich"};

    std::array<double, 7> violation{};
    double tolerance = kCompositeTol;
    std::size_t evaluations = 0;

    [[nodiscard]] bool passed(std::size_t i) const { return violation[i] <= tolerance; }
    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] double max_violation() const;
};

/// Evaluates (a)-(g) on every sample and every sample pair, for every ε and
/// every (ε, ε') pair. Closed-form constraints are held to 1e-8, smooth
/// constraints without a closed-form prox to 1e-5.
[[nodiscard]] PropertyReport check_yosida_properties(const ConvexConstraint& c,
                                                     std::span<const double> eps_list,
                                                     const std::vector<Vector>& samples);

/// max(0, max_v <u, v - x> / (1 + |u|)) over probe points v of the set.
/// +inf when x itself lies outside the set by more than 1e-10.
[[nodiscard]] double normal_cone_residual(const ConvexConstraint& c, std::span<const double> x,
                                          std::span<const double> u,
                                          const std::vector<Vector>& probes);

/// Deterministic probe points inside the set near x: box vertices (clipped),
/// boundary and interior points along coordinate and tangent directions.
[[nodiscard]] std::vector<Vector> probe_points(const ConvexConstraint& c,
                                               std::span<const double> x, double reach = 10.0);

/// Closed ball B̄(anchor, radius) assumed to lie inside D(∂Π).
struct InteriorCertificate {
    Vector anchor;
    double radius = 0.0;
};

struct InteriorConstants {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    /// false when Π has a smooth part: only the indicator estimate is known.
    bool verified = true;
};

/// Constants of ∫<x - a, dk> >= λ1 ↕k↕ - λ2 ∫|x - a| - λ3 (t - s).
/// For indicators this is (r0, 0, 0). Throws CertificateError when the ball
/// is not contained in the domain.
[[nodiscard]] InteriorConstants interior_constants(const ConvexConstraint& c,
                                                   const InteriorCertificate& cert);

}  // namespace omv::convex
