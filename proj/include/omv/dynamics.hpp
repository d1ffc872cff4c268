#pragma once

// Coefficient fields f, g, the oblique matrix field H, running/terminal
// costs, and sampled validators for the Lipschitz and ellipticity
// assumptions.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "omv/convex.hpp"
#include "omv/linalg.hpp"
#include "omv/measures.hpp"

namespace omv::dynamics {

/// out (m) = f(x, μ, t, u)
using DriftFn = std::function<void(std::span<const double> x, const EmpiricalMeasure& mu, double t,
                                   std::span<const double> u, std::span<double> out)>;
/// out (m x d, row-major) = g(x, μ, t, u)
using DiffusionFn = DriftFn;
/// out (m x m, row-major) = H(x, μ, t)
using ObliqueFn =
    std::function<void(std::span<const double> x, const EmpiricalMeasure& mu, double t,
                       std::span<double> out)>;
/// out (m x m, row-major) = M(t)
using TimeMatrixFn = std::function<void(double t, std::span<double> out)>;

struct CoefficientField {
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    DriftFn drift;
    DiffusionFn diffusion;
    /// Declared L with |f(x,μ)-f(y,ν)| + |g(x,μ)-g(y,ν)| <= L (|x-y| + W2(μ,ν)).
    double lipschitz = 1.0;
    /// When true, f(0, δ0, u) = g(0, δ0, u) = 0 is enforced by check_normalization.
    bool normalized = true;
    bool measure_dependent = true;

    [[nodiscard]] Vector f(std::span<const double> x, const EmpiricalMeasure& mu, double t = 0.0,
                           std::span<const double> u = {}) const;
    [[nodiscard]] Matrix g(std::span<const double> x, const EmpiricalMeasure& mu, double t = 0.0,
                           std::span<const double> u = {}) const;
};

/// Throws ConfigError when a field declared normalized does not vanish at
/// (0, δ0) for any of the given controls (1e-12).
void check_normalization(const CoefficientField& field, const std::vector<Vector>& controls = {});

struct ObliqueField {
    std::size_t dim = 1;
    ObliqueFn matrix;
    double a_h = 1.0;
    double b_h = 1.0;
    /// Declared Lipschitz constant of H and H^{-1} jointly.
    double lipschitz = 0.0;
    bool state_dependent = false;
    bool measure_dependent = false;
    /// H'(t), available for fields that depend on time only.
    std::optional<TimeMatrixFn> derivative;

    [[nodiscard]] Matrix at(std::span<const double> x, const EmpiricalMeasure& mu,
                            double t = 0.0) const;
    /// Time-only fields: H(t).
    [[nodiscard]] Matrix at_time(double t) const;

    [[nodiscard]] static ObliqueField identity(std::size_t dim);
    [[nodiscard]] static ObliqueField constant(const Matrix& h);
    /// H depending on time only; bounds are cross-checked by validate_oblique.
    [[nodiscard]] static ObliqueField time_only(std::size_t dim, TimeMatrixFn h, double a_h,
                                                double b_h,
                                                std::optional<TimeMatrixFn> derivative = {});
};

struct CostField {
    std::function<double(std::span<const double> x, std::span<const double> u)> running;
    std::function<double(std::span<const double> x)> terminal;
    double lipschitz = 1.0;
};

/// b(0, u) = 0 and α(0) = 0 within 1e-12.
void check_normalization(const CostField& costs, std::size_t dim, const std::vector<Vector>& controls);

// Spectral helpers for symmetric positive-definite matrices.

/// S symmetric with S S = A, via cyclic Jacobi. Throws SpectralError naming
/// the offending eigenvalue when A is not SPD.
[[nodiscard]] Matrix sqrt_spd(const Matrix& a);
[[nodiscard]] Matrix inverse_spd(const Matrix& a);
[[nodiscard]] Matrix inverse_sqrt_spd(const Matrix& a);

// Validators.

struct Sample {
    Vector x;
    EmpiricalMeasure mu;
    double t = 0.0;
};

using Sampler = std::function<Sample(std::mt19937_64&)>;

/// Uniform x in [-half_width, half_width]^dim paired with a uniform measure
/// of `atoms` atoms drawn from the same cube, t uniform on [t0, t1].
[[nodiscard]] Sampler cube_sampler(std::size_t dim, double half_width, std::size_t atoms = 8,
                                   double t0 = 0.0, double t1 = 1.0);

struct ValidationReport {
    std::string subject;
    std::size_t samples = 0;
    double estimate = 0.0;  // empirical Lipschitz constant
    double declared = 0.0;
    // Oblique fields only.
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    double symmetry_residual = 0.0;
    double inverse_lipschitz = 0.0;
    std::vector<std::string> violations;

    [[nodiscard]] bool passed() const noexcept { return violations.empty(); }
};

/// Sampled max of (|f(x,μ)-f(y,ν)| + |g(x,μ)-g(y,ν)|_F) / (|x-y| + W2(μ,ν)).
/// Each control in `controls` is checked (an empty list means no control).
[[nodiscard]] ValidationReport validate_lipschitz(const CoefficientField& field,
                                                  const Sampler& sampler, std::size_t pairs = 10'000,
                                                  std::uint64_t seed = 1,
                                                  const std::vector<Vector>& controls = {});

/// Eigenvalue band of H over samples, symmetry residual, and the Lipschitz
/// estimate of H and H^{-1}.
[[nodiscard]] ValidationReport validate_oblique(const ObliqueField& field, const Sampler& sampler,
                                                std::size_t samples = 10'000,
                                                std::uint64_t seed = 1);

// Bundled systems.

/// A complete constrained McKean-Vlasov system.
struct System {
    std::string name;
    std::string description;
    convex::ConvexConstraint constraint;
    CoefficientField coefficients;
    ObliqueField oblique;
    Vector x0;
    std::optional<convex::InteriorCertificate> certificate;
};

using Parameters = std::map<std::string, double>;

/// Names accepted by make_system.
[[nodiscard]] std::vector<std::string> system_names();

/// Builds a bundled system. Unknown names or parameters raise ConfigError
/// listing the accepted ones.
[[nodiscard]] System make_system(const std::string& name, const Parameters& params = {});

/// Human-readable summary: coefficients, constraint, declared constants.
[[nodiscard]] std::string describe(const System& system);

}  // namespace omv::dynamics
