#include <algorithm>
#include <cmath>

#include "omv/dynamics.hpp"
#include "omv/errors.hpp"

namespace omv::dynamics {

Vector CoefficientField::f(std::span<const double> x, const EmpiricalMeasure& mu, double t,
                           std::span<const double> u) const {
    Vector out(state_dim, 0.0);
    drift(x, mu, t, u, out);
    return out;
}

Matrix CoefficientField::g(std::span<const double> x, const EmpiricalMeasure& mu, double t,
                           std::span<const double> u) const {
    Matrix out(state_dim, noise_dim);
    diffusion(x, mu, t, u, out.data());
    return out;
}

void check_normalization(const CoefficientField& field, const std::vector<Vector>& controls) {
    if (!field.drift || !field.diffusion) throw ConfigError("coefficient field is incomplete");
    if (!field.normalized) return;
    const Vector zero(field.state_dim, 0.0);
    const EmpiricalMeasure delta0 = dirac(zero);
    std::vector<Vector> us = controls;
    if (us.empty()) us.emplace_back();
    for (const auto& u : us) {
        const double fn = norm(field.f(zero, delta0, 0.0, u));
        const double gn = field.g(zero, delta0, 0.0, u).frobenius();
        if (fn > 1e-12 || gn > 1e-12)
            throw ConfigError("coefficients must vanish at (0, delta_0): |f| = " +
                              std::to_string(fn) + ", |g| = " + std::to_string(gn));
    }
}

void check_normalization(const CostField& costs, std::size_t dim, const std::vector<Vector>& controls) {
    if (!costs.running || !costs.terminal) throw ConfigError("cost field is incomplete");
    const Vector zero(dim, 0.0);
    if (std::abs(costs.terminal(zero)) > 1e-12) throw ConfigError("terminal cost must vanish at 0");
    for (const auto& u : controls)
        if (std::abs(costs.running(zero, u)) > 1e-12)
            throw ConfigError("running cost must vanish at x = 0");
}

Matrix ObliqueField::at(std::span<const double> x, const EmpiricalMeasure& mu, double t) const {
    Matrix out(dim, dim);
    matrix(x, mu, t, out.data());
    return out;
}

Matrix ObliqueField::at_time(double t) const {
    if (state_dependent || measure_dependent)
        throw ConfigError("oblique field depends on the state; H(t) is undefined");
    const Vector zero(dim, 0.0);
    return at(zero, dirac(zero), t);
}

ObliqueField ObliqueField::identity(std::size_t dim) { return constant(Matrix::identity(dim)); }

ObliqueField ObliqueField::constant(const Matrix& h) {
    if (!h.is_square()) throw ConfigError("oblique matrix must be square");
    const auto eig = jacobi_eigen(h);
    ObliqueField field;
    field.dim = h.rows();
    field.a_h = eig.values.front();
    field.b_h = eig.values.back();
    field.matrix = [h](std::span<const double>, const EmpiricalMeasure&, double,
                       std::span<double> out) { std::copy(h.data().begin(), h.data().end(), out.begin()); };
    field.derivative = [](double, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    return field;
}

ObliqueField ObliqueField::time_only(std::size_t dim, TimeMatrixFn h, double a_h, double b_h,
                                     std::optional<TimeMatrixFn> derivative) {
    if (!(a_h > 0.0) || !(b_h >= a_h)) throw ConfigError("oblique bounds need 0 < a_H <= b_H");
    ObliqueField field;
    field.dim = dim;
    field.a_h = a_h;
    field.b_h = b_h;
    field.matrix = [h = std::move(h)](std::span<const double>, const EmpiricalMeasure&, double t,
                                      std::span<double> out) { h(t, out); };
    field.derivative = std::move(derivative);
    return field;
}

namespace {

SymmetricEigen checked_eigen(const Matrix& a, const char* what) {
    if (!a.is_square()) throw SpectralError(std::string(what) + ": matrix is not square");
    const double scale = std::max(a.frobenius(), 1e-300);
    if (a.asymmetry() > 1e-10 * scale)
        throw SpectralError(std::string(what) + ": matrix is not symmetric");
    auto eig = jacobi_eigen(a);
    const double lo = eig.values.front();
    const double hi = std::abs(eig.values.back());
    if (!(lo > 1e-14 * std::max(hi, 1e-300)))
        throw SpectralError(std::string(what) + ": matrix is not positive definite (eigenvalue " +
                                std::to_string(lo) + ")",
                            lo);
    return eig;
}

}  // namespace

Matrix sqrt_spd(const Matrix& a) {
    return spectral_apply(checked_eigen(a, "sqrt_spd"), [](double v) { return std::sqrt(v); });
}

Matrix inverse_spd(const Matrix& a) {
    return spectral_apply(checked_eigen(a, "inverse_spd"), [](double v) { return 1.0 / v; });
}

Matrix inverse_sqrt_spd(const Matrix& a) {
    return spectral_apply(checked_eigen(a, "inverse_sqrt_spd"),
                          [](double v) { return 1.0 / std::sqrt(v); });
}

}  // namespace omv::dynamics
