#pragma once

// Weighted point clouds standing in for the law μ_t, and exact W2.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "omv/linalg.hpp"
#include "omv/paths.hpp"

namespace omv {

class EmpiricalMeasure {
public:
    /// Uniform weights over `count` atoms stored row-major in `flat_atoms`.
    EmpiricalMeasure(std::size_t dim, std::vector<double> flat_atoms);
    EmpiricalMeasure(std::size_t dim, std::vector<double> flat_atoms, std::vector<double> weights);
    [[nodiscard]] static EmpiricalMeasure from_points(const std::vector<Vector>& points);

    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] bool uniform() const noexcept { return uniform_; }
    [[nodiscard]] std::span<const double> atom(std::size_t i) const {
        return {atoms_.data() + i * dim_, dim_};
    }
    [[nodiscard]] std::span<const double> atoms() const noexcept { return atoms_; }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }

    /// ∫ x μ(dx)
    [[nodiscard]] const Vector& mean() const noexcept { return mean_; }
    /// ∫ |x|^2 μ(dx)
    [[nodiscard]] double second_moment() const noexcept { return second_moment_; }

    /// One atom per row, comma separated, weight in the last column.
    void write_csv(std::ostream& os) const;

private:
    void finish();

    std::size_t dim_;
    std::vector<double> atoms_;
    std::vector<double> weights_;
    bool uniform_ = true;
    Vector mean_;
    double second_moment_ = 0.0;
};

[[nodiscard]] EmpiricalMeasure dirac(std::span<const double> x);

/// Exact W2. One-dimensional measures use quantile matching (any weights);
/// higher dimensions need equal-size uniform measures and use the Hungarian
/// algorithm on the squared-distance cost.
[[nodiscard]] double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// W2 through the optimal assignment regardless of dimension (equal-size
/// uniform measures only).
[[nodiscard]] double wasserstein2_assignment(const EmpiricalMeasure& mu,
                                             const EmpiricalMeasure& nu);

/// W2(μ, δ0) = (∫|x|^2 μ(dx))^{1/2}
[[nodiscard]] double w2_to_origin(const EmpiricalMeasure& mu);

/// Monte-Carlo estimate of E[sup_t |x(t)|^2]: mean over all particles of
/// all ensembles of the pathwise maximum of |x|^2.
[[nodiscard]] double second_moment_sup(std::span<const PathEnsemble> ensembles);

/// Minimum-cost perfect assignment for a square cost matrix (row-major).
/// Returns assignment[row] = column.
[[nodiscard]] std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n);

}  // namespace omv
