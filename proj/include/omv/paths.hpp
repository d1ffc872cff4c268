#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "omv/linalg.hpp"

namespace omv {

/// Uniform grid start = t_0 < ... < t_steps = end.
class TimeGrid {
public:
    /// `step_offset` is the absolute index of node 0 on a global lattice of
    /// the same step; noise is keyed on absolute indices so that grids that
    /// start at different times share increments where they overlap.
    TimeGrid(double start, double end, std::size_t steps, std::int64_t step_offset = 0);

    /// Grid on [start, end] whose step equals `step` exactly; end - start must
    /// be an integer multiple of it. Node 0 sits at absolute index start/step.
    [[nodiscard]] static TimeGrid with_step(double start, double end, double step);

    [[nodiscard]] double start() const noexcept { return start_; }
    [[nodiscard]] double end() const noexcept { return end_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] double step() const noexcept { return step_; }
    [[nodiscard]] std::int64_t step_offset() const noexcept { return step_offset_; }
    [[nodiscard]] double time(std::size_t k) const noexcept {
        return start_ + static_cast<double>(k) * step_;
    }
    /// Index of the last node with time <= t (clamped to the grid).
    [[nodiscard]] std::size_t index_at_or_before(double t) const;
    /// Sub-grid [time(first), time(last)] keeping the absolute offset.
    [[nodiscard]] TimeGrid slice(std::size_t first, std::size_t last) const;

    /// 2^{-n} floor(2^n t)
    [[nodiscard]] static double dyadic_snap(double t, int level);

private:
    double start_;
    double end_;
    std::size_t steps_;
    double step_;
    std::int64_t step_offset_;
};

/// One particle's discrete record of (x, k, ↕k↕, U) with Δk_j = U_j h.
class ConstrainedPath {
public:
    ConstrainedPath() = default;
    ConstrainedPath(std::size_t dim, std::size_t steps);

    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] std::size_t steps() const noexcept { return variation_.empty() ? 0 : variation_.size() - 1; }

    [[nodiscard]] std::span<double> state(std::size_t k) { return {states_.data() + k * dim_, dim_}; }
    [[nodiscard]] std::span<const double> state(std::size_t k) const {
        return {states_.data() + k * dim_, dim_};
    }
    [[nodiscard]] std::span<double> reflection(std::size_t k) {
        return {reflection_.data() + k * dim_, dim_};
    }
    [[nodiscard]] std::span<const double> reflection(std::size_t k) const {
        return {reflection_.data() + k * dim_, dim_};
    }
    /// U on step k (between nodes k and k+1).
    [[nodiscard]] std::span<double> density(std::size_t k) { return {density_.data() + k * dim_, dim_}; }
    [[nodiscard]] std::span<const double> density(std::size_t k) const {
        return {density_.data() + k * dim_, dim_};
    }
    [[nodiscard]] double variation(std::size_t k) const { return variation_[k]; }

    /// Appends step k's reflection increment: k(t_{k+1}) = k(t_k) + Δk,
    /// ↕k↕ grows by |Δk|, U_k = Δk / h.
    void record_increment(std::size_t k, std::span<const double> dk, double h);
    /// Δk on step k.
    [[nodiscard]] Vector increment(std::size_t k) const;

private:
    std::size_t dim_ = 0;
    std::vector<double> states_;
    std::vector<double> reflection_;
    std::vector<double> density_;
    std::vector<double> variation_;
};

/// How the reflection increment on step k relates to the states: the
/// projected scheme pairs Δk_k with x_{k+1}, the penalized scheme with
/// J_ε x_k (∇Π_ε(x_k) is a subgradient at the resolvent).
enum class Scheme { Projected, Penalized };

/// Paths of all particles of one replication, on one grid.
struct PathEnsemble {
    TimeGrid grid;
    Scheme scheme = Scheme::Projected;
    /// Penalty parameter of the penalized scheme; 0 for the projected one.
    double epsilon = 0.0;
    std::size_t dimension = 0;
    std::size_t replication = 0;
    std::vector<ConstrainedPath> paths;

    [[nodiscard]] std::size_t size() const noexcept { return paths.size(); }
    /// Flat particle positions at node k.
    [[nodiscard]] std::vector<double> states_at(std::size_t k) const;
};

}  // namespace omv
