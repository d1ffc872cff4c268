#include "omv/paths.hpp"

#include <algorithm>
#include <cmath>

#include "omv/errors.hpp"

namespace omv {

TimeGrid::TimeGrid(double start, double end, std::size_t steps, std::int64_t step_offset)
    : start_(start), end_(end), steps_(steps), step_offset_(step_offset) {
    if (!(end > start)) throw ConfigError("time grid needs start < end");
    if (steps == 0) throw ConfigError("time grid needs at least one step");
    step_ = (end - start) / static_cast<double>(steps);
}

TimeGrid TimeGrid::with_step(double start, double end, double step) {
    if (!(step > 0.0)) throw ConfigError("time step must be positive");
    const double n = (end - start) / step;
    const double rounded = std::round(n);
    if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
        throw ConfigError("interval length is not a multiple of the time step");
    const double offset = std::round(start / step);
    if (std::abs(start / step - offset) > 1e-9 * std::max(1.0, std::abs(offset)))
        throw ConfigError("grid start is not on the global step lattice");
    TimeGrid g(start, end, static_cast<std::size_t>(rounded), static_cast<std::int64_t>(offset));
    g.step_ = step;
    return g;
}

std::size_t TimeGrid::index_at_or_before(double t) const {
    if (t <= start_) return 0;
    const double r = (t - start_) / step_;
    auto k = static_cast<std::size_t>(std::floor(r + 1e-9));
    return std::min(k, steps_);
}

TimeGrid TimeGrid::slice(std::size_t first, std::size_t last) const {
    if (!(first < last) || last > steps_) throw ShapeError("invalid grid slice");
    TimeGrid g(time(first), time(last), last - first,
               step_offset_ + static_cast<std::int64_t>(first));
    g.step_ = step_;
    return g;
}

double TimeGrid::dyadic_snap(double t, int level) {
    const double scale = std::ldexp(1.0, level);
    return std::floor(scale * t) / scale;
}

ConstrainedPath::ConstrainedPath(std::size_t dim, std::size_t steps)
    : dim_(dim),
      states_((steps + 1) * dim, 0.0),
      reflection_((steps + 1) * dim, 0.0),
      density_(steps * dim, 0.0),
      variation_(steps + 1, 0.0) {}

void ConstrainedPath::record_increment(std::size_t k, std::span<const double> dk, double h) {
    auto prev = reflection(k);
    auto next = reflection(k + 1);
    auto u = density(k);
    for (std::size_t i = 0; i < dim_; ++i) {
        next[i] = prev[i] + dk[i];
        u[i] = dk[i] / h;
    }
    variation_[k + 1] = variation_[k] + norm(dk);
}

Vector ConstrainedPath::increment(std::size_t k) const {
    return subtract(reflection(k + 1), reflection(k));
}

std::vector<double> PathEnsemble::states_at(std::size_t k) const {
    std::vector<double> flat;
    flat.reserve(paths.size() * dimension);
    for (const auto& p : paths) {
        const auto s = p.state(k);
        flat.insert(flat.end(), s.begin(), s.end());
    }
    return flat;
}

}  // namespace omv
