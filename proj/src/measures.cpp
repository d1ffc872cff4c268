#include "omv/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "omv/errors.hpp"

namespace omv {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> flat_atoms)
    : dim_(dim), atoms_(std::move(flat_atoms)) {
    if (dim_ == 0 || atoms_.empty() || atoms_.size() % dim_ != 0)
        throw ShapeError("empirical measure needs at least one atom of positive dimension");
    const std::size_t n = atoms_.size() / dim_;
    weights_.assign(n, 1.0 / static_cast<double>(n));
    finish();
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> flat_atoms,
                                   std::vector<double> weights)
    : dim_(dim), atoms_(std::move(flat_atoms)), weights_(std::move(weights)) {
    if (dim_ == 0 || atoms_.empty() || atoms_.size() % dim_ != 0)
        throw ShapeError("empirical measure needs at least one atom of positive dimension");
    if (weights_.size() != atoms_.size() / dim_) throw ShapeError("one weight per atom required");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw DomainError("measure weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("measure weights must sum to 1");
    uniform_ = std::all_of(weights_.begin(), weights_.end(),
                           [&](double w) { return w == weights_.front(); });
    finish();
}

EmpiricalMeasure EmpiricalMeasure::from_points(const std::vector<Vector>& points) {
    if (points.empty()) throw ShapeError("empirical measure needs at least one atom");
    const std::size_t dim = points.front().size();
    std::vector<double> flat;
    flat.reserve(points.size() * dim);
    for (const auto& p : points) {
        if (p.size() != dim) throw ShapeError("atoms must share one dimension");
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return EmpiricalMeasure(dim, std::move(flat));
}

void EmpiricalMeasure::finish() {
    mean_.assign(dim_, 0.0);
    second_moment_ = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        const auto a = atom(i);
        axpy(weights_[i], a, mean_);
        second_moment_ += weights_[i] * norm_squared(a);
    }
}

void EmpiricalMeasure::write_csv(std::ostream& os) const {
    const auto old_precision = os.precision(17);
    for (std::size_t d = 0; d < dim_; ++d) os << 'x' << d + 1 << ',';
    os << "weight\n";
    for (std::size_t i = 0; i < size(); ++i) {
        for (double v : atom(i)) os << v << ',';
        os << weights_[i] << '\n';
    }
    os.precision(old_precision);
}

EmpiricalMeasure dirac(std::span<const double> x) {
    return EmpiricalMeasure(x.size(), std::vector<double>(x.begin(), x.end()));
}

double w2_to_origin(const EmpiricalMeasure& mu) { return std::sqrt(mu.second_moment()); }

std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n) {
    // Shortest augmenting path with potentials, O(n^3); 1-based internally.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), way_cost(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(way_cost.begin(), way_cost.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < way_cost[j]) {
                    way_cost[j] = cur;
                    way[j] = j0;
                }
                if (way_cost[j] < delta) {
                    delta = way_cost[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    way_cost[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
    return assignment;
}

namespace {

double w2_sorted_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    auto sorted = [](const EmpiricalMeasure& m) {
        std::vector<std::size_t> idx(m.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return m.atom(a)[0] < m.atom(b)[0]; });
        return idx;
    };
    const auto a = sorted(mu);
    const auto b = sorted(nu);
    if (mu.uniform() && nu.uniform() && mu.size() == nu.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = mu.atom(a[i])[0] - nu.atom(b[i])[0];
            s += d * d;
        }
        return std::sqrt(s / static_cast<double>(a.size()));
    }
    // Merge the two quantile functions.
    std::size_t i = 0, j = 0;
    double wa = mu.weights()[a[0]], wb = nu.weights()[b[0]];
    double s = 0.0;
    while (i < a.size() && j < b.size()) {
        const double w = std::min(wa, wb);
        const double d = mu.atom(a[i])[0] - nu.atom(b[j])[0];
        s += w * d * d;
        wa -= w;
        wb -= w;
        if (wa <= 1e-15) {
            if (++i < a.size()) wa = mu.weights()[a[i]];
        }
        if (wb <= 1e-15) {
            if (++j < b.size()) wb = nu.weights()[b[j]];
        }
    }
    return std::sqrt(s);
}

}  // namespace

double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dimension() != nu.dimension()) throw ShapeError("W2 of measures in different dimensions");
    if (mu.dimension() == 1) return w2_sorted_1d(mu, nu);
    if (mu.size() == 1 || nu.size() == 1) {
        // One side is a Dirac: the only coupling is the product.
        const EmpiricalMeasure& point = mu.size() == 1 ? mu : nu;
        const EmpiricalMeasure& cloud = mu.size() == 1 ? nu : mu;
        double s = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            s += cloud.weights()[i] * norm_squared(subtract(cloud.atom(i), point.atom(0)));
        return std::sqrt(s);
    }
    return wasserstein2_assignment(mu, nu);
}

double wasserstein2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dimension() != nu.dimension()) throw ShapeError("W2 of measures in different dimensions");
    if (mu.size() != nu.size() || !mu.uniform() || !nu.uniform())
        throw UnsupportedInputError(
            "multi-dimensional W2 needs equal-size measures with uniform weights");
    const std::size_t n = mu.size();
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost[i * n + j] = norm_squared(subtract(mu.atom(i), nu.atom(j)));
    const auto assignment = hungarian(cost, n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + assignment[i]];
    return std::sqrt(s / static_cast<double>(n));
}

double second_moment_sup(std::span<const PathEnsemble> ensembles) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& e : ensembles)
        for (const auto& p : e.paths) {
            double best = 0.0;
            for (std::size_t k = 0; k <= p.steps(); ++k) best = std::max(best, norm_squared(p.state(k)));
            total += best;
            ++count;
        }
    if (count == 0) throw DomainError("second_moment_sup of an empty ensemble");
    return total / static_cast<double>(count);
}

}  // namespace omv
