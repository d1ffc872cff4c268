#include <algorithm>
#include <cmath>
#include <limits>

#include "omv/errors.hpp"
#include "omv/mvsolver.hpp"

namespace omv::solver {
namespace {

using convex::Ball;
using convex::Box;
using convex::HalfSpace;
using convex::Polytope;

constexpr std::size_t kMaxEnumerationDim = 8;

bool is_diagonal(const Matrix& h) {
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j)
            if (i != j && h(i, j) != 0.0) return false;
    return true;
}

void copy(std::span<const double> from, std::span<double> to) {
    std::copy(from.begin(), from.end(), to.begin());
}

void half_space_step(const HalfSpace& hs, const Matrix& h, std::span<const double> y,
                     std::span<double> x, std::span<double> dk) {
    const std::size_t m = y.size();
    const double excess = dot(hs.normal, y) - hs.offset;
    if (excess <= 0.0) {
        copy(y, x);
        std::fill(dk.begin(), dk.end(), 0.0);
        return;
    }
    double curvature = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double hn = 0.0;
        for (std::size_t j = 0; j < m; ++j) hn += h(i, j) * hs.normal[j];
        curvature += hs.normal[i] * hn;
    }
    const double lambda = excess / curvature;
    for (std::size_t i = 0; i < m; ++i) {
        double hn = 0.0;
        for (std::size_t j = 0; j < m; ++j) hn += h(i, j) * hs.normal[j];
        dk[i] = lambda * hs.normal[i];
        x[i] = y[i] - lambda * hn;
    }
}

// min (z - y)^T A (z - y) over the box, A = H^{-1}, by enumerating which
// coordinates sit at the lower bound, the upper bound, or are free.
Vector box_enumerate(const Box& box, const Matrix& a, std::span<const double> y) {
    const std::size_t m = y.size();
    std::size_t combos = 1;
    for (std::size_t i = 0; i < m; ++i) combos *= 3;
    Vector best(m);
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<int> state(m);
    Vector z(m);
    std::vector<std::size_t> free_idx, fixed_idx;
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t rest = code;
        bool valid = true;
        free_idx.clear();
        fixed_idx.clear();
        for (std::size_t i = 0; i < m; ++i) {
            state[i] = static_cast<int>(rest % 3);
            rest /= 3;
            if (state[i] == 1) {
                if (!std::isfinite(box.lower[i])) valid = false;
                z[i] = box.lower[i];
                fixed_idx.push_back(i);
            } else if (state[i] == 2) {
                if (!std::isfinite(box.upper[i])) valid = false;
                z[i] = box.upper[i];
                fixed_idx.push_back(i);
            } else {
                free_idx.push_back(i);
            }
        }
        if (!valid) continue;
        if (!free_idx.empty()) {
            const std::size_t nf = free_idx.size();
            Matrix aff(nf, nf);
            Vector rhs(nf, 0.0);
            for (std::size_t r = 0; r < nf; ++r) {
                for (std::size_t c = 0; c < nf; ++c) aff(r, c) = a(free_idx[r], free_idx[c]);
                for (std::size_t b : fixed_idx) rhs[r] -= a(free_idx[r], b) * (z[b] - y[b]);
            }
            const Vector shift = solve(aff, rhs);
            for (std::size_t r = 0; r < nf; ++r) {
                const std::size_t i = free_idx[r];
                z[i] = y[i] + shift[r];
                const double slack = 1e-12 * (1.0 + std::abs(z[i]));
                if (z[i] < box.lower[i] - slack || z[i] > box.upper[i] + slack) valid = false;
            }
            if (!valid) continue;
        }
        double value = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) value += (z[i] - y[i]) * a(i, j) * (z[j] - y[j]);
        if (value < best_value) {
            best_value = value;
            best = z;
        }
    }
    for (std::size_t i = 0; i < m; ++i) best[i] = std::clamp(best[i], box.lower[i], box.upper[i]);
    return best;
}

void box_step(const Box& box, const Matrix& h, std::span<const double> y, std::span<double> x,
              std::span<double> dk) {
    const std::size_t m = y.size();
    bool inside = true;
    for (std::size_t i = 0; i < m; ++i)
        if (y[i] < box.lower[i] || y[i] > box.upper[i]) inside = false;
    if (inside) {
        copy(y, x);
        std::fill(dk.begin(), dk.end(), 0.0);
        return;
    }
    if (is_diagonal(h)) {
        // Separable metric: the projection clamps each coordinate.
        for (std::size_t i = 0; i < m; ++i) {
            x[i] = std::clamp(y[i], box.lower[i], box.upper[i]);
            dk[i] = (y[i] - x[i]) / h(i, i);
        }
        return;
    }
    Vector z;
    if (m <= kMaxEnumerationDim) {
        z = box_enumerate(box, dynamics::inverse_spd(h), y);
    } else {
        std::vector<HalfSpace> faces;
        for (std::size_t i = 0; i < m; ++i) {
            Vector e(m, 0.0);
            if (std::isfinite(box.upper[i])) {
                e[i] = 1.0;
                faces.push_back({e, box.upper[i]});
            }
            if (std::isfinite(box.lower[i])) {
                e[i] = -1.0;
                faces.push_back({e, -box.lower[i]});
            }
        }
        z = convex::dykstra_project(faces, y, &h);
        for (std::size_t i = 0; i < m; ++i) z[i] = std::clamp(z[i], box.lower[i], box.upper[i]);
    }
    copy(z, x);
    const Vector d = solve(h, subtract(y, z));
    // Free coordinates carry no reflection.
    for (std::size_t i = 0; i < m; ++i) {
        const bool at_bound = z[i] == box.lower[i] || z[i] == box.upper[i];
        dk[i] = at_bound ? d[i] : 0.0;
    }
}

// (I + νH)(x - c) = y - c with |x - c| = R; ν found by bisection in the
// eigenbasis of H, then Δk = ν (x - c).
void ball_step(const Ball& ball, const Matrix& h, std::span<const double> y, std::span<double> x,
               std::span<double> dk, std::size_t step) {
    const std::size_t m = y.size();
    const Vector rel = subtract(y, ball.center);
    const double r_y = norm(rel);
    if (r_y <= ball.radius) {
        copy(y, x);
        std::fill(dk.begin(), dk.end(), 0.0);
        return;
    }
    const SymmetricEigen eig = jacobi_eigen(h);
    Vector w(m, 0.0);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i) w[k] += eig.vectors(i, k) * rel[i];
    auto radius_at = [&](double nu) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double q = w[k] / (1.0 + nu * eig.values[k]);
            s += q * q;
        }
        return std::sqrt(s);
    };
    const double h_min = eig.values.front();
    if (!(h_min > 0.0)) throw StepError("oblique matrix is not positive definite", step, h_min);
    double lo = 0.0;
    double hi = (r_y / ball.radius - 1.0) / h_min;
    while (radius_at(hi) > ball.radius) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (radius_at(mid) > ball.radius ? lo : hi) = mid;
    }
    const double nu = hi;
    Vector z(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double q = w[k] / (1.0 + nu * eig.values[k]);
        for (std::size_t i = 0; i < m; ++i) z[i] += eig.vectors(i, k) * q;
    }
    const double excess = norm(z) - ball.radius;
    if (excess > convex::kGeometricTol)
        throw StepError("ball Skorohod step did not reach the sphere", step, excess);
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = ball.center[i] + z[i];
        dk[i] = nu * z[i];
    }
}

// KKT point for the active set S: x = y - H A_S^T λ with A_S x = b_S.
// Returns false when the system is singular, λ has a negative entry or x
// violates an inactive face.
bool polytope_candidate(const Polytope& poly, const Matrix& h, std::span<const double> y,
                        const std::vector<std::size_t>& active, Vector& x, Vector& dk) {
    const std::size_t m = y.size();
    const std::size_t s = active.size();
    std::vector<Vector> hn(s);
    for (std::size_t i = 0; i < s; ++i) hn[i] = multiply(h, poly.faces[active[i]].normal);
    Vector lambda;
    if (s > 0) {
        Matrix g(s, s);
        Vector rhs(s);
        for (std::size_t i = 0; i < s; ++i) {
            const auto& f = poly.faces[active[i]];
            rhs[i] = dot(f.normal, y) - f.offset;
            for (std::size_t j = 0; j < s; ++j) g(i, j) = dot(f.normal, hn[j]);
        }
        try {
            lambda = solve(g, rhs);
        } catch (const SpectralError&) {
            return false;
        }
        for (double l : lambda)
            if (l < -convex::kArithmeticTol) return false;
    }
    x.assign(y.begin(), y.end());
    dk.assign(m, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
        const double l = std::max(0.0, lambda[i]);
        axpy(-l, hn[i], x);
        axpy(l, poly.faces[active[i]].normal, dk);
    }
    const double scale = 1.0 + norm(x);
    for (const auto& f : poly.faces)
        if (dot(f.normal, x) - f.offset > convex::kArithmeticTol * scale * norm(f.normal))
            return false;
    return true;
}

// Active sets of size <= m in order of size; stops at the first KKT point.
bool polytope_enumerate(const Polytope& poly, const Matrix& h, std::span<const double> y,
                        Vector& x, Vector& dk) {
    const std::size_t n = poly.faces.size();
    const std::size_t m = y.size();
    std::vector<std::size_t> active;
    for (std::size_t size = 0; size <= std::min(m, n); ++size) {
        active.resize(size);
        for (std::size_t i = 0; i < size; ++i) active[i] = i;
        for (;;) {
            if (polytope_candidate(poly, h, y, active, x, dk)) return true;
            std::size_t i = size;
            while (i > 0 && active[i - 1] == n - size + i - 1) --i;
            if (i == 0) break;
            ++active[i - 1];
            for (std::size_t j = i; j < size; ++j) active[j] = active[j - 1] + 1;
        }
    }
    return false;
}

double combinations_up_to(std::size_t n, std::size_t m) {
    double total = 0.0, c = 1.0;
    for (std::size_t k = 0; k <= std::min(n, m); ++k) {
        total += c;
        c = c * static_cast<double>(n - k) / static_cast<double>(k + 1);
    }
    return total;
}

void polytope_step(const Polytope& poly, const Matrix& h, std::span<const double> y,
                   std::span<double> x, std::span<double> dk, std::size_t step) {
    if (combinations_up_to(poly.faces.size(), y.size()) <= 4096.0) {
        Vector xs, ds;
        if (polytope_enumerate(poly, h, y, xs, ds)) {
            copy(xs, x);
            copy(ds, dk);
            return;
        }
    }
    const Vector z = convex::dykstra_project(poly.faces, y, &h);
    double excess = 0.0;
    for (const auto& f : poly.faces)
        excess = std::max(excess, (dot(f.normal, z) - f.offset) / norm(f.normal));
    if (excess > convex::kCompositeTol)
        throw StepError("polytope Skorohod step did not converge", step, excess);
    copy(z, x);
    const Vector d = solve(h, subtract(y, z));
    copy(d, dk);
}

}  // namespace

void oblique_skorohod_step(const convex::ConvexConstraint& c, const Matrix& h,
                           std::span<const double> y, std::span<double> x, std::span<double> dk,
                           std::size_t step) {
    if (c.kind() != convex::Kind::Indicator)
        throw ConfigError("Skorohod steps need an indicator constraint, got " +
                          std::string(convex::to_string(c.kind())));
    const std::size_t m = c.dimension();
    if (y.size() != m || x.size() != m || dk.size() != m || h.rows() != m || h.cols() != m)
        throw ShapeError("Skorohod step: dimension mismatch");
    std::visit(
        [&](const auto& geo) {
            using T = std::decay_t<decltype(geo)>;
            if constexpr (std::is_same_v<T, HalfSpace>) half_space_step(geo, h, y, x, dk);
            else if constexpr (std::is_same_v<T, Box>) box_step(geo, h, y, x, dk);
            else if constexpr (std::is_same_v<T, Ball>) ball_step(geo, h, y, x, dk, step);
            else polytope_step(geo, h, y, x, dk, step);
        },
        c.geometry());
}

SkorohodStep oblique_skorohod_step(const convex::ConvexConstraint& c, const Matrix& h,
                                   std::span<const double> y, std::size_t step) {
    SkorohodStep out{Vector(y.size()), Vector(y.size())};
    oblique_skorohod_step(c, h, y, out.x, out.dk, step);
    return out;
}

std::span<const double> ControlSchedule::at(double t) const {
    if (values.empty()) return {};
    const auto it = std::upper_bound(switch_times.begin(), switch_times.end(), t);
    const auto idx = static_cast<std::size_t>(it - switch_times.begin());
    return values[std::min(idx, values.size() - 1)];
}

}  // namespace omv::solver
