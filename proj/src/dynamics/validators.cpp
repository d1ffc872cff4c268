#include <algorithm>
#include <cmath>
#include <sstream>

#include "omv/dynamics.hpp"
#include "omv/errors.hpp"

namespace omv::dynamics {
namespace {

constexpr std::size_t kMaxListedViolations = 10;

void note(ValidationReport& r, const std::string& msg) {
    if (r.violations.size() < kMaxListedViolations) r.violations.push_back(msg);
}

std::string fmt_point(std::span<const double> x) {
    std::ostringstream os;
    os.precision(6);
    os << '(';
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ')';
    return os.str();
}

}  // namespace

Sampler cube_sampler(std::size_t dim, double half_width, std::size_t atoms, double t0, double t1) {
    return [=](std::mt19937_64& rng) {
        std::uniform_real_distribution<double> coord(-half_width, half_width);
        std::uniform_real_distribution<double> time(t0, t1);
        Vector x(dim);
        for (double& v : x) v = coord(rng);
        std::vector<double> flat(dim * atoms);
        for (double& v : flat) v = coord(rng);
        return Sample{std::move(x), EmpiricalMeasure(dim, std::move(flat)), time(rng)};
    };
}

ValidationReport validate_lipschitz(const CoefficientField& field, const Sampler& sampler,
                                    std::size_t pairs, std::uint64_t seed,
                                    const std::vector<Vector>& controls) {
    ValidationReport report;
    report.subject = "lipschitz";
    report.declared = field.lipschitz;
    std::mt19937_64 rng(seed);
    std::vector<Vector> us = controls;
    if (us.empty()) us.emplace_back();

    for (std::size_t p = 0; p < pairs; ++p) {
        const Sample a = sampler(rng);
        const Sample b = sampler(rng);
        const double denom = distance(a.x, b.x) + wasserstein2(a.mu, b.mu);
        if (denom < 1e-12) continue;
        for (const auto& u : us) {
            const double num = distance(field.f(a.x, a.mu, a.t, u), field.f(b.x, b.mu, a.t, u)) +
                               (field.g(a.x, a.mu, a.t, u) - field.g(b.x, b.mu, a.t, u)).frobenius();
            const double ratio = num / denom;
            ++report.samples;
            report.estimate = std::max(report.estimate, ratio);
            if (ratio > field.lipschitz * (1.0 + 1e-12))
                note(report, "ratio " + std::to_string(ratio) + " between x = " + fmt_point(a.x) +
                                 " and y = " + fmt_point(b.x));
        }
    }
    return report;
}

ValidationReport validate_oblique(const ObliqueField& field, const Sampler& sampler,
                                  std::size_t samples, std::uint64_t seed) {
    ValidationReport report;
    report.subject = "oblique";
    report.declared = field.lipschitz;
    report.min_eigenvalue = std::numeric_limits<double>::infinity();
    report.max_eigenvalue = -std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);

    std::optional<Sample> previous;
    Matrix prev_h, prev_inv;
    for (std::size_t s = 0; s < samples; ++s) {
        Sample smp = sampler(rng);
        const Matrix h = field.at(smp.x, smp.mu, smp.t);
        ++report.samples;
        const double asym = h.asymmetry();
        report.symmetry_residual = std::max(report.symmetry_residual, asym);
        if (asym > 1e-10) {
            note(report, "asymmetric H at x = " + fmt_point(smp.x) + " (residual " +
                             std::to_string(asym) + ")");
            continue;
        }
        const auto eig = jacobi_eigen(h);
        const double lo = eig.values.front();
        const double hi = eig.values.back();
        report.min_eigenvalue = std::min(report.min_eigenvalue, lo);
        report.max_eigenvalue = std::max(report.max_eigenvalue, hi);
        if (lo < field.a_h - 1e-10 || hi > field.b_h + 1e-10)
            note(report, "eigenvalues [" + std::to_string(lo) + ", " + std::to_string(hi) +
                             "] leave [a_H, b_H] at x = " + fmt_point(smp.x));
        if (lo <= 0.0) continue;
        const Matrix inv = spectral_apply(eig, [](double v) { return 1.0 / v; });

        if (previous) {
            double denom = distance(smp.x, previous->x);
            if (field.measure_dependent) denom += wasserstein2(smp.mu, previous->mu);
            if (!field.state_dependent && !field.measure_dependent)
                denom = std::abs(smp.t - previous->t);
            if (denom > 1e-12) {
                const double dh = (h - prev_h).frobenius();
                const double dinv = (inv - prev_inv).frobenius();
                report.estimate = std::max(report.estimate, (dh + dinv) / denom);
                report.inverse_lipschitz = std::max(report.inverse_lipschitz, dinv / denom);
            }
        }
        prev_h = h;
        prev_inv = inv;
        previous = std::move(smp);
    }
    if (field.lipschitz > 0.0 && report.estimate > field.lipschitz * (1.0 + 1e-12))
        note(report, "Lipschitz estimate " + std::to_string(report.estimate) +
                         " exceeds declared " + std::to_string(field.lipschitz));
    return report;
}

}  // namespace omv::dynamics
