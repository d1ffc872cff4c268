#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "omv/dynamics.hpp"

namespace omv::test {

/// Half-line [0, inf) in 1D with constant f, g and H.
inline dynamics::System half_line_system(double drift, double sigma, double x0, double h = 1.0) {
    dynamics::CoefficientField cf;
    cf.drift = [drift](std::span<const double>, const EmpiricalMeasure&, double,
                       std::span<const double>, std::span<double> out) { out[0] = drift; };
    cf.diffusion = [sigma](std::span<const double>, const EmpiricalMeasure&, double,
                           std::span<const double>, std::span<double> out) { out[0] = sigma; };
    cf.normalized = false;
    cf.measure_dependent = false;
    return {"half_line",
            "test system",
            convex::ConvexConstraint::half_space({-1.0}, 0.0),
            std::move(cf),
            dynamics::ObliqueField::constant(Matrix(1, 1, {h})),
            {x0},
            convex::InteriorCertificate{{1.0}, 1.0}};
}

inline double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace omv::test
