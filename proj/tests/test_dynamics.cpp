#include <cmath>

#include "doctest.h"
#include "omv/dynamics.hpp"
#include "omv/errors.hpp"

using namespace omv;
using namespace omv::dynamics;

TEST_CASE("SPD square root and inverse") {
    const Matrix a(2, 2, {4.0, 1.0, 1.0, 3.0});
    const auto s = sqrt_spd(a);
    const auto ss = s * s;
    for (std::size_t i = 0; i < 4; ++i) CHECK(ss.data()[i] == doctest::Approx(a.data()[i]));
    const auto inv = inverse_spd(a) * a;
    CHECK(inv(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(inv(0, 1)) <= 1e-12);
    const auto r = inverse_sqrt_spd(a) * s;
    CHECK(r(1, 1) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)sqrt_spd(Matrix(2, 2, {1.0, 0.0, 0.0, -2.0})), SpectralError);
}

TEST_CASE("box benchmark satisfies its declared constants") {
    const auto sys = make_system("example31");
    const auto band = validate_oblique(sys.oblique, cube_sampler(2, 2.0), 2000);
    CHECK(band.passed());
    CHECK(band.min_eigenvalue >= sys.oblique.a_h);
    CHECK(band.max_eigenvalue <= sys.oblique.b_h);
    const auto lip = validate_lipschitz(sys.coefficients, cube_sampler(2, 2.0), 2000);
    CHECK(lip.passed());
    CHECK(lip.estimate <= lip.declared);
    CHECK_NOTHROW(check_normalization(sys.coefficients));
}

TEST_CASE("bundled systems build and describe themselves") {
    for (const auto& name : system_names()) {
        const auto sys = make_system(name);
        CHECK(sys.name == name);
        CHECK(sys.constraint.contains(sys.x0));
        CHECK(describe(sys).find(name) != std::string::npos);
    }
}

TEST_CASE("unknown names and parameters are rejected") {
    CHECK_THROWS_AS((void)make_system("nope"), ConfigError);
    CHECK_THROWS_AS((void)make_system("ou", {{"gamma", 1.0}}), ConfigError);
}

TEST_CASE("normalization check catches a shifted drift") {
    CoefficientField cf;
    cf.drift = [](std::span<const double>, const EmpiricalMeasure&, double,
                  std::span<const double>, std::span<double> out) { out[0] = 0.1; };
    cf.diffusion = [](std::span<const double>, const EmpiricalMeasure&, double,
                      std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    CHECK_THROWS_AS(check_normalization(cf), ConfigError);
}

TEST_CASE("lipschitz validator flags an understated constant") {
    CoefficientField cf;
    cf.drift = [](std::span<const double> x, const EmpiricalMeasure&, double,
                  std::span<const double>, std::span<double> out) { out[0] = 5.0 * x[0]; };
    cf.diffusion = [](std::span<const double>, const EmpiricalMeasure&, double,
                      std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    cf.lipschitz = 1.0;
    CHECK_FALSE(validate_lipschitz(cf, cube_sampler(1, 1.0), 500).passed());
}
