#include "doctest.h"

#include "oracles.hpp"
#include "viident/errors.hpp"
#include "viident/kernels.hpp"

#include <cmath>

using namespace viident;

namespace {

std::vector<double> breakpoints(const std::string& name, double eps) {
    if (name == "uniform_centered") return {-eps / 2, eps / 2};
    if (name == "uniform_shifted") return {0.0, eps};
    return {};
}

}  // namespace

TEST_CASE("closed forms agree with the textbook formulas") {
    for (const auto& kernel : KernelSpec::builtin()) {
        CAPTURE(kernel.name());
        for (double eps : {1e-3, 0.05, 0.3, 1.0, 4.0}) {
            for (double tau = -20.0; tau <= 20.0; tau += 0.37) {
                const double t = eps * tau;
                const double expected = oracle::textbook_plus(kernel.name(), eps, t);
                CHECK(kernel.plus(eps, t).value == doctest::Approx(expected).epsilon(1e-13).scale(eps));
            }
        }
    }
}

TEST_CASE("named values") {
    const double eps = 0.2;
    CHECK(KernelSpec::sigmoid().plus(eps, 0.0).value == doctest::Approx(eps * std::log(2.0)));
    CHECK(KernelSpec::sqrt().plus(eps, 0.0).value == doctest::Approx(eps));
    CHECK(KernelSpec::uniform_centered().plus(eps, 0.0).value == doctest::Approx(eps / 8));
    CHECK(KernelSpec::uniform_shifted().plus(eps, eps).value == doctest::Approx(eps / 2));
    CHECK(KernelSpec::sigmoid().plus(1.0, -1000.0).value >= 0.0);
    CHECK(KernelSpec::sigmoid().plus(1.0, 1000.0).value == doctest::Approx(1000.0));
}

TEST_CASE("closed forms agree with numerical convolution") {
    const auto dens = oracle::densities();
    for (std::size_t k = 0; k < dens.size(); ++k) {
        const KernelSpec kernel = KernelSpec::from_name(dens[k].name);
        CAPTURE(kernel.name());
        for (double eps : {1e-3, 1e-2, 0.1, 1.0}) {
            for (double tau : {-30.0, -4.0, -0.5, -0.1, 0.0, 0.2, 0.5, 0.9, 3.0, 25.0}) {
                const double t = eps * tau;
                const double quad = oracle::convolved_plus(dens[k], eps, t);
                CHECK(std::abs(kernel.plus(eps, t).value - quad) <= 1e-8);
            }
        }
    }
}

TEST_CASE("absolute means agree with quadrature") {
    for (const auto& d : oracle::densities()) {
        const KernelSpec kernel = KernelSpec::from_name(d.name);
        CAPTURE(d.name);
        CHECK(std::abs(kernel.absolute_mean() - oracle::absolute_mean(d)) <= 1e-10);
        CHECK(absolute_mean(kernel) == kernel.absolute_mean());
    }
    CHECK(KernelSpec::sigmoid().absolute_mean() == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(KernelSpec::sqrt().absolute_mean() == doctest::Approx(2.0));
    CHECK(KernelSpec::uniform_centered().absolute_mean() == doctest::Approx(0.25));
    CHECK(KernelSpec::uniform_shifted().absolute_mean() == doctest::Approx(0.5));
}

TEST_CASE("densities match their definitions") {
    for (const auto& d : oracle::densities()) {
        const KernelSpec kernel = KernelSpec::from_name(d.name);
        for (double s : {-3.0, -0.7, -0.2, 0.1, 0.3, 0.8, 2.5}) {
            CHECK(kernel.density(s) == doctest::Approx(d.rho(s)).epsilon(1e-14));
        }
    }
}

TEST_CASE("derivatives agree with central differences away from breakpoints") {
    for (const auto& kernel : KernelSpec::builtin()) {
        CAPTURE(kernel.name());
        for (double eps : {1e-3, 0.1, 1.0}) {
            const double h = 1e-4 * eps;
            for (double tau = -6.0; tau <= 6.0; tau += 0.173) {
                const double t = eps * tau;
                bool near = false;
                for (double b : breakpoints(kernel.name(), eps)) near = near || std::abs(t - b) <= 2 * h;
                if (near) continue;
                const auto c = kernel.plus(eps, t);
                const double d1 = (kernel.plus(eps, t + h).value - kernel.plus(eps, t - h).value) / (2 * h);
                const double d2 = (kernel.plus(eps, t + h).first_derivative -
                                   kernel.plus(eps, t - h).first_derivative) / (2 * h);
                CHECK(std::abs(d1 - c.first_derivative) <= 1e-6 * std::max(1.0, std::abs(c.first_derivative)));
                CHECK(std::abs(d2 - c.second_derivative) <=
                      1e-6 * std::max(1.0 / eps, std::abs(c.second_derivative)));
            }
        }
    }
}

TEST_CASE("smoothing error bounds and modulus properties") {
    for (const auto& kernel : KernelSpec::builtin()) {
        CAPTURE(kernel.name());
        const double k = kernel.absolute_mean();
        for (double eps : {1e-4, 1e-2, 0.5, 3.0}) {
            for (double tau = -50.0; tau <= 50.0; tau += 0.25) {
                const double t = eps * tau;
                const auto p = kernel.plus(eps, t);
                const auto m = kernel.modulus(eps, t);
                CHECK(std::abs(p.value - oracle::plus(t)) <= k * eps * (1 + 1e-9));
                CHECK(std::abs(m.value - std::abs(t)) <= 2 * k * eps * (1 + 1e-9));
                CHECK(p.first_derivative >= 0.0);
                CHECK(p.first_derivative <= 1.0);
                CHECK(p.second_derivative >= 0.0);
                CHECK(m.first_derivative >= -1.0);
                CHECK(m.first_derivative <= 1.0);
                CHECK(m.second_derivative >= 0.0);
                const auto mirrored = kernel.modulus(eps, -t);
                CHECK(mirrored.value == doctest::Approx(m.value).epsilon(1e-14));
                CHECK(mirrored.first_derivative == doctest::Approx(-m.first_derivative).epsilon(1e-12).scale(1.0));
                CHECK(modulus_smooth(kernel, eps, t).value == m.value);
                CHECK(plus_smooth(kernel, eps, t).value == p.value);
            }
        }
    }
}

TEST_CASE("uniform kernels outside the smoothing band") {
    const KernelSpec centered = KernelSpec::uniform_centered();
    const KernelSpec shifted = KernelSpec::uniform_shifted();
    for (double eps : {1e-3, 0.1, 1.0}) {
        for (double t : {-40 * eps, -10.5 * eps, 10.5 * eps, 40 * eps}) {
            CHECK(centered.plus(eps, t).value - oracle::plus(t) == 0.0);
            CHECK(centered.modulus(eps, t).value - std::abs(t) == 0.0);
            // The shifted kernel has mean 1/2: exact on the left, offset by
            // eps/2 (the bound k eps itself) on the right.
            if (t < 0) {
                CHECK(shifted.plus(eps, t).value == 0.0);
            } else {
                CHECK(shifted.plus(eps, t).value == doctest::Approx(t - eps / 2).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("symmetric kernels satisfy P(t) - P(-t) = t") {
    for (const auto& kernel : KernelSpec::builtin()) {
        if (!kernel.symmetric()) continue;
        for (double t : {-2.0, -0.3, 0.0, 0.01, 1.7}) {
            CHECK(kernel.plus(0.4, t).value - kernel.plus(0.4, -t).value ==
                  doctest::Approx(t).epsilon(1e-13).scale(1.0));
        }
    }
    CHECK_FALSE(KernelSpec::uniform_shifted().symmetric());
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(KernelSpec::sqrt().plus(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(KernelSpec::sqrt().modulus(-1.0, 1.0), DomainError);
    CHECK_THROWS_AS(KernelSpec::from_name("gaussian"), ConfigError);
    CHECK(KernelSpec::from_name("uniform_shifted").kind() == KernelKind::UniformShifted);
}

TEST_CASE("custom kernel") {
    // Triangular density on [-1, 1]; k = 1/3.
    auto plus = [](double eps, double t) {
        const double x = t / eps;
        SmoothedEval r;
        if (x <= -1) return r;
        if (x >= 1) return SmoothedEval{t, 1.0, 0.0};
        if (x <= 0) {
            r.value = eps * std::pow(x + 1, 3) / 6;
            r.first_derivative = std::pow(x + 1, 2) / 2;
            r.second_derivative = (x + 1) / eps;
        } else {
            r.value = eps * (x + std::pow(1 - x, 3) / 6);
            r.first_derivative = 1 - std::pow(1 - x, 2) / 2;
            r.second_derivative = (1 - x) / eps;
        }
        return r;
    };
    const KernelSpec tri = KernelSpec::custom(
        "triangle", [](double s) { return std::max(0.0, 1 - std::abs(s)); }, plus, 1.0 / 3.0, true);
    CHECK(tri.kind() == KernelKind::Custom);
    const oracle::Density d{"triangle", [](double s) { return std::max(0.0, 1 - std::abs(s)); }, -1.0, 1.0};
    CHECK(oracle::absolute_mean(d) == doctest::Approx(1.0 / 3.0));
    for (double t : {-0.05, -0.02, 0.0, 0.03, 0.2}) {
        CHECK(tri.plus(0.1, t).value == doctest::Approx(oracle::convolved_plus(d, 0.1, t)).epsilon(1e-10));
        CHECK(tri.modulus(0.1, t).value ==
              doctest::Approx(oracle::convolved_plus(d, 0.1, t) + oracle::convolved_plus(d, 0.1, -t)));
    }
    CHECK_THROWS_AS(KernelSpec::custom("bad", {}, plus, 1.0, true), DomainError);
}
