#include "viident/kernels.hpp"

#include "viident/errors.hpp"

#include <cmath>
#include <numbers>

namespace viident {

namespace {

void require_positive_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw DomainError("smoothing parameter eps must be positive and finite");
    }
}

// Logistic density written in terms of exp(-|s|) so it never overflows.
double logistic_density(double s) {
    const double z = std::exp(-std::abs(s));
    return z / ((1.0 + z) * (1.0 + z));
}

SmoothedEval sigmoid_plus(double eps, double t) {
    const double x = t / eps;
    const double z = std::exp(-std::abs(x));
    SmoothedEval r;
    // eps*ln(1+e^x) = t + eps*ln(1+e^{-x}); pick the form whose exponent is <= 0.
    r.value = (x > 0.0 ? t : 0.0) + eps * std::log1p(z);
    r.first_derivative = x > 0.0 ? 1.0 / (1.0 + z) : z / (1.0 + z);
    r.second_derivative = logistic_density(x) / eps;
    return r;
}

SmoothedEval sqrt_plus(double eps, double t) {
    const double four_eps2 = 4.0 * eps * eps;
    const double r = std::hypot(t, 2.0 * eps);
    SmoothedEval out;
    if (t >= 0.0) {
        out.value = 0.5 * (r + t);
        out.first_derivative = 0.5 * (1.0 + t / r);
    } else {
        // (r + t)(r - t) = 4 eps^2 avoids cancellation for t << 0.
        out.value = 0.5 * four_eps2 / (r - t);
        out.first_derivative = 0.5 * four_eps2 / (r * (r - t));
    }
    out.second_derivative = 0.5 * four_eps2 / (r * r * r);
    return out;
}

SmoothedEval uniform_centered_plus(double eps, double t) {
    const double half = 0.5 * eps;
    SmoothedEval r;
    if (t < -half) {
        return r;
    }
    if (t < half) {
        const double s = t + half;
        r.value = s * s / (2.0 * eps);
        r.first_derivative = s / eps;
        r.second_derivative = 1.0 / eps;
        return r;
    }
    // t == eps/2 lands here: right-limit convention for the jump of P_tt.
    r.value = t;
    r.first_derivative = 1.0;
    return r;
}

SmoothedEval uniform_shifted_plus(double eps, double t) {
    SmoothedEval r;
    if (t < 0.0) {
        return r;
    }
    if (t < eps) {
        r.value = t * t / (2.0 * eps);
        r.first_derivative = t / eps;
        r.second_derivative = 1.0 / eps;
        return r;
    }
    r.value = t - 0.5 * eps;
    r.first_derivative = 1.0;
    return r;
}

}  // namespace

KernelSpec KernelSpec::sigmoid() {
    return {KernelKind::Sigmoid, "sigmoid", 2.0 * std::numbers::ln2, true};
}

KernelSpec KernelSpec::sqrt() { return {KernelKind::Sqrt, "sqrt", 2.0, true}; }

KernelSpec KernelSpec::uniform_centered() {
    return {KernelKind::UniformCentered, "uniform_centered", 0.25, true};
}

KernelSpec KernelSpec::uniform_shifted() {
    return {KernelKind::UniformShifted, "uniform_shifted", 0.5, false};
}

KernelSpec KernelSpec::custom(std::string name, Density density, PlusFunction plus,
                              double absolute_mean, bool symmetric) {
    if (!density || !plus) {
        throw DomainError("custom kernel '" + name + "' needs a density and a plus function");
    }
    if (!(absolute_mean > 0.0) || !std::isfinite(absolute_mean)) {
        throw DomainError("custom kernel '" + name + "' needs a positive finite absolute mean");
    }
    KernelSpec k(KernelKind::Custom, std::move(name), absolute_mean, symmetric);
    k.custom_density_ = std::move(density);
    k.custom_plus_ = std::move(plus);
    return k;
}

KernelSpec KernelSpec::from_name(std::string_view name) {
    if (name == "sigmoid") return sigmoid();
    if (name == "sqrt") return sqrt();
    if (name == "uniform_centered") return uniform_centered();
    if (name == "uniform_shifted") return uniform_shifted();
    throw ConfigError("unknown kernel '" + std::string(name) +
                      "' (expected sigmoid, sqrt, uniform_centered or uniform_shifted)");
}

std::vector<KernelSpec> KernelSpec::builtin() {
    return {sigmoid(), sqrt(), uniform_centered(), uniform_shifted()};
}

double KernelSpec::density(double s) const {
    switch (kind_) {
    case KernelKind::Sigmoid:
        return logistic_density(s);
    case KernelKind::Sqrt:
        return 2.0 / std::pow(s * s + 4.0, 1.5);
    case KernelKind::UniformCentered:
        return (s >= -0.5 && s < 0.5) ? 1.0 : 0.0;
    case KernelKind::UniformShifted:
        return (s >= 0.0 && s < 1.0) ? 1.0 : 0.0;
    case KernelKind::Custom:
        return custom_density_(s);
    }
    return 0.0;
}

SmoothedEval KernelSpec::plus(double eps, double t) const {
    require_positive_eps(eps);
    switch (kind_) {
    case KernelKind::Sigmoid:
        return sigmoid_plus(eps, t);
    case KernelKind::Sqrt:
        return sqrt_plus(eps, t);
    case KernelKind::UniformCentered:
        return uniform_centered_plus(eps, t);
    case KernelKind::UniformShifted:
        return uniform_shifted_plus(eps, t);
    case KernelKind::Custom:
        return custom_plus_(eps, t);
    }
    return {};
}

SmoothedEval KernelSpec::modulus(double eps, double t) const {
    const SmoothedEval a = plus(eps, t);
    const SmoothedEval b = plus(eps, -t);
    return {a.value + b.value, a.first_derivative - b.first_derivative,
            a.second_derivative + b.second_derivative};
}

SmoothedEval plus_smooth(const KernelSpec& kernel, double eps, double t) {
    return kernel.plus(eps, t);
}

SmoothedEval modulus_smooth(const KernelSpec& kernel, double eps, double t) {
    return kernel.modulus(eps, t);
}

double absolute_mean(const KernelSpec& kernel) { return kernel.absolute_mean(); }

}  // namespace viident
