#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace viident {

/// Value and first two t-derivatives of a smoothing function at (eps, t).
struct SmoothedEval {
    double value = 0.0;
    double first_derivative = 0.0;
    double second_derivative = 0.0;
};

enum class KernelKind { Sigmoid, Sqrt, UniformCentered, UniformShifted, Custom };

/// A probability density used to mollify the plus function by convolution,
/// together with the closed form of the mollified plus function
///
///   P(eps, t) = int (t - eps s)_+ rho(s) ds
///
/// and the absolute mean k = int |s| rho(s) ds, which bounds the smoothing
/// error |P(eps, t) - max(t, 0)| <= k eps.
///
/// The four built-in kernels are the logistic density (Sigmoid), the density
/// 2 / (s^2 + 4)^{3/2} (Sqrt) and the unit uniform densities on [-1/2, 1/2]
/// (UniformCentered) and on [0, 1] (UniformShifted).
class KernelSpec {
public:
    using PlusFunction = std::function<SmoothedEval(double eps, double t)>;
    using Density = std::function<double(double s)>;

    static KernelSpec sigmoid();
    static KernelSpec sqrt();
    static KernelSpec uniform_centered();
    static KernelSpec uniform_shifted();

    /// User-supplied kernel. The plus-function closed form and the absolute
    /// mean cannot be derived generically, so both are mandatory.
    static KernelSpec custom(std::string name, Density density, PlusFunction plus,
                             double absolute_mean, bool symmetric);

    /// Accepts "sigmoid", "sqrt", "uniform_centered", "uniform_shifted".
    static KernelSpec from_name(std::string_view name);

    /// The four built-in kernels in a fixed order.
    static std::vector<KernelSpec> builtin();

    KernelKind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    double absolute_mean() const noexcept { return absolute_mean_; }
    bool symmetric() const noexcept { return symmetric_; }

    /// rho(s); at the jump points of the uniform densities the right limit
    /// is returned.
    double density(double s) const;

    /// P(eps, t), P_t(eps, t), P_tt(eps, t). Throws DomainError for eps <= 0.
    SmoothedEval plus(double eps, double t) const;

    /// M(eps, t) = P(eps, t) + P(eps, -t) and its derivatives.
    SmoothedEval modulus(double eps, double t) const;

private:
    KernelSpec(KernelKind kind, std::string name, double k, bool symmetric)
        : kind_(kind), name_(std::move(name)), absolute_mean_(k), symmetric_(symmetric) {}

    KernelKind kind_;
    std::string name_;
    double absolute_mean_;
    bool symmetric_;
    Density custom_density_;
    PlusFunction custom_plus_;
};

SmoothedEval plus_smooth(const KernelSpec& kernel, double eps, double t);
SmoothedEval modulus_smooth(const KernelSpec& kernel, double eps, double t);
double absolute_mean(const KernelSpec& kernel);

}  // namespace viident
