#pragma once

#include "viident/discretization.hpp"
#include "viident/forward.hpp"
#include "viident/kernels.hpp"

#include <string_view>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

namespace viident {

enum class DirectionKind { Ellipticity, Friction, Joint };

/// Directional derivative of the regularized solution map.
struct Sensitivity {
    DirectionKind direction_kind = DirectionKind::Ellipticity;
    Eigen::VectorXd delta_u;  ///< nodal
    double residual = 0.0;    ///< ||J delta_u - rhs||_2 of the defining system
};

/// Norm of the output-least-squares misfit 1/2 ||u - observation||^2.
enum class MisfitNorm { L2, V };

MisfitNorm misfit_norm_from_name(std::string_view name);
std::string_view misfit_norm_name(MisfitNorm norm);

/// 1/2 ||u - observation||^2 in the chosen norm (both nodal).
double misfit(const Problem& problem, const Eigen::VectorXd& u, const Eigen::VectorXd& observation,
              MisfitNorm norm);

/// Adjoint state, reduced gradients and projected-gradient residuals of
/// J_eps(e, f) + alpha/2 ||e||^2 + beta/2 ||f||^2.
struct OptimalityBundle {
    Eigen::VectorXd adjoint_p;  ///< nodal
    Eigen::VectorXd grad_e;     ///< per element
    Eigen::VectorXd grad_f;     ///< per friction node
    double stationarity_e = 0.0;
    double stationarity_f = 0.0;
};

/// The Newton Jacobian K(e) + gamma^* diag(f M''_eps(gamma u)) gamma at a
/// converged regularized state, factorized once. All sensitivity and
/// adjoint solves at that state go through this factorization.
class LinearizedSystem {
public:
    LinearizedSystem(const Problem& problem, const ParameterField& e, const ParameterField& f,
                     const KernelSpec& kernel, double eps, const ForwardState& state);

    const SparseMatrix& jacobian() const noexcept { return jacobian_; }

    /// Right-hand side -T(delta_e) u on dofs.
    Eigen::VectorXd rhs_ellipticity(const Eigen::VectorXd& delta_e) const;
    /// Right-hand side -gamma^*(delta_f M'_eps(gamma u)) on dofs.
    Eigen::VectorXd rhs_friction(const Eigen::VectorXd& delta_f) const;

    Sensitivity sensitivity_e(const Eigen::VectorXd& delta_e) const;
    Sensitivity sensitivity_f(const Eigen::VectorXd& delta_f) const;
    /// Derivative along (delta_e, delta_f): one solve with the summed rhs.
    Sensitivity sensitivity(const Eigen::VectorXd& delta_e, const Eigen::VectorXd& delta_f) const;

    /// Riesz representative of observation - u in the misfit norm, on dofs.
    Eigen::VectorXd misfit_rhs(const Eigen::VectorXd& observation, MisfitNorm norm) const;
    /// Adjoint state p (nodal) solving J p = misfit_rhs.
    Eigen::VectorXd adjoint(const Eigen::VectorXd& observation, MisfitNorm norm) const;

    /// Solve J x = b on dofs with the stored factorization.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

    const Eigen::VectorXd& u_dofs() const noexcept { return u_; }

private:
    const Problem* problem_;
    Eigen::VectorXd u_;
    Eigen::VectorXd first_derivative_;  // M'_eps(u_i) per friction node
    SparseMatrix jacobian_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

Sensitivity sensitivity_e(const ForwardState& state, const Problem& problem,
                          const ParameterField& e, const ParameterField& f,
                          const KernelSpec& kernel, double eps, const Eigen::VectorXd& delta_e);

Sensitivity sensitivity_f(const ForwardState& state, const Problem& problem,
                          const ParameterField& e, const ParameterField& f,
                          const KernelSpec& kernel, double eps, const Eigen::VectorXd& delta_f);

Eigen::VectorXd adjoint_solve(const ForwardState& state, const Problem& problem,
                              const ParameterField& e, const ParameterField& f,
                              const KernelSpec& kernel, double eps,
                              const Eigen::VectorXd& observation,
                              MisfitNorm norm = MisfitNorm::L2);

/// grad_e = alpha G_e e + (t(1_K; u, p))_K,
/// grad_f = beta G_f f + (w_i M'_eps(u_i) p_i)_i,
/// stationarity_x = ||x - P_box(x - grad_x)||_2.
OptimalityBundle reduced_gradients(const ForwardState& state, const Eigen::VectorXd& adjoint_p,
                                   const Problem& problem, const ParameterField& e,
                                   const ParameterField& f, const KernelSpec& kernel, double eps,
                                   double alpha, double beta);

/// ||x - P_box(x - grad)||_2 for the box of `field`.
double projected_gradient_norm(const ParameterField& field, const Eigen::VectorXd& grad);

}  // namespace viident
