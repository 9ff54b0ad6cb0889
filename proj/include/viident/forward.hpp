#pragma once

#include "viident/discretization.hpp"
#include "viident/kernels.hpp"

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace viident {

struct SolverOptions {
    /// Newton: ||R||_2 <= tol. Oracle: natural-residual max norm <= tol.
    /// Both are floored at the roundoff level of the system.
    double tol = 1e-11;
    int newton_max_iters = 100;
    /// Newton steps taken even when the starting point already meets `tol`,
    /// so warm-started solves still land at roundoff level.
    int min_newton_steps = 1;
    /// Active-set cap; a negative value selects 2 |D| + 10.
    int active_set_max_iters = -1;
    double armijo_c = 1e-4;
    int max_backtracks = 60;
};

/// A discrete solution u (nodal, zero on Dirichlet nodes) of either the
/// nonsmooth VI (eps == 0) or the regularized equation (eps > 0).
struct ForwardState {
    Eigen::VectorXd u;
    double residual_norm = 0.0;
    int iterations = 0;
    double eps = 0.0;
    /// ||R|| before every Newton step and at exit (regularized solves).
    std::vector<double> residual_history;
    /// Discrete energy of every active-set iterate (oracle solves).
    std::vector<double> energy_history;
};

/// 1/2 u^T K u - l^T u + sum_i w_i f_i |u_i| for a nodal u.
double vi_energy(const DiscreteOperator& op, const Mesh& mesh, const ParameterField& f,
                 const Eigen::VectorXd& u);

/// R(u) = K u + gamma^*(f M'_eps(gamma u)) - l on dofs, for a nodal u.
Eigen::VectorXd regularized_residual(const DiscreteOperator& op, const Mesh& mesh,
                                     const ParameterField& f, const KernelSpec& kernel, double eps,
                                     const Eigen::VectorXd& u);

/// Exact minimizer of the piecewise quadratic energy vi_energy by an
/// active-set method over the per-node cases u_i > 0, u_i < 0, u_i = 0
/// (feature-sign search). Every iterate lowers the energy and the method
/// terminates after finitely many steps.
ForwardState solve_vi_oracle(const DiscreteOperator& op, const Mesh& mesh, const ParameterField& f,
                             const SolverOptions& options = {});

/// Damped Newton on R(u) = 0 with Jacobian K + gamma^* diag(f M''_eps) gamma
/// and Armijo backtracking on 1/2 ||R||^2. Starts from `initial_guess`
/// (nodal) when given, otherwise from the frictionless solution K u = l.
ForwardState solve_regularized(const DiscreteOperator& op, const Mesh& mesh,
                               const ParameterField& f, const KernelSpec& kernel, double eps,
                               const SolverOptions& options = {},
                               const std::optional<Eigen::VectorXd>& initial_guess = std::nullopt);

/// (e, f) -> u for a fixed problem and kernel. eps == 0 selects the oracle.
/// The operator T(e) of the most recent e is cached.
class SolutionMap {
public:
    SolutionMap(const Problem& problem, KernelSpec kernel, SolverOptions options = {});

    ForwardState operator()(const ParameterField& e, const ParameterField& f, double eps,
                            const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

    const DiscreteOperator& operator_for(const ParameterField& e);

    const Problem& problem() const noexcept { return *problem_; }
    const KernelSpec& kernel() const noexcept { return kernel_; }
    const SolverOptions& options() const noexcept { return options_; }

private:
    const Problem* problem_;
    KernelSpec kernel_;
    SolverOptions options_;
    std::optional<Eigen::VectorXd> cached_e_;
    DiscreteOperator cached_op_;
};

ForwardState solution_map(const ParameterField& e, const ParameterField& f, double eps,
                          const Problem& problem, const KernelSpec& kernel,
                          const SolverOptions& options = {});

}  // namespace viident
