#include "viident/sensitivity.hpp"

#include "viident/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace viident {

MisfitNorm misfit_norm_from_name(std::string_view name) {
    if (name == "L2" || name == "l2") return MisfitNorm::L2;
    if (name == "V" || name == "v") return MisfitNorm::V;
    throw ConfigError("unknown misfit norm '" + std::string(name) + "' (expected L2 or V)");
}

std::string_view misfit_norm_name(MisfitNorm norm) { return norm == MisfitNorm::L2 ? "L2" : "V"; }

double misfit(const Problem& problem, const Eigen::VectorXd& u, const Eigen::VectorXd& observation,
              MisfitNorm norm) {
    const Eigen::VectorXd d = problem.mesh().restrict_to_dofs(u - observation);
    const SparseMatrix& w = norm == MisfitNorm::L2 ? problem.mass() : problem.v_gram();
    return 0.5 * d.dot(w * d);
}

LinearizedSystem::LinearizedSystem(const Problem& problem, const ParameterField& e,
                                   const ParameterField& f, const KernelSpec& kernel, double eps,
                                   const ForwardState& state)
    : problem_(&problem) {
    if (!(eps > 0.0)) throw DomainError("linearization needs a regularized state (eps > 0)");
    const Mesh& mesh = problem.mesh();
    if (f.kind() != FieldKind::Friction || f.size() != mesh.num_friction()) {
        throw DomainError("friction field does not match the mesh friction set");
    }
    u_ = mesh.restrict_to_dofs(state.u);
    jacobian_ = problem.operator_for(e).matrix;
    first_derivative_.resize(mesh.num_friction());
    for (Index i = 0; i < mesh.num_friction(); ++i) {
        const Index d = mesh.friction_dof(i);
        const SmoothedEval m = kernel.modulus(eps, u_[d]);
        first_derivative_[i] = m.first_derivative;
        jacobian_.coeffRef(d, d) +=
            mesh.friction_weights()[static_cast<std::size_t>(i)] * f.values()[i] * m.second_derivative;
    }
    ldlt_.compute(jacobian_);
    if (ldlt_.info() != Eigen::Success) {
        throw SolverError("factorization of the linearized system failed",
                          std::numeric_limits<double>::quiet_NaN(), 0);
    }
}

Eigen::VectorXd LinearizedSystem::solve(const Eigen::VectorXd& b) const { return ldlt_.solve(b); }

Eigen::VectorXd LinearizedSystem::rhs_ellipticity(const Eigen::VectorXd& delta_e) const {
    return -problem_->apply(delta_e, u_);
}

Eigen::VectorXd LinearizedSystem::rhs_friction(const Eigen::VectorXd& delta_f) const {
    const Mesh& mesh = problem_->mesh();
    if (delta_f.size() != mesh.num_friction()) {
        throw DomainError("friction direction has wrong length");
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.num_dofs());
    for (Index i = 0; i < mesh.num_friction(); ++i) {
        rhs[mesh.friction_dof(i)] -=
            mesh.friction_weights()[static_cast<std::size_t>(i)] * delta_f[i] * first_derivative_[i];
    }
    return rhs;
}

namespace {

Sensitivity finish(const LinearizedSystem& sys, const Mesh& mesh, const Eigen::VectorXd& rhs,
                   DirectionKind kind) {
    const Eigen::VectorXd du = sys.solve(rhs);
    Sensitivity s;
    s.direction_kind = kind;
    s.residual = (sys.jacobian() * du - rhs).norm();
    s.delta_u = mesh.extend_to_nodes(du);
    return s;
}

}  // namespace

Sensitivity LinearizedSystem::sensitivity_e(const Eigen::VectorXd& delta_e) const {
    return finish(*this, problem_->mesh(), rhs_ellipticity(delta_e), DirectionKind::Ellipticity);
}

Sensitivity LinearizedSystem::sensitivity_f(const Eigen::VectorXd& delta_f) const {
    return finish(*this, problem_->mesh(), rhs_friction(delta_f), DirectionKind::Friction);
}

Sensitivity LinearizedSystem::sensitivity(const Eigen::VectorXd& delta_e,
                                          const Eigen::VectorXd& delta_f) const {
    return finish(*this, problem_->mesh(), rhs_ellipticity(delta_e) + rhs_friction(delta_f),
                  DirectionKind::Joint);
}

Eigen::VectorXd LinearizedSystem::misfit_rhs(const Eigen::VectorXd& observation,
                                             MisfitNorm norm) const {
    const Eigen::VectorXd d = problem_->mesh().restrict_to_dofs(observation) - u_;
    return norm == MisfitNorm::L2 ? Eigen::VectorXd(problem_->mass() * d)
                                  : Eigen::VectorXd(problem_->v_gram() * d);
}

Eigen::VectorXd LinearizedSystem::adjoint(const Eigen::VectorXd& observation,
                                          MisfitNorm norm) const {
    return problem_->mesh().extend_to_nodes(solve(misfit_rhs(observation, norm)));
}

Sensitivity sensitivity_e(const ForwardState& state, const Problem& problem,
                          const ParameterField& e, const ParameterField& f,
                          const KernelSpec& kernel, double eps, const Eigen::VectorXd& delta_e) {
    return LinearizedSystem(problem, e, f, kernel, eps, state).sensitivity_e(delta_e);
}

Sensitivity sensitivity_f(const ForwardState& state, const Problem& problem,
                          const ParameterField& e, const ParameterField& f,
                          const KernelSpec& kernel, double eps, const Eigen::VectorXd& delta_f) {
    return LinearizedSystem(problem, e, f, kernel, eps, state).sensitivity_f(delta_f);
}

Eigen::VectorXd adjoint_solve(const ForwardState& state, const Problem& problem,
                              const ParameterField& e, const ParameterField& f,
                              const KernelSpec& kernel, double eps,
                              const Eigen::VectorXd& observation, MisfitNorm norm) {
    return LinearizedSystem(problem, e, f, kernel, eps, state).adjoint(observation, norm);
}

double projected_gradient_norm(const ParameterField& field, const Eigen::VectorXd& grad) {
    if (grad.size() != field.size()) throw DomainError("gradient has wrong length");
    return (field.values() - field.project(field.values() - grad)).norm();
}

OptimalityBundle reduced_gradients(const ForwardState& state, const Eigen::VectorXd& adjoint_p,
                                   const Problem& problem, const ParameterField& e,
                                   const ParameterField& f, const KernelSpec& kernel, double eps,
                                   double alpha, double beta) {
    if (!(eps > 0.0)) throw DomainError("reduced gradients need eps > 0");
    const Mesh& mesh = problem.mesh();
    const Eigen::VectorXd u = mesh.restrict_to_dofs(state.u);
    const Eigen::VectorXd p = mesh.restrict_to_dofs(adjoint_p);

    OptimalityBundle out;
    out.adjoint_p = adjoint_p;
    out.grad_e = alpha * (e.gram() * e.values()) + problem.element_forms(u, p);
    out.grad_f = beta * (f.gram() * f.values());
    for (Index i = 0; i < mesh.num_friction(); ++i) {
        const Index d = mesh.friction_dof(i);
        out.grad_f[i] += mesh.friction_weights()[static_cast<std::size_t>(i)] *
                         kernel.modulus(eps, u[d]).first_derivative * p[d];
    }
    out.stationarity_e = projected_gradient_norm(e, out.grad_e);
    out.stationarity_f = projected_gradient_norm(f, out.grad_f);
    return out;
}

}  // namespace viident
