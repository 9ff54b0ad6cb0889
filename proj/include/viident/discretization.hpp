#pragma once

#include "viident/mesh.hpp"

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace viident {

using SparseMatrix = Eigen::SparseMatrix<double>;
using SourceFunction = std::function<double(const Point&)>;

/// Bilinear part of t(e; u, v): e grad u . grad v, optionally plus e u v.
enum class Form { GradGrad, GradGradPlusMass };

Form form_from_name(std::string_view name);
std::string_view form_name(Form form);

enum class FieldKind { Ellipticity, Friction };

/// A distributed coefficient with box bounds and the Gram matrix of its
/// regularization inner product.
///
/// Ellipticity fields hold one value per element (strictly positive lower
/// bound); friction fields hold one value per friction node (nonnegative
/// lower bound). Construction rejects values outside [lower, upper].
class ParameterField {
public:
    ParameterField(FieldKind kind, Eigen::VectorXd values, double lower, double upper,
                   SparseMatrix reg_gram);

    FieldKind kind() const noexcept { return kind_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }
    Index size() const noexcept { return values_.size(); }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    const SparseMatrix& gram() const noexcept { return *gram_; }

    /// Same bounds and Gram matrix, new values (validated).
    ParameterField with_values(Eigen::VectorXd values) const;
    /// Componentwise clamp onto [lower, upper].
    Eigen::VectorXd project(const Eigen::VectorXd& x) const;

private:
    ParameterField(FieldKind kind, Eigen::VectorXd values, double lower, double upper,
                   std::shared_ptr<const SparseMatrix> gram);
    void validate_values() const;

    FieldKind kind_;
    Eigen::VectorXd values_;
    double lower_;
    double upper_;
    std::shared_ptr<const SparseMatrix> gram_;
};

/// Default Gram of the ellipticity inner product: a discrete H1 form for
/// elementwise constants, diag(|K|) plus the two-point flux Laplacian
/// sum over interior facets |F| / dist(x_K, x_L) (a_K - a_L)(b_K - b_L).
SparseMatrix ellipticity_gram(const Mesh& mesh);
/// Default Gram of the friction inner product: P1 mass + stiffness along the
/// friction edge in 2D, the identity for the 1D point friction.
SparseMatrix friction_gram(const Mesh& mesh);

ParameterField make_ellipticity(const Mesh& mesh, const Eigen::VectorXd& values, double lower,
                                double upper);
ParameterField make_ellipticity(const Mesh& mesh, double value, double lower, double upper);
ParameterField make_friction(const Mesh& mesh, const Eigen::VectorXd& values, double lower,
                             double upper);
ParameterField make_friction(const Mesh& mesh, double value, double lower, double upper);

/// a^T G b with the field's Gram matrix G.
double reg_inner(const ParameterField& field, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// T(e) restricted to the free dofs together with the load vector l.
struct DiscreteOperator {
    SparseMatrix matrix;
    Eigen::VectorXd load;
};

/// The discrete forward problem: mesh, form and source, with the
/// parameter-independent pieces (unit element matrices, load, mass and
/// V-Gram matrices) precomputed.
class Problem {
public:
    Problem(Mesh mesh, Form form, SourceFunction source);

    const Mesh& mesh() const noexcept { return mesh_; }
    Form form() const noexcept { return form_; }

    /// Load vector l on dofs (one-point quadrature per element).
    const Eigen::VectorXd& load() const noexcept { return load_; }
    /// Consistent P1 mass matrix on dofs (L2 inner product).
    const SparseMatrix& mass() const noexcept { return mass_; }
    /// Stiffness + mass with unit coefficient on dofs (V inner product).
    const SparseMatrix& v_gram() const noexcept { return v_gram_; }

    /// Checked assembly of T(e) and l.
    DiscreteOperator operator_for(const ParameterField& e) const;

    /// Matrix of t(c; ., .) for an arbitrary coefficient vector c (no bounds
    /// check, used for directions delta_e).
    SparseMatrix assemble_matrix(const Eigen::VectorXd& coefficients) const;

    /// T(c) u on dofs, matrix free.
    Eigen::VectorXd apply(const Eigen::VectorXd& coefficients, const Eigen::VectorXd& u_dofs) const;

    /// Per element K: t(1_K; u, p) for dof vectors u, p.
    Eigen::VectorXd element_forms(const Eigen::VectorXd& u_dofs, const Eigen::VectorXd& p_dofs) const;

    /// Discrete V norm of a nodal vector (Dirichlet entries ignored).
    double v_norm(const Eigen::VectorXd& nodal) const;
    double l2_norm(const Eigen::VectorXd& nodal) const;

private:
    Mesh mesh_;
    Form form_;
    SourceFunction source_;
    std::vector<Eigen::Matrix3d> local_;  // unit-coefficient element matrices
    Eigen::VectorXd load_;
    SparseMatrix mass_;
    SparseMatrix v_gram_;
};

DiscreteOperator assemble_operator(const Mesh& mesh, const ParameterField& e, Form form,
                                   const SourceFunction& source);

/// gamma v: values of the nodal vector v at the friction nodes.
Eigen::VectorXd trace_apply(const Mesh& mesh, const Eigen::VectorXd& nodal);
/// gamma^* mu: nodal vector with w_i mu_i at friction node i, so that
/// sum_i w_i (gamma v)_i mu_i == v . gamma^* mu.
Eigen::VectorXd trace_adjoint(const Mesh& mesh, const Eigen::VectorXd& mu);
/// (a, b)_D = sum_i w_i a_i b_i.
double friction_inner(const Mesh& mesh, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace viident
