#include "viident/discretization.hpp"

#include "viident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include <Eigen/SparseCholesky>

namespace viident {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct LocalPair {
    Eigen::Matrix3d stiffness = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d mass = Eigen::Matrix3d::Zero();
};

LocalPair local_matrices(const Mesh& mesh, Index k) {
    LocalPair m;
    const auto& el = mesh.elements()[static_cast<std::size_t>(k)];
    const double measure = mesh.element_measure(k);
    if (mesh.dimension() == 1) {
        const double h = measure;
        m.stiffness.topLeftCorner<2, 2>() << 1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h;
        m.mass.topLeftCorner<2, 2>() << h / 3.0, h / 6.0, h / 6.0, h / 3.0;
        return m;
    }
    const auto& nodes = mesh.nodes();
    std::array<Point, 3> p;
    for (std::size_t a = 0; a < 3; ++a) p[a] = nodes[static_cast<std::size_t>(el[a])];
    // Barycentric gradients: grad lambda_a = (y_b - y_c, x_c - x_b) / (2A), (a,b,c) cyclic.
    Eigen::Matrix<double, 3, 2> grad;
    for (std::size_t a = 0; a < 3; ++a) {
        const Point& pb = p[(a + 1) % 3];
        const Point& pc = p[(a + 2) % 3];
        grad(static_cast<Index>(a), 0) = (pb.y - pc.y) / (2.0 * measure);
        grad(static_cast<Index>(a), 1) = (pc.x - pb.x) / (2.0 * measure);
    }
    m.stiffness = measure * grad * grad.transpose();
    m.mass << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    m.mass *= measure / 12.0;
    return m;
}

SparseMatrix from_triplets(Index rows, Index cols, const Triplets& t) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

void check_symmetric_spd(const SparseMatrix& g, const char* what) {
    if (g.rows() != g.cols()) {
        throw DomainError(std::string(what) + " is not square");
    }
    const SparseMatrix asym = SparseMatrix(g.transpose()) - g;
    if (asym.norm() > 1e-12 * std::max(1.0, g.norm())) {
        throw DomainError(std::string(what) + " is not symmetric");
    }
    Eigen::SimplicialLLT<SparseMatrix> llt(g);
    if (llt.info() != Eigen::Success) {
        throw DomainError(std::string(what) + " is not positive definite");
    }
}

}  // namespace

Form form_from_name(std::string_view name) {
    if (name == "grad_grad") return Form::GradGrad;
    if (name == "grad_grad_plus_mass") return Form::GradGradPlusMass;
    throw ConfigError("unknown form '" + std::string(name) +
                      "' (expected grad_grad or grad_grad_plus_mass)");
}

std::string_view form_name(Form form) {
    return form == Form::GradGrad ? "grad_grad" : "grad_grad_plus_mass";
}

// ---------------------------------------------------------------------------
// ParameterField

ParameterField::ParameterField(FieldKind kind, Eigen::VectorXd values, double lower, double upper,
                               SparseMatrix reg_gram)
    : kind_(kind), values_(std::move(values)), lower_(lower), upper_(upper) {
    const char* name = kind_ == FieldKind::Ellipticity ? "ellipticity bounds" : "friction bounds";
    if (!(lower_ < upper_) || !std::isfinite(lower_) || !std::isfinite(upper_)) {
        throw DomainError(std::string(name) + ": lower bound must be below upper bound");
    }
    if (kind_ == FieldKind::Ellipticity && !(lower_ > 0.0)) {
        throw DomainError(std::string(name) + ": lower bound must be positive");
    }
    if (kind_ == FieldKind::Friction && lower_ < 0.0) {
        throw DomainError(std::string(name) + ": lower bound must be nonnegative");
    }
    if (reg_gram.rows() != values_.size()) {
        throw DomainError("regularization Gram matrix does not match the field size");
    }
    check_symmetric_spd(reg_gram, "regularization Gram matrix");
    gram_ = std::make_shared<const SparseMatrix>(std::move(reg_gram));
    validate_values();
}

ParameterField::ParameterField(FieldKind kind, Eigen::VectorXd values, double lower, double upper,
                               std::shared_ptr<const SparseMatrix> gram)
    : kind_(kind), values_(std::move(values)), lower_(lower), upper_(upper), gram_(std::move(gram)) {
    if (values_.size() != gram_->rows()) {
        throw DomainError("parameter vector does not match the field size");
    }
    validate_values();
}

void ParameterField::validate_values() const {
    for (Index i = 0; i < values_.size(); ++i) {
        const double v = values_[i];
        if (!(v >= lower_ && v <= upper_)) {
            throw DomainError(std::string(kind_ == FieldKind::Ellipticity ? "ellipticity"
                                                                           : "friction") +
                              " value " + std::to_string(v) + " at index " + std::to_string(i) +
                              " lies outside [" + std::to_string(lower_) + ", " +
                              std::to_string(upper_) + "]");
        }
    }
}

ParameterField ParameterField::with_values(Eigen::VectorXd values) const {
    return ParameterField(kind_, std::move(values), lower_, upper_, gram_);
}

Eigen::VectorXd ParameterField::project(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower_).cwiseMin(upper_);
}

SparseMatrix ellipticity_gram(const Mesh& mesh) {
    const Index ne = mesh.num_elements();
    Triplets t;
    for (Index k = 0; k < ne; ++k) t.emplace_back(k, k, mesh.element_measure(k));

    // Facet -> adjacent elements. In 1D facets are nodes, in 2D edges.
    std::map<std::pair<Index, Index>, std::vector<Index>> facets;
    for (Index k = 0; k < ne; ++k) {
        const auto& el = mesh.elements()[static_cast<std::size_t>(k)];
        if (mesh.dimension() == 1) {
            facets[{el[0], el[0]}].push_back(k);
            facets[{el[1], el[1]}].push_back(k);
        } else {
            for (std::size_t a = 0; a < 3; ++a) {
                Index i = el[a];
                Index j = el[(a + 1) % 3];
                facets[{std::min(i, j), std::max(i, j)}].push_back(k);
            }
        }
    }
    for (const auto& [facet, adjacent] : facets) {
        if (adjacent.size() != 2) continue;
        const Index a = adjacent[0];
        const Index b = adjacent[1];
        double facet_measure = 1.0;
        if (mesh.dimension() == 2) {
            const Point& p = mesh.nodes()[static_cast<std::size_t>(facet.first)];
            const Point& q = mesh.nodes()[static_cast<std::size_t>(facet.second)];
            facet_measure = std::hypot(q.x - p.x, q.y - p.y);
        }
        const Point ca = mesh.element_centroid(a);
        const Point cb = mesh.element_centroid(b);
        const double w = facet_measure / std::hypot(cb.x - ca.x, cb.y - ca.y);
        t.emplace_back(a, a, w);
        t.emplace_back(b, b, w);
        t.emplace_back(a, b, -w);
        t.emplace_back(b, a, -w);
    }
    return from_triplets(ne, ne, t);
}

SparseMatrix friction_gram(const Mesh& mesh) {
    const Index nf = mesh.num_friction();
    Triplets t;
    if (mesh.dimension() == 1) {
        for (Index i = 0; i < nf; ++i) t.emplace_back(i, i, 1.0);
        return from_triplets(nf, nf, t);
    }
    // Friction nodes lie on y = 0 of the unit square; the corners x = 0 and
    // x = 1 are Dirichlet nodes and only contribute to the diagonal.
    std::vector<std::pair<double, Index>> order;
    for (Index i = 0; i < nf; ++i) {
        order.emplace_back(mesh.nodes()[static_cast<std::size_t>(mesh.friction_nodes()[static_cast<std::size_t>(i)])].x, i);
    }
    std::sort(order.begin(), order.end());
    auto add_segment = [&t](double h, Index a, Index b) {
        const double diag = h / 3.0 + 1.0 / h;
        const double off = h / 6.0 - 1.0 / h;
        if (a >= 0) t.emplace_back(a, a, diag);
        if (b >= 0) t.emplace_back(b, b, diag);
        if (a >= 0 && b >= 0) {
            t.emplace_back(a, b, off);
            t.emplace_back(b, a, off);
        }
    };
    double prev_x = 0.0;
    Index prev = -1;
    for (const auto& [x, i] : order) {
        add_segment(x - prev_x, prev, i);
        prev_x = x;
        prev = i;
    }
    add_segment(1.0 - prev_x, prev, -1);
    return from_triplets(nf, nf, t);
}

ParameterField make_ellipticity(const Mesh& mesh, const Eigen::VectorXd& values, double lower,
                                double upper) {
    if (values.size() != mesh.num_elements()) {
        throw DomainError("ellipticity field needs one value per element");
    }
    return ParameterField(FieldKind::Ellipticity, values, lower, upper, ellipticity_gram(mesh));
}

ParameterField make_ellipticity(const Mesh& mesh, double value, double lower, double upper) {
    return make_ellipticity(mesh, Eigen::VectorXd::Constant(mesh.num_elements(), value), lower,
                            upper);
}

ParameterField make_friction(const Mesh& mesh, const Eigen::VectorXd& values, double lower,
                             double upper) {
    if (values.size() != mesh.num_friction()) {
        throw DomainError("friction field needs one value per friction node");
    }
    return ParameterField(FieldKind::Friction, values, lower, upper, friction_gram(mesh));
}

ParameterField make_friction(const Mesh& mesh, double value, double lower, double upper) {
    return make_friction(mesh, Eigen::VectorXd::Constant(mesh.num_friction(), value), lower,
                         upper);
}

double reg_inner(const ParameterField& field, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != field.size() || b.size() != field.size()) {
        throw DomainError("reg_inner: coefficient vectors do not match the field size");
    }
    return a.dot(field.gram() * b);
}

// ---------------------------------------------------------------------------
// Problem

Problem::Problem(Mesh mesh, Form form, SourceFunction source)
    : mesh_(std::move(mesh)), form_(form), source_(std::move(source)) {
    if (!source_) throw ConfigError("problem needs a source function");
    const Index nd = mesh_.num_dofs();
    const int ns = mesh_.element_size();
    load_ = Eigen::VectorXd::Zero(nd);
    Triplets mass_t;
    Triplets gram_t;
    local_.reserve(static_cast<std::size_t>(mesh_.num_elements()));
    for (Index k = 0; k < mesh_.num_elements(); ++k) {
        const LocalPair lp = local_matrices(mesh_, k);
        local_.push_back(form_ == Form::GradGrad ? lp.stiffness
                                                 : Eigen::Matrix3d(lp.stiffness + lp.mass));
        const auto& el = mesh_.elements()[static_cast<std::size_t>(k)];
        const double g = source_(mesh_.element_centroid(k));
        const double share = mesh_.element_measure(k) / ns;
        for (int a = 0; a < ns; ++a) {
            const Index da = mesh_.dof_of_node(el[static_cast<std::size_t>(a)]);
            if (da < 0) continue;
            load_[da] += g * share;
            for (int b = 0; b < ns; ++b) {
                const Index db = mesh_.dof_of_node(el[static_cast<std::size_t>(b)]);
                if (db < 0) continue;
                mass_t.emplace_back(da, db, lp.mass(a, b));
                gram_t.emplace_back(da, db, lp.mass(a, b) + lp.stiffness(a, b));
            }
        }
    }
    mass_ = from_triplets(nd, nd, mass_t);
    v_gram_ = from_triplets(nd, nd, gram_t);
}

SparseMatrix Problem::assemble_matrix(const Eigen::VectorXd& coefficients) const {
    if (coefficients.size() != mesh_.num_elements()) {
        throw DomainError("coefficient vector needs one value per element");
    }
    const int ns = mesh_.element_size();
    Triplets t;
    t.reserve(static_cast<std::size_t>(mesh_.num_elements() * ns * ns));
    for (Index k = 0; k < mesh_.num_elements(); ++k) {
        const auto& el = mesh_.elements()[static_cast<std::size_t>(k)];
        const auto& a_k = local_[static_cast<std::size_t>(k)];
        for (int a = 0; a < ns; ++a) {
            const Index da = mesh_.dof_of_node(el[static_cast<std::size_t>(a)]);
            if (da < 0) continue;
            for (int b = 0; b < ns; ++b) {
                const Index db = mesh_.dof_of_node(el[static_cast<std::size_t>(b)]);
                if (db < 0) continue;
                t.emplace_back(da, db, coefficients[k] * a_k(a, b));
            }
        }
    }
    return from_triplets(mesh_.num_dofs(), mesh_.num_dofs(), t);
}

DiscreteOperator Problem::operator_for(const ParameterField& e) const {
    if (e.kind() != FieldKind::Ellipticity || e.size() != mesh_.num_elements()) {
        throw DomainError("operator assembly needs an elementwise ellipticity field");
    }
    // ParameterField guarantees lower <= e <= upper with lower > 0.
    return {assemble_matrix(e.values()), load_};
}

Eigen::VectorXd Problem::apply(const Eigen::VectorXd& coefficients,
                               const Eigen::VectorXd& u_dofs) const {
    if (coefficients.size() != mesh_.num_elements() || u_dofs.size() != mesh_.num_dofs()) {
        throw DomainError("Problem::apply: dimension mismatch");
    }
    const int ns = mesh_.element_size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh_.num_dofs());
    for (Index k = 0; k < mesh_.num_elements(); ++k) {
        const auto& el = mesh_.elements()[static_cast<std::size_t>(k)];
        const auto& a_k = local_[static_cast<std::size_t>(k)];
        for (int a = 0; a < ns; ++a) {
            const Index da = mesh_.dof_of_node(el[static_cast<std::size_t>(a)]);
            if (da < 0) continue;
            double acc = 0.0;
            for (int b = 0; b < ns; ++b) {
                const Index db = mesh_.dof_of_node(el[static_cast<std::size_t>(b)]);
                if (db >= 0) acc += a_k(a, b) * u_dofs[db];
            }
            out[da] += coefficients[k] * acc;
        }
    }
    return out;
}

Eigen::VectorXd Problem::element_forms(const Eigen::VectorXd& u_dofs,
                                       const Eigen::VectorXd& p_dofs) const {
    if (u_dofs.size() != mesh_.num_dofs() || p_dofs.size() != mesh_.num_dofs()) {
        throw DomainError("Problem::element_forms: dimension mismatch");
    }
    const int ns = mesh_.element_size();
    Eigen::VectorXd out(mesh_.num_elements());
    for (Index k = 0; k < mesh_.num_elements(); ++k) {
        const auto& el = mesh_.elements()[static_cast<std::size_t>(k)];
        Eigen::Vector3d uk = Eigen::Vector3d::Zero();
        Eigen::Vector3d pk = Eigen::Vector3d::Zero();
        for (int a = 0; a < ns; ++a) {
            const Index d = mesh_.dof_of_node(el[static_cast<std::size_t>(a)]);
            if (d < 0) continue;
            uk[a] = u_dofs[d];
            pk[a] = p_dofs[d];
        }
        out[k] = uk.dot(local_[static_cast<std::size_t>(k)] * pk);
    }
    return out;
}

double Problem::v_norm(const Eigen::VectorXd& nodal) const {
    const Eigen::VectorXd u = mesh_.restrict_to_dofs(nodal);
    return std::sqrt(std::max(0.0, u.dot(v_gram_ * u)));
}

double Problem::l2_norm(const Eigen::VectorXd& nodal) const {
    const Eigen::VectorXd u = mesh_.restrict_to_dofs(nodal);
    return std::sqrt(std::max(0.0, u.dot(mass_ * u)));
}

DiscreteOperator assemble_operator(const Mesh& mesh, const ParameterField& e, Form form,
                                   const SourceFunction& source) {
    return Problem(mesh, form, source).operator_for(e);
}

// ---------------------------------------------------------------------------
// Trace

Eigen::VectorXd trace_apply(const Mesh& mesh, const Eigen::VectorXd& nodal) {
    if (nodal.size() != mesh.num_nodes()) {
        throw DomainError("trace_apply: nodal vector has wrong length");
    }
    Eigen::VectorXd out(mesh.num_friction());
    for (Index i = 0; i < mesh.num_friction(); ++i) {
        out[i] = nodal[mesh.friction_nodes()[static_cast<std::size_t>(i)]];
    }
    return out;
}

Eigen::VectorXd trace_adjoint(const Mesh& mesh, const Eigen::VectorXd& mu) {
    if (mu.size() != mesh.num_friction()) {
        throw DomainError("trace_adjoint: vector on D has wrong length");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (Index i = 0; i < mesh.num_friction(); ++i) {
        const auto ii = static_cast<std::size_t>(i);
        out[mesh.friction_nodes()[ii]] += mesh.friction_weights()[ii] * mu[i];
    }
    return out;
}

double friction_inner(const Mesh& mesh, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != mesh.num_friction() || b.size() != mesh.num_friction()) {
        throw DomainError("friction_inner: vectors on D have wrong length");
    }
    double s = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        s += mesh.friction_weights()[static_cast<std::size_t>(i)] * a[i] * b[i];
    }
    return s;
}

}  // namespace viident
