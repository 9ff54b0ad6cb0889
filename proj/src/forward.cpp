#include "viident/forward.hpp"

#include "viident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SparseCholesky>

namespace viident {

namespace {

void check_friction(const Mesh& mesh, const ParameterField& f) {
    if (f.kind() != FieldKind::Friction || f.size() != mesh.num_friction()) {
        throw DomainError("friction field does not match the mesh friction set");
    }
}

void check_operator(const DiscreteOperator& op, const Mesh& mesh) {
    if (op.matrix.rows() != mesh.num_dofs() || op.matrix.cols() != mesh.num_dofs() ||
        op.load.size() != mesh.num_dofs()) {
        throw DomainError("discrete operator does not match the mesh dofs");
    }
}

/// c_i = w_i f_i, the friction bound at the i-th friction node.
Eigen::VectorXd friction_bounds(const Mesh& mesh, const ParameterField& f) {
    Eigen::VectorXd c(mesh.num_friction());
    for (Index i = 0; i < c.size(); ++i) {
        c[i] = mesh.friction_weights()[static_cast<std::size_t>(i)] * f.values()[i];
    }
    return c;
}

SparseMatrix principal_submatrix(const SparseMatrix& k, const std::vector<Index>& keep) {
    std::vector<Index> pos(static_cast<std::size_t>(k.rows()), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) pos[static_cast<std::size_t>(keep[i])] = static_cast<Index>(i);
    std::vector<Eigen::Triplet<double>> t;
    for (Index col = 0; col < k.outerSize(); ++col) {
        const Index pc = pos[static_cast<std::size_t>(col)];
        if (pc < 0) continue;
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const Index pr = pos[static_cast<std::size_t>(it.row())];
            if (pr >= 0) t.emplace_back(pr, pc, it.value());
        }
    }
    const auto n = static_cast<Index>(keep.size());
    SparseMatrix sub(n, n);
    sub.setFromTriplets(t.begin(), t.end());
    return sub;
}

Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
    if (ldlt.info() != Eigen::Success) {
        throw SolverError("sparse LDLT factorization failed", std::numeric_limits<double>::quiet_NaN(), 0);
    }
    return ldlt.solve(b);
}

double energy_dofs(const SparseMatrix& k, const Eigen::VectorXd& l, const Mesh& mesh,
                   const Eigen::VectorXd& c, const Eigen::VectorXd& x) {
    double s = 0.5 * x.dot(k * x) - l.dot(x);
    for (Index i = 0; i < c.size(); ++i) s += c[i] * std::abs(x[mesh.friction_dof(i)]);
    return s;
}

double soft_threshold(double z, double c) {
    if (z > c) return z - c;
    if (z < -c) return z + c;
    return 0.0;
}

// Natural residual x - prox(x - g): g itself on unpenalized dofs,
// x_i - soft(x_i - g_i, c_i) on friction dofs.
double natural_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Mesh& mesh,
                        const Eigen::VectorXd& c) {
    Eigen::VectorXd r = g;
    for (Index i = 0; i < c.size(); ++i) {
        const Index d = mesh.friction_dof(i);
        r[d] = x[d] - soft_threshold(x[d] - g[d], c[i]);
    }
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

enum class Slot { Free, Zero, Positive, Negative };

}  // namespace

double vi_energy(const DiscreteOperator& op, const Mesh& mesh, const ParameterField& f,
                 const Eigen::VectorXd& u) {
    check_friction(mesh, f);
    check_operator(op, mesh);
    return energy_dofs(op.matrix, op.load, mesh, friction_bounds(mesh, f), mesh.restrict_to_dofs(u));
}

Eigen::VectorXd regularized_residual(const DiscreteOperator& op, const Mesh& mesh,
                                     const ParameterField& f, const KernelSpec& kernel, double eps,
                                     const Eigen::VectorXd& u) {
    check_friction(mesh, f);
    check_operator(op, mesh);
    const Eigen::VectorXd x = mesh.restrict_to_dofs(u);
    const Eigen::VectorXd c = friction_bounds(mesh, f);
    Eigen::VectorXd r = op.matrix * x - op.load;
    for (Index i = 0; i < c.size(); ++i) {
        const Index d = mesh.friction_dof(i);
        r[d] += c[i] * kernel.modulus(eps, x[d]).first_derivative;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Oracle: feature-sign active set on the dofs.

ForwardState solve_vi_oracle(const DiscreteOperator& op, const Mesh& mesh, const ParameterField& f,
                             const SolverOptions& options) {
    check_friction(mesh, f);
    check_operator(op, mesh);
    const SparseMatrix& k = op.matrix;
    const Eigen::VectorXd& l = op.load;
    const Index n = mesh.num_dofs();
    const Eigen::VectorXd c = friction_bounds(mesh, f);
    const int cap = options.active_set_max_iters >= 0
                        ? options.active_set_max_iters
                        : 2 * static_cast<int>(mesh.num_friction()) + 10;

    std::vector<Slot> slot(static_cast<std::size_t>(n), Slot::Free);
    std::vector<Index> friction_of_dof(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < c.size(); ++i) {
        const Index d = mesh.friction_dof(i);
        friction_of_dof[static_cast<std::size_t>(d)] = i;
        // Nodes with zero friction carry no nonsmooth term.
        if (c[i] > 0.0) slot[static_cast<std::size_t>(d)] = Slot::Zero;
    }
    auto bound = [&](Index d) { return c[friction_of_dof[static_cast<std::size_t>(d)]]; };
    auto energy = [&](const Eigen::VectorXd& x) { return energy_dofs(k, l, mesh, c, x); };

    // Solve the equality-constrained QP on the non-zero slots with fixed signs.
    auto qp_solve = [&]() {
        std::vector<Index> active;
        for (Index d = 0; d < n; ++d) {
            if (slot[static_cast<std::size_t>(d)] != Slot::Zero) active.push_back(d);
        }
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
        if (active.empty()) return y;
        Eigen::VectorXd rhs(static_cast<Index>(active.size()));
        for (std::size_t a = 0; a < active.size(); ++a) {
            const Index d = active[a];
            double r = l[d];
            if (slot[static_cast<std::size_t>(d)] == Slot::Positive) r -= bound(d);
            if (slot[static_cast<std::size_t>(d)] == Slot::Negative) r += bound(d);
            rhs[static_cast<Index>(a)] = r;
        }
        const Eigen::VectorXd ya = solve_spd(principal_submatrix(k, active), rhs);
        for (std::size_t a = 0; a < active.size(); ++a) y[active[a]] = ya[static_cast<Index>(a)];
        return y;
    };

    const double scale = [&] {
        double s = l.size() ? l.cwiseAbs().maxCoeff() : 0.0;
        for (Index col = 0; col < k.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(k, col); it; ++it) s = std::max(s, std::abs(it.value()));
        }
        return s;
    }();
    const double tiny = 512.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
    const double tol = std::max(options.tol, tiny);

    ForwardState state;
    state.eps = 0.0;
    Eigen::VectorXd x = qp_solve();
    state.energy_history.push_back(energy(x));

    int iterations = 0;
    for (;;) {
        const Eigen::VectorXd g = k * x - l;
        bool active_optimal = true;
        for (Index d = 0; d < n && active_optimal; ++d) {
            switch (slot[static_cast<std::size_t>(d)]) {
            case Slot::Free: active_optimal = std::abs(g[d]) <= tol; break;
            case Slot::Positive: active_optimal = std::abs(g[d] + bound(d)) <= tol; break;
            case Slot::Negative: active_optimal = std::abs(g[d] - bound(d)) <= tol; break;
            case Slot::Zero: break;
            }
        }
        if (active_optimal) {
            Index best = -1;
            double worst = tiny;
            for (Index d = 0; d < n; ++d) {
                if (slot[static_cast<std::size_t>(d)] != Slot::Zero) continue;
                const double violation = std::abs(g[d]) - bound(d);
                if (violation > worst) {
                    worst = violation;
                    best = d;
                }
            }
            if (best < 0) {
                state.residual_norm = natural_residual(x, g, mesh, c);
                if (state.residual_norm > tol) {
                    throw SolverError("active-set oracle stopped above tolerance",
                                      state.residual_norm, iterations);
                }
                state.iterations = iterations;
                state.u = mesh.extend_to_nodes(x);
                return state;
            }
            slot[static_cast<std::size_t>(best)] = g[best] > 0.0 ? Slot::Negative : Slot::Positive;
        }

        if (++iterations > cap) {
            throw SolverError("active-set oracle hit its iteration cap (" + std::to_string(cap) + ")",
                              natural_residual(x, g, mesh, c), iterations - 1);
        }

        // Discrete line search over x + t (y - x): t = 1 and every sign change.
        const Eigen::VectorXd y = qp_solve();
        const Eigen::VectorXd step = y - x;
        double best_t = 1.0;
        double best_e = energy(y);
        for (Index d = 0; d < n; ++d) {
            const Slot s = slot[static_cast<std::size_t>(d)];
            if ((s != Slot::Positive && s != Slot::Negative) || x[d] == 0.0) continue;
            if ((x[d] > 0.0) == (y[d] > 0.0) && y[d] != 0.0) continue;
            const double t = x[d] / (x[d] - y[d]);
            if (!(t > 0.0 && t < 1.0)) continue;
            Eigen::VectorXd z = x + t * step;
            z[d] = 0.0;
            const double ez = energy(z);
            if (ez < best_e) {
                best_e = ez;
                best_t = t;
            }
        }
        const double e_old = state.energy_history.back();
        if (best_e > e_old + tiny * std::max(1.0, std::abs(e_old))) {
            throw SolverError("active-set oracle failed to decrease the energy",
                              natural_residual(x, g, mesh, c), iterations);
        }
        Eigen::VectorXd x_new = best_t == 1.0 ? y : Eigen::VectorXd(x + best_t * step);
        for (Index d = 0; d < n; ++d) {
            Slot& s = slot[static_cast<std::size_t>(d)];
            if (s != Slot::Positive && s != Slot::Negative) continue;
            const bool crossed = best_t < 1.0 && x[d] != 0.0 &&
                                 std::abs(x[d] / (x[d] - y[d]) - best_t) <= 1e-14;
            if (crossed || x_new[d] == 0.0) {
                x_new[d] = 0.0;
                s = Slot::Zero;
            } else {
                s = x_new[d] > 0.0 ? Slot::Positive : Slot::Negative;
            }
        }
        x = std::move(x_new);
        state.energy_history.push_back(energy(x));
    }
}

// ---------------------------------------------------------------------------
// Regularized equation: damped Newton.

ForwardState solve_regularized(const DiscreteOperator& op, const Mesh& mesh,
                               const ParameterField& f, const KernelSpec& kernel, double eps,
                               const SolverOptions& options,
                               const std::optional<Eigen::VectorXd>& initial_guess) {
    if (!(eps > 0.0)) throw DomainError("regularized solve needs eps > 0");
    check_friction(mesh, f);
    check_operator(op, mesh);
    const SparseMatrix& k = op.matrix;
    const Eigen::VectorXd c = friction_bounds(mesh, f);

    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    ldlt.analyzePattern(k);

    Eigen::VectorXd x;
    if (initial_guess) {
        x = mesh.restrict_to_dofs(*initial_guess);
    } else {
        ldlt.factorize(k);
        if (ldlt.info() != Eigen::Success) {
            throw SolverError("factorization of T(e) failed", std::numeric_limits<double>::quiet_NaN(), 0);
        }
        x = ldlt.solve(op.load);
    }

    auto residual = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd r = k * v - op.load;
        for (Index i = 0; i < c.size(); ++i) {
            const Index d = mesh.friction_dof(i);
            r[d] += c[i] * kernel.modulus(eps, v[d]).first_derivative;
        }
        return r;
    };

    auto newton_direction = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& rv, double rn, int it) {
        SparseMatrix jac = k;
        for (Index i = 0; i < c.size(); ++i) {
            const Index d = mesh.friction_dof(i);
            jac.coeffRef(d, d) += c[i] * kernel.modulus(eps, v[d]).second_derivative;
        }
        ldlt.factorize(jac);
        if (ldlt.info() != Eigen::Success) {
            throw SolverError("factorization of the Newton Jacobian failed", rn, it);
        }
        return Eigen::VectorXd(-ldlt.solve(rv));
    };

    double k_max = 0.0;
    for (Index col = 0; col < k.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) k_max = std::max(k_max, std::abs(it.value()));
    }
    const double load_max = op.load.size() ? op.load.cwiseAbs().maxCoeff() : 0.0;
    const double root_n = std::sqrt(static_cast<double>(std::max<Index>(x.size(), 1)));
    // Roundoff level of ||K x - l||_2.
    auto tolerance = [&](const Eigen::VectorXd& v) {
        const double v_max = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
        return std::max(options.tol,
                        4.0 * std::numeric_limits<double>::epsilon() * root_n * (k_max * v_max + load_max));
    };

    ForwardState state;
    state.eps = eps;
    Eigen::VectorXd r = residual(x);
    double rn = r.norm();
    for (int it = 0;; ++it) {
        state.residual_history.push_back(rn);
        if (rn <= tolerance(x)) {
            if (it < options.min_newton_steps) {
                // Already within tolerance (typically a warm start): one full
                // step, kept only if it lowers the residual.
                const Eigen::VectorXd x_trial = x + newton_direction(x, r, rn, it);
                const Eigen::VectorXd r_trial = residual(x_trial);
                if (r_trial.norm() < rn) {
                    x = x_trial;
                    rn = r_trial.norm();
                    state.residual_history.push_back(rn);
                    ++it;
                }
            }
            state.u = mesh.extend_to_nodes(x);
            state.residual_norm = rn;
            state.iterations = it;
            return state;
        }
        if (it >= options.newton_max_iters) {
            throw SolverError("Newton iteration cap reached for eps = " + std::to_string(eps), rn, it);
        }
        const Eigen::VectorXd dx = newton_direction(x, r, rn, it);

        // Armijo on phi = 1/2 ||R||^2; along the Newton direction phi'(0) = -||R||^2.
        const double phi0 = 0.5 * rn * rn;
        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_trial;
        Eigen::VectorXd r_trial;
        for (int b = 0; b <= options.max_backtracks; ++b, t *= 0.5) {
            x_trial = x + t * dx;
            r_trial = residual(x_trial);
            if (0.5 * r_trial.squaredNorm() <= (1.0 - 2.0 * options.armijo_c * t) * phi0) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw SolverError("Newton line search failed for eps = " + std::to_string(eps), rn, it);
        }
        x = std::move(x_trial);
        r = std::move(r_trial);
        rn = r.norm();
    }
}

// ---------------------------------------------------------------------------

SolutionMap::SolutionMap(const Problem& problem, KernelSpec kernel, SolverOptions options)
    : problem_(&problem), kernel_(std::move(kernel)), options_(options) {}

const DiscreteOperator& SolutionMap::operator_for(const ParameterField& e) {
    if (!cached_e_ || cached_e_->size() != e.size() || *cached_e_ != e.values()) {
        cached_op_ = problem_->operator_for(e);
        cached_e_ = e.values();
    }
    return cached_op_;
}

ForwardState SolutionMap::operator()(const ParameterField& e, const ParameterField& f, double eps,
                                     const std::optional<Eigen::VectorXd>& warm_start) {
    if (eps < 0.0) throw DomainError("eps must be nonnegative");
    const DiscreteOperator& op = operator_for(e);
    if (eps == 0.0) return solve_vi_oracle(op, problem_->mesh(), f, options_);
    return solve_regularized(op, problem_->mesh(), f, kernel_, eps, options_, warm_start);
}

ForwardState solution_map(const ParameterField& e, const ParameterField& f, double eps,
                          const Problem& problem, const KernelSpec& kernel,
                          const SolverOptions& options) {
    SolutionMap map(problem, kernel, options);
    return map(e, f, eps);
}

}  // namespace viident
