#include "doctest.h"

#include "oracles.hpp"
#include "viident/errors.hpp"
#include "viident/sensitivity.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

using namespace viident;

namespace {

Eigen::VectorXd random_vector(Index n, double lo, double hi, unsigned seed) {
    const auto v = oracle::uniform_samples(static_cast<std::size_t>(n), lo, hi, seed);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

Problem make(int dim) {
    if (dim == 1) {
        return Problem(build_mesh({1, 32, 0.0, 1.0}), Form::GradGrad, [](const Point&) { return 1.0; });
    }
    return Problem(build_mesh({2, 6, 0.0, 1.0}), Form::GradGradPlusMass, [](const Point& p) {
        return 6.0 * std::sin(std::numbers::pi * p.x) * (1.2 - p.y);
    });
}

struct Point0 {
    ParameterField e;
    ParameterField f;
};

Point0 random_point(const Mesh& m, unsigned seed) {
    return {make_ellipticity(m, random_vector(m.num_elements(), 0.7, 1.6, seed), 0.5, 2.0),
            make_friction(m, random_vector(m.num_friction(), 0.05, 0.6, seed + 1), 0.0, 1.0)};
}

// Central difference of S_eps along (de, df), both with tight Newton solves.
Eigen::VectorXd fd_derivative(const Problem& p, const Point0& x, const KernelSpec& kernel, double eps,
                              const Eigen::VectorXd& de, const Eigen::VectorXd& df, double h) {
    SolverOptions tight;
    tight.tol = 1e-14;
    auto at = [&](double s) {
        const ParameterField e = x.e.with_values(x.e.values() + s * de);
        const ParameterField f = x.f.with_values(x.f.values() + s * df);
        return solve_regularized(p.operator_for(e), p.mesh(), f, kernel, eps, tight).u;
    };
    return (at(h) - at(-h)) / (2 * h);
}

}  // namespace

TEST_CASE("directional derivatives agree with central differences") {
    for (int dim : {1, 2}) {
        const Problem p = make(dim);
        const Mesh& m = p.mesh();
        for (const auto& kernel : KernelSpec::builtin()) {
            for (double eps : {1e-1, 1e-2}) {
                for (unsigned seed : {10u, 20u}) {
                    CAPTURE(dim);
                    CAPTURE(kernel.name());
                    CAPTURE(eps);
                    const Point0 x = random_point(m, seed);
                    const ForwardState s = solve_regularized(p.operator_for(x.e), m, x.f, kernel, eps);
                    const LinearizedSystem sys(p, x.e, x.f, kernel, eps, s);
                    const Eigen::VectorXd de = random_vector(m.num_elements(), -1, 1, seed + 2);
                    const Eigen::VectorXd df = random_vector(m.num_friction(), -1, 1, seed + 3);
                    const Eigen::VectorXd zero_e = Eigen::VectorXd::Zero(de.size());
                    const Eigen::VectorXd zero_f = Eigen::VectorXd::Zero(df.size());
                    const double h = 1e-6;

                    const Sensitivity se = sys.sensitivity_e(de);
                    const Eigen::VectorXd fe = fd_derivative(p, x, kernel, eps, de, zero_f, h);
                    CHECK(p.v_norm(se.delta_u - fe) <= 1e-5 * p.v_norm(fe));
                    CHECK(se.direction_kind == DirectionKind::Ellipticity);

                    const Sensitivity sf = sys.sensitivity_f(df);
                    const Eigen::VectorXd ff = fd_derivative(p, x, kernel, eps, zero_e, df, h);
                    CHECK(p.v_norm(sf.delta_u - ff) <= 1e-5 * std::max(p.v_norm(ff), 1e-12));
                    CHECK(sf.direction_kind == DirectionKind::Friction);
                    CHECK(se.residual <= 1e-10);
                    CHECK(sf.residual <= 1e-10);
                }
            }
        }
    }
}

TEST_CASE("sensitivities are linear and the joint derivative is the sum") {
    const Problem p = make(2);
    const Mesh& m = p.mesh();
    const Point0 x = random_point(m, 31);
    const KernelSpec kernel = KernelSpec::sigmoid();
    const ForwardState s = solve_regularized(p.operator_for(x.e), m, x.f, kernel, 1e-2);
    const LinearizedSystem sys(p, x.e, x.f, kernel, 1e-2, s);
    const Eigen::VectorXd d1 = random_vector(m.num_elements(), -1, 1, 1);
    const Eigen::VectorXd d2 = random_vector(m.num_elements(), -1, 1, 2);
    const Eigen::VectorXd g1 = random_vector(m.num_friction(), -1, 1, 3);
    const Eigen::VectorXd g2 = random_vector(m.num_friction(), -1, 1, 4);

    const Eigen::VectorXd lhs_e = sys.sensitivity_e(2 * d1 - 0.5 * d2).delta_u;
    const Eigen::VectorXd rhs_e = 2 * sys.sensitivity_e(d1).delta_u - 0.5 * sys.sensitivity_e(d2).delta_u;
    CHECK((lhs_e - rhs_e).norm() <= 1e-12 * rhs_e.norm());
    const Eigen::VectorXd lhs_f = sys.sensitivity_f(-g1 + 3 * g2).delta_u;
    const Eigen::VectorXd rhs_f = -sys.sensitivity_f(g1).delta_u + 3 * sys.sensitivity_f(g2).delta_u;
    CHECK((lhs_f - rhs_f).norm() <= 1e-12 * rhs_f.norm());

    const Sensitivity joint = sys.sensitivity(d1, g1);
    CHECK(joint.direction_kind == DirectionKind::Joint);
    const Eigen::VectorXd sum = sys.sensitivity_e(d1).delta_u + sys.sensitivity_f(g1).delta_u;
    CHECK((joint.delta_u - sum).norm() <= 1e-12 * sum.norm());
}

TEST_CASE("one factorization serves all solves") {
    const Problem p = make(1);
    const Mesh& m = p.mesh();
    const Point0 x = random_point(m, 41);
    const KernelSpec kernel = KernelSpec::sqrt();
    const ForwardState s = solve_regularized(p.operator_for(x.e), m, x.f, kernel, 1e-2);
    const LinearizedSystem sys(p, x.e, x.f, kernel, 1e-2, s);
    const Eigen::VectorXd de = random_vector(m.num_elements(), -1, 1, 5);
    const Eigen::VectorXd df = random_vector(m.num_friction(), -1, 1, 6);
    CHECK(sys.sensitivity_e(de).delta_u == sensitivity_e(s, p, x.e, x.f, kernel, 1e-2, de).delta_u);
    CHECK(sys.sensitivity_f(df).delta_u == sensitivity_f(s, p, x.e, x.f, kernel, 1e-2, df).delta_u);
    const Eigen::VectorXd obs = random_vector(m.num_nodes(), 0, 0.5, 7);
    CHECK(sys.adjoint(obs, MisfitNorm::L2) == adjoint_solve(s, p, x.e, x.f, kernel, 1e-2, obs));

    const Eigen::MatrixXd j(sys.jacobian());
    CHECK((j - j.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("adjoint identity for the misfit derivative") {
    for (MisfitNorm norm : {MisfitNorm::L2, MisfitNorm::V}) {
        for (int dim : {1, 2}) {
            const Problem p = make(dim);
            const Mesh& m = p.mesh();
            const Point0 x = random_point(m, 51);
            const KernelSpec kernel = KernelSpec::uniform_centered();
            const ForwardState s = solve_regularized(p.operator_for(x.e), m, x.f, kernel, 1e-1);
            const LinearizedSystem sys(p, x.e, x.f, kernel, 1e-1, s);
            Eigen::VectorXd obs = s.u + m.extend_to_nodes(random_vector(m.num_dofs(), -0.05, 0.05, 8));
            const Eigen::VectorXd pa = sys.adjoint(obs, norm);
            const Eigen::VectorXd de = random_vector(m.num_elements(), -1, 1, 9);
            const Eigen::VectorXd df = random_vector(m.num_friction(), -1, 1, 10);
            const Eigen::VectorXd du = m.restrict_to_dofs(sys.sensitivity(de, df).delta_u);
            // Directly: (u - obs)^T W du. Through the adjoint: -p^T (rhs_e + rhs_f).
            const Eigen::MatrixXd w = norm == MisfitNorm::L2 ? Eigen::MatrixXd(p.mass()) : Eigen::MatrixXd(p.v_gram());
            const double direct = m.restrict_to_dofs(s.u - obs).dot(w * du);
            const double via_adjoint = -m.restrict_to_dofs(pa).dot(sys.rhs_ellipticity(de) + sys.rhs_friction(df));
            CHECK(via_adjoint == doctest::Approx(direct).epsilon(1e-10));
            CHECK(misfit(p, s.u, obs, norm) ==
                  doctest::Approx(0.5 * m.restrict_to_dofs(s.u - obs).dot(w * m.restrict_to_dofs(s.u - obs))));
        }
    }
}

TEST_CASE("reduced gradients agree with differences of the objective") {
    const Problem p = make(1);
    const Mesh& m = p.mesh();
    const Point0 x = random_point(m, 61);
    const KernelSpec kernel = KernelSpec::sigmoid();
    const double eps = 1e-2, alpha = 1e-3, beta = 1e-2;
    const Point0 truth = random_point(m, 71);
    const Eigen::VectorXd obs = solve_vi_oracle(p.operator_for(truth.e), m, truth.f).u;

    SolverOptions tight;
    tight.tol = 1e-14;
    auto objective = [&](const ParameterField& e, const ParameterField& f) {
        const ForwardState s = solve_regularized(p.operator_for(e), m, f, kernel, eps, tight);
        const Eigen::VectorXd d = m.restrict_to_dofs(s.u - obs);
        return 0.5 * d.dot(p.mass() * d) + 0.5 * alpha * e.values().dot(e.gram() * e.values()) +
               0.5 * beta * f.values().dot(f.gram() * f.values());
    };

    const ForwardState s = solve_regularized(p.operator_for(x.e), m, x.f, kernel, eps, tight);
    const Eigen::VectorXd pa = adjoint_solve(s, p, x.e, x.f, kernel, eps, obs);
    const OptimalityBundle g = reduced_gradients(s, pa, p, x.e, x.f, kernel, eps, alpha, beta);
    CHECK(g.adjoint_p == pa);

    const double h = 1e-5;
    for (Index k : {Index(0), Index(7), Index(31)}) {
        Eigen::VectorXd de = Eigen::VectorXd::Zero(m.num_elements());
        de[k] = 1.0;
        const double fd = (objective(x.e.with_values(x.e.values() + h * de), x.f) -
                           objective(x.e.with_values(x.e.values() - h * de), x.f)) / (2 * h);
        CHECK(g.grad_e[k] == doctest::Approx(fd).epsilon(1e-6));
    }
    const Eigen::VectorXd df = Eigen::VectorXd::Ones(1);
    const double fd = (objective(x.e, x.f.with_values(x.f.values() + h * df)) -
                       objective(x.e, x.f.with_values(x.f.values() - h * df))) / (2 * h);
    CHECK(g.grad_f[0] == doctest::Approx(fd).epsilon(1e-6));

    CHECK(g.stationarity_e == doctest::Approx(projected_gradient_norm(x.e, g.grad_e)));
    CHECK(g.stationarity_e == doctest::Approx(g.grad_e.norm()));  // interior point
}

TEST_CASE("projected gradient norm on the box") {
    const Mesh m = build_mesh({2, 4, 0.0, 1.0});
    Eigen::VectorXd v(3);
    v << 0.0, 0.5, 1.0;
    const ParameterField f = make_friction(m, v, 0.0, 1.0);
    Eigen::VectorXd g(3);
    g << 2.0, 0.25, -3.0;  // pushes the bound entries outward
    CHECK(projected_gradient_norm(f, g) == doctest::Approx(0.25));
    g << -0.1, 0.0, 0.1;
    CHECK(projected_gradient_norm(f, g) == doctest::Approx(std::sqrt(0.02)));
    CHECK_THROWS_AS(projected_gradient_norm(f, Eigen::VectorXd::Zero(2)), DomainError);
}

TEST_CASE("linearization needs a regularized state") {
    const Problem p = make(1);
    const Mesh& m = p.mesh();
    const Point0 x = random_point(m, 81);
    const ForwardState s = solve_vi_oracle(p.operator_for(x.e), m, x.f);
    CHECK_THROWS_AS(LinearizedSystem(p, x.e, x.f, KernelSpec::sqrt(), 0.0, s), DomainError);
    CHECK_THROWS_AS(misfit_norm_from_name("H1"), ConfigError);
    CHECK(misfit_norm_from_name("V") == MisfitNorm::V);
    CHECK(misfit_norm_name(MisfitNorm::L2) == "L2");
}
