#include "doctest.h"

#include "oracles.hpp"
#include "viident/errors.hpp"
#include "viident/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

using namespace viident;

namespace {

Problem benchmark(int n) { return Problem(build_mesh({1, n, 0.0, 1.0}), Form::GradGrad, [](const Point&) { return 1.0; }); }

Problem square(int n, double amplitude) {
    return Problem(build_mesh({2, n, 0.0, 1.0}), Form::GradGrad, [amplitude](const Point& p) {
        return amplitude * std::sin(std::numbers::pi * p.x) * (1.0 + p.y);
    });
}

Eigen::VectorXd random_vector(Index n, double lo, double hi, unsigned seed) {
    const auto v = oracle::uniform_samples(static_cast<std::size_t>(n), lo, hi, seed);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

// Cyclic coordinate descent with soft thresholding on
// 1/2 x^T K x - l^T x + sum_i c_i |x_i|; slow but independent of the solver.
Eigen::VectorXd coordinate_descent(const SparseMatrix& k, const Eigen::VectorXd& l, const Eigen::VectorXd& c) {
    const Eigen::MatrixXd a(k);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(l.size());
    for (int sweep = 0; sweep < 200000; ++sweep) {
        double change = 0.0;
        for (Index i = 0; i < x.size(); ++i) {
            const double r = l[i] - a.row(i).dot(x) + a(i, i) * x[i];
            const double xi = std::copysign(std::max(std::abs(r) - c[i], 0.0), r) / a(i, i);
            change = std::max(change, std::abs(xi - x[i]));
            x[i] = xi;
        }
        if (change < 1e-15) break;
    }
    return x;
}

Eigen::VectorXd friction_costs(const Mesh& m, const ParameterField& f) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m.num_dofs());
    for (Index i = 0; i < m.num_friction(); ++i) {
        c[m.friction_dof(i)] = m.friction_weights()[static_cast<std::size_t>(i)] * f.values()[i];
    }
    return c;
}

}  // namespace

TEST_CASE("oracle reproduces the 1D benchmark") {
    const Problem p = benchmark(256);
    const DiscreteOperator op = p.operator_for(make_ellipticity(p.mesh(), 1.0, 0.5, 2.0));
    for (double fv : {0.0, 0.1, 0.25, 0.4, 0.5, 1.0}) {
        CAPTURE(fv);
        const ParameterField f = make_friction(p.mesh(), fv, 0.0, 2.0);
        const ForwardState s = solve_vi_oracle(op, p.mesh(), f);
        const double expected = std::max(0.5 - fv, 0.0);
        CHECK(std::abs(s.u[256] - expected) <= 2e-3);
        // P1 with one-point load is nodally exact for u = x - x^2/2 - min(f, 1/2) x.
        for (Index i = 0; i <= 256; i += 32) {
            const double x = i / 256.0;
            CHECK(s.u[i] == doctest::Approx(x - x * x / 2 - std::min(fv, 0.5) * x).epsilon(1e-12).scale(1.0));
        }
        CHECK(s.residual_norm <= SolverOptions{}.tol);
        CHECK(s.eps == 0.0);
    }
}

TEST_CASE("oracle agrees with coordinate descent") {
    for (int dim : {1, 2}) {
        const Problem p = dim == 1 ? benchmark(12) : square(6, 8.0);
        const Mesh& m = p.mesh();
        const Eigen::VectorXd ev = 0.5 + 1.5 * (random_vector(m.num_elements(), -1, 1, 5).array() + 1.0) / 2.0;
        const DiscreteOperator op = p.operator_for(make_ellipticity(m, ev, 0.5, 2.0));
        for (unsigned seed : {1u, 2u, 3u}) {
            const ParameterField f = make_friction(m, random_vector(m.num_friction(), 0.0, 1.0, seed), 0.0, 1.0);
            const ForwardState s = solve_vi_oracle(op, m, f);
            const Eigen::VectorXd ref = coordinate_descent(op.matrix, op.load, friction_costs(m, f));
            CHECK((m.restrict_to_dofs(s.u) - ref).lpNorm<Eigen::Infinity>() <= 1e-10);
            CHECK(s.iterations <= 2 * m.num_friction() + 10);
        }
    }
}

TEST_CASE("oracle solution satisfies the variational inequality") {
    for (int dim : {1, 2}) {
        const Problem p = dim == 1 ? benchmark(64) : square(8, 10.0);
        const Mesh& m = p.mesh();
        const DiscreteOperator op = p.operator_for(make_ellipticity(m, 1.3, 0.5, 2.0));
        const ParameterField f = make_friction(m, 0.2, 0.0, 1.0);
        const ForwardState s = solve_vi_oracle(op, m, f);
        const Eigen::VectorXd u = m.restrict_to_dofs(s.u);
        const Eigen::VectorXd c = friction_costs(m, f);
        const Eigen::VectorXd grad = op.matrix * u - op.load;
        const double scale = op.load.lpNorm<Eigen::Infinity>() * std::max(1.0, u.lpNorm<Eigen::Infinity>());
        for (unsigned k = 0; k < 200; ++k) {
            const Eigen::VectorXd v = u + random_vector(m.num_dofs(), -1.0, 1.0, 1000 + k);
            const double lhs = grad.dot(v - u) + c.dot(v.cwiseAbs()) - c.dot(u.cwiseAbs());
            CHECK(lhs >= -1e-12 * scale * m.num_dofs());
        }
    }
}

TEST_CASE("oracle energies decrease monotonically") {
    const Problem p = square(10, 20.0);
    const Mesh& m = p.mesh();
    const DiscreteOperator op = p.operator_for(make_ellipticity(m, 1.0, 0.5, 2.0));
    const ParameterField f = make_friction(m, random_vector(m.num_friction(), 0.0, 0.6, 9), 0.0, 1.0);
    const ForwardState s = solve_vi_oracle(op, m, f);
    REQUIRE(s.energy_history.size() >= 2);
    for (std::size_t k = 1; k < s.energy_history.size(); ++k) {
        CHECK(s.energy_history[k] < s.energy_history[k - 1]);
    }
    CHECK(vi_energy(op, m, f, s.u) == doctest::Approx(s.energy_history.back()));
}

TEST_CASE("zero friction reduces to a linear solve; zero load gives zero") {
    for (int dim : {1, 2}) {
        const Problem p = dim == 1 ? benchmark(32) : square(6, 5.0);
        const Mesh& m = p.mesh();
        const DiscreteOperator op = p.operator_for(make_ellipticity(m, 1.0, 0.5, 2.0));
        const ParameterField f0 = make_friction(m, 0.0, 0.0, 1.0);
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(op.matrix);
        const Eigen::VectorXd linear = ldlt.solve(op.load);
        CHECK((m.restrict_to_dofs(solve_vi_oracle(op, m, f0).u) - linear).norm() <= 1e-12);
        for (const auto& kernel : KernelSpec::builtin()) {
            CHECK((m.restrict_to_dofs(solve_regularized(op, m, f0, kernel, 1e-3).u) - linear).norm() <= 1e-12);
        }

        const DiscreteOperator zero{op.matrix, Eigen::VectorXd::Zero(op.load.size())};
        const ParameterField f = make_friction(m, 0.3, 0.0, 1.0);
        CHECK(solve_vi_oracle(zero, m, f).u.norm() == 0.0);
        // Symmetric kernels have M'(0) = 0, so u = 0 solves the regularized equation.
        CHECK(solve_regularized(zero, m, f, KernelSpec::sqrt(), 1e-2).u.norm() <= 1e-14);
    }
}

TEST_CASE("regularized Newton converges for every kernel") {
    const Problem p = square(8, 10.0);
    const Mesh& m = p.mesh();
    const DiscreteOperator op = p.operator_for(make_ellipticity(m, 1.0, 0.5, 2.0));
    const ParameterField f = make_friction(m, 0.15, 0.0, 1.0);
    for (const auto& kernel : KernelSpec::builtin()) {
        for (double eps : {1e-1, 1e-3, 1e-5}) {
            CAPTURE(kernel.name());
            CAPTURE(eps);
            const ForwardState s = solve_regularized(op, m, f, kernel, eps);
            CHECK(s.residual_norm <= SolverOptions{}.tol);
            CHECK(regularized_residual(op, m, f, kernel, eps, s.u).norm() == doctest::Approx(s.residual_norm).scale(1e-11));
            CHECK(s.iterations <= 50);
            CHECK(s.eps == eps);
        }
    }
}

TEST_CASE("Newton converges quadratically near the solution") {
    const Problem p = benchmark(64);
    const Mesh& m = p.mesh();
    const DiscreteOperator op = p.operator_for(make_ellipticity(m, 1.0, 0.5, 2.0));
    const ParameterField f = make_friction(m, 0.45, 0.0, 1.0);
    const ForwardState s = solve_regularized(op, m, f, KernelSpec::sigmoid(), 1e-2);
    const auto& r = s.residual_history;
    REQUIRE(r.size() >= 3);
    std::vector<double> ratios;  // r_{k+1} / r_k^2 in the asymptotic regime
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
        if (r[k] < 1e-2 && r[k + 1] > 1e-13) ratios.push_back(r[k + 1] / (r[k] * r[k]));
    }
    REQUIRE(ratios.size() >= 2);
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    CHECK(*hi <= 1e2);
    CHECK(*hi <= 3.0 * *lo);
}

TEST_CASE("warm starts and the solution map") {
    const Problem p = benchmark(48);
    const Mesh& m = p.mesh();
    const ParameterField e = make_ellipticity(m, 1.1, 0.5, 2.0);
    const ParameterField f = make_friction(m, 0.3, 0.0, 1.0);
    SolutionMap map(p, KernelSpec::uniform_centered());
    const ForwardState cold = map(e, f, 1e-3);
    const ForwardState warm = map(e, f, 1e-3, cold.u);
    CHECK((cold.u - warm.u).norm() <= 1e-12);
    CHECK(warm.iterations <= 1);
    CHECK((map(e, f, 0.0).u - solve_vi_oracle(p.operator_for(e), m, f).u).norm() == 0.0);
    CHECK((solution_map(e, f, 1e-3, p, KernelSpec::uniform_centered()).u - cold.u).norm() <= 1e-12);
    CHECK_THROWS_AS(map(e, f, -1.0), DomainError);
    CHECK_THROWS_AS(solve_regularized(p.operator_for(e), m, f, KernelSpec::sqrt(), 0.0), DomainError);
}

TEST_CASE("solution is Lipschitz in the friction") {
    // With u(0) = 0: e_min |u'|^2 <= |df| |du(1)| <= |df| |u'|, and
    // ||u||_L2 <= (2/pi) ||u'||, hence ||du||_V <= sqrt(1 + 4/pi^2) |df| / e_min.
    const Problem p = benchmark(128);
    const Mesh& m = p.mesh();
    const ParameterField e = make_ellipticity(m, random_vector(m.num_elements(), 0.7, 1.8, 4), 0.5, 2.0);
    const DiscreteOperator op = p.operator_for(e);
    const double bound = std::sqrt(1.0 + 4.0 / (std::numbers::pi * std::numbers::pi)) / 0.7;
    const auto fs = oracle::uniform_samples(20, 0.0, 1.0, 77);
    for (std::size_t k = 0; k + 1 < fs.size(); ++k) {
        const auto u1 = solve_vi_oracle(op, m, make_friction(m, fs[k], 0.0, 1.0)).u;
        const auto u2 = solve_vi_oracle(op, m, make_friction(m, fs[k + 1], 0.0, 1.0)).u;
        CHECK(p.v_norm(u1 - u2) <= bound * std::abs(fs[k] - fs[k + 1]) * (1 + 1e-10) + 1e-14);
    }
}

TEST_CASE("size mismatches are rejected") {
    const Problem p = benchmark(8);
    const Problem q = square(4, 1.0);
    const DiscreteOperator op = p.operator_for(make_ellipticity(p.mesh(), 1.0, 0.5, 2.0));
    const ParameterField fq = make_friction(q.mesh(), 0.1, 0.0, 1.0);
    CHECK_THROWS_AS(solve_vi_oracle(op, p.mesh(), fq), DomainError);
    CHECK_THROWS_AS(solve_regularized(op, p.mesh(), fq, KernelSpec::sqrt(), 1e-2), DomainError);
}
