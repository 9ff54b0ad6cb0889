#include "viident/identification.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace viident {

void IdentificationConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("alpha and beta must be nonnegative");
    if (eps_schedule.empty()) throw ConfigError("eps_schedule must not be empty");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
        if (!(eps_schedule[i] > 0.0)) throw ConfigError("eps_schedule entries must be positive");
        if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1])) {
            throw ConfigError("eps_schedule must be strictly decreasing");
        }
    }
    if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
    if (!(step.backtrack > 0.0 && step.backtrack < 1.0)) {
        throw ConfigError("armijo backtracking factor must lie in (0, 1)");
    }
    if (!(step.sufficient_decrease > 0.0 && step.sufficient_decrease < 1.0)) {
        throw ConfigError("armijo sufficient-decrease constant must lie in (0, 1)");
    }
    if (!(step.initial_step > 0.0)) throw ConfigError("armijo initial step must be positive");
    if (!(stop_tol >= 0.0)) throw ConfigError("stop_tol must be nonnegative");
    if (!(noise_level >= 0.0)) throw ConfigError("noise_level must be nonnegative");
    if (!optimize_e && !optimize_f) {
        throw ConfigError("at least one of ellipticity and friction must be free");
    }
}

// ---------------------------------------------------------------------------

ReducedObjective::ReducedObjective(const Problem& problem, KernelSpec kernel, double eps,
                                   Eigen::VectorXd observation, double alpha, double beta,
                                   MisfitNorm norm, SolverOptions options)
    : problem_(&problem),
      map_(problem, std::move(kernel), options),
      eps_(eps),
      observation_(std::move(observation)),
      alpha_(alpha),
      beta_(beta),
      norm_(norm) {
    if (!(eps_ > 0.0)) throw DomainError("reduced objective needs eps > 0");
    if (observation_.size() != problem.mesh().num_nodes()) {
        throw DomainError("observation must be a nodal vector");
    }
}

ReducedObjective::Evaluation ReducedObjective::evaluate(
    const ParameterField& e, const ParameterField& f,
    const std::optional<Eigen::VectorXd>& warm_start) {
    Evaluation ev;
    ev.state = map_(e, f, eps_, warm_start);
    ev.misfit = misfit(*problem_, ev.state.u, observation_, norm_);
    ev.value = ev.misfit + 0.5 * alpha_ * reg_inner(e, e.values(), e.values()) +
               0.5 * beta_ * reg_inner(f, f.values(), f.values());
    return ev;
}

OptimalityBundle ReducedObjective::gradient(const ParameterField& e, const ParameterField& f,
                                            const Evaluation& at) const {
    const LinearizedSystem sys(*problem_, e, f, map_.kernel(), eps_, at.state);
    const Eigen::VectorXd p = sys.adjoint(observation_, norm_);
    return reduced_gradients(at.state, p, *problem_, e, f, map_.kernel(), eps_, alpha_, beta_);
}

// ---------------------------------------------------------------------------

namespace {

struct Iterate {
    ParameterField e;
    ParameterField f;
    ReducedObjective::Evaluation eval;
    Eigen::VectorXd grad_e;  // zero when the block is fixed
    Eigen::VectorXd grad_f;
    double stat_e = 0.0;
    double stat_f = 0.0;
};

}  // namespace

IdentificationResult identify(const IdentificationConfig& config, const Problem& problem,
                              const Eigen::VectorXd& observation, const ParameterField& e0,
                              const ParameterField& f0, const KernelSpec& kernel, double eps,
                              const SolverOptions& solver) {
    config.validate();
    ReducedObjective objective(problem, kernel, eps, observation, config.alpha, config.beta,
                               config.misfit_norm, solver);

    auto build = [&](const ParameterField& e, const ParameterField& f,
                     const std::optional<Eigen::VectorXd>& warm, int iteration) {
        try {
            auto eval = objective.evaluate(e, f, warm);
            const OptimalityBundle g = objective.gradient(e, f, eval);
            Iterate it{e, f, std::move(eval), g.grad_e, g.grad_f, 0.0, 0.0};
            if (!config.optimize_e) it.grad_e.setZero();
            if (!config.optimize_f) it.grad_f.setZero();
            it.stat_e = config.optimize_e ? g.stationarity_e : 0.0;
            it.stat_f = config.optimize_f ? g.stationarity_f : 0.0;
            return it;
        } catch (const SolverError& err) {
            throw IdentificationError(std::string("forward solve failed inside identification: ") +
                                          err.what(),
                                      e.values(), f.values(), iteration);
        }
    };

    Iterate cur = build(e0, f0, std::nullopt, 0);
    IdentificationResult result{cur.e, cur.f, {}, {}, {}, eps, 0.0, 0, false, ""};
    result.objective_history.push_back(cur.eval.value);
    result.stationarity_history.emplace_back(cur.stat_e, cur.stat_f);

    double step = config.step.initial_step;
    int iter = 0;
    for (;; ++iter) {
        if (cur.stat_e <= config.stop_tol && cur.stat_f <= config.stop_tol) {
            result.converged = true;
            result.stop_reason = "stationarity";
            break;
        }
        if (iter >= config.max_iters) {
            result.stop_reason = "max_iters";
            break;
        }

        std::optional<Iterate> next;
        double s = step;
        for (int b = 0; b <= config.step.max_backtracks; ++b, s *= config.step.backtrack) {
            const Eigen::VectorXd e_new = cur.e.project(cur.e.values() - s * cur.grad_e);
            const Eigen::VectorXd f_new = cur.f.project(cur.f.values() - s * cur.grad_f);
            const double slope = cur.grad_e.dot(e_new - cur.e.values()) +
                                 cur.grad_f.dot(f_new - cur.f.values());
            const ParameterField e_trial = cur.e.with_values(e_new);
            const ParameterField f_trial = cur.f.with_values(f_new);
            ReducedObjective::Evaluation ev;
            try {
                ev = objective.evaluate(e_trial, f_trial, cur.eval.state.u);
            } catch (const SolverError& err) {
                throw IdentificationError(
                    std::string("forward solve failed inside identification: ") + err.what(),
                    e_new, f_new, iter + 1);
            }
            if (ev.value <= cur.eval.value + config.step.sufficient_decrease * slope) {
                next = build(e_trial, f_trial, cur.eval.state.u, iter + 1);
                break;
            }
        }
        if (!next) {
            result.stop_reason = "line_search";
            break;
        }

        if (config.step.barzilai_borwein) {
            Eigen::VectorXd ds(next->e.size() + next->f.size());
            Eigen::VectorXd dg(ds.size());
            ds << next->e.values() - cur.e.values(), next->f.values() - cur.f.values();
            dg << next->grad_e - cur.grad_e, next->grad_f - cur.grad_f;
            const double sy = ds.dot(dg);
            step = sy > 0.0 ? std::clamp(ds.squaredNorm() / sy, config.step.min_step,
                                         config.step.max_step)
                            : config.step.initial_step;
        }
        cur = std::move(*next);
        result.objective_history.push_back(cur.eval.value);
        result.stationarity_history.emplace_back(cur.stat_e, cur.stat_f);
    }

    result.e_hat = cur.e;
    result.f_hat = cur.f;
    result.final_misfit = cur.eval.misfit;
    result.final_state = std::move(cur.eval.state);
    result.iterations = iter;
    return result;
}

double parameter_distance(const ParameterField& e1, const ParameterField& f1,
                          const ParameterField& e2, const ParameterField& f2) {
    const Eigen::VectorXd de = e1.values() - e2.values();
    const Eigen::VectorXd df = f1.values() - f2.values();
    return std::sqrt(std::max(0.0, reg_inner(e1, de, de) + reg_inner(f1, df, df)));
}

ContinuationResult continuation_identify(const IdentificationConfig& config, const Problem& problem,
                                         const Eigen::VectorXd& observation,
                                         const ParameterField& e0, const ParameterField& f0,
                                         const KernelSpec& kernel, const SolverOptions& solver) {
    config.validate();
    ContinuationResult out;
    ParameterField e = e0;
    ParameterField f = f0;
    for (double eps : config.eps_schedule) {
        out.levels.push_back(identify(config, problem, observation, e, f, kernel, eps, solver));
        e = out.levels.back().e_hat;
        f = out.levels.back().f_hat;
    }
    const auto& last = out.levels.back();
    for (const auto& level : out.levels) {
        out.distance_to_final.push_back(parameter_distance(level.e_hat, level.f_hat, last.e_hat, last.f_hat));
    }
    for (std::size_t k = 1; k < out.levels.size(); ++k) {
        const auto& a = out.levels[k - 1];
        const auto& b = out.levels[k];
        out.successive_distance.push_back(parameter_distance(a.e_hat, a.f_hat, b.e_hat, b.f_hat));
    }
    // Strict decrease, except that a level which no longer moves may be
    // followed by another one that does not move either.
    out.successive_decreasing = true;
    for (std::size_t k = 1; k < out.successive_distance.size(); ++k) {
        const double prev = out.successive_distance[k - 1];
        const double cur = out.successive_distance[k];
        if (!(cur < prev || (cur == 0.0 && prev == 0.0))) out.successive_decreasing = false;
    }
    return out;
}

Eigen::VectorXd synthesize_observation(const Problem& problem, const ParameterField& e_true,
                                       const ParameterField& f_true, double noise_level,
                                       std::uint64_t seed, const SolverOptions& solver) {
    if (!(noise_level >= 0.0)) throw DomainError("noise_level must be nonnegative");
    const ForwardState exact =
        solve_vi_oracle(problem.operator_for(e_true), problem.mesh(), f_true, solver);
    Eigen::VectorXd obs = exact.u;
    if (noise_level == 0.0) return obs;
    const double amplitude = noise_level * exact.u.cwiseAbs().maxCoeff();
    if (amplitude == 0.0) return obs;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    const Mesh& mesh = problem.mesh();
    for (Index d = 0; d < mesh.num_dofs(); ++d) obs[mesh.node_of_dof(d)] += dist(rng);
    return obs;
}

}  // namespace viident
