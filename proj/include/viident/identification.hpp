#pragma once

#include "viident/discretization.hpp"
#include "viident/errors.hpp"
#include "viident/forward.hpp"
#include "viident/kernels.hpp"
#include "viident/sensitivity.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace viident {

/// Backtracking rule for the projected-gradient driver. The first trial step
/// of iteration k > 0 is the Barzilai-Borwein step of the previous iteration
/// (clamped to [min_step, max_step]) when `barzilai_borwein` is set, and
/// `initial_step` otherwise.
struct ArmijoRule {
    double initial_step = 1.0;
    double backtrack = 0.5;
    double sufficient_decrease = 1e-4;
    int max_backtracks = 60;
    bool barzilai_borwein = true;
    double min_step = 1e-12;
    double max_step = 1e12;
};

struct IdentificationConfig {
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<double> eps_schedule{1e-1, 1e-2, 1e-3, 1e-4};
    int max_iters = 500;
    ArmijoRule step;
    double stop_tol = 1e-8;
    double noise_level = 0.0;
    bool optimize_e = true;
    bool optimize_f = true;
    MisfitNorm misfit_norm = MisfitNorm::L2;

    /// Throws ConfigError on a non-decreasing or non-positive schedule,
    /// Armijo constants outside (0, 1), negative weights, or no free block.
    void validate() const;
};

struct IdentificationResult {
    ParameterField e_hat;
    ParameterField f_hat;
    std::vector<double> objective_history;
    std::vector<std::pair<double, double>> stationarity_history;  ///< (e, f); 0 for a fixed block
    ForwardState final_state;
    double eps_used = 0.0;
    double final_misfit = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
};

/// A forward solve failed inside the driver; carries the iterate at failure.
class IdentificationError : public Error {
public:
    IdentificationError(const std::string& what, Eigen::VectorXd e, Eigen::VectorXd f, int iteration)
        : Error(what), e_(std::move(e)), f_(std::move(f)), iteration_(iteration) {}

    const Eigen::VectorXd& e_snapshot() const noexcept { return e_; }
    const Eigen::VectorXd& f_snapshot() const noexcept { return f_; }
    int iteration() const noexcept { return iteration_; }

private:
    Eigen::VectorXd e_;
    Eigen::VectorXd f_;
    int iteration_;
};

/// F(e, f) = 1/2 ||S_eps(e, f) - observation||^2 + alpha/2 ||e||^2 + beta/2 ||f||^2
/// with its adjoint gradient.
class ReducedObjective {
public:
    struct Evaluation {
        double value = 0.0;
        double misfit = 0.0;
        ForwardState state;
    };

    ReducedObjective(const Problem& problem, KernelSpec kernel, double eps,
                     Eigen::VectorXd observation, double alpha, double beta,
                     MisfitNorm norm = MisfitNorm::L2, SolverOptions options = {});

    Evaluation evaluate(const ParameterField& e, const ParameterField& f,
                        const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

    OptimalityBundle gradient(const ParameterField& e, const ParameterField& f,
                              const Evaluation& at) const;

    double eps() const noexcept { return eps_; }
    const Eigen::VectorXd& observation() const noexcept { return observation_; }

private:
    const Problem* problem_;
    SolutionMap map_;
    double eps_;
    Eigen::VectorXd observation_;
    double alpha_;
    double beta_;
    MisfitNorm norm_;
};

/// Projected gradient with Armijo backtracking on the reduced objective.
IdentificationResult identify(const IdentificationConfig& config, const Problem& problem,
                              const Eigen::VectorXd& observation, const ParameterField& e0,
                              const ParameterField& f0, const KernelSpec& kernel, double eps,
                              const SolverOptions& solver = {});

struct ContinuationResult {
    std::vector<IdentificationResult> levels;
    /// sqrt(||e_k - e_last||^2 + ||f_k - f_last||^2) in the regularization norms.
    std::vector<double> distance_to_final;
    /// Same distance between consecutive levels (size levels - 1).
    std::vector<double> successive_distance;
    /// Each successive distance is below the previous one, or both are 0.
    bool successive_decreasing = false;
};

/// identify() over config.eps_schedule, each level warm-started from the
/// previous optimum.
ContinuationResult continuation_identify(const IdentificationConfig& config, const Problem& problem,
                                         const Eigen::VectorXd& observation,
                                         const ParameterField& e0, const ParameterField& f0,
                                         const KernelSpec& kernel, const SolverOptions& solver = {});

/// Oracle solution S(e_true, f_true) plus componentwise uniform noise in
/// [-a, a], a = noise_level ||u||_inf, on the free nodes. Deterministic in `seed`.
Eigen::VectorXd synthesize_observation(const Problem& problem, const ParameterField& e_true,
                                       const ParameterField& f_true, double noise_level,
                                       std::uint64_t seed, const SolverOptions& solver = {});

/// Distance between two parameter pairs in the regularization norms.
double parameter_distance(const ParameterField& e1, const ParameterField& f1,
                          const ParameterField& e2, const ParameterField& f2);

}  // namespace viident
