#pragma once

#include "viident/config.hpp"
#include "viident/csv.hpp"
#include "viident/forward.hpp"
#include "viident/identification.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace viident {

std::string_view version();

/// One named pass/fail outcome. Advisory checks are reported but never fail
/// a strict run.
struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
    bool advisory = false;
};

nlohmann::json to_json(const Check& check);

// --- forward ---------------------------------------------------------------

struct ForwardReport {
    ForwardState state;
    double energy = 0.0;  ///< VI energy (oracle) of the computed state
    std::vector<Point> nodes;
    std::vector<Check> checks;

    CsvTable table() const;  ///< node, x, y, u
};

ForwardReport run_forward(const ExperimentConfig& config);

// --- regularization-error rate ---------------------------------------------

struct RateRow {
    std::string kernel;
    double eps = 0.0;
    double error = 0.0;  ///< ||u_eps - u||_V, NaN when the solve failed
    int iterations = 0;
    /// "ok", "floor" (kept but not fitted) or "failed: <reason>".
    std::string status;
};

struct KernelRate {
    std::string kernel;
    std::optional<double> slope;  ///< empty when fewer than two rows are fitted
    int fitted_rows = 0;
    bool weakly_decreasing = true;
};

struct RateReport {
    std::vector<RateRow> rows;
    std::vector<KernelRate> rates;
    std::vector<Check> checks;

    CsvTable table() const;        ///< kernel, eps, error, iterations, status
    CsvTable slope_table() const;  ///< kernel, slope, fitted_rows, weakly_decreasing
};

/// For every kernel and eps, the V-norm distance between the regularized
/// solution and the oracle solution, and the least-squares log-log slope.
RateReport run_rate_study(const ExperimentConfig& config);

/// Least-squares slope of log(error) against log(eps).
double loglog_slope(const std::vector<double>& eps, const std::vector<double>& error);

// --- kernel bounds -----------------------------------------------------------

struct BoundRow {
    std::string kernel;
    double absolute_mean = 0.0;
    double max_plus_ratio = 0.0;  ///< max |P - p| / (k eps)
    double plus_argmax_eps = 0.0;
    double plus_argmax_t = 0.0;
    double max_modulus_ratio = 0.0;  ///< max |M - m| / (2 k eps)
    double modulus_argmax_eps = 0.0;
    double modulus_argmax_t = 0.0;
};

struct BoundReport {
    std::vector<BoundRow> rows;
    std::vector<Check> checks;

    CsvTable table() const;
};

BoundReport run_kernel_bound_check(const ExperimentConfig& config);

// --- gradient check ----------------------------------------------------------

struct GradientRow {
    int direction = 0;
    double adjoint = 0.0;
    double finite_difference = 0.0;
    double relative_error = 0.0;
};

struct GradientReport {
    double objective = 0.0;
    std::vector<GradientRow> rows;
    std::vector<Check> checks;

    CsvTable table() const;  ///< direction, adjoint, finite_difference, relative_error
};

/// Adjoint directional derivatives of the regularized objective at the
/// problem's (e, f) against central differences along random directions.
GradientReport run_gradient_check(const ExperimentConfig& config, std::uint64_t seed);

// --- identification ------------------------------------------------------------

struct IdentifyReport {
    IdentificationResult result;
    double truth_ellipticity = 0.0;
    double truth_friction = 0.0;
    std::vector<Check> checks;

    CsvTable history_table() const;    ///< iteration, objective, stationarity_e, stationarity_f
    CsvTable parameter_table() const;  ///< field, index, estimate, truth
};

/// Twin experiment: observation from the problem's (e, f) (plus noise),
/// identification started from the configured initial values.
IdentifyReport run_identify(const ExperimentConfig& config, std::uint64_t seed);

struct ContinuationReport {
    ContinuationResult result;
    std::vector<Check> checks;

    CsvTable table() const;
};

ContinuationReport run_continuation(const ExperimentConfig& config, std::uint64_t seed);

// --- orchestration -------------------------------------------------------------

enum class Subcommand { SolveForward, RateStudy, KernelCheck, CheckGradient, Identify, Continuation };

Subcommand subcommand_from_name(std::string_view name);
std::string_view subcommand_name(Subcommand command);
std::vector<Subcommand> all_subcommands();

struct RunArtifacts {
    std::vector<std::pair<std::string, CsvTable>> tables;  ///< file name, table
    std::vector<Check> checks;
    nlohmann::json summary = nlohmann::json::object();

    /// True when every non-advisory check passed.
    bool passed() const;
};

RunArtifacts run_experiment(Subcommand command, const ExperimentConfig& config, std::uint64_t seed);

/// Writes every table and a manifest.json (config echo, resolved config,
/// version, seed, wall time, checks, summary) into `directory`, creating
/// it if needed. Returns the manifest.
nlohmann::json write_artifacts(const RunArtifacts& artifacts, Subcommand command,
                               const ExperimentConfig& config, std::uint64_t seed,
                               double wall_time_seconds, const std::filesystem::path& directory);

}  // namespace viident
