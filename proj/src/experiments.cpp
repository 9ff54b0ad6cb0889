#include "viident/experiments.hpp"

#include "viident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <random>

#ifndef VIIDENT_VERSION
#define VIIDENT_VERSION "0.0.0"
#endif

namespace viident {

using nlohmann::json;

std::string_view version() { return VIIDENT_VERSION; }

json to_json(const Check& check) {
    return json{{"name", check.name},
                {"passed", check.passed},
                {"value", check.value},
                {"threshold", check.threshold},
                {"detail", check.detail},
                {"advisory", check.advisory}};
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> logspace(double lo, double hi, int n) {
    if (n == 1) return {lo};
    std::vector<double> out(static_cast<std::size_t>(n));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    return out;
}

std::vector<double> linspace(double lo, double hi, int n) {
    if (n == 1) return {0.5 * (lo + hi)};
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return out;
}

}  // namespace

// --- forward ---------------------------------------------------------------

CsvTable ForwardReport::table() const {
    CsvTable t{{"node", "x", "y", "u"}, {}};
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        t.add_row({static_cast<std::int64_t>(i), nodes[i].x, nodes[i].y,
                   state.u[static_cast<Index>(i)]});
    }
    return t;
}

ForwardReport run_forward(const ExperimentConfig& config) {
    const Problem problem = make_problem(config.problem);
    const Mesh& mesh = problem.mesh();
    const ParameterField e = make_ellipticity(mesh, config.problem.ellipticity);
    const ParameterField f = make_friction(mesh, config.problem.friction);
    const DiscreteOperator op = problem.operator_for(e);

    ForwardReport report;
    const double eps = config.forward.eps;
    if (eps == 0.0) {
        report.state = solve_vi_oracle(op, mesh, f, config.solver);
    } else {
        report.state =
            solve_regularized(op, mesh, f, KernelSpec::from_name(config.kernel), eps, config.solver);
    }
    report.energy = vi_energy(op, mesh, f, report.state.u);
    report.nodes = mesh.nodes();
    report.checks.push_back({"forward_residual", report.state.residual_norm <= config.solver.tol,
                             report.state.residual_norm, config.solver.tol,
                             eps == 0.0 ? "natural residual of the VI" : "regularized residual", false});
    return report;
}

// --- rate study ----------------------------------------------------------------

double loglog_slope(const std::vector<double>& eps, const std::vector<double>& error) {
    if (eps.size() != error.size() || eps.size() < 2) {
        throw DomainError("slope fit needs at least two points");
    }
    const auto n = static_cast<double>(eps.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        mx += std::log(eps[i]);
        my += std::log(error[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double dx = std::log(eps[i]) - mx;
        sxy += dx * (std::log(error[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw DomainError("slope fit needs distinct eps values");
    return sxy / sxx;
}

CsvTable RateReport::table() const {
    CsvTable t{{"kernel", "eps", "error", "iterations", "status"}, {}};
    for (const auto& r : rows) {
        t.add_row({r.kernel, r.eps, r.error, static_cast<std::int64_t>(r.iterations), r.status});
    }
    return t;
}

CsvTable RateReport::slope_table() const {
    CsvTable t{{"kernel", "slope", "fitted_rows", "weakly_decreasing"}, {}};
    for (const auto& r : rates) {
        t.add_row({r.kernel, r.slope ? *r.slope : kNaN, static_cast<std::int64_t>(r.fitted_rows),
                   std::string(r.weakly_decreasing ? "true" : "false")});
    }
    return t;
}

namespace {

std::vector<RateRow> rate_rows_for(const Problem& problem, const DiscreteOperator& op,
                                   const ParameterField& f, const Eigen::VectorXd& reference,
                                   const KernelSpec& kernel, const std::vector<double>& eps_list,
                                   double floor, const SolverOptions& solver) {
    std::vector<RateRow> rows;
    std::optional<Eigen::VectorXd> warm;
    for (double eps : eps_list) {
        RateRow row{kernel.name(), eps, kNaN, 0, "ok"};
        try {
            const ForwardState s = solve_regularized(op, problem.mesh(), f, kernel, eps, solver, warm);
            row.error = problem.v_norm(s.u - reference);
            row.iterations = s.iterations;
            if (row.error <= floor) row.status = "floor";
            warm = s.u;
        } catch (const SolverError& err) {
            row.status = std::string("failed: ") + err.what();
            row.iterations = err.iterations();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

RateReport run_rate_study(const ExperimentConfig& config) {
    const auto& rc = config.rate_study;
    const Problem problem = make_problem(config.problem);
    const Mesh& mesh = problem.mesh();
    const ParameterField e = make_ellipticity(mesh, config.problem.ellipticity);
    const ParameterField f = make_friction(mesh, config.problem.friction);
    const DiscreteOperator op = problem.operator_for(e);
    const Eigen::VectorXd reference = solve_vi_oracle(op, mesh, f, config.solver).u;

    // Kernels are independent; each task only reads the shared problem.
    std::vector<std::future<std::vector<RateRow>>> tasks;
    for (const auto& name : rc.kernels) {
        tasks.push_back(std::async(std::launch::async, [&, name] {
            return rate_rows_for(problem, op, f, reference, KernelSpec::from_name(name), rc.eps,
                                 rc.error_floor, config.solver);
        }));
    }

    RateReport report;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        std::vector<RateRow> rows = tasks[k].get();
        KernelRate rate{rc.kernels[k], std::nullopt, 0, true};
        std::vector<double> xs, ys;
        double previous = std::numeric_limits<double>::infinity();
        for (const auto& r : rows) {
            if (r.status == "ok") {
                xs.push_back(r.eps);
                ys.push_back(r.error);
            }
            if (std::isfinite(r.error)) {
                if (r.error > previous) rate.weakly_decreasing = false;
                previous = r.error;
            }
        }
        rate.fitted_rows = static_cast<int>(xs.size());
        if (xs.size() >= 2) rate.slope = loglog_slope(xs, ys);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());

        Check check{"rate_slope_" + rate.kernel, true, rate.slope.value_or(kNaN), rc.min_slope, "", false};
        if (rate.slope) {
            check.passed = *rate.slope >= rc.min_slope;
            check.detail = "fitted on " + std::to_string(rate.fitted_rows) + " rows";
        } else {
            check.detail = "fit skipped: fewer than two rows above the error floor";
        }
        report.checks.push_back(std::move(check));
        report.rates.push_back(std::move(rate));
    }
    return report;
}

// --- kernel bounds -----------------------------------------------------------

CsvTable BoundReport::table() const {
    CsvTable t{{"kernel", "absolute_mean", "max_plus_ratio", "plus_argmax_eps", "plus_argmax_t",
                "max_modulus_ratio", "modulus_argmax_eps", "modulus_argmax_t"},
               {}};
    for (const auto& r : rows) {
        t.add_row({r.kernel, r.absolute_mean, r.max_plus_ratio, r.plus_argmax_eps, r.plus_argmax_t,
                   r.max_modulus_ratio, r.modulus_argmax_eps, r.modulus_argmax_t});
    }
    return t;
}

BoundReport run_kernel_bound_check(const ExperimentConfig& config) {
    const auto& kc = config.kernel_check;
    const auto eps_grid = logspace(kc.eps_min, kc.eps_max, kc.num_eps);
    const auto tau_grid = linspace(-kc.tau_max, kc.tau_max, kc.num_t);

    BoundReport report;
    for (const auto& name : kc.kernels) {
        const KernelSpec kernel = KernelSpec::from_name(name);
        BoundRow row;
        row.kernel = kernel.name();
        row.absolute_mean = kernel.absolute_mean();
        const double k = row.absolute_mean;
        for (double eps : eps_grid) {
            for (double tau : tau_grid) {
                const double t = eps * tau;
                const double rp = std::abs(kernel.plus(eps, t).value - std::max(t, 0.0)) / (k * eps);
                const double rm = std::abs(kernel.modulus(eps, t).value - std::abs(t)) / (2.0 * k * eps);
                if (rp > row.max_plus_ratio) {
                    row.max_plus_ratio = rp;
                    row.plus_argmax_eps = eps;
                    row.plus_argmax_t = t;
                }
                if (rm > row.max_modulus_ratio) {
                    row.max_modulus_ratio = rm;
                    row.modulus_argmax_eps = eps;
                    row.modulus_argmax_t = t;
                }
            }
        }
        const double limit = 1.0 + kc.tolerance;
        report.checks.push_back({"plus_bound_" + row.kernel, row.max_plus_ratio <= limit,
                                 row.max_plus_ratio, limit, "max |P - p| / (k eps)", false});
        report.checks.push_back({"modulus_bound_" + row.kernel, row.max_modulus_ratio <= limit,
                                 row.max_modulus_ratio, limit, "max |M - m| / (2 k eps)", false});
        report.rows.push_back(std::move(row));
    }
    return report;
}

// --- gradient check ----------------------------------------------------------

CsvTable GradientReport::table() const {
    CsvTable t{{"direction", "adjoint", "finite_difference", "relative_error"}, {}};
    for (const auto& r : rows) {
        t.add_row({static_cast<std::int64_t>(r.direction), r.adjoint, r.finite_difference,
                   r.relative_error});
    }
    return t;
}

GradientReport run_gradient_check(const ExperimentConfig& config, std::uint64_t seed) {
    const auto& gc = config.gradient_check;
    const Problem problem = make_problem(config.problem);
    const Mesh& mesh = problem.mesh();
    const ParameterField e = make_ellipticity(mesh, config.problem.ellipticity);
    const ParameterField f = make_friction(mesh, config.problem.friction);

    FieldSpec e_true = config.problem.ellipticity;
    e_true.value = gc.true_ellipticity;
    FieldSpec f_true = config.problem.friction;
    f_true.value = gc.true_friction;
    const Eigen::VectorXd observation =
        synthesize_observation(problem, make_ellipticity(mesh, e_true), make_friction(mesh, f_true),
                               0.0, seed, config.solver);

    ReducedObjective objective(problem, KernelSpec::from_name(config.kernel), gc.eps, observation,
                               gc.alpha, gc.beta, gc.misfit_norm, config.solver);
    const auto at = objective.evaluate(e, f);
    const OptimalityBundle g = objective.gradient(e, f, at);

    GradientReport report;
    report.objective = at.value;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int d = 0; d < gc.num_directions; ++d) {
        Eigen::VectorXd de(e.size()), df(f.size());
        for (Index i = 0; i < de.size(); ++i) de[i] = normal(rng);
        for (Index i = 0; i < df.size(); ++i) df[i] = normal(rng);
        const double scale = std::sqrt(de.squaredNorm() + df.squaredNorm());
        de /= scale;
        df /= scale;

        const double h = gc.fd_step;
        double fd = 0.0;
        try {
            const double plus = objective.evaluate(e.with_values(e.values() + h * de),
                                                   f.with_values(f.values() + h * df), at.state.u).value;
            const double minus = objective.evaluate(e.with_values(e.values() - h * de),
                                                    f.with_values(f.values() - h * df), at.state.u).value;
            fd = (plus - minus) / (2.0 * h);
        } catch (const DomainError&) {
            throw ConfigError(
                "gradient_check: the evaluation point must lie inside the parameter bounds by more than fd_step");
        }
        const double adj = g.grad_e.dot(de) + g.grad_f.dot(df);
        const double denom = std::max(std::abs(adj), std::abs(fd));
        const double rel = denom > 0.0 ? std::abs(adj - fd) / denom : 0.0;
        worst = std::max(worst, rel);
        report.rows.push_back({d, adj, fd, rel});
    }
    report.checks.push_back({"gradient_relative_error", worst <= gc.tolerance, worst, gc.tolerance,
                             "max over directions of |adjoint - fd| / max(|adjoint|, |fd|)", false});
    return report;
}

// --- identification ------------------------------------------------------------

CsvTable IdentifyReport::history_table() const {
    CsvTable t{{"iteration", "objective", "stationarity_e", "stationarity_f"}, {}};
    for (std::size_t i = 0; i < result.objective_history.size(); ++i) {
        t.add_row({static_cast<std::int64_t>(i), result.objective_history[i],
                   result.stationarity_history[i].first, result.stationarity_history[i].second});
    }
    return t;
}

CsvTable IdentifyReport::parameter_table() const {
    CsvTable t{{"field", "index", "estimate", "truth"}, {}};
    for (Index i = 0; i < result.e_hat.size(); ++i) {
        t.add_row({std::string("ellipticity"), static_cast<std::int64_t>(i), result.e_hat.values()[i],
                   truth_ellipticity});
    }
    for (Index i = 0; i < result.f_hat.size(); ++i) {
        t.add_row({std::string("friction"), static_cast<std::int64_t>(i), result.f_hat.values()[i],
                   truth_friction});
    }
    return t;
}

namespace {

struct TwinSetup {
    Problem problem;
    Eigen::VectorXd observation;
    ParameterField e0;
    ParameterField f0;
};

TwinSetup twin_setup(const ExperimentConfig& config, std::uint64_t seed) {
    Problem problem = make_problem(config.problem);
    const Mesh& mesh = problem.mesh();
    const ParameterField e_true = make_ellipticity(mesh, config.problem.ellipticity);
    const ParameterField f_true = make_friction(mesh, config.problem.friction);
    Eigen::VectorXd obs = synthesize_observation(problem, e_true, f_true,
                                                 config.identify.settings.noise_level, seed,
                                                 config.solver);
    ParameterField e0 = e_true.with_values(
        Eigen::VectorXd::Constant(e_true.size(), config.identify.initial_ellipticity));
    ParameterField f0 =
        f_true.with_values(Eigen::VectorXd::Constant(f_true.size(), config.identify.initial_friction));
    return {std::move(problem), std::move(obs), std::move(e0), std::move(f0)};
}

}  // namespace

IdentifyReport run_identify(const ExperimentConfig& config, std::uint64_t seed) {
    const TwinSetup twin = twin_setup(config, seed);
    const auto& s = config.identify.settings;
    IdentifyReport report{identify(s, twin.problem, twin.observation, twin.e0, twin.f0,
                                   KernelSpec::from_name(config.kernel), config.identify.eps,
                                   config.solver),
                          config.problem.ellipticity.value, config.problem.friction.value, {}};
    const auto& last = report.result.stationarity_history.back();
    report.checks.push_back({"stationarity", report.result.converged,
                             std::max(last.first, last.second), s.stop_tol,
                             "stop reason: " + report.result.stop_reason, false});
    return report;
}

CsvTable ContinuationReport::table() const {
    CsvTable t{{"level", "eps", "iterations", "stop_reason", "objective", "misfit", "stationarity_e",
                "stationarity_f", "distance_to_final", "successive_distance"},
               {}};
    for (std::size_t k = 0; k < result.levels.size(); ++k) {
        const auto& lv = result.levels[k];
        const auto& st = lv.stationarity_history.back();
        t.add_row({static_cast<std::int64_t>(k), lv.eps_used, static_cast<std::int64_t>(lv.iterations),
                   lv.stop_reason, lv.objective_history.back(), lv.final_misfit, st.first, st.second,
                   result.distance_to_final[k], k > 0 ? result.successive_distance[k - 1] : kNaN});
    }
    return t;
}

ContinuationReport run_continuation(const ExperimentConfig& config, std::uint64_t seed) {
    const TwinSetup twin = twin_setup(config, seed);
    ContinuationReport report{continuation_identify(config.identify.settings, twin.problem,
                                                    twin.observation, twin.e0, twin.f0,
                                                    KernelSpec::from_name(config.kernel), config.solver),
                              {}};
    const auto& d = report.result.successive_distance;
    report.checks.push_back({"successive_distances_decreasing", report.result.successive_decreasing,
                             d.empty() ? 0.0 : d.back(), d.empty() ? 0.0 : d.front(),
                             "qualitative; a failure calls for investigation", true});
    bool all_converged = true;
    for (const auto& lv : report.result.levels) all_converged = all_converged && lv.converged;
    report.checks.push_back({"levels_converged", all_converged, 0.0, config.identify.settings.stop_tol,
                             "every level reached the stationarity tolerance", false});
    return report;
}

// --- orchestration -------------------------------------------------------------

namespace {

constexpr std::pair<Subcommand, std::string_view> kSubcommands[] = {
    {Subcommand::SolveForward, "solve-forward"}, {Subcommand::RateStudy, "rate-study"},
    {Subcommand::KernelCheck, "kernel-check"},   {Subcommand::CheckGradient, "check-gradient"},
    {Subcommand::Identify, "identify"},          {Subcommand::Continuation, "continuation"},
};

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

Subcommand subcommand_from_name(std::string_view name) {
    for (const auto& [cmd, n] : kSubcommands) {
        if (n == name) return cmd;
    }
    throw ConfigError("unknown subcommand '" + std::string(name) + "'");
}

std::string_view subcommand_name(Subcommand command) {
    for (const auto& [cmd, n] : kSubcommands) {
        if (cmd == command) return n;
    }
    return "unknown";
}

std::vector<Subcommand> all_subcommands() {
    std::vector<Subcommand> out;
    for (const auto& entry : kSubcommands) out.push_back(entry.first);
    return out;
}

bool RunArtifacts::passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const Check& c) { return c.advisory || c.passed; });
}

RunArtifacts run_experiment(Subcommand command, const ExperimentConfig& config, std::uint64_t seed) {
    RunArtifacts out;
    switch (command) {
        case Subcommand::SolveForward: {
            const ForwardReport r = run_forward(config);
            out.tables.emplace_back("solution.csv", r.table());
            out.checks = r.checks;
            out.summary = {{"eps", r.state.eps},
                           {"iterations", r.state.iterations},
                           {"residual", r.state.residual_norm},
                           {"energy", r.energy}};
            break;
        }
        case Subcommand::RateStudy: {
            const RateReport r = run_rate_study(config);
            out.tables.emplace_back("rates.csv", r.table());
            out.tables.emplace_back("slopes.csv", r.slope_table());
            out.checks = r.checks;
            int failed = 0;
            for (const auto& row : r.rows) failed += row.status.starts_with("failed") ? 1 : 0;
            json slopes = json::object();
            for (const auto& k : r.rates) slopes[k.kernel] = k.slope ? json(*k.slope) : json(nullptr);
            out.summary = {{"slopes", slopes}, {"failed_rows", failed}};
            break;
        }
        case Subcommand::KernelCheck: {
            const BoundReport r = run_kernel_bound_check(config);
            out.tables.emplace_back("kernel_bounds.csv", r.table());
            out.checks = r.checks;
            break;
        }
        case Subcommand::CheckGradient: {
            const GradientReport r = run_gradient_check(config, seed);
            out.tables.emplace_back("gradient_check.csv", r.table());
            out.checks = r.checks;
            out.summary = {{"objective", r.objective}};
            break;
        }
        case Subcommand::Identify: {
            const IdentifyReport r = run_identify(config, seed);
            out.tables.emplace_back("history.csv", r.history_table());
            out.tables.emplace_back("parameters.csv", r.parameter_table());
            out.checks = r.checks;
            out.summary = {{"iterations", r.result.iterations},
                           {"stop_reason", r.result.stop_reason},
                           {"final_misfit", r.result.final_misfit},
                           {"final_objective", r.result.objective_history.back()},
                           {"friction_estimate", vector_json(r.result.f_hat.values())}};
            break;
        }
        case Subcommand::Continuation: {
            const ContinuationReport r = run_continuation(config, seed);
            out.tables.emplace_back("continuation.csv", r.table());
            out.checks = r.checks;
            out.summary = {{"successive_distance", r.result.successive_distance},
                           {"successive_decreasing", r.result.successive_decreasing}};
            break;
        }
    }
    return out;
}

json write_artifacts(const RunArtifacts& artifacts, Subcommand command, const ExperimentConfig& config,
                     std::uint64_t seed, double wall_time_seconds,
                     const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    json outputs = json::array();
    for (const auto& [name, table] : artifacts.tables) {
        emit_csv(table, directory / name);
        outputs.push_back(name);
    }
    json checks = json::array();
    for (const auto& c : artifacts.checks) checks.push_back(to_json(c));

    json manifest{{"tool", "vi-ident"},
                  {"version", version()},
                  {"subcommand", subcommand_name(command)},
                  {"seed", seed},
                  {"config", config.source_document},
                  {"resolved_config", to_json(config)},
                  {"wall_time_seconds", wall_time_seconds},
                  {"checks", checks},
                  {"all_checks_passed", artifacts.passed()},
                  {"summary", artifacts.summary},
                  {"outputs", outputs}};
    std::ofstream out(directory / "manifest.json");
    if (!out) throw Error("cannot write " + (directory / "manifest.json").string());
    out << manifest.dump(2) << '\n';
    return manifest;
}

}  // namespace viident
