#pragma once

#include "viident/discretization.hpp"
#include "viident/forward.hpp"
#include "viident/identification.hpp"
#include "viident/kernels.hpp"
#include "viident/mesh.hpp"
#include "viident/sensitivity.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace viident {

/// Right-hand side g. "constant": g = value. "product_sine": g = value *
/// sin(pi x) in 1D and value * sin(pi x) sin(pi y) in 2D.
struct SourceSpec {
    std::string type = "constant";
    double value = 1.0;

    SourceFunction function(int dimension) const;
};

/// A constant initial or true value together with the box it lives in.
struct FieldSpec {
    double value = 1.0;
    double lower = 0.5;
    double upper = 2.0;
};

struct ProblemConfig {
    MeshSpec mesh;
    Form form = Form::GradGrad;
    SourceSpec source;
    FieldSpec ellipticity{1.0, 0.5, 2.0};
    FieldSpec friction{0.25, 0.0, 1.0};
};

struct ForwardExperiment {
    double eps = 0.0;  ///< 0 selects the nonsmooth oracle
};

struct RateStudyExperiment {
    std::vector<std::string> kernels{"sigmoid", "sqrt", "uniform_centered", "uniform_shifted"};
    std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    /// Rows with error at or below this value are kept in the CSV but
    /// excluded from the slope fit.
    double error_floor = 1e-12;
    double min_slope = 0.5;
};

struct KernelCheckExperiment {
    std::vector<std::string> kernels{"sigmoid", "sqrt", "uniform_centered", "uniform_shifted"};
    double eps_min = 1e-3;
    double eps_max = 1.0;
    int num_eps = 50;
    /// Sample points t = eps * tau with tau evenly spaced in [-tau_max, tau_max].
    double tau_max = 10.0;
    int num_t = 50;
    double tolerance = 1e-9;
};

struct GradientCheckExperiment {
    double eps = 1e-2;
    int num_directions = 5;
    double fd_step = 1e-5;
    double alpha = 1e-8;
    double beta = 1e-8;
    MisfitNorm misfit_norm = MisfitNorm::L2;
    /// Parameters that generate the observation.
    double true_ellipticity = 1.0;
    double true_friction = 0.25;
    double tolerance = 1e-6;
};

struct IdentifyExperiment {
    IdentificationConfig settings;
    /// Level used by `identify`; `continuation` runs settings.eps_schedule.
    double eps = 1e-4;
    double initial_ellipticity = 1.5;
    double initial_friction = 0.1;
};

struct ExperimentConfig {
    ProblemConfig problem;
    std::string kernel = "sqrt";
    SolverOptions solver;
    ForwardExperiment forward;
    RateStudyExperiment rate_study;
    KernelCheckExperiment kernel_check;
    GradientCheckExperiment gradient_check;
    IdentifyExperiment identify;
    std::filesystem::path output_directory = "results";
    /// The document as read, echoed into manifests.
    nlohmann::json source_document = nlohmann::json::object();
};

/// Parses and validates a JSON config. Missing keys keep their defaults.
/// Syntax errors report line and column; schema errors name the field.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text, std::string_view origin = "<string>");
ExperimentConfig config_from_json(const nlohmann::json& document);

/// The fully resolved configuration, defaults included.
nlohmann::json to_json(const ExperimentConfig& config);

/// Problem, kernel and parameter fields built from a validated config.
Problem make_problem(const ProblemConfig& config);
ParameterField make_ellipticity(const Mesh& mesh, const FieldSpec& spec);
ParameterField make_friction(const Mesh& mesh, const FieldSpec& spec);

}  // namespace viident
