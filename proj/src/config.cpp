#include "viident/config.hpp"

#include "viident/errors.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace viident {

using nlohmann::json;

SourceFunction SourceSpec::function(int dimension) const {
    const double a = value;
    if (type == "constant") return [a](const Point&) { return a; };
    if (type == "product_sine") {
        if (dimension == 1) return [a](const Point& p) { return a * std::sin(std::numbers::pi * p.x); };
        return [a](const Point& p) {
            return a * std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y);
        };
    }
    throw ConfigError("problem.source.type: unknown source '" + type +
                      "' (expected constant or product_sine)");
}

namespace {

// Typed access to one JSON object, with the dotted path for diagnostics and
// rejection of unknown keys.
class Section {
public:
    Section(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
        if (!node.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const char* key) const { return node_->contains(key); }

    Section child(const char* key) const {
        static const json empty = json::object();
        seen_.insert(key);
        return has(key) ? Section(node_->at(key), field(key)) : Section(empty, field(key));
    }

    void read(const char* key, double& out) const {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(field(key) + ": must be finite");
        }
    }

    void read(const char* key, int& out) const {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
            out = v->get<int>();
        }
    }

    void read(const char* key, bool& out) const {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }

    void read(const char* key, std::string& out) const {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }

    void read(const char* key, std::vector<double>& out) const {
        if (const json* v = take(key)) {
            if (!v->is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_number()) throw ConfigError(field(key) + ": expected an array of numbers");
                out.push_back(x.get<double>());
            }
        }
    }

    void read(const char* key, std::vector<std::string>& out) const {
        if (const json* v = take(key)) {
            if (!v->is_array()) throw ConfigError(field(key) + ": expected an array of strings");
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_string()) throw ConfigError(field(key) + ": expected an array of strings");
                out.push_back(x.get<std::string>());
            }
        }
    }

    /// Call after all reads.
    void reject_unknown() const {
        for (const auto& [key, value] : node_->items()) {
            if (!seen_.contains(key)) throw ConfigError(field(key.c_str()) + ": unknown field");
        }
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json* take(const char* key) const {
        seen_.insert(key);
        return has(key) ? &node_->at(key) : nullptr;
    }

    const json* node_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

void read_field(const Section& s, FieldSpec& out) {
    s.read("value", out.value);
    s.read("lower", out.lower);
    s.read("upper", out.upper);
    s.reject_unknown();
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void validate_kernels(const std::vector<std::string>& names, const std::string& field) {
    require(!names.empty(), field + ": needs at least one kernel");
    for (const auto& name : names) {
        try {
            (void)KernelSpec::from_name(name);
        } catch (const ConfigError& err) {
            throw ConfigError(field + ": " + err.what());
        }
    }
}

void validate(const ExperimentConfig& c) {
    const auto& p = c.problem;
    require(p.mesh.dimension == 1 || p.mesh.dimension == 2,
            "problem.mesh.dimension: must be 1 or 2");
    require(p.mesh.n >= (p.mesh.dimension == 2 ? 2 : 1),
            "problem.mesh.n: must be at least 1 (1D) or 2 (2D)");
    require(p.mesh.right > p.mesh.left, "problem.mesh: right must exceed left");
    (void)p.source.function(p.mesh.dimension);

    const auto& e = p.ellipticity;
    require(e.lower > 0.0 && e.lower < e.upper,
            "ellipticity bounds: need 0 < lower < upper (problem.ellipticity)");
    require(e.value >= e.lower && e.value <= e.upper,
            "problem.ellipticity.value: outside the ellipticity bounds");
    const auto& f = p.friction;
    require(f.lower >= 0.0 && f.lower < f.upper,
            "friction bounds: need 0 <= lower < upper (problem.friction)");
    require(f.value >= f.lower && f.value <= f.upper,
            "problem.friction.value: outside the friction bounds");

    validate_kernels({c.kernel}, "kernel");

    require(c.solver.tol > 0.0, "solver.tol: must be positive");
    require(c.solver.newton_max_iters > 0, "solver.newton_max_iters: must be positive");
    require(c.solver.min_newton_steps >= 0, "solver.min_newton_steps: must be nonnegative");
    require(c.solver.armijo_c > 0.0 && c.solver.armijo_c < 1.0, "solver.armijo_c: must lie in (0, 1)");
    require(c.solver.max_backtracks >= 0, "solver.max_backtracks: must be nonnegative");

    require(c.forward.eps >= 0.0, "forward.eps: must be nonnegative");

    validate_kernels(c.rate_study.kernels, "rate_study.kernels");
    require(!c.rate_study.eps.empty(), "rate_study.eps: must not be empty");
    for (double eps : c.rate_study.eps) require(eps > 0.0, "rate_study.eps: entries must be positive");
    require(c.rate_study.error_floor >= 0.0, "rate_study.error_floor: must be nonnegative");

    const auto& kc = c.kernel_check;
    validate_kernels(kc.kernels, "kernel_check.kernels");
    require(kc.eps_min > 0.0 && kc.eps_min <= kc.eps_max,
            "kernel_check: need 0 < eps_min <= eps_max");
    require(kc.num_eps >= 1 && kc.num_t >= 1, "kernel_check: num_eps and num_t must be positive");
    require(kc.tau_max > 0.0, "kernel_check.tau_max: must be positive");

    const auto& g = c.gradient_check;
    require(g.eps > 0.0, "gradient_check.eps: must be positive");
    require(g.num_directions >= 1, "gradient_check.num_directions: must be positive");
    require(g.fd_step > 0.0, "gradient_check.fd_step: must be positive");
    require(g.alpha >= 0.0 && g.beta >= 0.0, "gradient_check: alpha and beta must be nonnegative");
    require(g.true_ellipticity >= e.lower && g.true_ellipticity <= e.upper,
            "gradient_check.true_ellipticity: outside the ellipticity bounds");
    require(g.true_friction >= f.lower && g.true_friction <= f.upper,
            "gradient_check.true_friction: outside the friction bounds");

    const auto& id = c.identify;
    try {
        id.settings.validate();
    } catch (const ConfigError& err) {
        throw ConfigError(std::string("identify: ") + err.what());
    }
    require(id.eps > 0.0, "identify.eps: must be positive");
    require(id.initial_ellipticity >= e.lower && id.initial_ellipticity <= e.upper,
            "identify.initial_ellipticity: outside the ellipticity bounds");
    require(id.initial_friction >= f.lower && id.initial_friction <= f.upper,
            "identify.initial_friction: outside the friction bounds");
}

std::string line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

ExperimentConfig config_from_json(const json& document) {
    ExperimentConfig c;
    const Section root(document, "");

    const Section problem = root.child("problem");
    {
        const Section mesh = problem.child("mesh");
        mesh.read("dimension", c.problem.mesh.dimension);
        mesh.read("n", c.problem.mesh.n);
        mesh.read("left", c.problem.mesh.left);
        mesh.read("right", c.problem.mesh.right);
        mesh.reject_unknown();

        std::string form = std::string(form_name(c.problem.form));
        problem.read("form", form);
        try {
            c.problem.form = form_from_name(form);
        } catch (const ConfigError& err) {
            throw ConfigError(std::string("problem.form: ") + err.what());
        }

        const Section source = problem.child("source");
        source.read("type", c.problem.source.type);
        source.read("value", c.problem.source.value);
        source.reject_unknown();

        read_field(problem.child("ellipticity"), c.problem.ellipticity);
        read_field(problem.child("friction"), c.problem.friction);
        problem.reject_unknown();
    }

    root.read("kernel", c.kernel);

    const Section solver = root.child("solver");
    solver.read("tol", c.solver.tol);
    solver.read("newton_max_iters", c.solver.newton_max_iters);
    solver.read("min_newton_steps", c.solver.min_newton_steps);
    solver.read("active_set_max_iters", c.solver.active_set_max_iters);
    solver.read("armijo_c", c.solver.armijo_c);
    solver.read("max_backtracks", c.solver.max_backtracks);
    solver.reject_unknown();

    const Section forward = root.child("forward");
    forward.read("eps", c.forward.eps);
    forward.reject_unknown();

    const Section rate = root.child("rate_study");
    rate.read("kernels", c.rate_study.kernels);
    rate.read("eps", c.rate_study.eps);
    rate.read("error_floor", c.rate_study.error_floor);
    rate.read("min_slope", c.rate_study.min_slope);
    rate.reject_unknown();

    const Section kc = root.child("kernel_check");
    kc.read("kernels", c.kernel_check.kernels);
    kc.read("eps_min", c.kernel_check.eps_min);
    kc.read("eps_max", c.kernel_check.eps_max);
    kc.read("num_eps", c.kernel_check.num_eps);
    kc.read("tau_max", c.kernel_check.tau_max);
    kc.read("num_t", c.kernel_check.num_t);
    kc.read("tolerance", c.kernel_check.tolerance);
    kc.reject_unknown();

    const Section gc = root.child("gradient_check");
    gc.read("eps", c.gradient_check.eps);
    gc.read("num_directions", c.gradient_check.num_directions);
    gc.read("fd_step", c.gradient_check.fd_step);
    gc.read("alpha", c.gradient_check.alpha);
    gc.read("beta", c.gradient_check.beta);
    {
        std::string norm(misfit_norm_name(c.gradient_check.misfit_norm));
        gc.read("misfit_norm", norm);
        try {
            c.gradient_check.misfit_norm = misfit_norm_from_name(norm);
        } catch (const ConfigError& err) {
            throw ConfigError(std::string("gradient_check.misfit_norm: ") + err.what());
        }
    }
    gc.read("true_ellipticity", c.gradient_check.true_ellipticity);
    gc.read("true_friction", c.gradient_check.true_friction);
    gc.read("tolerance", c.gradient_check.tolerance);
    gc.reject_unknown();

    const Section id = root.child("identify");
    auto& s = c.identify.settings;
    id.read("alpha", s.alpha);
    id.read("beta", s.beta);
    id.read("eps", c.identify.eps);
    id.read("eps_schedule", s.eps_schedule);
    id.read("max_iters", s.max_iters);
    id.read("stop_tol", s.stop_tol);
    id.read("noise_level", s.noise_level);
    id.read("optimize_ellipticity", s.optimize_e);
    id.read("optimize_friction", s.optimize_f);
    id.read("initial_ellipticity", c.identify.initial_ellipticity);
    id.read("initial_friction", c.identify.initial_friction);
    {
        std::string norm(misfit_norm_name(s.misfit_norm));
        id.read("misfit_norm", norm);
        try {
            s.misfit_norm = misfit_norm_from_name(norm);
        } catch (const ConfigError& err) {
            throw ConfigError(std::string("identify.misfit_norm: ") + err.what());
        }
    }
    const Section armijo = id.child("armijo");
    armijo.read("initial_step", s.step.initial_step);
    armijo.read("backtrack", s.step.backtrack);
    armijo.read("sufficient_decrease", s.step.sufficient_decrease);
    armijo.read("max_backtracks", s.step.max_backtracks);
    armijo.read("barzilai_borwein", s.step.barzilai_borwein);
    armijo.read("min_step", s.step.min_step);
    armijo.read("max_step", s.step.max_step);
    armijo.reject_unknown();
    id.reject_unknown();

    const Section output = root.child("output");
    std::string dir = c.output_directory.string();
    output.read("directory", dir);
    c.output_directory = dir;
    output.reject_unknown();

    root.reject_unknown();
    validate(c);
    c.source_document = document;
    return c;
}

ExperimentConfig parse_config_text(std::string_view text, std::string_view origin) {
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& err) {
        const std::size_t at = err.byte > 0 ? err.byte - 1 : 0;
        std::string detail = err.what();
        if (const auto pos = detail.find("syntax error"); pos != std::string::npos) {
            detail = detail.substr(pos);
        }
        throw ConfigError(std::string(origin) + ": " + line_column(text, at) + ": " + detail);
    }
    return config_from_json(document);
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.string());
}

json to_json(const ExperimentConfig& c) {
    auto field = [](const FieldSpec& f) {
        return json{{"value", f.value}, {"lower", f.lower}, {"upper", f.upper}};
    };
    const auto& s = c.identify.settings;
    return json{
        {"problem",
         {{"mesh",
           {{"dimension", c.problem.mesh.dimension},
            {"n", c.problem.mesh.n},
            {"left", c.problem.mesh.left},
            {"right", c.problem.mesh.right}}},
          {"form", form_name(c.problem.form)},
          {"source", {{"type", c.problem.source.type}, {"value", c.problem.source.value}}},
          {"ellipticity", field(c.problem.ellipticity)},
          {"friction", field(c.problem.friction)}}},
        {"kernel", c.kernel},
        {"solver",
         {{"tol", c.solver.tol},
          {"newton_max_iters", c.solver.newton_max_iters},
          {"min_newton_steps", c.solver.min_newton_steps},
          {"active_set_max_iters", c.solver.active_set_max_iters},
          {"armijo_c", c.solver.armijo_c},
          {"max_backtracks", c.solver.max_backtracks}}},
        {"forward", {{"eps", c.forward.eps}}},
        {"rate_study",
         {{"kernels", c.rate_study.kernels},
          {"eps", c.rate_study.eps},
          {"error_floor", c.rate_study.error_floor},
          {"min_slope", c.rate_study.min_slope}}},
        {"kernel_check",
         {{"kernels", c.kernel_check.kernels},
          {"eps_min", c.kernel_check.eps_min},
          {"eps_max", c.kernel_check.eps_max},
          {"num_eps", c.kernel_check.num_eps},
          {"tau_max", c.kernel_check.tau_max},
          {"num_t", c.kernel_check.num_t},
          {"tolerance", c.kernel_check.tolerance}}},
        {"gradient_check",
         {{"eps", c.gradient_check.eps},
          {"num_directions", c.gradient_check.num_directions},
          {"fd_step", c.gradient_check.fd_step},
          {"alpha", c.gradient_check.alpha},
          {"beta", c.gradient_check.beta},
          {"misfit_norm", misfit_norm_name(c.gradient_check.misfit_norm)},
          {"true_ellipticity", c.gradient_check.true_ellipticity},
          {"true_friction", c.gradient_check.true_friction},
          {"tolerance", c.gradient_check.tolerance}}},
        {"identify",
         {{"alpha", s.alpha},
          {"beta", s.beta},
          {"eps", c.identify.eps},
          {"eps_schedule", s.eps_schedule},
          {"max_iters", s.max_iters},
          {"stop_tol", s.stop_tol},
          {"noise_level", s.noise_level},
          {"optimize_ellipticity", s.optimize_e},
          {"optimize_friction", s.optimize_f},
          {"initial_ellipticity", c.identify.initial_ellipticity},
          {"initial_friction", c.identify.initial_friction},
          {"misfit_norm", misfit_norm_name(s.misfit_norm)},
          {"armijo",
           {{"initial_step", s.step.initial_step},
            {"backtrack", s.step.backtrack},
            {"sufficient_decrease", s.step.sufficient_decrease},
            {"max_backtracks", s.step.max_backtracks},
            {"barzilai_borwein", s.step.barzilai_borwein},
            {"min_step", s.step.min_step},
            {"max_step", s.step.max_step}}}}},
        {"output", {{"directory", c.output_directory.string()}}},
    };
}

Problem make_problem(const ProblemConfig& config) {
    Mesh mesh = build_mesh(config.mesh);
    const int dim = mesh.dimension();
    return Problem(std::move(mesh), config.form, config.source.function(dim));
}

ParameterField make_ellipticity(const Mesh& mesh, const FieldSpec& spec) {
    return make_ellipticity(mesh, spec.value, spec.lower, spec.upper);
}

ParameterField make_friction(const Mesh& mesh, const FieldSpec& spec) {
    return make_friction(mesh, spec.value, spec.lower, spec.upper);
}

}  // namespace viident
