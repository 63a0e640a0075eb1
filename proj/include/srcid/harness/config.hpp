#pragma once

#include "srcid/errors.hpp"
#include "srcid/forward.hpp"
#include "srcid/harness/io.hpp"
#include "srcid/inverse.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace srcid::harness {

/// benchmark: k = 1, mu = 0 (homogeneous Neumann) with reaction c.
/// constant: k, c and mu all taken from the config.
enum class CoefficientKind { benchmark, constant };

/// sigmoid: f = 1 / (1 + exp(gamma (x1 - x2))). constant: f = source_value.
enum class SourceKind { sigmoid, constant };

/// uniform: omega = 1 / T. final: discrete delta at t_N (omega_N = 1 / tau).
enum class OmegaKind { uniform, final };

enum class SweepParameter { T, c, tau };

/// Experiment description read from a flat key = value file.
///
/// Defaults reproduce the base case: unit square, 50 x 50 cells, c = 10,
/// T = 0.1, gamma = 10, Crank-Nicolson data at tau = 1e-4 and implicit
/// inversion at tau = 1e-3.
struct ExperimentConfig {
    std::size_t m = 50;
    CoefficientKind coefficients = CoefficientKind::benchmark;
    double k = 1.0;
    double c = 10.0;
    double mu = 0.0;
    bool lump_mass = false;

    SourceKind source = SourceKind::sigmoid;
    double gamma = 10.0;
    double source_value = 1.0;

    double T = 0.1;
    double tau_forward = 1e-4;
    double tau_inverse = 1e-3;
    Scheme scheme_forward = Scheme::crank_nicolson;

    SolverKind solver = SolverKind::nonlocal;
    OmegaKind omega = OmegaKind::uniform;
    double beta_alpha = 0.0;  // beta(t) = exp(alpha (t - T))

    std::size_t max_iters = 30;
    double stop_tol = 1e-12;
    InitKind init = InitKind::a_psi;
    std::optional<double> delta;  // unset: estimated from the operator

    std::string output_dir = "out";
    std::string observation;  // empty: <output_dir>/observation.txt
    std::uint64_t seed = 0;
    double noise_level = 0.0;

    std::vector<double> table_gammas{5.0, 10.0, 20.0, 100.0};
    std::size_t table_rows = 6;
    SweepParameter sweep_parameter = SweepParameter::T;
    std::vector<double> sweep_values{0.05, 0.1, 0.2};

    std::filesystem::path observation_path() const {
        return observation.empty() ? std::filesystem::path(output_dir) / "observation.txt"
                                   : std::filesystem::path(observation);
    }
};

inline const char* to_string(CoefficientKind v) { return v == CoefficientKind::benchmark ? "benchmark" : "constant"; }
inline const char* to_string(SourceKind v) { return v == SourceKind::sigmoid ? "sigmoid" : "constant"; }
inline const char* to_string(OmegaKind v) { return v == OmegaKind::uniform ? "uniform" : "final"; }
inline const char* to_string(Scheme v) { return v == Scheme::crank_nicolson ? "cn" : "implicit"; }
inline const char* to_string(SolverKind v) {
    switch (v) {
        case SolverKind::nonlocal: return "nonlocal";
        case SolverKind::rhs: return "rhs";
        case SolverKind::integral: return "integral";
        case SolverKind::multiplicative: return "multiplicative";
    }
    return "?";
}
inline const char* to_string(InitKind v) {
    switch (v) {
        case InitKind::minus_chi: return "minus_chi";
        case InitKind::a_psi: return "a_psi";
        case InitKind::zero: return "zero";
        case InitKind::given: return "given";
    }
    return "?";
}
inline const char* to_string(SweepParameter v) {
    switch (v) {
        case SweepParameter::T: return "T";
        case SweepParameter::c: return "c";
        case SweepParameter::tau: return "tau";
    }
    return "?";
}

inline SolverKind parse_solver(const std::string& s) {
    if (s == "nonlocal") return SolverKind::nonlocal;
    if (s == "rhs") return SolverKind::rhs;
    if (s == "integral") return SolverKind::integral;
    if (s == "multiplicative") return SolverKind::multiplicative;
    throw ConfigError("unknown solver '" + s + "' (expected nonlocal, rhs, integral or multiplicative)");
}

namespace detail {

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a real number, got '" + v + "'");
    }
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        const unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return u;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const std::string item(trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos
                                                                                                  : comma - start)));
        if (item.empty()) throw ConfigError("key '" + key + "': empty list entry");
        out.push_back(parse_real(key, item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string format_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += format_real(xs[i]);
    }
    return out;
}

}  // namespace detail

/// Rejects configurations the experiment cannot run.
inline void validate(const ExperimentConfig& cfg) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (cfg.m < 1) fail("m must be at least 1");
    if (!(cfg.k > 0.0) || !std::isfinite(cfg.k)) fail("k must be positive");
    if (!(cfg.c >= 0.0) || !std::isfinite(cfg.c)) fail("c must be non-negative");
    if (!(cfg.mu >= 0.0) || !std::isfinite(cfg.mu)) fail("mu must be non-negative");
    if (cfg.coefficients == CoefficientKind::benchmark && (cfg.k != 1.0 || cfg.mu != 0.0)) {
        fail("coefficients = benchmark fixes k = 1 and mu = 0; use coefficients = constant to change them");
    }
    if (!std::isfinite(cfg.gamma)) fail("gamma must be finite");
    if (!std::isfinite(cfg.source_value)) fail("source_value must be finite");
    if (!(cfg.T > 0.0)) fail("T must be positive");
    if (!(cfg.tau_forward > 0.0) || !(cfg.tau_inverse > 0.0)) fail("time steps must be positive");
    try {
        (void)TimeGrid::covering(cfg.T, cfg.tau_forward);
        (void)TimeGrid::covering(cfg.T, cfg.tau_inverse);
    } catch (const InvalidArgument& e) {
        fail(std::string("time grid: ") + e.what());
    }
    if (!(cfg.beta_alpha >= 0.0) || !std::isfinite(cfg.beta_alpha)) fail("beta_alpha must be non-negative");
    if (cfg.max_iters < 1) fail("max_iters must be at least 1");
    if (!(cfg.stop_tol >= 0.0)) fail("stop_tol must be non-negative");
    if (cfg.delta && !(*cfg.delta > 0.0)) fail("delta must be positive");
    if (!(cfg.noise_level >= 0.0) || !std::isfinite(cfg.noise_level)) fail("noise_level must be non-negative");
    if (cfg.table_gammas.empty()) fail("table_gammas must not be empty");
    if (cfg.table_rows < 1) fail("table_rows must be at least 1");
    if (cfg.sweep_values.empty()) fail("sweep_values must not be empty");
}

/// Builds a config from key = value text; unknown keys are errors.
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config") {
    using namespace detail;
    ExperimentConfig cfg;
    for (const auto& [key, v] : parse_key_values(text, origin)) {
        if (key == "m") cfg.m = parse_unsigned(key, v);
        else if (key == "coefficients") {
            if (v == "benchmark") cfg.coefficients = CoefficientKind::benchmark;
            else if (v == "constant") cfg.coefficients = CoefficientKind::constant;
            else throw ConfigError("unknown coefficients '" + v + "' (expected benchmark or constant)");
        } else if (key == "k") cfg.k = parse_real(key, v);
        else if (key == "c") cfg.c = parse_real(key, v);
        else if (key == "mu") cfg.mu = parse_real(key, v);
        else if (key == "lump_mass") cfg.lump_mass = parse_bool(key, v);
        else if (key == "source") {
            if (v == "sigmoid") cfg.source = SourceKind::sigmoid;
            else if (v == "constant") cfg.source = SourceKind::constant;
            else throw ConfigError("unknown source '" + v + "' (expected sigmoid or constant)");
        } else if (key == "gamma") cfg.gamma = parse_real(key, v);
        else if (key == "source_value") cfg.source_value = parse_real(key, v);
        else if (key == "T") cfg.T = parse_real(key, v);
        else if (key == "tau_forward") cfg.tau_forward = parse_real(key, v);
        else if (key == "tau_inverse") cfg.tau_inverse = parse_real(key, v);
        else if (key == "scheme_forward") {
            if (v == "cn") cfg.scheme_forward = Scheme::crank_nicolson;
            else if (v == "implicit") cfg.scheme_forward = Scheme::implicit;
            else throw ConfigError("unknown scheme_forward '" + v + "' (expected cn or implicit)");
        } else if (key == "solver") cfg.solver = parse_solver(v);
        else if (key == "omega") {
            if (v == "uniform") cfg.omega = OmegaKind::uniform;
            else if (v == "final") cfg.omega = OmegaKind::final;
            else throw ConfigError("unknown omega '" + v + "' (expected uniform or final)");
        } else if (key == "beta_alpha") cfg.beta_alpha = parse_real(key, v);
        else if (key == "max_iters") cfg.max_iters = parse_unsigned(key, v);
        else if (key == "stop_tol") cfg.stop_tol = parse_real(key, v);
        else if (key == "init") {
            if (v == "a_psi") cfg.init = InitKind::a_psi;
            else if (v == "minus_chi") cfg.init = InitKind::minus_chi;
            else if (v == "zero") cfg.init = InitKind::zero;
            else throw ConfigError("unknown init '" + v + "' (expected a_psi, minus_chi or zero)");
        } else if (key == "delta") {
            if (v == "auto") cfg.delta.reset();
            else cfg.delta = parse_real(key, v);
        } else if (key == "output_dir") cfg.output_dir = v;
        else if (key == "observation") cfg.observation = v;
        else if (key == "seed") cfg.seed = parse_unsigned(key, v);
        else if (key == "noise_level") cfg.noise_level = parse_real(key, v);
        else if (key == "table_gammas") cfg.table_gammas = parse_list(key, v);
        else if (key == "table_rows") cfg.table_rows = parse_unsigned(key, v);
        else if (key == "sweep_parameter") {
            if (v == "T") cfg.sweep_parameter = SweepParameter::T;
            else if (v == "c") cfg.sweep_parameter = SweepParameter::c;
            else if (v == "tau") cfg.sweep_parameter = SweepParameter::tau;
            else throw ConfigError("unknown sweep_parameter '" + v + "' (expected T, c or tau)");
        } else if (key == "sweep_values") cfg.sweep_values = parse_list(key, v);
        else throw ConfigError(origin + ": unknown key '" + key + "'");
    }
    validate(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, path.string());
}

/// Every key with its resolved value, in a fixed order.
inline std::string format_config(const ExperimentConfig& cfg) {
    using detail::format_list;
    return format_key_values({
        {"m", std::to_string(cfg.m)},
        {"coefficients", to_string(cfg.coefficients)},
        {"k", format_real(cfg.k)},
        {"c", format_real(cfg.c)},
        {"mu", format_real(cfg.mu)},
        {"lump_mass", cfg.lump_mass ? "true" : "false"},
        {"source", to_string(cfg.source)},
        {"gamma", format_real(cfg.gamma)},
        {"source_value", format_real(cfg.source_value)},
        {"T", format_real(cfg.T)},
        {"tau_forward", format_real(cfg.tau_forward)},
        {"tau_inverse", format_real(cfg.tau_inverse)},
        {"scheme_forward", to_string(cfg.scheme_forward)},
        {"solver", to_string(cfg.solver)},
        {"omega", to_string(cfg.omega)},
        {"beta_alpha", format_real(cfg.beta_alpha)},
        {"max_iters", std::to_string(cfg.max_iters)},
        {"stop_tol", format_real(cfg.stop_tol)},
        {"init", to_string(cfg.init)},
        {"delta", cfg.delta ? format_real(*cfg.delta) : "auto"},
        {"output_dir", cfg.output_dir},
        {"observation", cfg.observation},
        {"seed", std::to_string(cfg.seed)},
        {"noise_level", format_real(cfg.noise_level)},
        {"table_gammas", format_list(cfg.table_gammas)},
        {"table_rows", std::to_string(cfg.table_rows)},
        {"sweep_parameter", to_string(cfg.sweep_parameter)},
        {"sweep_values", format_list(cfg.sweep_values)},
    });
}

}  // namespace srcid::harness
