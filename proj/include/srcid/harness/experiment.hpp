#pragma once

#include "srcid/errors.hpp"
#include "srcid/fem.hpp"
#include "srcid/forward.hpp"
#include "srcid/harness/config.hpp"
#include "srcid/harness/io.hpp"
#include "srcid/inverse.hpp"
#include "srcid/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace srcid::harness {

namespace fs = std::filesystem;

/// f(x) = 1 / (1 + exp(gamma (x1 - x2))).
inline ScalarFunction exact_source(double gamma) {
    return [gamma](Point p) { return 1.0 / (1.0 + std::exp(gamma * (p.x1 - p.x2))); };
}

inline ScalarFunction configured_source(const ExperimentConfig& cfg) {
    if (cfg.source == SourceKind::constant) {
        const double v = cfg.source_value;
        return [v](Point) { return v; };
    }
    return exact_source(cfg.gamma);
}

inline Coefficients configured_coefficients(const ExperimentConfig& cfg) {
    if (cfg.coefficients == CoefficientKind::benchmark) return Coefficients::constant(1.0, cfg.c, 0.0);
    return Coefficients::constant(cfg.k, cfg.c, cfg.mu);
}

/// omega_n for n = 0..N, normalized so that sum_{n=1..N} omega_n tau = 1.
inline std::vector<double> omega_samples(OmegaKind kind, const TimeGrid& grid) {
    std::vector<double> w(grid.steps() + 1, 0.0);
    if (kind == OmegaKind::uniform) {
        std::fill(w.begin(), w.end(), 1.0 / grid.horizon());
    } else {
        w.back() = 1.0 / grid.tau();
    }
    return w;
}

/// beta(t_n) = exp(alpha (t_n - T)); beta_N is exactly 1.
inline std::vector<double> beta_samples(double alpha, const TimeGrid& grid) {
    std::vector<double> b = grid.sample([&](double t) { return std::exp(alpha * (t - grid.horizon())); });
    b.back() = 1.0;
    return b;
}

enum class ObservationMode { final, integral, modulated };

inline ObservationMode observation_mode(SolverKind solver) {
    switch (solver) {
        case SolverKind::integral: return ObservationMode::integral;
        case SolverKind::multiplicative: return ObservationMode::modulated;
        default: return ObservationMode::final;
    }
}

inline const char* to_string(ObservationMode m) {
    switch (m) {
        case ObservationMode::final: return "final";
        case ObservationMode::integral: return "integral";
        case ObservationMode::modulated: return "modulated";
    }
    return "?";
}

/// Manifest entries that identification requires to agree with its config.
inline std::vector<std::pair<std::string, std::string>> manifest_identity(const ExperimentConfig& cfg) {
    const ObservationMode mode = observation_mode(cfg.solver);
    std::vector<std::pair<std::string, std::string>> e{
        {"format", "srcid-observation-1"},
        {"m", std::to_string(cfg.m)},
        {"coefficients", to_string(cfg.coefficients)},
        {"k", format_real(cfg.coefficients == CoefficientKind::benchmark ? 1.0 : cfg.k)},
        {"c", format_real(cfg.c)},
        {"mu", format_real(cfg.coefficients == CoefficientKind::benchmark ? 0.0 : cfg.mu)},
        {"lump_mass", cfg.lump_mass ? "true" : "false"},
        {"source", to_string(cfg.source)},
        {"gamma", format_real(cfg.gamma)},
        {"source_value", format_real(cfg.source_value)},
        {"T", format_real(cfg.T)},
        {"observation_mode", to_string(mode)},
        {"omega", mode == ObservationMode::integral ? to_string(cfg.omega) : "none"},
        {"beta_alpha", mode == ObservationMode::modulated ? format_real(cfg.beta_alpha) : "none"},
    };
    return e;
}

/// Full manifest: identity entries plus generation parameters.
inline std::string format_manifest(const ExperimentConfig& cfg) {
    auto e = manifest_identity(cfg);
    e.emplace_back("tau_forward", format_real(cfg.tau_forward));
    e.emplace_back("scheme_forward", to_string(cfg.scheme_forward));
    e.emplace_back("initial_state", "zero");
    e.emplace_back("seed", std::to_string(cfg.seed));
    e.emplace_back("noise_level", format_real(cfg.noise_level));
    return format_key_values(e);
}

/// Fails closed when the stored observation was generated for a different problem.
inline void check_manifest(const ExperimentConfig& cfg, const KeyValues& manifest) {
    for (const auto& [key, expected] : manifest_identity(cfg)) {
        const auto it = manifest.find(key);
        if (it == manifest.end()) throw ConfigError("observation manifest lacks '" + key + "'");
        if (it->second != expected) {
            throw ConfigError("observation manifest mismatch for '" + key + "': file has '" + it->second +
                              "', config expects '" + expected + "'");
        }
    }
}

inline fs::path manifest_path(const fs::path& observation) { return fs::path(observation.string() + ".manifest"); }

struct Problem {
    Mesh mesh;
    DiscreteOperator op;
};

inline Problem build_problem(const ExperimentConfig& cfg) {
    Mesh mesh = build_unit_square_mesh(cfg.m);
    DiscreteOperator op = assemble(mesh, configured_coefficients(cfg), {.lump_mass = cfg.lump_mass});
    return {std::move(mesh), std::move(op)};
}

/// Synthetic observation: marches the forward problem from zero with the
/// projected source on the forward grid, then applies optional seeded noise.
inline Field generate_observation(const ExperimentConfig& cfg, const Problem& problem) {
    const TimeGrid grid = TimeGrid::covering(cfg.T, cfg.tau_forward);
    const Field f = project_l2(problem.op, configured_source(cfg), problem.mesh);
    const Field w0(problem.op.dof());

    const ObservationMode mode = observation_mode(cfg.solver);
    Field psi;
    if (mode == ObservationMode::integral) {
        WeightedStateSum avg(omega_samples(cfg.omega, grid));
        solve_cauchy(problem.op, w0, SourceTerm::constant(f), grid, cfg.scheme_forward, {avg});
        psi = avg.sum();
    } else if (mode == ObservationMode::modulated) {
        psi = solve_cauchy(problem.op, w0, SourceTerm::modulated(f, beta_samples(cfg.beta_alpha, grid)), grid,
                           cfg.scheme_forward)
                  .w;
    } else {
        psi = solve_cauchy(problem.op, w0, SourceTerm::constant(f), grid, cfg.scheme_forward).w;
    }

    if (cfg.noise_level > 0.0) {
        const double amplitude = cfg.noise_level * norm_inf(psi);
        std::mt19937_64 rng(cfg.seed);
        for (double& v : psi) {
            // 53-bit uniform in [0, 1), mapped to [-1, 1).
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            v += amplitude * (2.0 * u - 1.0);
        }
    }
    return psi;
}

/// Writes the observation dump, its manifest and the resolved config.
inline Field run_quasi_real(const ExperimentConfig& cfg) {
    validate(cfg);
    const Problem problem = build_problem(cfg);
    const Field psi = generate_observation(cfg, problem);
    const fs::path obs = cfg.observation_path();
    write_file_atomic(obs, format_field(problem.mesh, psi));
    write_file_atomic(manifest_path(obs), format_manifest(cfg));
    write_file_atomic(fs::path(cfg.output_dir) / "forward.config", format_config(cfg));
    return psi;
}

struct ErrorRecord {
    std::size_t k = 0;
    double eps_inf = 0.0;
    double eps_l2 = 0.0;
    double eps_l2_nodal = 0.0;
    std::optional<double> ratio;
};

struct IdentificationOutcome {
    Field source;
    IterationReport report;
    std::vector<ErrorRecord> records;
    /// Geometric mean of ||phi^{k+1} - phi^K|| / ||phi^k - phi^K|| over k = 1..4,
    /// restricted to errors above the inner-solve noise floor.
    double measured_rate = std::nan("");
};

/// Geometric-mean contraction of the error against the last iterate.
inline double measured_contraction(const DiscreteOperator& op, const std::vector<Field>& iterates) {
    if (iterates.size() < 3) return std::nan("");
    const Field& limit = iterates.back();
    std::vector<double> err;
    for (std::size_t k = 0; k + 1 < iterates.size(); ++k) err.push_back(m_norm(op, iterates[k] - limit));
    if (!(err[0] > 0.0)) return std::nan("");
    const double floor = 1e-8 * err[0];
    double log_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 1; k + 1 < err.size() && k <= 4; ++k) {
        if (count > 0 && err[k + 1] < floor) break;
        if (!(err[k] > 0.0) || !(err[k + 1] > 0.0)) break;
        log_sum += std::log(err[k + 1] / err[k]);
        ++count;
    }
    return count ? std::exp(log_sum / static_cast<double>(count)) : std::nan("");
}

inline std::string format_records_csv(const std::vector<ErrorRecord>& records) {
    std::string out = "k,eps_inf,eps_l2,eps_l2_nodal,ratio\n";
    for (const auto& r : records) {
        out += std::to_string(r.k) + "," + format_real(r.eps_inf) + "," + format_real(r.eps_l2) + "," +
               format_real(r.eps_l2_nodal) + "," + (r.ratio ? format_real(*r.ratio) : "") + "\n";
    }
    return out;
}

inline std::string format_report(const ExperimentConfig& cfg, const IdentificationOutcome& out) {
    const auto& rep = out.report;
    std::vector<std::pair<std::string, std::string>> e{
        {"solver", to_string(cfg.solver)},
        {"init", to_string(cfg.init)},
        {"delta", format_real(rep.delta)},
        {"delta_source", rep.delta_source == DeltaSource::user ? "user" : "estimated"},
        {"rho_theory", format_real(rep.rho_bar)},
        {"measured_rate", format_real(out.measured_rate)},
        {"iterations", std::to_string(rep.iterations)},
        {"converged_at", rep.converged_at ? std::to_string(*rep.converged_at) : "none"},
    };
    for (std::size_t i = 0; i < rep.warnings.size(); ++i) e.emplace_back("warning" + std::to_string(i), rep.warnings[i]);
    return format_key_values(e);
}

/// Runs identification on the problem built from cfg against a given observation.
inline IdentificationOutcome identify_from(const ExperimentConfig& cfg, const Problem& problem, const Field& psi) {
    const TimeGrid grid = TimeGrid::covering(cfg.T, cfg.tau_inverse);
    const ScalarFunction f = configured_source(cfg);

    ObservationData data{Field(problem.op.dof()), psi, std::nullopt, std::nullopt};
    if (cfg.solver == SolverKind::integral) data.omega_samples = omega_samples(cfg.omega, grid);
    if (cfg.solver == SolverKind::multiplicative) data.beta_samples = beta_samples(cfg.beta_alpha, grid);

    IterationOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.stop_tol = cfg.stop_tol;
    opts.init.kind = cfg.init;
    opts.delta = cfg.delta;
    opts.keep_iterates = true;
    opts.exact = ExactSource{interpolate(problem.mesh, f), project_l2(problem.op, f, problem.mesh)};

    IdentificationOutcome out;
    auto result = identify(cfg.solver, problem.op, data, grid, opts);
    out.source = std::move(result.source);
    out.report = std::move(result.report);

    const auto& iterates = out.report.iterates;
    const auto ratios = limit_ratios(problem.op, iterates, iterates.back());
    for (std::size_t k = 0; k < iterates.size(); ++k) {
        ErrorRecord r;
        r.k = k;
        r.eps_inf = out.report.eps_inf[k];
        r.eps_l2 = out.report.eps_l2[k];
        r.eps_l2_nodal = out.report.eps_l2_nodal[k];
        if (k > 0 && std::isfinite(ratios[k - 1])) r.ratio = ratios[k - 1];
        out.records.push_back(r);
    }
    out.measured_rate = measured_contraction(problem.op, iterates);
    return out;
}

/// Reads the stored observation (checking its manifest), identifies the source
/// and writes errors.csv, recovered_source.txt and report.txt.
inline IdentificationOutcome run_identification(const ExperimentConfig& cfg) {
    validate(cfg);
    const fs::path obs = cfg.observation_path();
    KeyValues manifest;
    try {
        manifest = parse_key_values(read_file(manifest_path(obs)), manifest_path(obs).string());
    } catch (const IoError& e) {
        throw ConfigError(std::string("observation manifest unreadable: ") + e.what());
    }
    check_manifest(cfg, manifest);

    const Problem problem = build_problem(cfg);
    Field psi;
    try {
        psi = parse_field(problem.mesh, read_file(obs));
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("observation file rejected: ") + e.what());
    }

    IdentificationOutcome out = identify_from(cfg, problem, psi);
    const fs::path dir(cfg.output_dir);
    write_file_atomic(dir / "errors.csv", format_records_csv(out.records));
    write_file_atomic(dir / "recovered_source.txt", format_field(problem.mesh, out.source));
    write_file_atomic(dir / "report.txt", format_report(cfg, out));
    write_file_atomic(dir / "invert.config", format_config(cfg));
    return out;
}

/// Forward data generation followed by identification, all under cfg.output_dir.
inline IdentificationOutcome run_pipeline(const ExperimentConfig& cfg) {
    run_quasi_real(cfg);
    return run_identification(cfg);
}

inline std::string column_label(const char* name, double v) { return std::string(name) + "=" + format_real(v); }

struct TableResult {
    std::vector<double> gammas;
    /// eps_inf[row][column]
    std::vector<std::vector<double>> eps_inf;
    std::vector<std::vector<double>> eps_l2;
};

/// Error tables over gamma: rows k = 0..table_rows-1, one column per gamma.
inline TableResult run_table(const ExperimentConfig& base) {
    validate(base);
    TableResult t;
    t.gammas = base.table_gammas;
    t.eps_inf.assign(base.table_rows, std::vector<double>(base.table_gammas.size()));
    t.eps_l2 = t.eps_inf;
    for (std::size_t j = 0; j < base.table_gammas.size(); ++j) {
        ExperimentConfig cfg = base;
        cfg.source = SourceKind::sigmoid;
        cfg.gamma = base.table_gammas[j];
        cfg.output_dir = (fs::path(base.output_dir) / column_label("gamma", cfg.gamma)).string();
        cfg.observation.clear();
        const IdentificationOutcome out = run_pipeline(cfg);
        for (std::size_t k = 0; k < base.table_rows; ++k) {
            // A run that stopped early keeps its final error.
            const std::size_t idx = std::min(k, out.records.size() - 1);
            t.eps_inf[k][j] = out.records[idx].eps_inf;
            t.eps_l2[k][j] = out.records[idx].eps_l2;
        }
    }
    auto emit = [&](const std::vector<std::vector<double>>& rows) {
        std::string s = "k";
        for (double g : t.gammas) s += "," + column_label("gamma", g);
        s += "\n";
        for (std::size_t k = 0; k < rows.size(); ++k) {
            s += std::to_string(k);
            for (double v : rows[k]) s += "," + format_real(v);
            s += "\n";
        }
        return s;
    };
    write_file_atomic(fs::path(base.output_dir) / "table_eps_inf.csv", emit(t.eps_inf));
    write_file_atomic(fs::path(base.output_dir) / "table_eps_l2.csv", emit(t.eps_l2));
    return t;
}

struct SweepPoint {
    double value = 0.0;
    double rho_theory = 0.0;
    double measured_rate = 0.0;
    double final_eps_inf = 0.0;
    double final_eps_l2 = 0.0;
    std::size_t iterations = 0;
};

/// One pipeline run per parameter value; tau varies the inverse time step only.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& base) {
    validate(base);
    std::vector<SweepPoint> points;
    const char* name = to_string(base.sweep_parameter);
    for (double v : base.sweep_values) {
        ExperimentConfig cfg = base;
        switch (base.sweep_parameter) {
            case SweepParameter::T: cfg.T = v; break;
            case SweepParameter::c: cfg.c = v; break;
            case SweepParameter::tau: cfg.tau_inverse = v; break;
        }
        cfg.output_dir = (fs::path(base.output_dir) / column_label(name, v)).string();
        cfg.observation.clear();
        validate(cfg);
        const IdentificationOutcome out = run_pipeline(cfg);
        points.push_back({v, out.report.rho_bar, out.measured_rate, out.records.back().eps_inf,
                          out.records.back().eps_l2, out.report.iterations});
    }
    std::string s = std::string(name) + ",rho_theory,measured_rate,final_eps_inf,final_eps_l2,iterations\n";
    for (const auto& p : points) {
        s += format_real(p.value) + "," + format_real(p.rho_theory) + "," + format_real(p.measured_rate) + "," +
             format_real(p.final_eps_inf) + "," + format_real(p.final_eps_l2) + "," + std::to_string(p.iterations) +
             "\n";
    }
    write_file_atomic(fs::path(base.output_dir) / (std::string("sweep_") + name + "_summary.csv"), s);
    return points;
}

}  // namespace srcid::harness
