// Command-line runner for source identification experiments.
//
//   srcid forward --config base.cfg      generate the synthetic observation
//   srcid invert  --config base.cfg      identify the source from it
//   srcid table   --config base.cfg      error tables over gamma
//   srcid sweep   --config base.cfg      contraction vs T, c or tau
//
// Exit codes: 0 success, 1 I/O or unexpected error, 2 invalid config,
// 3 solver failure.

#include "srcid/harness/config.hpp"
#include "srcid/harness/experiment.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace srcid;
using namespace srcid::harness;

struct CommonFlags {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::string> solver;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "experiment config (key = value)")->required();
    cmd->add_option("--out", flags.out, "output directory (overrides output_dir)");
    cmd->add_option("--solver", flags.solver, "nonlocal | rhs | integral | multiplicative");
    cmd->add_option("--seed", flags.seed, "noise seed");
    cmd->add_flag("--quiet", flags.quiet, "suppress progress output");
}

ExperimentConfig resolve(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags.config);
    if (flags.out) cfg.output_dir = *flags.out;
    if (flags.solver) cfg.solver = parse_solver(*flags.solver);
    if (flags.seed) cfg.seed = *flags.seed;
    validate(cfg);
    return cfg;
}

void print_outcome(const IdentificationOutcome& out) {
    std::cout << "k,eps_inf,eps_l2\n";
    for (const auto& r : out.records) {
        std::cout << r.k << "," << format_real(r.eps_inf) << "," << format_real(r.eps_l2) << "\n";
    }
    std::cout << "rho_theory = " << format_real(out.report.rho_bar)
              << ", measured_rate = " << format_real(out.measured_rate) << "\n";
    for (const auto& w : out.report.warnings) std::cout << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identification of a spacewise-dependent source in a parabolic equation"};
    app.require_subcommand(1);

    CommonFlags forward_flags, invert_flags, table_flags, sweep_flags;
    auto* forward = app.add_subcommand("forward", "solve the forward problem and store the observation");
    auto* invert = app.add_subcommand("invert", "identify the source from a stored observation");
    auto* table = app.add_subcommand("table", "error tables for each gamma in table_gammas");
    auto* sweep = app.add_subcommand("sweep", "error decay for each value in sweep_values");
    add_common(forward, forward_flags);
    add_common(invert, invert_flags);
    add_common(table, table_flags);
    add_common(sweep, sweep_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (forward->parsed()) {
            const ExperimentConfig cfg = resolve(forward_flags);
            const Field psi = run_quasi_real(cfg);
            if (!forward_flags.quiet) {
                std::cout << "observation written to " << cfg.observation_path().string()
                          << " (max " << format_real(norm_inf(psi)) << ")\n";
            }
        } else if (invert->parsed()) {
            const ExperimentConfig cfg = resolve(invert_flags);
            const IdentificationOutcome out = run_identification(cfg);
            if (!invert_flags.quiet) print_outcome(out);
        } else if (table->parsed()) {
            const ExperimentConfig cfg = resolve(table_flags);
            const TableResult t = run_table(cfg);
            if (!table_flags.quiet) {
                std::cout << "k";
                for (double g : t.gammas) std::cout << ",gamma=" << format_real(g);
                std::cout << "\n";
                for (std::size_t k = 0; k < t.eps_inf.size(); ++k) {
                    std::cout << k;
                    for (double v : t.eps_inf[k]) std::cout << "," << format_real(v);
                    std::cout << "\n";
                }
            }
        } else if (sweep->parsed()) {
            const ExperimentConfig cfg = resolve(sweep_flags);
            const auto points = run_sweep(cfg);
            if (!sweep_flags.quiet) {
                std::cout << to_string(cfg.sweep_parameter) << ",rho_theory,measured_rate,final_eps_inf\n";
                for (const auto& p : points) {
                    std::cout << format_real(p.value) << "," << format_real(p.rho_theory) << ","
                              << format_real(p.measured_rate) << "," << format_real(p.final_eps_inf) << "\n";
                }
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateOperator& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
