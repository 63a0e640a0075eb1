#include "srcid/harness/config.hpp"
#include "srcid/harness/experiment.hpp"
#include "srcid/harness/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

using namespace srcid;
using namespace srcid::harness;

namespace {

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("srcid_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    fs::path path_;
};

ExperimentConfig small_config(const ScratchDir& dir) {
    ExperimentConfig cfg;
    cfg.m = 8;
    cfg.tau_forward = 1e-3;
    cfg.tau_inverse = 1e-2;
    cfg.output_dir = dir.str();
    return cfg;
}

}  // namespace

TEST(ExactSource, HalfOnTheDiagonal) {
    for (double gamma : {0.5, 5.0, 10.0, 100.0, 1000.0}) {
        const auto f = exact_source(gamma);
        for (double t : {0.0, 0.3, 0.77, 1.0}) EXPECT_DOUBLE_EQ(f({t, t}), 0.5);
    }
}

TEST(ExactSource, CornerValue) { EXPECT_NEAR(exact_source(10.0)({0.0, 1.0}), 0.9999546, 1e-7); }

TEST(ExactSource, DecaysBelowDiagonalAsGammaGrows) {
    double previous = 1.0;
    for (double gamma : {1.0, 5.0, 10.0, 20.0, 100.0, 500.0}) {
        const double v = exact_source(gamma)({0.6, 0.4});
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, previous);
        previous = v;
    }
    EXPECT_LT(previous, 1e-40);
}

TEST(Config, DefaultsAreTheBaseCase) {
    const ExperimentConfig cfg = parse_config("");
    EXPECT_EQ(cfg.m, 50u);
    EXPECT_EQ(cfg.c, 10.0);
    EXPECT_EQ(cfg.gamma, 10.0);
    EXPECT_EQ(cfg.T, 0.1);
    EXPECT_EQ(cfg.tau_forward, 1e-4);
    EXPECT_EQ(cfg.tau_inverse, 1e-3);
    EXPECT_EQ(cfg.scheme_forward, Scheme::crank_nicolson);
    EXPECT_EQ(cfg.solver, SolverKind::nonlocal);
    EXPECT_EQ(cfg.init, InitKind::a_psi);
    EXPECT_FALSE(cfg.delta.has_value());
    EXPECT_EQ(cfg.noise_level, 0.0);
}

TEST(Config, ParsesCommentsListsAndOverrides) {
    const ExperimentConfig cfg = parse_config(
        "# comment line\n"
        "m = 12   # trailing comment\n"
        "solver = integral\n"
        "omega = final\n"
        "delta = 7.5\n"
        "table_gammas = 1, 2.5,4\n"
        "sweep_parameter = c\n"
        "sweep_values = 10, 30, 100\n");
    EXPECT_EQ(cfg.m, 12u);
    EXPECT_EQ(cfg.solver, SolverKind::integral);
    EXPECT_EQ(cfg.omega, OmegaKind::final);
    ASSERT_TRUE(cfg.delta.has_value());
    EXPECT_EQ(*cfg.delta, 7.5);
    EXPECT_EQ(cfg.table_gammas, (std::vector<double>{1.0, 2.5, 4.0}));
    EXPECT_EQ(cfg.sweep_parameter, SweepParameter::c);
    EXPECT_EQ(cfg.sweep_values, (std::vector<double>{10.0, 30.0, 100.0}));
}

TEST(Config, RejectsInvalidInput) {
    EXPECT_THROW(parse_config("colour = red\n"), ConfigError);
    EXPECT_THROW(parse_config("m = 4\nm = 5\n"), ConfigError);
    EXPECT_THROW(parse_config("m 4\n"), ConfigError);
    EXPECT_THROW(parse_config("m = -3\n"), ConfigError);
    EXPECT_THROW(parse_config("m = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("T = 0.1x\n"), ConfigError);
    EXPECT_THROW(parse_config("tau_inverse = 0.03\n"), ConfigError);  // T / tau not integral
    EXPECT_THROW(parse_config("noise_level = -0.1\n"), ConfigError);
    EXPECT_THROW(parse_config("gamma = inf\n"), ConfigError);
    EXPECT_THROW(parse_config("solver = newton\n"), ConfigError);
    EXPECT_THROW(parse_config("k = 2\n"), ConfigError);  // benchmark fixes k
    EXPECT_THROW(parse_config("coefficients = constant\nk = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("max_iters = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("delta = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("table_gammas = 5,,10\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/dir/x.cfg"), ConfigError);
}

TEST(Config, FormatRoundTrips) {
    ExperimentConfig cfg = parse_config("m = 7\ncoefficients = constant\nk = 2.5\nmu = 0.25\nc = 3\n"
                                        "solver = multiplicative\nbeta_alpha = 4\nseed = 99\nnoise_level = 0.01\n");
    const std::string text = format_config(cfg);
    const ExperimentConfig back = parse_config(text);
    EXPECT_EQ(format_config(back), text);
    EXPECT_EQ(back.k, 2.5);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.solver, SolverKind::multiplicative);
}

TEST(FieldIo, RoundTripIsExact) {
    const Mesh mesh = build_unit_square_mesh(3);
    Field f(mesh.node_count());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(1.0 + 0.37 * i) / 3.0;
    const std::string text = format_field(mesh, f);
    EXPECT_EQ(parse_field(mesh, text), f);
    EXPECT_THROW(parse_field(build_unit_square_mesh(4), text), InvalidArgument);
}

TEST(QuasiReal, ZeroSourceGivesZeroObservation) {
    ScratchDir dir("zero");
    ExperimentConfig cfg = small_config(dir);
    cfg.source = SourceKind::constant;
    cfg.source_value = 0.0;
    const Field psi = run_quasi_real(cfg);
    for (double v : psi) EXPECT_EQ(v, 0.0);
    const Field stored = parse_field(build_unit_square_mesh(cfg.m), read_file(cfg.observation_path()));
    EXPECT_EQ(stored, psi);
    EXPECT_TRUE(fs::exists(manifest_path(cfg.observation_path())));
    EXPECT_TRUE(fs::exists(dir.path() / "forward.config"));
}

TEST(QuasiReal, SameSeedGivesIdenticalFiles) {
    ScratchDir a("seed_a"), b("seed_b"), c("seed_c");
    ExperimentConfig cfg = small_config(a);
    cfg.noise_level = 0.01;
    cfg.seed = 42;
    run_pipeline(cfg);
    cfg.output_dir = b.str();
    run_pipeline(cfg);
    for (const char* name : {"observation.txt", "errors.csv", "recovered_source.txt"}) {
        EXPECT_EQ(read_file(a.path() / name), read_file(b.path() / name)) << name;
    }
    cfg.output_dir = c.str();
    cfg.seed = 43;
    run_quasi_real(cfg);
    EXPECT_NE(read_file(a.path() / "observation.txt"), read_file(c.path() / "observation.txt"));
}

TEST(QuasiReal, NoiseAmplitudeBounded) {
    ScratchDir dir("noise");
    ExperimentConfig cfg = small_config(dir);
    const Problem problem = build_problem(cfg);
    const Field clean = generate_observation(cfg, problem);
    cfg.noise_level = 0.05;
    const Field noisy = generate_observation(cfg, problem);
    const double diff = norm_inf(noisy - clean);
    EXPECT_GT(diff, 0.0);
    EXPECT_LE(diff, 0.05 * norm_inf(clean));
}

TEST(Identification, ManifestMismatchRejected) {
    ScratchDir dir("manifest");
    ExperimentConfig cfg = small_config(dir);
    run_quasi_real(cfg);
    ExperimentConfig other = cfg;
    other.c = 20.0;
    EXPECT_THROW(run_identification(other), ConfigError);
    other = cfg;
    other.m = 9;
    EXPECT_THROW(run_identification(other), ConfigError);
    other = cfg;
    other.solver = SolverKind::integral;  // expects an integral observation
    EXPECT_THROW(run_identification(other), ConfigError);
    fs::remove(manifest_path(cfg.observation_path()));
    EXPECT_THROW(run_identification(cfg), ConfigError);
}

TEST(Identification, ConstantSourceRecoveredToSolverTolerance) {
    for (SolverKind solver : {SolverKind::nonlocal, SolverKind::rhs, SolverKind::integral, SolverKind::multiplicative}) {
        ScratchDir dir("const");
        ExperimentConfig cfg = small_config(dir);
        cfg.source = SourceKind::constant;
        cfg.source_value = 2.5;
        cfg.scheme_forward = Scheme::implicit;
        cfg.tau_forward = cfg.tau_inverse;
        cfg.solver = solver;
        cfg.beta_alpha = 3.0;
        cfg.max_iters = 200;  // integral and multiplicative contract more slowly
        const auto out = run_pipeline(cfg);
        EXPECT_TRUE(out.report.converged()) << to_string(solver);
        EXPECT_LT(out.records.back().eps_inf, 1e-8) << to_string(solver);
        EXPECT_LT(out.records.back().eps_l2, 1e-8) << to_string(solver);
    }
}

TEST(Identification, ConstantSourceFromFinerCrankNicolsonData) {
    ScratchDir dir("const_cn");
    ExperimentConfig cfg = small_config(dir);
    cfg.source = SourceKind::constant;
    cfg.source_value = 2.5;
    const auto out = run_pipeline(cfg);
    // Only the time-discretization mismatch remains, of order tau_inverse.
    EXPECT_LT(out.records.back().eps_inf, 2.5 * 10.0 * cfg.tau_inverse);
    EXPECT_GT(out.records.back().eps_inf, 1e-6);
}

TEST(Identification, WritesOutputs) {
    ScratchDir dir("outputs");
    ExperimentConfig cfg = small_config(dir);
    const auto out = run_pipeline(cfg);
    const std::string csv = read_file(dir.path() / "errors.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,eps_inf,eps_l2,eps_l2_nodal,ratio");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(out.records.size() + 1));
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    const Field recovered = parse_field(build_unit_square_mesh(cfg.m), read_file(dir.path() / "recovered_source.txt"));
    EXPECT_EQ(recovered, out.source);
    const KeyValues resolved = parse_key_values(read_file(dir.path() / "invert.config"), "invert.config");
    EXPECT_EQ(resolved.at("m"), "8");
    const KeyValues report = parse_key_values(read_file(dir.path() / "report.txt"), "report.txt");
    EXPECT_EQ(report.count("rho_theory"), 1u);
    for (const auto& r : out.records) {
        EXPECT_GE(r.eps_inf, 0.0);
        EXPECT_GE(r.eps_l2, 0.0);
    }
}

TEST(Table, SingleGammaGivesSingleColumn) {
    ScratchDir dir("table1");
    ExperimentConfig cfg = small_config(dir);
    cfg.table_gammas = {10.0};
    cfg.table_rows = 4;
    const TableResult t = run_table(cfg);
    EXPECT_EQ(t.eps_inf.size(), 4u);
    EXPECT_EQ(t.eps_inf[0].size(), 1u);
    const std::string csv = read_file(dir.path() / "table_eps_inf.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,gamma=10");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_TRUE(fs::exists(dir.path() / "table_eps_l2.csv"));
    EXPECT_TRUE(fs::exists(dir.path() / "gamma=10" / "errors.csv"));
}

TEST(Sweep, EmitsSummaryAndPerValueRuns) {
    ScratchDir dir("sweep");
    ExperimentConfig cfg = small_config(dir);
    cfg.sweep_parameter = SweepParameter::c;
    cfg.sweep_values = {10.0, 30.0, 100.0};
    const auto points = run_sweep(cfg);
    ASSERT_EQ(points.size(), 3u);
    const std::string csv = read_file(dir.path() / "sweep_c_summary.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "c,rho_theory,measured_rate,final_eps_inf,final_eps_l2,iterations");
    for (const char* sub : {"c=10", "c=30", "c=100"}) EXPECT_TRUE(fs::exists(dir.path() / sub / "errors.csv")) << sub;
    EXPECT_GT(points[0].rho_theory, points[1].rho_theory);
    EXPECT_GT(points[1].rho_theory, points[2].rho_theory);
}

// Full error table on the 50 x 50 mesh for gamma = 5, 10, 20, 100.
class ErrorTable : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new ScratchDir("table_full");
        ExperimentConfig cfg;
        cfg.output_dir = dir_->str();
        table_ = new TableResult(run_table(cfg));
    }
    static void TearDownTestSuite() {
        delete table_;
        delete dir_;
    }
    static ScratchDir* dir_;
    static TableResult* table_;
};
ScratchDir* ErrorTable::dir_ = nullptr;
TableResult* ErrorTable::table_ = nullptr;

TEST_F(ErrorTable, InitialErrorsMatchReferenceValues) {
    // k = 0 is phi^0 = A psi, which depends only on the forward data.
    const double eps_inf0[] = {0.2698616, 0.2859782, 0.2915919, 0.2935690};
    const double eps_l20[] = {0.1889483, 0.1910198, 0.1918367, 0.1921380};
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(table_->eps_inf[0][j], eps_inf0[j], 0.01 * eps_inf0[j]) << "gamma = " << table_->gammas[j];
        EXPECT_NEAR(table_->eps_l2[0][j], eps_l20[j], 0.01 * eps_l20[j]) << "gamma = " << table_->gammas[j];
    }
}

TEST_F(ErrorTable, ErrorsDecreaseWithIterations) {
    for (std::size_t j = 0; j < table_->gammas.size(); ++j) {
        for (std::size_t k = 1; k < table_->eps_inf.size(); ++k) {
            EXPECT_LT(table_->eps_inf[k][j], table_->eps_inf[k - 1][j]) << "gamma column " << j << ", k " << k;
            EXPECT_LT(table_->eps_l2[k][j], table_->eps_l2[k - 1][j]) << "gamma column " << j << ", k " << k;
        }
    }
}

TEST_F(ErrorTable, ColumnsWeaklyIncreaseWithGamma) {
    for (std::size_t k = 0; k < table_->eps_inf.size(); ++k) {
        for (std::size_t j = 1; j < table_->gammas.size(); ++j) {
            EXPECT_GE(table_->eps_inf[k][j], table_->eps_inf[k][j - 1]) << "k " << k << ", column " << j;
            EXPECT_GE(table_->eps_l2[k][j], table_->eps_l2[k][j - 1]) << "k " << k << ", column " << j;
        }
    }
}

TEST_F(ErrorTable, FifthIterateBelowOnePercent) {
    const auto& row = table_->eps_inf[5];
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (table_->gammas[j] > 20.0) continue;
        EXPECT_LT(row[j], 0.01) << "gamma = " << table_->gammas[j];
    }
}

// For gamma = 100 the transition layer is narrower than one cell. The iteration
// converges to the L2 projection P f, whose P1 overshoot at the nodes is a few
// percent, so the nodal error of phi^5 is that overshoot plus the iteration error.
TEST_F(ErrorTable, SteepSourceErrorIsProjectionOvershoot) {
    const Mesh mesh = build_unit_square_mesh(50);
    const auto op = assemble(mesh, Coefficients::constant(1.0, 10.0, 0.0));
    const auto f = exact_source(100.0);
    const double overshoot = norm_inf(project_l2(op, f, mesh) - interpolate(mesh, f));
    EXPECT_GT(overshoot, 0.01);
    const double eps5 = table_->eps_inf[5][3];
    EXPECT_LT(eps5, overshoot + 0.01);
    EXPECT_GT(eps5, overshoot - 0.01);
}

TEST_F(ErrorTable, L2ErrorsAtFifthIterate) {
    for (std::size_t j = 0; j < table_->gammas.size(); ++j) EXPECT_LT(table_->eps_l2[5][j], 0.006);
}
