#pragma once

#include "srcid/errors.hpp"
#include "srcid/fem.hpp"
#include "srcid/forward.hpp"
#include "srcid/linalg.hpp"
#include "srcid/spectrum.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace srcid {

/// Inputs of an identification run.
///
/// psi is the final-time observation w(T) for the nonlocal, rhs and
/// multiplicative solvers, and the weighted average sum_{n>=1} omega_n tau w_n
/// for the integral solver.
struct ObservationData {
    Field phi;  // initial state w(0)
    Field psi;
    std::optional<std::vector<double>> omega_samples;
    std::optional<std::vector<double>> beta_samples;
};

enum class InitKind { minus_chi, a_psi, zero, given };

/// Starting source phi^0. minus_chi means v_0 = -chi, i.e. phi^0 = A phi - chi.
struct InitialGuess {
    InitKind kind = InitKind::a_psi;
    Field given;

    static InitialGuess minus_chi() { return {InitKind::minus_chi, {}}; }
    static InitialGuess a_psi() { return {InitKind::a_psi, {}}; }
    static InitialGuess zero() { return {InitKind::zero, {}}; }
    static InitialGuess from(Field f) { return {InitKind::given, std::move(f)}; }
};

/// Reference source used to record per-iteration errors.
struct ExactSource {
    Field nodal;      // f at mesh nodes
    Field projected;  // L2 projection of f
};

struct IterationOptions {
    std::size_t max_iters = 30;
    double stop_tol = 1e-12;
    InitialGuess init;
    /// Coercivity constant; estimated from the operator when unset.
    std::optional<double> delta;
    /// Tolerance of every inner linear solve.
    SolveOptions inner = inner_defaults();
    bool keep_iterates = false;
    std::optional<ExactSource> exact;

    static SolveOptions inner_defaults() {
        SolveOptions o;
        o.rel_tol = 1e-12;
        return o;
    }
};

enum class DeltaSource { user, estimated };

struct IterationReport {
    /// m_norm(phi^k - phi^{k-1}) for k = 1..iterations.
    std::vector<double> delta_norms;
    /// delta_norms[k] / delta_norms[k-1]; one fewer entry than delta_norms.
    std::vector<double> contraction_ratios;
    /// Theoretical contraction factor of the solver.
    double rho_bar = 0.0;
    double delta = 0.0;
    DeltaSource delta_source = DeltaSource::estimated;
    std::size_t iterations = 0;
    std::optional<std::size_t> converged_at;
    /// Filled for k = 0..iterations when an exact source is supplied.
    std::vector<double> eps_inf;
    std::vector<double> eps_l2;
    std::vector<double> eps_l2_nodal;
    /// phi^0..phi^K when keep_iterates is set.
    std::vector<Field> iterates;
    std::vector<std::string> warnings;

    bool converged() const noexcept { return converged_at.has_value(); }
};

struct IdentificationResult {
    Field source;
    IterationReport report;
};

/// A linear solve failed mid-iteration; carries the report up to that point.
class IdentificationFailure : public SolverFailure {
public:
    IdentificationFailure(const SolverFailure& cause, IterationReport report)
        : SolverFailure(std::string("identification failed: ") + cause.what(), cause.residual(), cause.iterations()),
          report_(std::move(report)) {}

    const IterationReport& report() const noexcept { return report_; }

private:
    IterationReport report_;
};

/// (1 + tau delta)^-N, the discrete contraction factor of the final-time iterations.
inline double contraction_bound(double delta, const TimeGrid& grid) {
    if (!(delta > 0.0)) throw InvalidArgument("contraction bound needs delta > 0");
    return std::pow(1.0 + grid.tau() * delta, -static_cast<double>(grid.steps()));
}

/// sum_{n=1..N} omega_n tau (1 + tau delta)^-n.
inline double integral_contraction_rate(double delta, const TimeGrid& grid, std::span<const double> omega) {
    if (!(delta > 0.0)) throw InvalidArgument("contraction rate needs delta > 0");
    if (omega.size() != grid.steps() + 1) throw InvalidArgument("omega samples must have N + 1 entries");
    double rho = 0.0;
    const double q = 1.0 / (1.0 + grid.tau() * delta);
    double qn = 1.0;
    for (std::size_t n = 1; n <= grid.steps(); ++n) {
        qn *= q;
        rho += omega[n] * grid.tau() * qn;
    }
    return rho;
}

/// 1 - beta(0) (1 - exp(-delta T)).
inline double multiplicative_contraction_rate(double delta, double horizon, double beta0) {
    if (!(delta > 0.0)) throw InvalidArgument("contraction rate needs delta > 0");
    return 1.0 - beta0 * (1.0 - std::exp(-delta * horizon));
}

/// ||phi^{k+1} - L|| / ||phi^k - L|| for k = 0..K-1, with L the proxy limit.
/// Entries whose denominator vanishes are NaN.
inline std::vector<double> limit_ratios(const DiscreteOperator& op, std::span<const Field> iterates, const Field& limit) {
    std::vector<double> out;
    if (iterates.size() < 2) return out;
    for (std::size_t k = 0; k + 1 < iterates.size(); ++k) {
        const double den = m_norm(op, iterates[k] - limit);
        const double num = m_norm(op, iterates[k + 1] - limit);
        out.push_back(den > 0.0 ? num / den : std::nan(""));
    }
    return out;
}

namespace detail {

inline void check_observation(const DiscreteOperator& op, const ObservationData& data) {
    if (data.phi.size() != op.dof()) throw InvalidArgument("initial data phi has wrong dimension");
    if (data.psi.size() != op.dof()) throw InvalidArgument("observation psi has wrong dimension");
}

inline void check_beta(std::span<const double> beta, const TimeGrid& grid) {
    if (beta.size() != grid.steps() + 1) throw InvalidArgument("beta samples must have N + 1 entries");
    for (std::size_t n = 0; n < beta.size(); ++n) {
        if (!(beta[n] > 0.0)) throw InvalidArgument("beta must be positive");
        if (n > 0 && beta[n] < beta[n - 1]) throw InvalidArgument("beta must be non-decreasing");
    }
    if (std::abs(beta.back() - 1.0) > 1e-12) throw InvalidArgument("beta must equal 1 at the final time");
}

inline void resolve_delta(const DiscreteOperator& op, const IterationOptions& opts, IterationReport& report) {
    if (opts.delta) {
        if (!(*opts.delta > 0.0)) throw InvalidArgument("user-supplied delta must be positive");
        report.delta = *opts.delta;
        report.delta_source = DeltaSource::user;
    } else {
        report.delta = estimate_delta(op);
        report.delta_source = DeltaSource::estimated;
    }
}

// Shared Picard bookkeeping: records iterates, deltas, errors and the stop test.
class PicardTracker {
public:
    PicardTracker(const DiscreteOperator& op, const IterationOptions& opts, IterationReport& report)
        : op_(op), opts_(opts), report_(report) {
        if (opts.max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
        if (opts.exact && (opts.exact->nodal.size() != op.dof() || opts.exact->projected.size() != op.dof())) {
            throw InvalidArgument("exact source has wrong dimension");
        }
    }

    void record_initial(const Field& phi0) {
        record_errors(phi0);
        if (opts_.keep_iterates) report_.iterates.push_back(phi0);
    }

    /// Returns true when the successive-change criterion is met.
    bool record(const Field& previous, const Field& next) {
        const double d = m_norm(op_, next - previous);
        if (!report_.delta_norms.empty()) {
            const double prev = report_.delta_norms.back();
            report_.contraction_ratios.push_back(prev > 0.0 ? d / prev : std::nan(""));
        }
        report_.delta_norms.push_back(d);
        report_.iterations = report_.delta_norms.size();
        record_errors(next);
        if (opts_.keep_iterates) report_.iterates.push_back(next);
        if (d <= opts_.stop_tol) {
            report_.converged_at = report_.iterations;
            return true;
        }
        return false;
    }

private:
    void record_errors(const Field& phi) {
        if (!opts_.exact) return;
        const Field diff_nodal = phi - opts_.exact->nodal;
        report_.eps_inf.push_back(norm_inf(diff_nodal));
        report_.eps_l2.push_back(m_norm(op_, phi - opts_.exact->projected));
        report_.eps_l2_nodal.push_back(m_norm(op_, diff_nodal));
    }

    const DiscreteOperator& op_;
    const IterationOptions& opts_;
    IterationReport& report_;
};

inline Field initial_source(const DiscreteOperator& op, const ObservationData& data, const IterationOptions& opts,
                            const Field& a_phi, const Field& chi) {
    switch (opts.init.kind) {
        case InitKind::minus_chi:
            return a_phi - chi;
        case InitKind::a_psi:
            return apply_A(op, data.psi, opts.inner);
        case InitKind::zero:
            return Field(op.dof());
        case InitKind::given:
            if (opts.init.given.size() != op.dof()) throw InvalidArgument("initial guess has wrong dimension");
            return opts.init.given;
    }
    throw InvalidArgument("unknown initial guess");
}

// Runs phi^{k+1} = update(phi^k) until the stop criterion or max_iters.
template <class Update>
IdentificationResult run_picard(const DiscreteOperator& op, const IterationOptions& opts, IterationReport report,
                                Field phi, Update&& update) {
    PicardTracker tracker(op, opts, report);
    tracker.record_initial(phi);
    try {
        for (std::size_t k = 0; k < opts.max_iters; ++k) {
            Field next = update(phi);
            const bool done = tracker.record(phi, next);
            phi = std::move(next);
            if (done) break;
        }
    } catch (const IdentificationFailure&) {
        throw;
    } catch (const SolverFailure& e) {
        throw IdentificationFailure(e, std::move(report));
    }
    if (!report.converged()) {
        report.warnings.push_back("no convergence within " + std::to_string(opts.max_iters) +
                                  " iterations; returning the last iterate");
    }
    return {std::move(phi), std::move(report)};
}

}  // namespace detail

/// Final overdetermination through the time-derivative problem with the
/// nonlocal condition v_N - v_0 = chi, chi = A(phi - psi).
///
/// Each iteration sets v_0 = v_N - chi from the previous sweep and marches the
/// homogeneous implicit scheme; the source is recovered as phi = A phi_0 + v_0.
inline IdentificationResult identify_nonlocal(const DiscreteOperator& op, const ObservationData& data,
                                              const TimeGrid& grid, const IterationOptions& opts = {}) {
    detail::check_observation(op, data);
    IterationReport report;
    detail::resolve_delta(op, opts, report);
    report.rho_bar = contraction_bound(report.delta, grid);

    const Field a_phi = apply_A(op, data.phi, opts.inner);
    const Field chi = a_phi - apply_A(op, data.psi, opts.inner);
    const Field phi0 = detail::initial_source(op, data, opts, a_phi, chi);

    const ImplicitStepper stepper(op, grid.tau(), opts.inner);
    auto update = [&](const Field& phi) {
        Field v = phi - a_phi;
        for (std::size_t n = 0; n < grid.steps(); ++n) v = stepper.step(v, nullptr);
        v -= chi;
        return a_phi + v;
    };
    return detail::run_picard(op, opts, std::move(report), phi0, update);
}

/// Final overdetermination by refining the source directly:
/// phi^{k+1} = (w_N - w_{N-1}) / tau + A psi, with w marched from phi under phi^k.
inline IdentificationResult identify_rhs(const DiscreteOperator& op, const ObservationData& data, const TimeGrid& grid,
                                         const IterationOptions& opts = {}) {
    detail::check_observation(op, data);
    IterationReport report;
    detail::resolve_delta(op, opts, report);
    report.rho_bar = contraction_bound(report.delta, grid);

    const Field a_phi = apply_A(op, data.phi, opts.inner);
    const Field a_psi = apply_A(op, data.psi, opts.inner);
    const Field phi0 = detail::initial_source(op, data, opts, a_phi, a_phi - a_psi);

    auto update = [&](const Field& phi) {
        LastTwoObserver last;
        solve_cauchy(op, data.phi, SourceTerm::constant(phi), grid, Scheme::implicit, {last}, opts.inner);
        return last.backward_difference(grid.tau()) + a_psi;
    };
    return detail::run_picard(op, opts, std::move(report), phi0, update);
}

/// Integral overdetermination: phi^{k+1} = sum_{n=1..N} omega_n (w_n - w_{n-1}) + A psi.
///
/// omega must be non-negative with sum_{n=1..N} omega_n tau = 1. Weight placed
/// only at t_0 gives a non-contractive iteration (rate 1); that case is run
/// but flagged in the report.
inline IdentificationResult identify_integral(const DiscreteOperator& op, const ObservationData& data,
                                              const TimeGrid& grid, const IterationOptions& opts = {}) {
    detail::check_observation(op, data);
    if (!data.omega_samples) throw InvalidArgument("integral identification needs omega samples");
    const std::vector<double>& omega = *data.omega_samples;
    if (omega.size() != grid.steps() + 1) throw InvalidArgument("omega samples must have N + 1 entries");
    double mass = 0.0;
    for (std::size_t n = 0; n < omega.size(); ++n) {
        if (!(omega[n] >= 0.0) || !std::isfinite(omega[n])) throw InvalidArgument("omega must be non-negative");
        if (n > 0) mass += omega[n] * grid.tau();
    }

    IterationReport report;
    detail::resolve_delta(op, opts, report);
    if (mass == 0.0 && omega[0] > 0.0) {
        report.rho_bar = 1.0;
        report.warnings.push_back("omega is concentrated at t = 0: the iteration is not contractive (rate 1)");
    } else if (std::abs(mass - 1.0) > 1e-10) {
        throw InvalidArgument("omega is not normalized: sum omega_n tau = " + std::to_string(mass));
    } else {
        report.rho_bar = integral_contraction_rate(report.delta, grid, omega);
    }

    const Field a_phi = apply_A(op, data.phi, opts.inner);
    const Field a_psi = apply_A(op, data.psi, opts.inner);
    const Field phi0 = detail::initial_source(op, data, opts, a_phi, a_phi - a_psi);

    auto update = [&](const Field& phi) {
        WeightedDerivativeSum sum(omega);
        solve_cauchy(op, data.phi, SourceTerm::constant(phi), grid, Scheme::implicit, {sum}, opts.inner);
        return sum.sum() + a_psi;
    };
    return detail::run_picard(op, opts, std::move(report), phi0, update);
}

/// Source beta(t) f(x) with known beta, beta(T) = 1: the march uses
/// beta_{n+1} phi^k at each implicit step and the update matches identify_rhs.
inline IdentificationResult identify_multiplicative(const DiscreteOperator& op, const ObservationData& data,
                                                    const TimeGrid& grid, const IterationOptions& opts = {}) {
    detail::check_observation(op, data);
    if (!data.beta_samples) throw InvalidArgument("multiplicative identification needs beta samples");
    const std::vector<double>& beta = *data.beta_samples;
    detail::check_beta(beta, grid);

    IterationReport report;
    detail::resolve_delta(op, opts, report);
    report.rho_bar = multiplicative_contraction_rate(report.delta, grid.horizon(), beta.front());

    const Field a_phi = apply_A(op, data.phi, opts.inner);
    const Field a_psi = apply_A(op, data.psi, opts.inner);
    const Field phi0 = detail::initial_source(op, data, opts, a_phi, a_phi - a_psi);

    auto update = [&](const Field& phi) {
        LastTwoObserver last;
        solve_cauchy(op, data.phi, SourceTerm::modulated(phi, beta), grid, Scheme::implicit, {last}, opts.inner);
        return last.backward_difference(grid.tau()) + a_psi;
    };
    return detail::run_picard(op, opts, std::move(report), phi0, update);
}

enum class SolverKind { nonlocal, rhs, integral, multiplicative };

inline IdentificationResult identify(SolverKind kind, const DiscreteOperator& op, const ObservationData& data,
                                     const TimeGrid& grid, const IterationOptions& opts = {}) {
    switch (kind) {
        case SolverKind::nonlocal:
            return identify_nonlocal(op, data, grid, opts);
        case SolverKind::rhs:
            return identify_rhs(op, data, grid, opts);
        case SolverKind::integral:
            return identify_integral(op, data, grid, opts);
        case SolverKind::multiplicative:
            return identify_multiplicative(op, data, grid, opts);
    }
    throw InvalidArgument("unknown solver");
}

}  // namespace srcid
