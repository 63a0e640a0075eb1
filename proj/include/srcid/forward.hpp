#pragma once

#include "srcid/errors.hpp"
#include "srcid/fem.hpp"
#include "srcid/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace srcid {

/// Uniform time grid t_n = n tau, n = 0..N, with T = N tau.
class TimeGrid {
public:
    TimeGrid(double tau, std::size_t steps) : tau_(tau), steps_(steps) {
        if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("time step must be positive");
        if (steps == 0) throw InvalidArgument("time grid needs at least one step");
    }

    /// Grid with step tau covering [0, T]; T / tau must be an integer.
    static TimeGrid covering(double horizon, double tau) {
        if (!(horizon > 0.0) || !(tau > 0.0)) throw InvalidArgument("horizon and time step must be positive");
        const double ratio = horizon / tau;
        const double steps = std::round(ratio);
        if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
            throw InvalidArgument("horizon " + std::to_string(horizon) + " is not an integer multiple of tau " +
                                  std::to_string(tau));
        }
        return TimeGrid(tau, static_cast<std::size_t>(steps));
    }

    double tau() const noexcept { return tau_; }
    std::size_t steps() const noexcept { return steps_; }
    double horizon() const noexcept { return tau_ * static_cast<double>(steps_); }
    double time(std::size_t n) const noexcept { return tau_ * static_cast<double>(n); }

    /// Samples g(t_n) for n = 0..N.
    std::vector<double> sample(const std::function<double(double)>& g) const {
        std::vector<double> s(steps_ + 1);
        for (std::size_t n = 0; n <= steps_; ++n) s[n] = g(time(n));
        return s;
    }

private:
    double tau_;
    std::size_t steps_;
};

/// Right-hand side of dw/dt + A w = source: zero, a constant field, or
/// beta(t) times a field with beta sampled on the time grid.
class SourceTerm {
public:
    struct Zero {};
    struct Constant {
        Field field;
    };
    struct Modulated {
        Field field;
        std::vector<double> beta;
    };

    static SourceTerm zero() { return SourceTerm(Zero{}); }
    static SourceTerm constant(Field f) { return SourceTerm(Constant{std::move(f)}); }
    static SourceTerm modulated(Field f, std::vector<double> beta) {
        if (beta.empty()) throw InvalidArgument("beta samples are empty");
        if (std::abs(beta.back() - 1.0) > 1e-12) throw InvalidArgument("beta must equal 1 at the final time");
        return SourceTerm(Modulated{std::move(f), std::move(beta)});
    }

    bool is_zero() const noexcept { return std::holds_alternative<Zero>(value_); }

    /// Scale of the field at time level n (1 for constant sources).
    double factor(std::size_t n) const {
        if (const auto* m = std::get_if<Modulated>(&value_)) return m->beta.at(n);
        return 1.0;
    }

    const Field* field() const noexcept {
        if (const auto* c = std::get_if<Constant>(&value_)) return &c->field;
        if (const auto* m = std::get_if<Modulated>(&value_)) return &m->field;
        return nullptr;
    }

    void check(std::size_t dof, const TimeGrid& grid) const {
        if (const Field* f = field(); f && f->size() != dof) throw InvalidArgument("source field dimension mismatch");
        if (const auto* m = std::get_if<Modulated>(&value_); m && m->beta.size() != grid.steps() + 1) {
            throw InvalidArgument("beta samples must have N + 1 entries");
        }
    }

private:
    explicit SourceTerm(std::variant<Zero, Constant, Modulated> v) : value_(std::move(v)) {}
    std::variant<Zero, Constant, Modulated> value_;
};

enum class Scheme { implicit, crank_nicolson };

/// Fully implicit step  (M + tau K) w_{n+1} = M w_n + tau M rhs,  with the
/// system matrix and its Jacobi diagonal built once per step size.
class ImplicitStepper {
public:
    ImplicitStepper(const DiscreteOperator& op, double tau, SolveOptions solve = {})
        : op_(&op), tau_(tau), solve_(std::move(solve)) {
        if (!(tau > 0.0)) throw InvalidArgument("time step must be positive");
        system_ = combine(1.0, op.mass(), tau, op.stiffness());
        diag_ = system_.diagonal();
    }

    /// rhs may be null for the homogeneous step.
    Field step(const Field& w, const Field* rhs) const {
        if (w.size() != op_->dof() || (rhs && rhs->size() != op_->dof())) {
            throw InvalidArgument("implicit step: dimension mismatch");
        }
        std::vector<double> b = spmv(op_->mass(), w);
        if (rhs) {
            const std::vector<double> Mr = spmv(op_->mass(), *rhs);
            for (std::size_t i = 0; i < b.size(); ++i) b[i] += tau_ * Mr[i];
        }
        return Field(cg_solve(system_, b, solve_, std::span<const double>(diag_), std::span<const double>(w)).x);
    }

    double tau() const noexcept { return tau_; }

private:
    const DiscreteOperator* op_;
    double tau_;
    SolveOptions solve_;
    SparseMatrix system_;
    std::vector<double> diag_;
};

/// (M + tau/2 K) w_{n+1} = (M - tau/2 K) w_n + tau/2 M (rhs_n + rhs_{n+1}).
class CrankNicolsonStepper {
public:
    CrankNicolsonStepper(const DiscreteOperator& op, double tau, SolveOptions solve = {})
        : op_(&op), tau_(tau), solve_(std::move(solve)) {
        if (!(tau > 0.0)) throw InvalidArgument("time step must be positive");
        system_ = combine(1.0, op.mass(), 0.5 * tau, op.stiffness());
        explicit_ = combine(1.0, op.mass(), -0.5 * tau, op.stiffness());
        diag_ = system_.diagonal();
    }

    Field step(const Field& w, const Field* rhs_n, const Field* rhs_np1) const {
        const std::size_t n = op_->dof();
        if (w.size() != n || (rhs_n && rhs_n->size() != n) || (rhs_np1 && rhs_np1->size() != n)) {
            throw InvalidArgument("Crank-Nicolson step: dimension mismatch");
        }
        std::vector<double> b = spmv(explicit_, w);
        if (rhs_n || rhs_np1) {
            Field sum(n);
            if (rhs_n) sum += *rhs_n;
            if (rhs_np1) sum += *rhs_np1;
            const std::vector<double> Ms = spmv(op_->mass(), sum);
            for (std::size_t i = 0; i < n; ++i) b[i] += 0.5 * tau_ * Ms[i];
        }
        return Field(cg_solve(system_, b, solve_, std::span<const double>(diag_), std::span<const double>(w)).x);
    }

    double tau() const noexcept { return tau_; }

private:
    const DiscreteOperator* op_;
    double tau_;
    SolveOptions solve_;
    SparseMatrix system_;
    SparseMatrix explicit_;
    std::vector<double> diag_;
};

/// One fully implicit step of (w_{n+1} - w_n) / tau + A w_{n+1} = rhs.
inline Field step_implicit(const DiscreteOperator& op, const Field& w, double tau, const Field& rhs,
                           const SolveOptions& solve = {}) {
    return ImplicitStepper(op, tau, solve).step(w, &rhs);
}

inline Field step_crank_nicolson(const DiscreteOperator& op, const Field& w, double tau, const Field& rhs_n,
                                 const Field& rhs_np1, const SolveOptions& solve = {}) {
    return CrankNicolsonStepper(op, tau, solve).step(w, &rhs_n, &rhs_np1);
}

/// Streaming consumer of a time march. observe() sees each new layer together
/// with the previous one; nothing else about the trajectory is retained.
class Observer {
public:
    virtual ~Observer() = default;
    virtual void start(const Field& w0, const TimeGrid& grid) = 0;
    virtual void observe(std::size_t n, const Field& previous, const Field& current) = 0;
};

using ObserverList = std::vector<std::reference_wrapper<Observer>>;

/// Keeps w_{N-1} and w_N.
class LastTwoObserver final : public Observer {
public:
    void start(const Field& w0, const TimeGrid&) override {
        previous_ = w0;
        current_ = w0;
    }
    void observe(std::size_t, const Field& previous, const Field& current) override {
        previous_ = previous;
        current_ = current;
    }

    const Field& previous() const noexcept { return previous_; }
    const Field& current() const noexcept { return current_; }

    /// (w_N - w_{N-1}) / tau.
    Field backward_difference(double tau) const { return (1.0 / tau) * (current_ - previous_); }

private:
    Field previous_;
    Field current_;
};

/// Accumulates sum_{n=1..N} omega_n (w_n - w_{n-1}).
class WeightedDerivativeSum final : public Observer {
public:
    explicit WeightedDerivativeSum(std::vector<double> omega) : omega_(std::move(omega)) {}

    void start(const Field& w0, const TimeGrid& grid) override {
        if (omega_.size() != grid.steps() + 1) throw InvalidArgument("omega samples must have N + 1 entries");
        sum_ = Field(w0.size());
    }
    void observe(std::size_t n, const Field& previous, const Field& current) override {
        if (current.size() != sum_.size()) throw InvalidArgument("observer dimension mismatch");
        const double w = omega_[n];
        if (w == 0.0) return;
        for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += w * (current[i] - previous[i]);
    }

    const Field& sum() const noexcept { return sum_; }

private:
    std::vector<double> omega_;
    Field sum_;
};

/// Accumulates sum_{n=1..N} omega_n tau w_n, the discrete time-weighted average.
class WeightedStateSum final : public Observer {
public:
    explicit WeightedStateSum(std::vector<double> omega) : omega_(std::move(omega)) {}

    void start(const Field& w0, const TimeGrid& grid) override {
        if (omega_.size() != grid.steps() + 1) throw InvalidArgument("omega samples must have N + 1 entries");
        tau_ = grid.tau();
        sum_ = Field(w0.size());
    }
    void observe(std::size_t n, const Field&, const Field& current) override {
        if (current.size() != sum_.size()) throw InvalidArgument("observer dimension mismatch");
        const double w = omega_[n] * tau_;
        if (w == 0.0) return;
        for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += w * current[i];
    }

    const Field& sum() const noexcept { return sum_; }

private:
    std::vector<double> omega_;
    double tau_ = 0.0;
    Field sum_;
};

/// Copies the layer whose time is closest to the requested one.
class SnapshotObserver final : public Observer {
public:
    explicit SnapshotObserver(double time) : time_(time) {}

    void start(const Field& w0, const TimeGrid& grid) override {
        const double idx = std::round(time_ / grid.tau());
        if (idx < 0.0 || idx > static_cast<double>(grid.steps())) throw InvalidArgument("snapshot time outside grid");
        index_ = static_cast<std::size_t>(idx);
        if (index_ == 0) snapshot_ = w0;
    }
    void observe(std::size_t n, const Field&, const Field& current) override {
        if (n == index_) snapshot_ = current;
    }

    std::size_t index() const noexcept { return index_; }
    const std::optional<Field>& snapshot() const noexcept { return snapshot_; }

private:
    double time_;
    std::size_t index_ = 0;
    std::optional<Field> snapshot_;
};

struct FinalState {
    Field w;
};

/// Marches dw/dt + A w = source from w(0) = w0 over the grid.
///
/// Memory stays O(dof): only the current and previous layers are alive, and
/// observers receive each pair as it is produced.
inline FinalState solve_cauchy(const DiscreteOperator& op, const Field& w0, const SourceTerm& source,
                               const TimeGrid& grid, Scheme scheme, const ObserverList& observers = {},
                               const SolveOptions& solve = {}) {
    if (w0.size() != op.dof()) throw InvalidArgument("initial state dimension mismatch");
    source.check(op.dof(), grid);
    for (Observer& o : observers) o.start(w0, grid);

    const Field* f = source.field();
    const auto rhs_at = [&](std::size_t n) -> std::optional<Field> {
        if (!f) return std::nullopt;
        return source.factor(n) * Field(*f);
    };

    Field w = w0;
    if (scheme == Scheme::implicit) {
        const ImplicitStepper stepper(op, grid.tau(), solve);
        for (std::size_t n = 0; n < grid.steps(); ++n) {
            const auto rhs = rhs_at(n + 1);
            Field next = stepper.step(w, rhs ? &*rhs : nullptr);
            for (Observer& o : observers) o.observe(n + 1, w, next);
            w = std::move(next);
        }
    } else {
        const CrankNicolsonStepper stepper(op, grid.tau(), solve);
        for (std::size_t n = 0; n < grid.steps(); ++n) {
            const auto rn = rhs_at(n);
            const auto rnp1 = rhs_at(n + 1);
            Field next = stepper.step(w, rn ? &*rn : nullptr, rnp1 ? &*rnp1 : nullptr);
            for (Observer& o : observers) o.observe(n + 1, w, next);
            w = std::move(next);
        }
    }
    return {std::move(w)};
}

}  // namespace srcid
