#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metastab/error.hpp"
#include "metastab/linalg.hpp"
#include "metastab/state_set.hpp"

namespace metastab {

/// Ordered list of opaque state labels with a label -> index lookup.
class StateSpace {
public:
    explicit StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.size() < 2) {
            throw Error(Errc::TooSmall, "a state space needs at least two states");
        }
        index_.reserve(labels_.size());
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            auto [it, inserted] = index_.emplace(labels_[i], i);
            if (!inserted) throw Error(Errc::DuplicateLabel, "label '" + labels_[i] + "' appears twice");
        }
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& label(StateIndex i) const { return labels_.at(i); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    StateIndex index(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) throw Error(Errc::StateNotFound, "no state labelled '" + label + "'");
        return it->second;
    }

    bool contains(const std::string& label) const { return index_.count(label) != 0; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, StateIndex> index_;
};

struct Transition {
    StateIndex to;
    double rate;
};

/// Finite irreducible continuous-time Markov chain.
///
/// Rates are stored as given; every rate-dependent query that is not
/// prefixed with `raw_` returns speedup * rate.  Instances are immutable.
class Chain {
public:
    Chain(std::shared_ptr<const StateSpace> space, std::vector<std::vector<Transition>> out,
          double speedup = 1.0)
        : space_(std::move(space)), out_(std::move(out)), speedup_(speedup) {
        if (!space_) throw Error(Errc::DimensionMismatch, "null state space");
        const std::size_t n = space_->size();
        if (out_.size() != n) throw Error(Errc::DimensionMismatch, "rate table does not match state space");
        if (!(speedup_ > 0.0) || !std::isfinite(speedup_)) {
            throw Error(Errc::NonPositiveRate, "speedup must be positive and finite");
        }
        raw_exit_.assign(n, 0.0);
        for (StateIndex i = 0; i < n; ++i) {
            auto& row = out_[i];
            std::sort(row.begin(), row.end(),
                      [](const Transition& a, const Transition& b) { return a.to < b.to; });
            for (std::size_t k = 0; k < row.size(); ++k) {
                const auto& t = row[k];
                if (t.to >= n) throw Error(Errc::StateNotFound, "transition target out of range");
                if (t.to == i) {
                    throw Error(Errc::InvalidTransition, "self transition at '" + space_->label(i) + "'");
                }
                if (k > 0 && row[k - 1].to == t.to) {
                    throw Error(Errc::InvalidTransition, "duplicate transition '" + space_->label(i) +
                                                             "' -> '" + space_->label(t.to) + "'");
                }
                if (!(t.rate > 0.0) || !std::isfinite(t.rate)) {
                    throw Error(Errc::NonPositiveRate, "rate '" + space_->label(i) + "' -> '" +
                                                           space_->label(t.to) + "' is not positive");
                }
                raw_exit_[i] += t.rate;
                max_raw_rate_ = std::max(max_raw_rate_, t.rate);
                ++transitions_;
            }
        }
        check_irreducible();
    }

    std::size_t size() const noexcept { return out_.size(); }
    const StateSpace& space() const noexcept { return *space_; }
    std::shared_ptr<const StateSpace> space_ptr() const noexcept { return space_; }
    const std::string& label(StateIndex i) const { return space_->label(i); }
    double speedup() const noexcept { return speedup_; }
    std::size_t transition_count() const noexcept { return transitions_; }

    /// Outgoing transitions of state i with raw (unsped) rates, ordered by target.
    std::span<const Transition> transitions(StateIndex i) const { return out_.at(i); }

    double raw_rate(StateIndex i, StateIndex j) const {
        const auto& row = out_.at(i);
        auto it = std::lower_bound(row.begin(), row.end(), j,
                                   [](const Transition& t, StateIndex v) { return t.to < v; });
        return (it != row.end() && it->to == j) ? it->rate : 0.0;
    }
    double rate(StateIndex i, StateIndex j) const { return speedup_ * raw_rate(i, j); }

    double raw_exit_rate(StateIndex i) const { return raw_exit_.at(i); }
    double exit_rate(StateIndex i) const { return speedup_ * raw_exit_.at(i); }

    double max_raw_rate() const noexcept { return max_raw_rate_; }
    double max_rate() const noexcept { return speedup_ * max_raw_rate_; }

    Chain with_speedup(double speedup) const {
        Chain copy = *this;
        if (!(speedup > 0.0) || !std::isfinite(speedup)) {
            throw Error(Errc::NonPositiveRate, "speedup must be positive and finite");
        }
        copy.speedup_ = speedup;
        return copy;
    }

private:
    void check_irreducible() const {
        const std::size_t n = size();
        std::vector<std::vector<StateIndex>> in(n);
        for (StateIndex i = 0; i < n; ++i) {
            for (const auto& t : out_[i]) in[t.to].push_back(i);
        }
        auto reach = [n](auto&& neighbours) {
            std::vector<char> seen(n, 0);
            std::queue<StateIndex> queue;
            seen[0] = 1;
            queue.push(0);
            while (!queue.empty()) {
                StateIndex v = queue.front();
                queue.pop();
                for (StateIndex w : neighbours(v)) {
                    if (!seen[w]) {
                        seen[w] = 1;
                        queue.push(w);
                    }
                }
            }
            return seen;
        };
        auto forward = reach([&](StateIndex v) {
            std::vector<StateIndex> next;
            for (const auto& t : out_[v]) next.push_back(t.to);
            return next;
        });
        auto backward = reach([&](StateIndex v) { return in[v]; });
        std::string missing;
        std::size_t count = 0;
        for (StateIndex i = 0; i < n; ++i) {
            if (forward[i] && backward[i]) continue;
            if (count < 8) missing += (count ? ", " : "") + space_->label(i);
            ++count;
        }
        if (count > 0) {
            if (count > 8) missing += ", ...";
            throw Error(Errc::NotIrreducible, std::to_string(count) + " state(s) not mutually reachable with '" +
                                                  space_->label(0) + "': {" + missing + "}");
        }
    }

    std::shared_ptr<const StateSpace> space_;
    std::vector<std::vector<Transition>> out_;
    std::vector<double> raw_exit_;
    double speedup_ = 1.0;
    double max_raw_rate_ = 0.0;
    std::size_t transitions_ = 0;
};

struct RateEntry {
    std::string from;
    std::string to;
    double rate;
};

inline Chain build_chain(std::vector<std::string> labels, const std::vector<RateEntry>& entries,
                         double speedup = 1.0) {
    auto space = std::make_shared<const StateSpace>(std::move(labels));
    std::vector<std::vector<Transition>> out(space->size());
    for (const auto& e : entries) {
        if (!(e.rate > 0.0) || !std::isfinite(e.rate)) {
            throw Error(Errc::NonPositiveRate, "rate '" + e.from + "' -> '" + e.to + "' is not positive");
        }
        out[space->index(e.from)].push_back({space->index(e.to), e.rate});
    }
    return Chain(std::move(space), std::move(out), speedup);
}

/// Nonnegative weights over a state space summing to one.
class ProbabilityMeasure {
public:
    static constexpr double kSumTolerance = 1e-12;

    explicit ProbabilityMeasure(std::vector<double> weights) : w_(std::move(weights)) {
        double total = 0.0;
        for (double x : w_) {
            if (!(x >= 0.0) || !std::isfinite(x)) {
                throw Error(Errc::DimensionMismatch, "probability weights must be finite and nonnegative");
            }
            total += x;
        }
        if (std::abs(total - 1.0) > kSumTolerance) {
            throw Error(Errc::DimensionMismatch, "probability weights sum to " + std::to_string(total));
        }
    }

    /// Divides by the total after scaling by the maximum, so huge weights do not overflow.
    static ProbabilityMeasure normalized(std::vector<double> weights) {
        if (weights.empty()) throw Error(Errc::EmptySubset, "cannot normalize an empty weight vector");
        const double top = *std::max_element(weights.begin(), weights.end());
        if (!(top > 0.0) || !std::isfinite(top)) {
            throw Error(Errc::DimensionMismatch, "weights must have a positive finite maximum");
        }
        double total = 0.0;
        for (double& x : weights) {
            if (x < 0.0) throw Error(Errc::DimensionMismatch, "negative weight");
            x /= top;
            total += x;
        }
        for (double& x : weights) x /= total;
        return ProbabilityMeasure(std::move(weights));
    }

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](StateIndex i) const { return w_[i]; }
    const std::vector<double>& weights() const noexcept { return w_; }

    double mass(const StateSet& set) const {
        double total = 0.0;
        for (StateIndex i : set) total += w_.at(i);
        return total;
    }

    double expectation(std::span<const double> f) const {
        if (f.size() != w_.size()) throw Error(Errc::DimensionMismatch, "function/measure size mismatch");
        double total = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i) total += w_[i] * f[i];
        return total;
    }

    /// The measure conditioned on `set`, indexed by position within `set`.
    ProbabilityMeasure conditioned(const StateSet& set) const {
        std::vector<double> sub;
        sub.reserve(set.size());
        for (StateIndex i : set) sub.push_back(w_.at(i));
        return normalized(std::move(sub));
    }

private:
    std::vector<double> w_;
};

inline void require_size(const Chain& chain, std::size_t n, const char* what) {
    if (n != chain.size()) {
        throw Error(Errc::DimensionMismatch, std::string(what) + " has " + std::to_string(n) +
                                                 " entries, chain has " + std::to_string(chain.size()));
    }
}

/// max_j |(nu^T L)_j| / max rate; invariant under the speedup.
inline double stationary_residual(const Chain& chain, const ProbabilityMeasure& nu) {
    require_size(chain, nu.size(), "measure");
    std::vector<double> flow(chain.size(), 0.0);
    for (StateIndex i = 0; i < chain.size(); ++i) {
        flow[i] -= nu[i] * chain.raw_exit_rate(i);
        for (const auto& t : chain.transitions(i)) flow[t.to] += nu[i] * t.rate;
    }
    double worst = 0.0;
    for (double x : flow) worst = std::max(worst, std::abs(x));
    return worst / chain.max_raw_rate();
}

/// Unique invariant probability measure.  One equation of L^T nu = 0 is
/// replaced by the normalization constraint; the speedup never enters.
inline ProbabilityMeasure stationary_measure(const Chain& chain) {
    const std::size_t n = chain.size();
    linalg::check_size(n);
    const StateIndex pinned = n - 1;
    const double scale = chain.max_raw_rate();
    std::vector<linalg::Triplet> triplets;
    triplets.reserve(chain.transition_count() + 2 * n);
    for (StateIndex i = 0; i < n; ++i) {
        // column i of L^T is row i of L
        if (i != pinned) triplets.emplace_back(i, i, -chain.raw_exit_rate(i));
        for (const auto& t : chain.transitions(i)) {
            if (t.to != pinned) triplets.emplace_back(t.to, i, t.rate);
        }
    }
    for (StateIndex i = 0; i < n; ++i) triplets.emplace_back(pinned, i, scale);
    linalg::SparseMatrix A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    A.setFromTriplets(triplets.begin(), triplets.end());
    linalg::Vector rhs = linalg::Vector::Zero(static_cast<Eigen::Index>(n));
    rhs[static_cast<Eigen::Index>(pinned)] = scale;
    const linalg::Vector x = linalg::solve_lu(std::move(A), rhs);

    std::vector<double> w(n);
    for (StateIndex i = 0; i < n; ++i) {
        if (!(x[static_cast<Eigen::Index>(i)] > 0.0)) {
            throw Error(Errc::SolverFailure, "stationary solve produced a non-positive weight at '" +
                                                 chain.label(i) + "'");
        }
        w[i] = x[static_cast<Eigen::Index>(i)];
    }
    return ProbabilityMeasure::normalized(std::move(w));
}

struct DetailedBalanceReport {
    bool reversible = true;
    double worst_violation = 0.0;  // relative to the largest single flux
    StateIndex worst_from = 0;
    StateIndex worst_to = 0;
};

inline DetailedBalanceReport check_detailed_balance(const Chain& chain, const ProbabilityMeasure& nu,
                                                    double tol = 1e-9) {
    require_size(chain, nu.size(), "measure");
    double max_flux = 0.0;
    for (StateIndex i = 0; i < chain.size(); ++i) {
        for (const auto& t : chain.transitions(i)) max_flux = std::max(max_flux, nu[i] * t.rate);
    }
    DetailedBalanceReport report;
    for (StateIndex i = 0; i < chain.size(); ++i) {
        for (const auto& t : chain.transitions(i)) {
            const double forward = nu[i] * t.rate;
            const double backward = nu[t.to] * chain.raw_rate(t.to, i);
            const double violation = std::abs(forward - backward) / max_flux;
            if (violation > report.worst_violation) {
                report.worst_violation = violation;
                report.worst_from = i;
                report.worst_to = t.to;
            }
        }
    }
    report.reversible = report.worst_violation <= tol;
    return report;
}

inline void require_reversible(const Chain& chain, const ProbabilityMeasure& nu, double tol = 1e-9) {
    const auto report = check_detailed_balance(chain, nu, tol);
    if (!report.reversible) {
        throw Error(Errc::NotReversible, "detailed balance fails on '" + chain.label(report.worst_from) +
                                             "' <-> '" + chain.label(report.worst_to) +
                                             "' (relative violation " +
                                             std::to_string(report.worst_violation) + ")");
    }
}

/// (Lf)(i) = speedup * sum_j R(i,j) (f(j) - f(i)).
inline std::vector<double> apply_generator(const Chain& chain, std::span<const double> f) {
    require_size(chain, f.size(), "function");
    std::vector<double> out(chain.size(), 0.0);
    for (StateIndex i = 0; i < chain.size(); ++i) {
        double acc = 0.0;
        for (const auto& t : chain.transitions(i)) acc += t.rate * (f[t.to] - f[i]);
        out[i] = chain.speedup() * acc;
    }
    return out;
}

enum class ReversibilityCheck { on, off };

/// D(f) as half the nu-weighted sum of squared increments over directed edges.
inline double dirichlet_form(const Chain& chain, const ProbabilityMeasure& nu, std::span<const double> f,
                             ReversibilityCheck check = ReversibilityCheck::on) {
    require_size(chain, nu.size(), "measure");
    require_size(chain, f.size(), "function");
    if (check == ReversibilityCheck::on) require_reversible(chain, nu);
    double total = 0.0;
    for (StateIndex i = 0; i < chain.size(); ++i) {
        double acc = 0.0;
        for (const auto& t : chain.transitions(i)) {
            const double d = f[t.to] - f[i];
            acc += t.rate * d * d;
        }
        total += nu[i] * acc;
    }
    return 0.5 * chain.speedup() * total;
}

/// D(f) as the inner product <-Lf, f>_nu.
inline double dirichlet_form_inner(const Chain& chain, const ProbabilityMeasure& nu, std::span<const double> f) {
    require_size(chain, nu.size(), "measure");
    const auto lf = apply_generator(chain, f);
    double total = 0.0;
    for (StateIndex i = 0; i < chain.size(); ++i) total -= nu[i] * lf[i] * f[i];
    return total;
}

}  // namespace metastab
