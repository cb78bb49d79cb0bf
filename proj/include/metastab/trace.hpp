#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metastab/chain.hpp"
#include "metastab/harmonic.hpp"
#include "metastab/state_set.hpp"
#include "metastab/trajectory.hpp"

namespace metastab {

struct TraceOptions {
    /// States of E \ F in the order they are eliminated; ascending when unset.
    std::optional<std::vector<StateIndex>> order;
    /// Stationary measure of the input; computed when null.
    const ProbabilityMeasure* nu = nullptr;
    /// Compute the conditioned measure and its stationary residual.
    bool verify = true;
    double drop_threshold = 1e-15;
};

struct TraceResult {
    Chain chain;
    StateSet kept;  // original index of trace state k is kept[k]
    std::vector<StateIndex> elimination_order;
    std::optional<ProbabilityMeasure> conditioned;
    double stationary_residual = 0.0;
    std::size_t dropped_rates = 0;
    double drop_threshold = 0.0;
    std::vector<std::size_t> fill_in;  // edges created at each elimination step

    /// Trace-chain index of an original state, or -1.
    long position(StateIndex original) const {
        auto it = std::lower_bound(kept.begin(), kept.end(), original);
        return (it != kept.end() && *it == original) ? static_cast<long>(it - kept.begin()) : -1;
    }
    StateSet to_trace(const StateSet& original) const {
        StateSet out;
        for (StateIndex i : original) {
            const long p = position(i);
            if (p < 0) throw Error(Errc::StateNotFound, "state is not in the trace set");
            out.push_back(static_cast<StateIndex>(p));
        }
        return out;
    }
};

namespace detail {

// Mutable adjacency used during elimination.
struct EliminationGraph {
    std::vector<std::map<StateIndex, double>> out;
    std::vector<std::set<StateIndex>> in;
    std::vector<char> alive;

    explicit EliminationGraph(const Chain& chain)
        : out(chain.size()), in(chain.size()), alive(chain.size(), 1) {
        for (StateIndex i = 0; i < chain.size(); ++i) {
            for (const auto& t : chain.transitions(i)) {
                out[i][t.to] = t.rate;
                in[t.to].insert(i);
            }
        }
    }

    // R(eta,xi) += R(eta,x0) R(x0,xi) / lambda(x0); returns the number of new edges.
    std::size_t eliminate(StateIndex x0, double threshold, std::size_t& dropped) {
        double lambda = 0.0;
        for (const auto& [to, r] : out[x0]) lambda += r;
        std::size_t created = 0;
        const std::vector<StateIndex> sources(in[x0].begin(), in[x0].end());
        for (StateIndex eta : sources) {
            const double r_in = out[eta].at(x0);
            out[eta].erase(x0);
            for (const auto& [xi, r_out] : out[x0]) {
                if (xi == eta) continue;  // excursion returning to eta: self-loop dropped
                auto [it, inserted] = out[eta].try_emplace(xi, 0.0);
                it->second += r_in * (r_out / lambda);
                if (inserted) {
                    in[xi].insert(eta);
                    ++created;
                }
            }
            for (auto it = out[eta].begin(); it != out[eta].end();) {
                if (it->second < threshold) {
                    in[it->first].erase(eta);
                    it = out[eta].erase(it);
                    ++dropped;
                } else {
                    ++it;
                }
            }
        }
        for (const auto& [xi, r] : out[x0]) in[xi].erase(x0);
        out[x0].clear();
        in[x0].clear();
        alive[x0] = 0;
        return created;
    }
};

}  // namespace detail

/// Trace (watched) chain on F by iterated state elimination.  F = E is a no-op.
inline TraceResult trace_chain(const Chain& chain, const StateSet& F, const TraceOptions& options = {}) {
    const std::size_t n = chain.size();
    if (F.empty()) throw Error(Errc::EmptySubset, "trace set is empty");
    require_valid(n, F, "trace set");
    if (F.size() < 2) throw Error(Errc::TooSmall, "trace set must contain at least two states");

    const StateSet removed = complement(n, F);
    std::vector<StateIndex> order = removed;
    if (options.order) {
        order = *options.order;
        if (make_set(order) != removed) {
            throw Error(Errc::DimensionMismatch, "elimination order must list exactly the states outside F");
        }
    }

    const double threshold = options.drop_threshold * chain.max_raw_rate();
    std::size_t dropped = 0;
    std::vector<std::size_t> fill_in;
    fill_in.reserve(order.size());

    std::optional<Chain> traced;
    if (removed.empty()) {
        traced = chain;
    } else {
        detail::EliminationGraph graph(chain);
        for (StateIndex x0 : order) fill_in.push_back(graph.eliminate(x0, threshold, dropped));
        std::vector<long> position(n, -1);
        std::vector<std::string> labels;
        labels.reserve(F.size());
        for (std::size_t k = 0; k < F.size(); ++k) {
            position[F[k]] = static_cast<long>(k);
            labels.push_back(chain.label(F[k]));
        }
        std::vector<std::vector<Transition>> out(F.size());
        for (std::size_t k = 0; k < F.size(); ++k) {
            for (const auto& [to, r] : graph.out[F[k]]) out[k].push_back({static_cast<StateIndex>(position[to]), r});
        }
        traced.emplace(std::make_shared<const StateSpace>(std::move(labels)), std::move(out), chain.speedup());
    }

    TraceResult result{std::move(*traced), F, order, std::nullopt, 0.0, dropped, threshold, std::move(fill_in)};
    if (options.verify) {
        const ProbabilityMeasure nu = options.nu ? *options.nu : stationary_measure(chain);
        require_size(chain, nu.size(), "measure");
        result.conditioned.emplace(nu.conditioned(F));
        result.stationary_residual = stationary_residual(result.chain, *result.conditioned);
    }
    return result;
}

/// Eliminate a single state; the remaining states keep their relative order.
inline Chain reduce_one_state(const Chain& chain, StateIndex x0) {
    if (x0 >= chain.size()) throw Error(Errc::StateNotFound, "state index out of range");
    if (chain.size() < 3) throw Error(Errc::TooSmall, "eliminating a state would leave fewer than two states");
    StateSet F = complement(chain.size(), StateSet{x0});
    TraceOptions options;
    options.verify = false;
    return trace_chain(chain, F, options).chain;
}

struct FirstStepReport {
    double lambda_trace = 0.0;      // holding rate of eta in the eliminated chain
    double lambda_first_step = 0.0; // lambda(eta) P_eta[H_{F\eta} < return to eta]
    std::vector<double> p_trace;    // jump probabilities indexed like F (0 at eta)
    std::vector<double> p_first_step;
    double max_deviation = 0.0;
};

/// Recomputes the trace holding rate and jump law at eta from first-step linear systems.
inline FirstStepReport verify_g02(const Chain& chain, const StateSet& F, StateIndex eta) {
    require_valid(chain.size(), F, "trace set");
    if (!contains(F, eta)) throw Error(Errc::StartOutsideSubset, "eta must lie in F");
    TraceOptions options;
    options.verify = false;
    const TraceResult tr = trace_chain(chain, F, options);
    const auto k_eta = static_cast<StateIndex>(tr.position(eta));

    FirstStepReport report;
    report.lambda_trace = tr.chain.exit_rate(k_eta);

    const StateSet others = set_difference(F, {eta});
    const std::size_t n = chain.size();

    // escape probability: f = 1 on F\{eta}, 0 at eta, harmonic elsewhere
    {
        DirichletProblem problem(chain, complement(n, F));
        std::vector<double> boundary(n, 0.0);
        for (StateIndex s : others) boundary[s] = 1.0;
        const auto f = problem.solve(boundary);
        double escape = 0.0;
        for (const auto& t : chain.transitions(eta)) escape += t.rate * f[t.to];
        report.lambda_first_step = chain.speedup() * escape;
    }

    // landing law: eta is interior (returns to eta are not trace jumps)
    report.p_trace.assign(F.size(), 0.0);
    report.p_first_step.assign(F.size(), 0.0);
    DirichletProblem landing(chain, complement(n, others));
    for (std::size_t k = 0; k < F.size(); ++k) {
        if (F[k] == eta) continue;
        std::vector<double> boundary(n, 0.0);
        boundary[F[k]] = 1.0;
        report.p_first_step[k] = landing.solve(boundary)[eta];
        report.p_trace[k] = tr.chain.rate(k_eta, k) / report.lambda_trace;
    }

    report.max_deviation = std::abs(report.lambda_trace - report.lambda_first_step) /
                           std::max(report.lambda_first_step, 1e-300);
    for (std::size_t k = 0; k < F.size(); ++k) {
        report.max_deviation = std::max(report.max_deviation, std::abs(report.p_trace[k] - report.p_first_step[k]));
    }
    return report;
}

/// Excises the excursions outside F and shifts time left (trace clock).
/// A jump landing exactly at the horizon is not part of the path.
inline Trajectory trace_trajectory(const Trajectory& traj, const StateSet& F, double* excised = nullptr) {
    if (!contains(F, traj.start)) throw Error(Errc::StartOutsideSubset, "trajectory does not start in F");
    Trajectory out;
    out.start = traj.start;
    double clock = 0.0;   // trace clock
    double t = 0.0;       // real clock
    double outside = 0.0;
    StateIndex s = traj.start;
    StateIndex last_inside = traj.start;
    for (const auto& e : traj.events) {
        if (e.time >= traj.horizon) break;
        const double dt = e.time - t;
        if (contains(F, s)) {
            clock += dt;
        } else {
            outside += dt;
        }
        t = e.time;
        s = e.state;
        if (contains(F, s) && s != last_inside) {
            out.events.push_back({clock, s});
            last_inside = s;
        }
    }
    const double dt = traj.horizon - t;
    if (contains(F, s)) {
        clock += dt;
    } else {
        outside += dt;
    }
    out.horizon = clock;
    if (excised) *excised = outside;
    return out;
}

}  // namespace metastab
