#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metastab/chain.hpp"
#include "metastab/potential.hpp"
#include "metastab/trace.hpp"

namespace metastab {

/// Wells E^1..E^kappa (indexed 0..kappa-1) and the remainder Delta.
struct WellPartition {
    std::size_t n_states = 0;
    std::vector<StateSet> wells;
    StateSet delta;
    std::vector<int> psi;  // well index per state, -1 on Delta

    static WellPartition from_wells(std::size_t n, std::vector<StateSet> wells) {
        if (wells.size() < 2) throw Error(Errc::PartitionInvalid, "at least two wells are required");
        WellPartition p;
        p.n_states = n;
        p.psi.assign(n, -1);
        for (std::size_t x = 0; x < wells.size(); ++x) {
            auto& w = wells[x];
            w = make_set(std::move(w));
            if (w.empty()) throw Error(Errc::PartitionInvalid, "well " + std::to_string(x + 1) + " is empty");
            if (w.back() >= n) throw Error(Errc::PartitionInvalid, "well refers to a state outside the chain");
            for (StateIndex i : w) {
                if (p.psi[i] != -1) throw Error(Errc::PartitionInvalid, "wells are not disjoint");
                p.psi[i] = static_cast<int>(x);
            }
        }
        for (StateIndex i = 0; i < n; ++i) {
            if (p.psi[i] == -1) p.delta.push_back(i);
        }
        p.wells = std::move(wells);
        return p;
    }

    std::size_t kappa() const noexcept { return wells.size(); }

    /// Union of all wells.
    StateSet well_union() const { return complement(n_states, delta); }

    /// Union of the wells other than x.
    StateSet others(std::size_t x) const {
        StateSet out;
        for (std::size_t y = 0; y < wells.size(); ++y) {
            if (y != x) out = set_union(out, wells[y]);
        }
        return out;
    }

    void require_matches(const Chain& chain) const {
        if (n_states != chain.size() || psi.size() != chain.size()) {
            throw Error(Errc::PartitionInvalid, "partition does not match the chain's state space");
        }
    }
};

struct WellGeometry {
    std::vector<StateIndex> anchors;                 // xi^x
    std::vector<std::optional<StateIndex>> gates;    // zeta^x
    std::vector<StateSet> boundary;                  // d_x Delta
    std::vector<std::vector<StateSet>> crossing;     // dE^{x,y}
    std::vector<StateSet> closure;                   // E^x u d_x Delta
    std::vector<StateSet> complement;                // union of the other wells
};

struct GeometryOverrides {
    std::vector<std::optional<StateIndex>> anchors;
    std::vector<std::optional<StateIndex>> gates;
};

inline StateIndex argmax_measure(const ProbabilityMeasure& nu, const StateSet& set) {
    StateIndex best = set.front();
    for (StateIndex i : set) {
        if (nu[i] > nu[best]) best = i;
    }
    return best;
}

/// Trace on the union of wells (the chain itself when Delta is empty).
inline TraceResult trace_on_wells(const Chain& chain, const ProbabilityMeasure& nu, const WellPartition& p) {
    TraceOptions options;
    options.nu = &nu;
    return trace_chain(chain, p.well_union(), options);
}

/// R^E(eta, E^y) on the trace chain, eta an original index in the wells.
inline double rate_into_well(const TraceResult& tr, const WellPartition& p, StateIndex eta, std::size_t y) {
    const long k = tr.position(eta);
    if (k < 0) throw Error(Errc::PartitionInvalid, "state is not in the wells");
    double total = 0.0;
    for (const auto& t : tr.chain.transitions(static_cast<StateIndex>(k))) {
        if (p.psi[tr.kept[t.to]] == static_cast<int>(y)) total += t.rate;
    }
    return tr.chain.speedup() * total;
}

inline WellGeometry make_geometry(const Chain& chain, const ProbabilityMeasure& nu, const WellPartition& p,
                                  const GeometryOverrides& overrides = {}, const TraceResult* trace = nullptr) {
    p.require_matches(chain);
    const std::size_t kappa = p.kappa();
    std::optional<TraceResult> own;
    if (!trace) {
        own.emplace(trace_on_wells(chain, nu, p));
        trace = &*own;
    }
    WellGeometry g;
    g.anchors.resize(kappa);
    g.gates.resize(kappa);
    g.boundary.resize(kappa);
    g.crossing.assign(kappa, std::vector<StateSet>(kappa));
    g.closure.resize(kappa);
    g.complement.resize(kappa);
    const auto delta_mask = make_mask(chain.size(), p.delta);
    for (std::size_t x = 0; x < kappa; ++x) {
        StateSet boundary;
        for (StateIndex eta : p.wells[x]) {
            for (const auto& t : chain.transitions(eta)) {
                if (delta_mask[t.to]) boundary.push_back(t.to);
            }
        }
        g.boundary[x] = make_set(std::move(boundary));
        g.closure[x] = set_union(p.wells[x], g.boundary[x]);
        g.complement[x] = p.others(x);

        const auto anchor = x < overrides.anchors.size() ? overrides.anchors[x] : std::nullopt;
        g.anchors[x] = anchor ? *anchor : argmax_measure(nu, p.wells[x]);
        if (p.psi.at(g.anchors[x]) != static_cast<int>(x)) {
            throw Error(Errc::PartitionInvalid, "anchor of well " + std::to_string(x + 1) + " lies outside the well");
        }
        const auto gate = x < overrides.gates.size() ? overrides.gates[x] : std::nullopt;
        if (gate) {
            if (!contains(g.boundary[x], *gate)) {
                throw Error(Errc::PartitionInvalid, "gate of well " + std::to_string(x + 1) + " is not in its boundary");
            }
            g.gates[x] = gate;
        } else if (!g.boundary[x].empty()) {
            g.gates[x] = argmax_measure(nu, g.boundary[x]);
        }
        for (std::size_t y = 0; y < kappa; ++y) {
            if (y == x) continue;
            for (StateIndex eta : p.wells[x]) {
                if (rate_into_well(*trace, p, eta, y) > 0.0) g.crossing[x][y].push_back(eta);
            }
        }
    }
    return g;
}

struct InterWellRates {
    Eigen::MatrixXd r;          // r(x,y), zero diagonal
    std::vector<double> mass;   // nu(E^x)
    double delta_mass = 0.0;    // nu(Delta)
    TraceResult trace;
};

/// r(x,y) = nu(E^x)^{-1} sum_{eta in E^x} nu(eta) R^E(eta, E^y), speedup included.
inline InterWellRates inter_well_rates(const Chain& chain, const ProbabilityMeasure& nu, const WellPartition& p) {
    p.require_matches(chain);
    require_size(chain, nu.size(), "measure");
    TraceResult tr = trace_on_wells(chain, nu, p);
    const std::size_t kappa = p.kappa();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kappa), static_cast<Eigen::Index>(kappa));
    std::vector<double> mass(kappa);
    for (std::size_t x = 0; x < kappa; ++x) {
        mass[x] = nu.mass(p.wells[x]);
        for (std::size_t y = 0; y < kappa; ++y) {
            if (y == x) continue;
            double total = 0.0;
            for (StateIndex eta : p.wells[x]) total += nu[eta] * rate_into_well(tr, p, eta, y);
            r(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = total / mass[x];
        }
    }
    return {std::move(r), std::move(mass), nu.mass(p.delta), std::move(tr)};
}

struct C1Report {
    std::vector<int> grid;
    std::vector<Eigen::MatrixXd> sequence;  // r_N per grid point
    Eigen::MatrixXd last;
    Eigen::MatrixXd max_change;       // largest successive relative change per pair
    Eigen::MatrixXd last_two_change;  // larger of the last two successive relative changes
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> plausibly_convergent;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> vanishing;
};

/// Finite-N Cauchy diagnostic for a family N -> r_N; reports a trend, not a verdict.
inline C1Report check_C1(const std::vector<int>& grid, const std::function<Eigen::MatrixXd(int)>& family,
                         double threshold = 0.05) {
    if (grid.size() < 3) throw Error(Errc::GridTooSmall, "the Cauchy diagnostic needs at least three grid points");
    C1Report rep;
    rep.grid = grid;
    for (int N : grid) rep.sequence.push_back(family(N));
    const auto k = rep.sequence.front().rows();
    rep.last = rep.sequence.back();
    rep.max_change = Eigen::MatrixXd::Zero(k, k);
    rep.last_two_change = Eigen::MatrixXd::Zero(k, k);
    rep.plausibly_convergent.setConstant(k, k, false);
    rep.vanishing.setConstant(k, k, false);
    const std::size_t m = grid.size();
    for (Eigen::Index x = 0; x < k; ++x) {
        for (Eigen::Index y = 0; y < k; ++y) {
            if (x == y) continue;
            std::vector<double> change;
            bool decreasing = true;
            for (std::size_t i = 1; i < m; ++i) {
                const double a = rep.sequence[i - 1](x, y);
                const double b = rep.sequence[i](x, y);
                change.push_back(a == 0.0 ? (b == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                          : std::abs(b - a) / std::abs(a));
                if (!(b < a)) decreasing = false;
            }
            rep.max_change(x, y) = *std::max_element(change.begin(), change.end());
            rep.last_two_change(x, y) = std::max(change[m - 2], change[m - 3]);
            const double first = rep.sequence.front()(x, y);
            const bool vanish = decreasing && rep.last(x, y) <= 0.1 * first;
            rep.vanishing(x, y) = vanish;
            rep.plausibly_convergent(x, y) = !vanish && rep.last_two_change(x, y) < threshold;
        }
    }
    return rep;
}

/// (max_{E^x} R^E(., E^y)) x (max_{E^x} E[H_{xi^x}]) with hitting times on the full chain.
inline Eigen::MatrixXd check_C2(const Chain& chain, const WellPartition& p, const WellGeometry& g,
                                const TraceResult& trace, std::vector<double>* sigma = nullptr) {
    p.require_matches(chain);
    const std::size_t kappa = p.kappa();
    Eigen::MatrixXd c2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kappa), static_cast<Eigen::Index>(kappa));
    if (sigma) sigma->assign(kappa, 0.0);
    for (std::size_t x = 0; x < kappa; ++x) {
        const auto hit = expected_hitting_times(chain, {g.anchors[x]});
        double worst_time = 0.0;
        for (StateIndex eta : p.wells[x]) worst_time = std::max(worst_time, hit[eta]);
        if (sigma) (*sigma)[x] = worst_time;
        for (std::size_t y = 0; y < kappa; ++y) {
            if (y == x) continue;
            double worst_rate = 0.0;
            for (StateIndex eta : p.wells[x]) worst_rate = std::max(worst_rate, rate_into_well(trace, p, eta, y));
            c2(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = worst_rate * worst_time;
        }
    }
    return c2;
}

inline Eigen::MatrixXd check_C2(const Chain& chain, const ProbabilityMeasure& nu, const WellPartition& p,
                                const WellGeometry& g) {
    return check_C2(chain, p, g, trace_on_wells(chain, nu, p));
}

/// max over d_x Delta of the mean time to reach the other wells, for the trace on E \ E^x.
inline std::vector<double> check_C3(const Chain& chain, const ProbabilityMeasure& nu, const WellPartition& p,
                                    const WellGeometry& g) {
    p.require_matches(chain);
    std::vector<double> c3(p.kappa(), 0.0);
    for (std::size_t x = 0; x < p.kappa(); ++x) {
        if (g.boundary[x].empty()) continue;
        TraceOptions options;
        options.nu = &nu;
        options.verify = false;
        const StateSet rest = complement(chain.size(), p.wells[x]);
        const TraceResult tr = trace_chain(chain, rest, options);
        const auto hit = expected_hitting_times(tr.chain, tr.to_trace(g.complement[x]));
        for (StateIndex eta : g.boundary[x]) c3[x] = std::max(c3[x], hit[static_cast<StateIndex>(tr.position(eta))]);
    }
    return c3;
}

struct H2H3Report {
    std::vector<double> h2;            // nu(Delta) / Cap(zeta^x, other wells), analysis chain
    std::vector<double> h2_unspeeded;  // same ratio with the capacity of the unspeeded generator
    double nu_delta = 0.0;
    std::vector<double> gate_capacity;
    Eigen::MatrixXd h3;
};

inline H2H3Report check_H2_H3(const Chain& chain, const ProbabilityMeasure& nu, const WellPartition& p,
                              const WellGeometry& g) {
    p.require_matches(chain);
    require_reversible(chain, nu);
    const std::size_t kappa = p.kappa();
    H2H3Report rep;
    rep.nu_delta = nu.mass(p.delta);
    rep.h2.assign(kappa, 0.0);
    rep.h2_unspeeded.assign(kappa, 0.0);
    rep.gate_capacity.assign(kappa, std::numeric_limits<double>::quiet_NaN());
    rep.h3 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kappa), static_cast<Eigen::Index>(kappa));
    for (std::size_t x = 0; x < kappa; ++x) {
        if (!g.boundary[x].empty()) {
            if (!g.gates[x]) throw Error(Errc::MissingGateState, "well " + std::to_string(x + 1) + " has no gate state");
            const double cap = capacity(chain, nu, {*g.gates[x]}, g.complement[x]).value;
            rep.gate_capacity[x] = cap;
            rep.h2[x] = rep.nu_delta / cap;
            rep.h2_unspeeded[x] = rep.nu_delta / (cap / chain.speedup());
        } else if (rep.nu_delta > 0.0) {
            rep.h2[x] = rep.h2_unspeeded[x] = std::numeric_limits<double>::quiet_NaN();
        }

        double min_cap = std::numeric_limits<double>::infinity();
        const StateIndex anchor = g.anchors[x];
        for (StateIndex eta : g.closure[x]) {
            if (eta == anchor) continue;
            min_cap = std::min(min_cap, capacity(chain, nu, {std::min(eta, anchor)}, {std::max(eta, anchor)}).value);
        }
        for (std::size_t y = 0; y < kappa; ++y) {
            if (y == x) continue;
            double min_nu = 1.0;
            if (!g.crossing[x][y].empty()) {
                min_nu = std::numeric_limits<double>::infinity();
                for (StateIndex eta : g.crossing[x][y]) min_nu = std::min(min_nu, nu[eta]);
            }
            rep.h3(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) =
                std::isinf(min_cap) ? std::numeric_limits<double>::infinity() : min_cap * min_nu;
        }
    }
    return rep;
}

struct MetastabilityReport {
    InterWellRates rates;
    WellGeometry geometry;
    Eigen::MatrixXd c2;
    std::vector<double> c3;
    H2H3Report h;
    std::vector<double> sigma;
    double aggregated_balance = 0.0;  // worst relative gap in nu(E^x) r(x,y) = nu(E^y) r(y,x)
    double speedup = 1.0;
};

struct AnalysisToggles {
    bool c2 = true;
    bool c3 = true;
    bool h2h3 = true;
};

inline MetastabilityReport analyze(const Chain& chain, const ProbabilityMeasure& nu, const WellPartition& p,
                                   const GeometryOverrides& overrides = {}, const AnalysisToggles& toggles = {}) {
    MetastabilityReport rep{inter_well_rates(chain, nu, p), {}, {}, {}, {}, {}, 0.0, chain.speedup()};
    rep.geometry = make_geometry(chain, nu, p, overrides, &rep.rates.trace);
    const std::size_t kappa = p.kappa();
    for (std::size_t x = 0; x < kappa; ++x) {
        for (std::size_t y = x + 1; y < kappa; ++y) {
            const auto X = static_cast<Eigen::Index>(x);
            const auto Y = static_cast<Eigen::Index>(y);
            rep.aggregated_balance = std::max(
                rep.aggregated_balance,
                relative_deviation(rep.rates.mass[x] * rep.rates.r(X, Y), rep.rates.mass[y] * rep.rates.r(Y, X)));
        }
    }
    if (toggles.c2) rep.c2 = check_C2(chain, p, rep.geometry, rep.rates.trace, &rep.sigma);
    if (toggles.c3) rep.c3 = check_C3(chain, nu, p, rep.geometry);
    if (toggles.h2h3) rep.h = check_H2_H3(chain, nu, p, rep.geometry);
    return rep;
}

/// Markov chain on the well labels with rates r(x,y).
struct LimitChain {
    Eigen::MatrixXd rates;

    Eigen::MatrixXd generator() const {
        Eigen::MatrixXd L = rates;
        for (Eigen::Index x = 0; x < L.rows(); ++x) {
            L(x, x) = 0.0;
            L(x, x) = -L.row(x).sum();
        }
        return L;
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& F) const { return generator() * F; }

    Chain to_chain() const {
        std::vector<std::string> labels;
        std::vector<RateEntry> entries;
        for (Eigen::Index x = 0; x < rates.rows(); ++x) labels.push_back(std::to_string(x + 1));
        for (Eigen::Index x = 0; x < rates.rows(); ++x) {
            for (Eigen::Index y = 0; y < rates.cols(); ++y) {
                if (x != y && rates(x, y) > 0.0) entries.push_back({labels[x], labels[y], rates(x, y)});
            }
        }
        return build_chain(labels, entries);
    }
};

inline LimitChain limit_chain(const Eigen::MatrixXd& r) {
    if (r.rows() != r.cols() || r.rows() < 2) throw Error(Errc::DimensionMismatch, "rate matrix must be square, size >= 2");
    LimitChain lc{r};
    for (Eigen::Index x = 0; x < r.rows(); ++x) {
        lc.rates(x, x) = 0.0;
        for (Eigen::Index y = 0; y < r.cols(); ++y) {
            if (x == y) continue;
            if (!std::isfinite(r(x, y)) || r(x, y) < 0.0) {
                throw Error(Errc::NegativeRate, "limit rate (" + std::to_string(x + 1) + "," + std::to_string(y + 1) +
                                                    ") is negative or not finite");
            }
        }
    }
    return lc;
}

}  // namespace metastab
