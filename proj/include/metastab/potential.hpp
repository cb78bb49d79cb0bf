#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "metastab/chain.hpp"
#include "metastab/harmonic.hpp"
#include "metastab/linalg.hpp"
#include "metastab/state_set.hpp"
#include "metastab/trace.hpp"

namespace metastab {

/// f_{F,G}(eta) = P_eta[H_F < H_G].
struct HarmonicFunction {
    std::vector<double> values;
    StateSet F;
    StateSet G;
    double residual = 0.0;  // max |Lf| off F u G
    double clamped = 0.0;   // largest excursion outside [0,1] removed by clamping
};

enum class CapacityRoute { dirichlet, flux, variational, closed_form_1d };

inline const char* to_string(CapacityRoute r) {
    switch (r) {
        case CapacityRoute::dirichlet: return "dirichlet";
        case CapacityRoute::flux: return "flux";
        case CapacityRoute::variational: return "variational";
        case CapacityRoute::closed_form_1d: return "closed-form-1d";
    }
    return "unknown";
}

struct CapacityReport {
    double value = 0.0;
    CapacityRoute route = CapacityRoute::dirichlet;
    double residual = 0.0;
};

inline void require_disjoint_pair(std::size_t n, const StateSet& F, const StateSet& G) {
    if (F.empty() || G.empty()) throw Error(Errc::EmptySubset, "source and target sets must be nonempty");
    require_valid(n, F, "source set");
    require_valid(n, G, "target set");
    if (!set_intersection(F, G).empty()) throw Error(Errc::OverlappingSets, "source and target sets intersect");
}

inline HarmonicFunction equilibrium_potential(const Chain& chain, const StateSet& F, const StateSet& G) {
    const std::size_t n = chain.size();
    require_disjoint_pair(n, F, G);
    const StateSet boundary = set_union(F, G);
    DirichletProblem problem(chain, complement(n, boundary));
    std::vector<double> data(n, 0.0);
    for (StateIndex i : F) data[i] = 1.0;
    HarmonicFunction h;
    h.values = problem.solve(std::move(data));
    h.residual = problem.residual(h.values);
    for (double& v : h.values) {
        if (v < 0.0) {
            h.clamped = std::max(h.clamped, -v);
            v = 0.0;
        } else if (v > 1.0) {
            h.clamped = std::max(h.clamped, v - 1.0);
            v = 1.0;
        }
    }
    h.F = F;
    h.G = G;
    return h;
}

/// Cap(F,G) = D(f_{F,G}).
inline CapacityReport capacity(const Chain& chain, const ProbabilityMeasure& nu, const StateSet& F,
                               const StateSet& G) {
    require_size(chain, nu.size(), "measure");
    require_reversible(chain, nu);
    const auto h = equilibrium_potential(chain, F, G);
    return {dirichlet_form(chain, nu, h.values, ReversibilityCheck::off), CapacityRoute::dirichlet, h.residual};
}

/// Cap(F,G) = sum_{eta in F} nu(eta) sum_xi R(eta,xi) P_xi[H_G < H_F].
inline CapacityReport capacity_flux(const Chain& chain, const ProbabilityMeasure& nu, const StateSet& F,
                                    const StateSet& G) {
    require_size(chain, nu.size(), "measure");
    require_reversible(chain, nu);
    const auto h = equilibrium_potential(chain, G, F);
    double total = 0.0;
    for (StateIndex eta : F) {
        double acc = 0.0;
        for (const auto& t : chain.transitions(eta)) acc += t.rate * h.values[t.to];
        total += nu[eta] * acc;
    }
    return {chain.speedup() * total, CapacityRoute::flux, h.residual};
}

/// Minimizes the conductance-weighted energy with f fixed on F u G (symmetric positive definite solve).
inline CapacityReport capacity_variational(const Chain& chain, const ProbabilityMeasure& nu, const StateSet& F,
                                           const StateSet& G) {
    const std::size_t n = chain.size();
    require_size(chain, nu.size(), "measure");
    require_reversible(chain, nu);
    require_disjoint_pair(n, F, G);

    // c(i,j) = nu(i) R(i,j), symmetrized
    std::vector<std::vector<std::pair<StateIndex, double>>> conductance(n);
    for (StateIndex i = 0; i < n; ++i) {
        for (const auto& t : chain.transitions(i)) {
            const double c = 0.5 * (nu[i] * t.rate + nu[t.to] * chain.raw_rate(t.to, i));
            conductance[i].push_back({t.to, c});
            if (chain.raw_rate(t.to, i) == 0.0) conductance[t.to].push_back({i, c});
        }
    }

    std::vector<double> f(n, 0.0);
    for (StateIndex i : F) f[i] = 1.0;
    const StateSet interior = complement(n, set_union(F, G));
    std::vector<long> position(n, -1);
    for (std::size_t k = 0; k < interior.size(); ++k) position[interior[k]] = static_cast<long>(k);

    double residual = 0.0;
    if (!interior.empty()) {
        const std::size_t m = interior.size();
        std::vector<double> diag(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            for (const auto& [j, c] : conductance[interior[k]]) diag[k] += c;
        }
        std::vector<double> scale(m);
        for (std::size_t k = 0; k < m; ++k) scale[k] = 1.0 / std::sqrt(diag[k]);
        std::vector<linalg::Triplet> triplets;
        linalg::Vector rhs = linalg::Vector::Zero(static_cast<Eigen::Index>(m));
        for (std::size_t k = 0; k < m; ++k) {
            triplets.emplace_back(k, k, 1.0);
            for (const auto& [j, c] : conductance[interior[k]]) {
                if (position[j] >= 0) {
                    triplets.emplace_back(k, position[j], -c * scale[k] * scale[position[j]]);
                } else {
                    rhs[static_cast<Eigen::Index>(k)] += c * f[j] * scale[k];
                }
            }
        }
        linalg::SparseMatrix A(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        A.setFromTriplets(triplets.begin(), triplets.end());
        const linalg::Vector y = linalg::solve_spd(A, rhs);
        residual = (rhs - A * y).cwiseAbs().maxCoeff();
        for (std::size_t k = 0; k < m; ++k) f[interior[k]] = y[static_cast<Eigen::Index>(k)] * scale[k];
    }

    double energy = 0.0;
    for (StateIndex i = 0; i < n; ++i) {
        for (const auto& [j, c] : conductance[i]) {
            if (j > i) energy += c * (f[j] - f[i]) * (f[j] - f[i]);
        }
    }
    return {chain.speedup() * energy, CapacityRoute::variational, residual};
}

/// Series formula for nearest-neighbour chains, x < y in index order.
inline CapacityReport bd_capacity_closed_form(const Chain& chain, const ProbabilityMeasure& nu, StateIndex x,
                                              StateIndex y) {
    require_size(chain, nu.size(), "measure");
    const std::size_t n = chain.size();
    for (StateIndex i = 0; i < n; ++i) {
        for (const auto& t : chain.transitions(i)) {
            const StateIndex d = t.to > i ? t.to - i : i - t.to;
            if (d != 1) throw Error(Errc::NotBirthDeath, "transition between non-adjacent states '" +
                                                             chain.label(i) + "' and '" + chain.label(t.to) + "'");
        }
    }
    if (x >= n || y >= n) throw Error(Errc::StateNotFound, "state index out of range");
    if (x == y) throw Error(Errc::OverlappingSets, "source and target coincide");
    if (x > y) std::swap(x, y);
    double resistance = 0.0;
    for (StateIndex z = x; z < y; ++z) resistance += 1.0 / (nu[z] * chain.rate(z, z + 1));
    return {1.0 / resistance, CapacityRoute::closed_form_1d, 0.0};
}

/// h(eta) = E_eta[H_F], zero on F.
inline std::vector<double> expected_hitting_times(const Chain& chain, const StateSet& F, double* residual = nullptr) {
    const std::size_t n = chain.size();
    if (F.empty()) throw Error(Errc::EmptySubset, "target set is empty");
    require_valid(n, F, "target set");
    DirichletProblem problem(chain, complement(n, F));
    const std::vector<double> ones(n, 1.0);
    auto h = problem.solve(std::vector<double>(n, 0.0), ones);
    if (residual) *residual = problem.residual(h, ones);
    return h;
}

struct HittingTimeReport {
    double value = 0.0;
    double via_potential = std::numeric_limits<double>::quiet_NaN();
    double deviation = std::numeric_limits<double>::quiet_NaN();
};

/// E_eta[H_F] by the direct solve and, when nu is reversible, by nu(f_{eta,F}) / Cap(eta,F).
inline HittingTimeReport mean_hitting_time(const Chain& chain, const ProbabilityMeasure* nu, StateIndex eta,
                                           const StateSet& F) {
    require_valid(chain.size(), F, "target set");
    if (eta >= chain.size()) throw Error(Errc::StateNotFound, "state index out of range");
    if (contains(F, eta)) throw Error(Errc::StateInTargetSet, "start state lies in the target set");
    HittingTimeReport report;
    report.value = expected_hitting_times(chain, F)[eta];
    if (nu && check_detailed_balance(chain, *nu).reversible) {
        const auto f = equilibrium_potential(chain, {eta}, F);
        const double cap = dirichlet_form(chain, *nu, f.values, ReversibilityCheck::off);
        report.via_potential = nu->expectation(f.values) / cap;
        report.deviation = std::abs(report.via_potential - report.value) / report.value;
    }
    return report;
}

inline HittingTimeReport mean_hitting_time(const Chain& chain, const ProbabilityMeasure& nu, StateIndex eta,
                                           const StateSet& F) {
    return mean_hitting_time(chain, &nu, eta, F);
}

inline double relative_deviation(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

struct TraceIdentityReport {
    double a_hitting = 0.0;           // max |f^F - f restricted to F|
    double b_flux = 0.0;              // flux route vs Dirichlet route
    std::optional<double> c_capacity; // nu(G1) r_F(G1,G2) vs Cap(G1,G2), only when F = G1 u G2
    double d_trace_capacity = 0.0;    // Cap_F vs Cap / nu(F)
    double e_stated = 0.0;            // stated formula vs direct trace hitting time
    double e_potential_route = 0.0;             // nu^F(f^F)/Cap_F vs direct trace hitting time
    bool e_routes_disagree = false;
    double aggregated_balance = 0.0;  // nu(G1) r_F(G1,G2) vs nu(G2) r_F(G2,G1)
    double worst = 0.0;
};

/// Checks the identities relating hitting probabilities, capacities and mean hitting
/// times of the trace chain on F to those of the full chain.
inline TraceIdentityReport trace_capacity_identity(const Chain& chain, const ProbabilityMeasure& nu,
                                                   const StateSet& F, const StateSet& G1, const StateSet& G2,
                                                   double tolerance = 1e-8) {
    const std::size_t n = chain.size();
    require_size(chain, nu.size(), "measure");
    require_reversible(chain, nu);
    require_valid(n, F, "trace set");
    require_disjoint_pair(n, G1, G2);
    if (!set_difference(G1, F).empty() || !set_difference(G2, F).empty()) {
        throw Error(Errc::StateNotFound, "G1 and G2 must lie inside F");
    }
    TraceOptions options;
    options.nu = &nu;
    const TraceResult tr = trace_chain(chain, F, options);
    const ProbabilityMeasure& nuF = *tr.conditioned;
    const StateSet g1 = tr.to_trace(G1);
    const StateSet g2 = tr.to_trace(G2);
    TraceIdentityReport report;

    // (a)
    const auto full = equilibrium_potential(chain, G1, G2);
    const auto traced = equilibrium_potential(tr.chain, g1, g2);
    for (std::size_t k = 0; k < F.size(); ++k) {
        report.a_hitting = std::max(report.a_hitting, std::abs(full.values[F[k]] - traced.values[k]));
    }

    // (b)
    const double cap = dirichlet_form(chain, nu, full.values, ReversibilityCheck::off);
    report.b_flux = relative_deviation(capacity_flux(chain, nu, G1, G2).value, cap);

    // (c) and aggregated detailed balance
    auto outflow = [&](const StateSet& from, const StateSet& to) {
        double total = 0.0;
        for (StateIndex i : from) {
            double acc = 0.0;
            for (StateIndex j : to) acc += tr.chain.rate(i, j);
            total += nu[tr.kept[i]] * acc;
        }
        return total;
    };
    const double flow12 = outflow(g1, g2);
    const double flow21 = outflow(g2, g1);
    report.aggregated_balance = relative_deviation(flow12, flow21);
    if (set_union(G1, G2) == F) report.c_capacity = relative_deviation(flow12, cap);

    // (d)
    const double capF = dirichlet_form(tr.chain, nuF, traced.values, ReversibilityCheck::off);
    report.d_trace_capacity = relative_deviation(capF, cap / nu.mass(F));

    // (e) for every eta in F \ G2, with G = G2
    const auto direct = expected_hitting_times(tr.chain, g2);
    for (std::size_t k = 0; k < F.size(); ++k) {
        if (contains(g2, k)) continue;
        const StateIndex eta = F[k];
        const auto f = equilibrium_potential(chain, {eta}, G2);
        const double cap_eta = dirichlet_form(chain, nu, f.values, ReversibilityCheck::off);
        double numerator = 0.0;
        for (StateIndex xi : F) numerator += f.values[xi] * nu[xi];
        const double stated = numerator / cap_eta;

        const auto fF = equilibrium_potential(tr.chain, {k}, g2);
        const double capF_eta = dirichlet_form(tr.chain, nuF, fF.values, ReversibilityCheck::off);
        const double via_potential = nuF.expectation(fF.values) / capF_eta;

        const double e1 = relative_deviation(stated, direct[k]);
        const double e2 = relative_deviation(via_potential, direct[k]);
        report.e_stated = std::max(report.e_stated, e1);
        report.e_potential_route = std::max(report.e_potential_route, e2);
        if (relative_deviation(stated, via_potential) > tolerance) report.e_routes_disagree = true;
    }

    report.worst = std::max({report.a_hitting, report.b_flux, report.c_capacity.value_or(0.0),
                             report.d_trace_capacity, report.e_stated, report.e_potential_route, report.aggregated_balance});
    return report;
}

}  // namespace metastab
