#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "metastab/chain.hpp"
#include "metastab/linalg.hpp"
#include "metastab/meta.hpp"
#include "metastab/potential.hpp"

namespace metastab::zr {

/// g(n) = (n/(n-1))^alpha, g(1) = 1, so that g(1)...g(n) = n^alpha.
inline double jump_rate(int n, double alpha) {
    if (n <= 0) return 0.0;
    if (n == 1) return 1.0;
    return std::pow(static_cast<double>(n) / (n - 1), alpha);
}

/// p(0) = 1, p(n) = n^alpha.
inline double weight_factor(int n, double alpha) { return n == 0 ? 1.0 : std::pow(static_cast<double>(n), alpha); }

/// Number of compositions of N into kappa nonnegative parts, saturating at `cap + 1`.
inline std::size_t composition_count(int N, int kappa, std::size_t cap = linalg::kMaxStates) {
    double c = 1.0;  // C(N+kappa-1, kappa-1)
    for (int i = 1; i < kappa; ++i) {
        c = c * (N + i) / i;
        if (c > static_cast<double>(cap) + 1.0) return cap + 1;
    }
    return static_cast<std::size_t>(std::llround(c));
}

/// All configurations, lexicographically descending: (N,0,...,0) first.
inline std::vector<std::vector<int>> compositions(int N, int kappa) {
    std::vector<std::vector<int>> out;
    std::vector<int> eta(static_cast<std::size_t>(kappa), 0);
    auto rec = [&](auto&& self, int site, int left) -> void {
        if (site == kappa - 1) {
            eta[static_cast<std::size_t>(site)] = left;
            out.push_back(eta);
            return;
        }
        for (int k = left; k >= 0; --k) {
            eta[static_cast<std::size_t>(site)] = k;
            self(self, site + 1, left - k);
        }
    };
    rec(rec, 0, N);
    return out;
}

inline std::string label(const std::vector<int>& eta) {
    std::string s = "(";
    for (std::size_t i = 0; i < eta.size(); ++i) s += (i ? "," : "") + std::to_string(eta[i]);
    return s + ")";
}

struct System {
    int kappa = 2;
    double alpha = 2.0;
    int N = 1;
    std::vector<std::vector<int>> configs;
    Chain chain;
    ProbabilityMeasure nu;
    double Z = 0.0;  // sum of N^alpha / prod p(eta(x))

    StateIndex index_of(const std::vector<int>& eta) const { return chain.space().index(label(eta)); }
};

/// Zero-range chain on kappa sites with N particles, no wells.
inline System zr_chain(int kappa, double alpha, int N, std::size_t max_states = linalg::kMaxStates) {
    if (kappa < 2) throw Error(Errc::SpecInvalid, "kappa must be at least 2");
    if (!(alpha > 1.0) || !std::isfinite(alpha)) throw Error(Errc::SpecInvalid, "alpha must exceed 1");
    if (N < 1) throw Error(Errc::SpecInvalid, "N must be at least 1");
    const std::size_t count = composition_count(N, kappa, max_states);
    if (count > max_states) {
        throw Error(Errc::StateSpaceTooLarge, "zero-range state space with kappa=" + std::to_string(kappa) + ", N=" +
                                                  std::to_string(N) + " exceeds " + std::to_string(max_states) +
                                                  " states; use a smaller N or kappa");
    }
    auto configs = compositions(N, kappa);
    std::vector<std::string> labels;
    labels.reserve(configs.size());
    for (const auto& eta : configs) labels.push_back(label(eta));
    auto space = std::make_shared<const StateSpace>(std::move(labels));

    std::vector<std::vector<Transition>> out(configs.size());
    std::vector<double> weights(configs.size());
    const double scale = std::pow(static_cast<double>(N), alpha);
    double Z = 0.0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& eta = configs[i];
        double prod = 1.0;
        for (int v : eta) prod *= weight_factor(v, alpha);
        weights[i] = scale / prod;
        Z += weights[i];
        for (int x = 0; x < kappa; ++x) {
            if (eta[static_cast<std::size_t>(x)] == 0) continue;
            for (int y = 0; y < kappa; ++y) {
                if (y == x) continue;
                auto next = eta;
                --next[static_cast<std::size_t>(x)];
                ++next[static_cast<std::size_t>(y)];
                out[i].push_back({space->index(label(next)), jump_rate(eta[static_cast<std::size_t>(x)], alpha)});
            }
        }
    }
    Chain chain(space, std::move(out));
    auto nu = ProbabilityMeasure::normalized(std::move(weights));
    return {kappa, alpha, N, std::move(configs), std::move(chain), std::move(nu), Z};
}

struct Spec {
    int kappa = 2;
    double alpha = 2.0;
    int N = 20;
    std::optional<int> ell;
    std::optional<double> beta;
};

/// min(0.2, (1+alpha) / (2 (2 alpha (kappa-1) + 1))).
inline double default_beta(int kappa, double alpha) {
    return std::min(0.2, (1.0 + alpha) / (2.0 * (2.0 * alpha * (kappa - 1) + 1.0)));
}

inline int resolve_ell(const Spec& s) {
    if (s.ell) return *s.ell;
    const double beta = s.beta ? *s.beta : default_beta(s.kappa, s.alpha);
    if (!(beta > 0.0) || !(beta < 1.0)) throw Error(Errc::SpecInvalid, "beta must lie in (0,1)");
    return static_cast<int>(std::ceil(std::pow(static_cast<double>(s.N), beta) - 1e-12));
}

/// ell^{2 alpha (kappa-1) + 1} / N^{1+alpha}; small values mean the well radius grows slowly enough.
inline double ln_ratio(int kappa, double alpha, int N, int ell) {
    return std::pow(static_cast<double>(ell), 2.0 * alpha * (kappa - 1) + 1.0) /
           std::pow(static_cast<double>(N), 1.0 + alpha);
}

struct Model {
    Spec spec;
    int ell = 1;
    System system;
    WellPartition partition;
    GeometryOverrides overrides;  // fixed anchors and gates
    double ln_ratio = 0.0;

    const Chain& chain() const { return system.chain; }
    const ProbabilityMeasure& nu() const { return system.nu; }
};

inline void validate(const Spec& s, int ell) {
    if (ell < 1) throw Error(Errc::SpecInvalid, "well radius ell must be positive");
    // wells disjoint needs N > 2 ell; the gate (N-ell-1, ell+1, 0, ...) must lie in Delta
    if (s.N < 2 * ell + 2) {
        throw Error(Errc::SpecInvalid, "N=" + std::to_string(s.N) + " is too small for ell=" + std::to_string(ell) +
                                           " (need N >= 2 ell + 2 so that wells are disjoint and the gate lies in Delta)");
    }
}

inline Model zr_build(const Spec& spec, std::size_t max_states = linalg::kMaxStates) {
    if (spec.kappa < 2) throw Error(Errc::SpecInvalid, "kappa must be at least 2");
    if (!(spec.alpha > 1.0)) throw Error(Errc::SpecInvalid, "alpha must exceed 1");
    const int ell = resolve_ell(spec);
    validate(spec, ell);
    System sys = zr_chain(spec.kappa, spec.alpha, spec.N, max_states);
    const std::size_t kappa = static_cast<std::size_t>(spec.kappa);
    std::vector<StateSet> wells(kappa);
    for (std::size_t i = 0; i < sys.configs.size(); ++i) {
        for (std::size_t x = 0; x < kappa; ++x) {
            if (sys.configs[i][x] >= spec.N - ell) wells[x].push_back(i);
        }
    }
    auto partition = WellPartition::from_wells(sys.chain.size(), std::move(wells));
    GeometryOverrides overrides;
    overrides.anchors.resize(kappa);
    overrides.gates.resize(kappa);
    for (std::size_t x = 0; x < kappa; ++x) {
        std::vector<int> anchor(kappa, 0);
        anchor[x] = spec.N;
        overrides.anchors[x] = sys.index_of(anchor);
        std::vector<int> gate(kappa, 0);
        gate[x] = spec.N - ell - 1;
        gate[x == 0 ? 1 : 0] = ell + 1;
        overrides.gates[x] = sys.index_of(gate);
    }
    const double ratio = ln_ratio(spec.kappa, spec.alpha, spec.N, ell);
    return {spec, ell, std::move(sys), std::move(partition), std::move(overrides), ratio};
}

struct Theta {
    double theta = 0.0;                 // 1 / Cap(E^x, other wells), unspeeded
    std::vector<double> capacities;     // per x
    double spread = 0.0;                // max relative gap across x
    Chain sped;                         // chain with speedup theta
};

inline Theta zr_theta(const Model& m) {
    const Chain& base = m.chain().speedup() == 1.0 ? m.chain() : m.chain().with_speedup(1.0);
    std::vector<double> caps;
    for (std::size_t x = 0; x < m.partition.kappa(); ++x) {
        caps.push_back(capacity(base, m.nu(), m.partition.wells[x], m.partition.others(x)).value);
    }
    double spread = 0.0;
    for (double c : caps) spread = std::max(spread, std::abs(c - caps.front()) / caps.front());
    const double theta = 1.0 / caps.front();
    return {theta, std::move(caps), spread, base.with_speedup(theta)};
}

}  // namespace metastab::zr
