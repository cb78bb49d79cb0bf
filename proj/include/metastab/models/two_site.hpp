#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "metastab/models/birth_death.hpp"
#include "metastab/models/zero_range.hpp"

namespace metastab {

/// lambda_N(x) = (x / (x - 1/N))^alpha for x >= 2/N, 1 at x = 1/N.
inline double two_site_lambda(double x, int N, double alpha) {
    const double h = 1.0 / N;
    if (x < 1.5 * h) return 1.0;
    return std::pow(x / (x - h), alpha);
}

/// Birth-death description of the two-site zero-range process, unit time scale.
inline bd::Spec two_site_spec(int N, double alpha) {
    bd::Spec s = bd::double_well(alpha, N);
    s.lambda = [N, alpha](double x) { return two_site_lambda(x, N, alpha); };
    s.time_scale = 1.0;
    s.ell = 1;
    return s;
}

struct TwoSiteReport {
    int N = 0;
    double alpha = 0.0;
    std::vector<StateIndex> bijection;  // zero-range index -> grid index
    double max_deviation = 0.0;         // largest relative gap between matched rates
    std::size_t transitions_compared = 0;
    double lambda_half = 0.0;           // lambda_N(1/2)
    double theta = 0.0;                 // 1 / Cap on the unspeeded zero-range chain
    double r_theta = 0.0;               // r_N(1,2) with speedup theta
    double r_scaled = 0.0;              // r_N(1,2) with speedup N^{1+alpha}
    double limit_scaled = 0.0;          // (m int_0^1 u^alpha (1-u)^alpha du)^{-1}
};

/// Maps eta to eta(1)/N and compares the zero-range rates with the birth-death rates.
inline TwoSiteReport zr_two_site_map(const zr::Spec& spec, std::size_t max_states = linalg::kMaxStates) {
    if (spec.kappa != 2) throw Error(Errc::KappaNotTwo, "the two-site map needs kappa = 2");
    const zr::System sys = zr::zr_chain(2, spec.alpha, spec.N, max_states);
    const bd::Model bdm = bd::bd_build(two_site_spec(spec.N, spec.alpha), max_states);
    if (bdm.chain.size() != sys.chain.size()) throw Error(Errc::DimensionMismatch, "grid and configuration counts differ");

    TwoSiteReport rep;
    rep.N = spec.N;
    rep.alpha = spec.alpha;
    rep.bijection.resize(sys.chain.size());
    for (StateIndex i = 0; i < sys.chain.size(); ++i) {
        rep.bijection[i] = static_cast<StateIndex>(sys.configs[i][0]);
    }
    for (StateIndex i = 0; i < sys.chain.size(); ++i) {
        const StateIndex gi = rep.bijection[i];
        if (sys.chain.transitions(i).size() != bdm.chain.transitions(gi).size()) {
            rep.max_deviation = std::numeric_limits<double>::infinity();
        }
        for (const auto& t : sys.chain.transitions(i)) {
            const double mapped = bdm.chain.rate(gi, rep.bijection[t.to]);
            rep.max_deviation = std::max(rep.max_deviation, std::abs(mapped - t.rate) / t.rate);
            ++rep.transitions_compared;
        }
    }
    rep.lambda_half = two_site_lambda(0.5, spec.N, spec.alpha);

    if (spec.N >= 2 * zr::resolve_ell(spec) + 2) {
        const zr::Spec& full = spec;
        const auto model = zr::zr_build(full, max_states);
        const auto th = zr::zr_theta(model);
        rep.theta = th.theta;
        const double scale = std::pow(static_cast<double>(spec.N), 1.0 + spec.alpha);
        rep.r_theta = inter_well_rates(th.sped, model.nu(), model.partition).r(0, 1);
        rep.r_scaled = inter_well_rates(model.chain().with_speedup(scale), model.nu(), model.partition).r(0, 1);
        rep.limit_scaled = bd::bd_limit_rates(bd::double_well(spec.alpha, spec.N))(0, 1);
    }
    return rep;
}

}  // namespace metastab
