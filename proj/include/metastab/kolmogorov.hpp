#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "metastab/chain.hpp"
#include "metastab/harmonic.hpp"
#include "metastab/potential.hpp"

namespace metastab {

inline constexpr double kOdeTolerance = 1e-9;

/// Integrates u' = L u + V from u(0) = u0 to time t with an adaptive Dormand-Prince 5(4) scheme.
inline std::vector<double> integrate_forward(const Chain& chain, std::vector<double> u0, std::span<const double> V,
                                             double t) {
    namespace odeint = boost::numeric::odeint;
    require_size(chain, u0.size(), "initial value");
    if (!V.empty()) require_size(chain, V.size(), "source");
    if (!(t >= 0.0) || !std::isfinite(t)) throw Error(Errc::InvalidHorizon, "integration time must be finite and >= 0");
    if (t == 0.0) return u0;
    const std::vector<double> source(V.begin(), V.end());
    auto rhs = [&chain, &source](const std::vector<double>& u, std::vector<double>& du, double) {
        const double s = chain.speedup();
        for (StateIndex i = 0; i < chain.size(); ++i) {
            double acc = 0.0;
            for (const auto& tr : chain.transitions(i)) acc += tr.rate * (u[tr.to] - u[i]);
            du[i] = s * acc + (source.empty() ? 0.0 : source[i]);
        }
    };
    using Stepper = odeint::runge_kutta_dopri5<std::vector<double>>;
    const double dt0 = std::min(t, 0.1 / chain.max_rate());
    try {
        odeint::integrate_adaptive(odeint::make_controlled<Stepper>(kOdeTolerance, kOdeTolerance), rhs, u0, 0.0, t,
                                   dt0);
    } catch (const std::exception& e) {
        throw Error(Errc::ODEStepFailure, std::string("Kolmogorov integration failed: ") + e.what());
    }
    for (double x : u0) {
        if (!std::isfinite(x)) throw Error(Errc::ODEStepFailure, "Kolmogorov integration diverged");
    }
    return u0;
}

struct OccupationReport {
    double lhs = 0.0;            // E_xi[int_0^t V(eta_s) ds]
    double h_xi = 0.0;           // hitting functional at xi
    double semigroup_h_xi = 0.0; // (e^{tL} h)(xi)
    double deviation = 0.0;      // |lhs - (h_xi - semigroup_h_xi)|
    double mean_removed = 0.0;   // nu(V) before centring
    std::optional<double> occupation_bound;
    std::optional<double> bound_slack;  // bound - |lhs|
};

struct OccupationOptions {
    bool center = true;
    /// When set, V must vanish outside this set and the hitting-time bound is checked.
    std::optional<StateSet> support;
};

inline OccupationReport occupation_identity_check(const Chain& chain, const ProbabilityMeasure& nu,
                                                  std::vector<double> V, StateIndex xi, StateIndex eta, double t,
                                                  const OccupationOptions& options = {}) {
    const std::size_t n = chain.size();
    require_size(chain, nu.size(), "measure");
    require_size(chain, V.size(), "V");
    if (xi >= n || eta >= n) throw Error(Errc::StateNotFound, "state index out of range");
    OccupationReport report;
    report.mean_removed = nu.expectation(V);
    if (options.center) {
        for (double& v : V) v -= report.mean_removed;
    } else if (std::abs(report.mean_removed) > 1e-12) {
        throw Error(Errc::NotMeanZero, "V has nu-mean " + std::to_string(report.mean_removed));
    }

    const auto u = integrate_forward(chain, std::vector<double>(n, 0.0), V, t);
    report.lhs = u[xi];

    DirichletProblem problem(chain, complement(n, {eta}));
    const auto h = problem.solve(std::vector<double>(n, 0.0), V);
    const auto w = integrate_forward(chain, h, {}, t);
    report.h_xi = h[xi];
    report.semigroup_h_xi = w[xi];
    report.deviation = std::abs(report.lhs - (report.h_xi - report.semigroup_h_xi));

    if (options.support) {
        const StateSet& F = *options.support;
        require_valid(n, F, "support");
        const auto mask = make_mask(n, F);
        double vmax = 0.0;
        for (StateIndex i = 0; i < n; ++i) {
            if (!mask[i] && std::abs(V[i]) > 1e-12) {
                throw Error(Errc::DimensionMismatch, "V does not vanish outside the declared support");
            }
            vmax = std::max(vmax, std::abs(V[i]));
        }
        const auto hit = expected_hitting_times(chain, {eta});
        double worst = 0.0;
        for (StateIndex z : F) worst = std::max(worst, hit[z]);
        report.occupation_bound = 2.0 * vmax * worst;
        report.bound_slack = *report.occupation_bound - std::abs(report.lhs);
    }
    return report;
}

}  // namespace metastab
