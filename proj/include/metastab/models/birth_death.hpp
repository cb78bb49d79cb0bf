#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metastab/chain.hpp"
#include "metastab/linalg.hpp"
#include "metastab/meta.hpp"
#include "metastab/models/zero_range.hpp"

namespace metastab::bd {

struct Spec {
    double a = 0.0;
    double b = 1.0;
    std::vector<double> zeros;      // a_1 < ... < a_m
    std::vector<double> exponents;  // alpha_i
    /// Potential; when empty, prod_i |x - a_i|^{alpha_i}.
    std::function<double(double)> H;
    /// Positive speed function; when empty, identically 1.
    std::function<double(double)> lambda;
    int N = 50;
    std::optional<int> ell;
    std::optional<double> beta;
    /// Rate prefactor; N^{1+alpha} when unset.
    std::optional<double> time_scale;
};

inline double max_exponent(const Spec& s) { return *std::max_element(s.exponents.begin(), s.exponents.end()); }

/// Zeros whose exponent equals the maximum (the deep wells b_1 < ... < b_kappa).
inline std::vector<double> deep_zeros(const Spec& s) {
    const double alpha = max_exponent(s);
    std::vector<double> out;
    for (std::size_t i = 0; i < s.zeros.size(); ++i) {
        if (s.exponents[i] == alpha) out.push_back(s.zeros[i]);
    }
    return out;
}

inline double eval_H(const Spec& s, double x) {
    if (s.H) return s.H(x);
    double h = 1.0;
    for (std::size_t i = 0; i < s.zeros.size(); ++i) h *= std::pow(std::abs(x - s.zeros[i]), s.exponents[i]);
    return h;
}

inline double eval_lambda(const Spec& s, double x) { return s.lambda ? s.lambda(x) : 1.0; }

inline void validate_shape(const Spec& s) {
    if (!(s.a < s.b)) throw Error(Errc::SpecInvalid, "interval must satisfy a < b");
    if (s.zeros.empty() || s.zeros.size() != s.exponents.size()) {
        throw Error(Errc::SpecInvalid, "zeros and exponents must be nonempty and of equal length");
    }
    for (std::size_t i = 0; i < s.zeros.size(); ++i) {
        if (s.zeros[i] < s.a || s.zeros[i] > s.b) throw Error(Errc::SpecInvalid, "zero outside the interval");
        if (i > 0 && !(s.zeros[i] > s.zeros[i - 1])) throw Error(Errc::SpecInvalid, "zeros must be strictly increasing");
        if (!(s.exponents[i] > 0.0)) throw Error(Errc::SpecInvalid, "exponents must be positive");
    }
    if (!(max_exponent(s) > 1.0)) throw Error(Errc::SpecInvalid, "the largest exponent must exceed 1");
    if (deep_zeros(s).size() < 2) throw Error(Errc::SpecInvalid, "at least two exponents must equal the maximum");
    if (s.N < 1) throw Error(Errc::SpecInvalid, "N must be at least 1");
}

/// Union of the blocks G_{N,0}, ..., G_{N,m}, sorted and de-duplicated.
inline std::vector<double> build_grid(const Spec& s) {
    const double h = 1.0 / s.N;
    const double eps = 1e-9 * h;
    const auto& z = s.zeros;
    const std::size_t m = z.size();
    std::vector<double> pts;
    int k0 = 0;
    while (!(s.a > z.front() - (k0 + 1) * h + eps)) ++k0;
    for (int k = k0; k >= 0; --k) pts.push_back(z.front() - k * h);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        int k = 0;
        while (!(z[i] + (k + 1) * h > z[i + 1] - (k + 1) * h + eps)) ++k;
        for (int j = 1; j <= k; ++j) pts.push_back(z[i] + j * h);
        for (int j = k; j >= 0; --j) pts.push_back(z[i + 1] - j * h);
    }
    int km = 0;
    while (!(z.back() + (km + 1) * h > s.b + eps)) ++km;
    for (int j = 1; j <= km; ++j) pts.push_back(z.back() + j * h);
    std::sort(pts.begin(), pts.end());
    std::vector<double> grid;
    for (double x : pts) {
        if (grid.empty() || x - grid.back() > eps) grid.push_back(x);
    }
    // snap the zeros so that they are represented exactly
    for (double a : z) {
        auto it = std::min_element(grid.begin(), grid.end(),
                                   [a](double u, double v) { return std::abs(u - a) < std::abs(v - a); });
        *it = a;
    }
    return grid;
}

inline std::string point_label(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

struct Model {
    Spec spec;
    int ell = 1;
    double alpha = 2.0;
    std::vector<double> grid;
    std::vector<StateIndex> zero_index;  // grid index of each a_i
    std::vector<StateIndex> anchor;      // grid index of each b_i
    Chain chain;
    ProbabilityMeasure nu;
    double Z = 0.0;
    WellPartition partition;
    GeometryOverrides overrides;
};

inline int resolve_ell(const Spec& s) {
    if (s.ell) return *s.ell;
    const double beta = s.beta ? *s.beta : zr::default_beta(2, max_exponent(s));
    if (!(beta > 0.0) || !(beta < 1.0)) throw Error(Errc::SpecInvalid, "beta must lie in (0,1)");
    return static_cast<int>(std::ceil(std::pow(static_cast<double>(s.N), beta) - 1e-12));
}

inline Model bd_build(const Spec& spec, std::size_t max_states = linalg::kMaxStates) {
    validate_shape(spec);
    const int ell = resolve_ell(spec);
    if (ell < 1) throw Error(Errc::SpecInvalid, "well radius ell must be positive");
    const double alpha = max_exponent(spec);
    const double h = 1.0 / spec.N;
    const auto deep = deep_zeros(spec);
    for (std::size_t i = 0; i + 1 < deep.size(); ++i) {
        if (deep[i] + (ell + 1) * h >= deep[i + 1] - (ell + 1) * h) {
            throw Error(Errc::OverlappingNeighborhoods, "neighbourhoods of radius (ell+1)/N around wells " +
                                                            std::to_string(i + 1) + " and " + std::to_string(i + 2) +
                                                            " overlap; increase N or decrease ell");
        }
    }

    auto grid = build_grid(spec);
    if (grid.size() > max_states) {
        throw Error(Errc::StateSpaceTooLarge, "birth-death grid has " + std::to_string(grid.size()) + " points");
    }
    const std::size_t n = grid.size();
    auto find = [&](double x) {
        for (StateIndex i = 0; i < n; ++i) {
            if (grid[i] == x) return i;
        }
        throw Error(Errc::StateNotFound, "grid point not found");
    };
    std::vector<StateIndex> zero_index;
    for (double a : spec.zeros) zero_index.push_back(find(a));

    std::vector<double> weights(n);
    std::vector<double> lam(n);
    for (StateIndex i = 0; i < n; ++i) {
        const auto zi = std::find(zero_index.begin(), zero_index.end(), i);
        if (zi != zero_index.end()) {
            weights[i] = std::pow(static_cast<double>(spec.N), spec.exponents[static_cast<std::size_t>(zi - zero_index.begin())]);
        } else {
            const double Hx = eval_H(spec, grid[i]);
            if (!(Hx >= 1e-14) || !std::isfinite(Hx)) {
                throw Error(Errc::HVanishesOffZeros, "H(" + point_label(grid[i]) + ") = " + std::to_string(Hx) +
                                                         " at a grid point that is not a declared zero");
            }
            weights[i] = 1.0 / Hx;
        }
        lam[i] = eval_lambda(spec, grid[i]);
        if (!(lam[i] > 0.0) || !std::isfinite(lam[i])) {
            throw Error(Errc::SpecInvalid, "lambda must be positive, fails at " + point_label(grid[i]));
        }
    }
    double Z = 0.0;
    for (double w : weights) Z += w;
    auto nu = ProbabilityMeasure::normalized(weights);

    const double T = spec.time_scale ? *spec.time_scale : std::pow(static_cast<double>(spec.N), 1.0 + alpha);
    std::vector<std::string> labels;
    for (double x : grid) labels.push_back(point_label(x));
    std::vector<std::vector<Transition>> out(n);
    for (StateIndex i = 0; i + 1 < n; ++i) {
        out[i + 1].push_back({i, T * lam[i + 1]});                                  // downhill
        out[i].push_back({i + 1, T * lam[i + 1] * (weights[i + 1] / weights[i])});  // uphill
    }
    Chain chain(std::make_shared<const StateSpace>(std::move(labels)), std::move(out));

    const std::size_t kappa = deep.size();
    std::vector<StateSet> wells(kappa);
    std::vector<StateIndex> anchor(kappa);
    GeometryOverrides overrides;
    overrides.anchors.resize(kappa);
    for (std::size_t i = 0; i < kappa; ++i) {
        anchor[i] = find(deep[i]);
        overrides.anchors[i] = anchor[i];
        const double tol = 1e-9 * h;
        for (StateIndex k = 0; k < n; ++k) {
            if (grid[k] >= deep[i] - ell * h - tol && grid[k] <= deep[i] + ell * h + tol) wells[i].push_back(k);
        }
    }
    auto partition = WellPartition::from_wells(n, std::move(wells));
    return {spec, ell, alpha, std::move(grid), std::move(zero_index), std::move(anchor), std::move(chain),
            std::move(nu), Z, std::move(partition), std::move(overrides)};
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
inline double integrate(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10) {
    struct Rec {
        const std::function<double(double)>& f;
        double simpson(double a, double fa, double m, double fm, double b, double fb) const {
            (void)m;
            return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        }
        double run(double a, double fa, double b, double fb, double m, double fm, double whole, double eps,
                   int depth) const {
            const double lm = 0.5 * (a + m);
            const double rm = 0.5 * (m + b);
            const double flm = f(lm);
            const double frm = f(rm);
            if (!std::isfinite(flm) || !std::isfinite(frm)) {
                throw Error(Errc::QuadratureFailure, "integrand is not finite");
            }
            const double left = simpson(a, fa, lm, flm, m, fm);
            const double right = simpson(m, fm, rm, frm, b, fb);
            const double delta = left + right - whole;
            if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
            if (depth <= 0) throw Error(Errc::QuadratureFailure, "adaptive Simpson did not converge");
            return run(a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
                   run(m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
        }
    } rec{f};
    if (!(hi > lo)) return 0.0;
    const double fa = f(lo);
    const double fb = f(hi);
    const double m = 0.5 * (lo + hi);
    const double fm = f(m);
    if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm)) {
        throw Error(Errc::QuadratureFailure, "integrand is not finite");
    }
    return rec.run(lo, fa, hi, fb, m, fm, rec.simpson(lo, fa, m, fm, hi, fb), tol, 50);
}

/// sigma_i = 1 for a well at an endpoint of the interval, 2 otherwise.
inline int sigma(const Spec& s, double b_i) { return (b_i == s.a || b_i == s.b) ? 1 : 2; }

/// m(b_i) = 1 + sigma_i zeta(alpha).
inline double m_factor(const Spec& s, double b_i) {
    return 1.0 + sigma(s, b_i) * std::riemann_zeta(max_exponent(s));
}

/// Nearest-neighbour limit rates 1 / (m(b_i) int_{b_i}^{b_{i+1}} H / lambda).
inline Eigen::MatrixXd bd_limit_rates(const Spec& spec) {
    validate_shape(spec);
    const auto deep = deep_zeros(spec);
    const auto k = static_cast<Eigen::Index>(deep.size());
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i + 1 < k; ++i) {
        const double I = integrate([&](double u) { return eval_H(spec, u) / eval_lambda(spec, u); },
                                   deep[static_cast<std::size_t>(i)], deep[static_cast<std::size_t>(i + 1)]);
        r(i, i + 1) = 1.0 / (m_factor(spec, deep[static_cast<std::size_t>(i)]) * I);
        r(i + 1, i) = 1.0 / (m_factor(spec, deep[static_cast<std::size_t>(i + 1)]) * I);
    }
    return r;
}

/// H(u) = u^alpha (1-u)^alpha on [0,1] with lambda = 1.
inline Spec double_well(double alpha, int N) {
    Spec s;
    s.zeros = {0.0, 1.0};
    s.exponents = {alpha, alpha};
    s.N = N;
    return s;
}

}  // namespace metastab::bd
