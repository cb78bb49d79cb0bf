#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "metastab/chain_io.hpp"
#include "metastab/kolmogorov.hpp"
#include "metastab/montecarlo.hpp"
#include "metastab/potential.hpp"
#include "metastab/random_chains.hpp"
#include "metastab/trace.hpp"

namespace metastab {

struct SuiteResult {
    std::string name;
    double tolerance = 0.0;
    double worst = 0.0;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::string first_failure;
    std::optional<std::size_t> failing_chain;

    bool passed() const { return failures == 0; }
};

struct VerifyReport {
    std::uint64_t seed = 0;
    std::size_t chains = 0;
    std::vector<SuiteResult> suites;
    std::optional<std::string> reproducer_path;

    bool passed() const {
        return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed(); });
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["chains"] = chains;
        j["passed"] = passed();
        auto arr = nlohmann::json::array();
        for (const auto& s : suites) {
            arr.push_back({{"name", s.name},
                           {"tolerance", s.tolerance},
                           {"worst", s.worst},
                           {"checks", s.checks},
                           {"failures", s.failures},
                           {"first_failure", s.first_failure}});
        }
        j["suites"] = std::move(arr);
        return j;
    }
};

struct VerifyOptions {
    std::uint64_t seed = 20240601;
    std::size_t chains = 50;
    std::size_t min_states = 4;
    std::size_t max_states = 40;
    /// Directory for the reproducer written on failure; nothing is written when empty.
    std::string out_dir;
    /// Break detailed balance on the first chain (negative control).
    bool inject_fault = false;
};

namespace detail {

struct SuiteRunner {
    SuiteResult result;

    SuiteRunner(std::string name, double tol) {
        result.name = std::move(name);
        result.tolerance = tol;
    }

    void fail(std::size_t chain, const std::string& message) {
        ++result.failures;
        if (result.first_failure.empty()) {
            result.first_failure = message;
            result.failing_chain = chain;
        }
    }

    void record(std::size_t chain, double value, const std::string& what) {
        ++result.checks;
        if (!std::isfinite(value) || value > result.tolerance) {
            fail(chain, what + " deviation " + std::to_string(value));
        }
        if (std::isfinite(value)) result.worst = std::max(result.worst, value);
    }

    void guard(std::size_t chain, const std::function<void()>& body) {
        try {
            body();
        } catch (const Error& e) {
            ++result.checks;
            fail(chain, e.what());
        }
    }
};

inline Chain break_detailed_balance(const Chain& chain) {
    std::vector<std::vector<Transition>> out(chain.size());
    for (StateIndex i = 0; i < chain.size(); ++i) {
        for (const auto& t : chain.transitions(i)) out[i].push_back(t);
    }
    out[0].front().rate *= 1.5;
    return Chain(chain.space_ptr(), std::move(out), chain.speedup());
}

}  // namespace detail

/// Property suites of the chain, trace and potential layers on seeded random chains.
inline VerifyReport verify_suite(const VerifyOptions& options = {}) {
    using detail::SuiteRunner;
    SuiteRunner stationary("stationary-residual", 1e-10);
    SuiteRunner dirichlet("dirichlet-two-forms", 1e-10);
    SuiteRunner routes("capacity-triple-route", 1e-9);
    SuiteRunner monotone("capacity-monotonicity", 1e-10);
    SuiteRunner conditioned("trace-conditioned-measure", 1e-10);
    SuiteRunner order("trace-order-independence", 1e-12);
    SuiteRunner first_step("trace-first-step", 1e-9);
    SuiteRunner hitting("trace-hitting-probabilities", 1e-9);
    SuiteRunner identities("trace-capacity-identities", 1e-8);
    SuiteRunner via_potential("mean-hitting-time-two-routes", 1e-8);
    SuiteRunner occupation("occupation-identity", 1e-6);
    SuiteRunner occ_bound("occupation-bound", 0.0);

    std::vector<Chain> generated;
    for (std::size_t c = 0; c < options.chains; ++c) {
        auto rng = SeedSpec{options.seed, c}.engine();
        std::uniform_int_distribution<std::size_t> size_dist(options.min_states, options.max_states);
        const std::size_t n = size_dist(rng);
        Chain chain = random_reversible_chain(rng, n);
        if (options.inject_fault && c == 0) chain = detail::break_detailed_balance(chain);
        generated.push_back(chain);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);

        // non-reversible companion for the stationary solve
        stationary.guard(c, [&] {
            const Chain general = random_chain(rng, n);
            stationary.record(c, stationary_residual(general, stationary_measure(general)), "general chain");
        });

        std::optional<ProbabilityMeasure> nu_opt;
        stationary.guard(c, [&] {
            nu_opt.emplace(stationary_measure(chain));
            stationary.record(c, stationary_residual(chain, *nu_opt), "reversible chain");
        });
        if (!nu_opt) continue;
        const ProbabilityMeasure& nu = *nu_opt;

        dirichlet.guard(c, [&] {
            for (int k = 0; k < 100; ++k) {
                std::vector<double> f(n);
                for (double& x : f) x = unif(rng);
                const double a = dirichlet_form(chain, nu, f);
                const double b = dirichlet_form_inner(chain, nu, f);
                dirichlet.record(c, relative_deviation(a, b), "half-sum vs inner product");
            }
        });

        std::uniform_int_distribution<std::size_t> pick_size(1, std::max<std::size_t>(1, n / 3));
        const StateSet F0 = random_subset(rng, n, pick_size(rng));
        const StateSet rest0 = complement(n, F0);
        const StateSet G0 = make_set({rest0[std::uniform_int_distribution<std::size_t>(0, rest0.size() - 1)(rng)]});

        routes.guard(c, [&] {
            const double d = capacity(chain, nu, F0, G0).value;
            const double f = capacity_flux(chain, nu, F0, G0).value;
            const double v = capacity_variational(chain, nu, F0, G0).value;
            const double swapped = capacity(chain, nu, G0, F0).value;
            routes.record(c, relative_deviation(d, f), "dirichlet vs flux");
            routes.record(c, relative_deviation(d, v), "dirichlet vs variational");
            routes.record(c, relative_deviation(d, swapped), "symmetry");
        });

        monotone.guard(c, [&] {
            const StateSet rest = set_difference(complement(n, F0), G0);
            if (rest.empty()) return;
            const StateSet bigger = set_union(F0, {rest.front()});
            const double small = capacity(chain, nu, F0, G0).value;
            const double big = capacity(chain, nu, bigger, G0).value;
            monotone.record(c, std::max(0.0, small - big) / small, "enlarged source");
        });

        // trace on a random set of size >= 2
        std::uniform_int_distribution<std::size_t> trace_size(2, n - 1);
        const StateSet F = random_subset(rng, n, trace_size(rng));
        conditioned.guard(c, [&] {
            TraceOptions opt;
            opt.nu = &nu;
            const auto tr = trace_chain(chain, F, opt);
            conditioned.record(c, tr.stationary_residual, "conditioned measure residual");
            conditioned.record(c, check_detailed_balance(tr.chain, *tr.conditioned).worst_violation, "trace reversibility");
        });

        if (n <= 10) {
            order.guard(c, [&] {
                TraceOptions opt;
                opt.verify = false;
                const auto ref = trace_chain(chain, F, opt);
                for (int k = 0; k < 5; ++k) {
                    std::vector<StateIndex> perm = complement(n, F);
                    std::shuffle(perm.begin(), perm.end(), rng);
                    opt.order = perm;
                    const auto alt = trace_chain(chain, F, opt);
                    double worst = 0.0;
                    for (StateIndex i = 0; i < F.size(); ++i) {
                        for (StateIndex j = 0; j < F.size(); ++j) {
                            if (i == j) continue;
                            worst = std::max(worst, std::abs(ref.chain.rate(i, j) - alt.chain.rate(i, j)) /
                                                        ref.chain.max_rate());
                        }
                    }
                    order.record(c, worst, "elimination order");
                }
            });
        }

        first_step.guard(c, [&] {
            for (StateIndex eta : F) first_step.record(c, verify_g02(chain, F, eta).max_deviation, "first-step rates");
        });

        const std::size_t half = F.size() / 2;
        const StateSet G1(F.begin(), F.begin() + static_cast<long>(half));
        const StateSet G2(F.begin() + static_cast<long>(half), F.end());
        identities.guard(c, [&] {
            // F = G1 u G2
            const auto rep = trace_capacity_identity(chain, nu, F, G1, G2);
            hitting.record(c, rep.a_hitting, "(a) on F = G1 u G2");
            identities.record(c, rep.b_flux, "(b)");
            identities.record(c, rep.c_capacity.value_or(0.0), "(c)");
            identities.record(c, rep.d_trace_capacity, "(d)");
            identities.record(c, rep.e_stated, "(e) stated formula");
            identities.record(c, rep.e_potential_route, "(e) trace route");
            identities.record(c, rep.aggregated_balance, "aggregated detailed balance");
            // strict subsets inside a larger F
            if (G1.size() >= 2) {
                const StateSet g1 = {G1.front()};
                const auto sub = trace_capacity_identity(chain, nu, F, g1, G2);
                hitting.record(c, sub.a_hitting, "(a) on nested sets");
                identities.record(c, sub.d_trace_capacity, "(d) nested");
                identities.record(c, sub.e_stated, "(e) nested stated formula");
                identities.record(c, sub.e_potential_route, "(e) nested trace route");
            }
        });

        via_potential.guard(c, [&] {
            const StateIndex eta = complement(n, G0).front();
            const auto rep = mean_hitting_time(chain, nu, eta, G0);
            via_potential.record(c, rep.deviation, "direct vs equilibrium-potential route");
        });

        occupation.guard(c, [&] {
            std::vector<double> V(n);
            for (double& x : V) x = unif(rng);
            std::uniform_int_distribution<std::size_t> st(0, n - 1);
            for (double t : {0.1, 1.0, 10.0}) {
                const auto rep = occupation_identity_check(chain, nu, V, st(rng), st(rng), t);
                occupation.record(c, rep.deviation, "t=" + std::to_string(t));
            }
        });

        occ_bound.guard(c, [&] {
            // mean-zero V supported on F
            std::vector<double> V(n, 0.0);
            double mean = 0.0;
            for (StateIndex i : F) {
                V[i] = unif(rng);
                mean += nu[i] * V[i];
            }
            const double mass = nu.mass(F);
            for (StateIndex i : F) V[i] -= mean / mass;
            const StateIndex eta = complement(n, F).front();
            OccupationOptions opt;
            opt.center = false;
            opt.support = F;
            std::uniform_int_distribution<std::size_t> st(0, n - 1);
            for (double t : {1.0, 10.0}) {
                const auto rep = occupation_identity_check(chain, nu, V, st(rng), eta, t, opt);
                occ_bound.record(c, std::max(0.0, -*rep.bound_slack), "bound slack");
                occupation.record(c, rep.deviation, "supported V");
            }
        });
    }

    VerifyReport report;
    report.seed = options.seed;
    report.chains = options.chains;
    for (auto* s : {&stationary, &dirichlet, &routes, &monotone, &conditioned, &order, &first_step, &hitting, &identities, &via_potential, &occupation, &occ_bound}) {
        report.suites.push_back(s->result);
    }

    if (!report.passed() && !options.out_dir.empty()) {
        const SuiteResult* bad = nullptr;
        for (const auto& s : report.suites) {
            if (!s.passed()) {
                bad = &s;
                break;
            }
        }
        std::filesystem::create_directories(options.out_dir);
        const std::size_t idx = bad->failing_chain.value_or(0);
        const auto chain_path = (std::filesystem::path(options.out_dir) / "reproducer_chain.json").string();
        save_chain(generated.at(idx), chain_path);
        nlohmann::json meta = {{"seed", options.seed},
                               {"chain_index", idx},
                               {"suite", bad->name},
                               {"message", bad->first_failure},
                               {"chain_file", "reproducer_chain.json"},
                               {"replica_seed", SeedSpec{options.seed, idx}.derived()}};
        std::ofstream(std::filesystem::path(options.out_dir) / "reproducer.json") << meta.dump(2) << '\n';
        report.reproducer_path = chain_path;
    }
    return report;
}

}  // namespace metastab
