#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "metastab/kolmogorov.hpp"
#include "metastab/potential.hpp"
#include "metastab/random_chains.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace metastab;
using Catch::Approx;

TEST_CASE("capacity of a three-state path", "[potential]") {
    auto p = testing::path3();
    auto nu = stationary_measure(p);
    CHECK(capacity(p, nu, {0}, {2}).value == Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(capacity_flux(p, nu, {0}, {2}).value == Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(capacity_variational(p, nu, {0}, {2}).value == Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(bd_capacity_closed_form(p, nu, 0, 2).value == Approx(1.0 / 6.0).epsilon(1e-14));
    auto h = equilibrium_potential(p, {0}, {2});
    CHECK(h.values[1] == Approx(0.5));
    CHECK(capacity(p.with_speedup(4.0), nu, {0}, {2}).value == Approx(4.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("capacity argument validation", "[potential]") {
    auto p = testing::path3();
    auto nu = stationary_measure(p);
    CHECK_ERRC(capacity(p, nu, {0}, {0, 2}), OverlappingSets);
    CHECK_ERRC(capacity(p, nu, {}, {2}), EmptySubset);
    CHECK_ERRC(bd_capacity_closed_form(p, nu, 1, 1), OverlappingSets);
    auto tri = build_chain({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "a", 1.0}, {"b", "c", 1.0}, {"c", "b", 1.0},
                                             {"a", "c", 1.0}, {"c", "a", 1.0}});
    CHECK_ERRC(bd_capacity_closed_form(tri, stationary_measure(tri), 0, 2), NotBirthDeath);
}

TEST_CASE("capacity routes agree with each other and the dense oracle", "[potential][oracle]") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 3 + rep % 30;
        auto c = random_reversible_chain(rng, n);
        auto nu = stationary_measure(c);
        auto both = random_subset(rng, n, 2 + rep % (n - 1));
        StateSet F(both.begin(), both.begin() + 1 + rep % (both.size() - 1));
        StateSet G = set_difference(both, F);
        const double d = capacity(c, nu, F, G).value;
        CHECK(d > 0.0);
        CHECK(capacity_flux(c, nu, F, G).value == Approx(d).epsilon(1e-9));
        CHECK(capacity_variational(c, nu, F, G).value == Approx(d).epsilon(1e-9));
        CHECK(oracle::capacity(c, nu.weights(), F, G) == Approx(d).epsilon(1e-8));
        CHECK(capacity(c, nu, G, F).value == Approx(d).epsilon(1e-9));
    }
}

TEST_CASE("capacity grows with the target set", "[potential][property]") {
    std::mt19937_64 rng(37);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 5 + rep % 20;
        auto c = random_reversible_chain(rng, n);
        auto nu = stationary_measure(c);
        auto s = random_subset(rng, n, 3);
        const double small = capacity(c, nu, {s[0]}, {s[1]}).value;
        const double big = capacity(c, nu, {s[0]}, {s[1], s[2]}).value;
        CHECK(big >= small * (1.0 - 1e-12));
    }
}

TEST_CASE("closed form on random nearest-neighbour chains", "[potential][oracle]") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 3 + rep * 3;
        std::vector<std::string> labels;
        std::vector<RateEntry> e;
        for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
        for (std::size_t i = 0; i + 1 < n; ++i) {
            e.push_back({labels[i], labels[i + 1], u(rng)});
            e.push_back({labels[i + 1], labels[i], u(rng)});
        }
        auto c = build_chain(labels, e);
        auto nu = stationary_measure(c);
        const StateIndex x = rep % 2, y = n - 1;
        CHECK(bd_capacity_closed_form(c, nu, x, y).value == Approx(capacity(c, nu, {x}, {y}).value).epsilon(1e-10));
    }
}

TEST_CASE("mean hitting times", "[potential]") {
    auto p = testing::path3();
    auto nu = stationary_measure(p);
    auto r = mean_hitting_time(p, nu, 0, {2});
    CHECK(r.value == Approx(3.0).epsilon(1e-13));
    CHECK(r.via_potential == Approx(3.0).epsilon(1e-13));
    CHECK_ERRC(mean_hitting_time(p, nu, 2, {2}), StateInTargetSet);

    std::mt19937_64 rng(43);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 3 + rep % 25;
        auto c = random_reversible_chain(rng, n);
        auto m = stationary_measure(c);
        auto s = random_subset(rng, n, 2);
        auto h = mean_hitting_time(c, m, s[0], {s[1]});
        CHECK(h.deviation <= 1e-9);
        CHECK(oracle::hitting_time(c, {s[1]})[s[0]] == Approx(h.value).epsilon(1e-9));
    }
    auto cyc = build_chain({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "c", 1.0}, {"c", "a", 1.0}});
    auto nr = mean_hitting_time(cyc, stationary_measure(cyc), 0, {2});
    CHECK(nr.value == Approx(2.0));
    CHECK(std::isnan(nr.via_potential));
}

TEST_CASE("trace capacity identities", "[potential][trace]") {
    std::mt19937_64 rng(47);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 6 + rep % 20;
        auto c = random_reversible_chain(rng, n);
        auto nu = stationary_measure(c);
        auto F = random_subset(rng, n, 3 + rep % 3);
        StateSet G1{F[0]}, G2(F.begin() + 1, F.begin() + 3);
        auto r = trace_capacity_identity(c, nu, F, G1, G2);
        CHECK(r.a_hitting <= 1e-9);
        CHECK(r.b_flux <= 1e-9);
        CHECK(r.d_trace_capacity <= 1e-9);
        CHECK(r.e_potential_route <= 1e-8);
        CHECK(r.aggregated_balance <= 1e-9);
        auto exact = trace_capacity_identity(c, nu, set_union(G1, G2), G1, G2);
        REQUIRE(exact.c_capacity);
        CHECK(*exact.c_capacity <= 1e-9);
    }
}

TEST_CASE("forward Kolmogorov integration", "[potential][kolmogorov]") {
    auto c = testing::two_state();
    for (double t : {0.0, 0.1, 1.0, 3.0}) {
        auto u = integrate_forward(c, {1.0, 0.0}, {}, t);
        CHECK(u[0] == Approx(2.0 / 3.0 + std::exp(-3.0 * t) / 3.0).epsilon(1e-8));
    }
    auto occ = integrate_forward(c, {0.0, 0.0}, std::vector<double>{0.0, 1.0}, 2.0);
    const double exact = 2.0 / 3.0 + 2.0 * (1.0 - std::exp(-6.0)) / 9.0;
    CHECK(occ[1] == Approx(exact).epsilon(1e-8));
    CHECK_ERRC(integrate_forward(c, {1.0, 0.0}, {}, -1.0), InvalidHorizon);
}

TEST_CASE("occupation identity and its hitting-time bound", "[potential][kolmogorov]") {
    std::mt19937_64 rng(53);
    for (int rep = 0; rep < 12; ++rep) {
        const std::size_t n = 4 + rep % 12;
        auto c = random_reversible_chain(rng, n);
        auto nu = stationary_measure(c);
        auto s = random_subset(rng, n, 4);
        std::vector<double> V(n, 0.0);
        V[s[0]] = 1.0 / nu[s[0]];
        V[s[1]] = -1.0 / nu[s[1]];
        OccupationOptions opt;
        opt.center = false;
        opt.support = StateSet{std::min(s[0], s[1]), std::max(s[0], s[1])};
        for (double t : {0.5, 5.0}) {
            auto r = occupation_identity_check(c, nu, V, s[2], s[3], t, opt);
            CHECK(r.deviation <= 1e-6 * std::max(1.0, std::abs(r.h_xi)));
            REQUIRE(r.bound_slack);
            CHECK(*r.bound_slack >= 0.0);
        }
        auto centred = occupation_identity_check(c, nu, testing::random_vector(rng, n), s[2], s[3], 1.0);
        CHECK(centred.deviation <= 1e-6 * std::max(1.0, std::abs(centred.h_xi)));
    }
    auto p = testing::path3();
    CHECK_ERRC(occupation_identity_check(p, stationary_measure(p), {1.0, 0.0, 0.0}, 0, 2, 1.0, {false, {}}),
               NotMeanZero);
}
