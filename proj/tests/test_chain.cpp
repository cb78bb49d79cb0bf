#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "metastab/chain.hpp"
#include "metastab/chain_io.hpp"
#include "metastab/random_chains.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace metastab;
using Catch::Approx;

TEST_CASE("build_chain validates its input", "[chain]") {
    CHECK_ERRC(build_chain({"a", "a"}, {}), DuplicateLabel);
    CHECK_ERRC(build_chain({"a"}, {}), TooSmall);
    CHECK_ERRC(build_chain({"a", "b"}, {{"a", "b", 1.0}, {"b", "a", 0.0}}), NonPositiveRate);
    CHECK_ERRC(build_chain({"a", "b"}, {{"a", "b", 1.0}, {"b", "a", -1.0}}), NonPositiveRate);
    CHECK_ERRC(build_chain({"a", "b"}, {{"a", "a", 1.0}, {"b", "a", 1.0}}), InvalidTransition);
    CHECK_ERRC(build_chain({"a", "b"}, {{"a", "c", 1.0}}), StateNotFound);
    CHECK_ERRC(build_chain({"a", "b"}, {{"a", "b", 1.0}, {"a", "b", 2.0}, {"b", "a", 1.0}}), InvalidTransition);
}

TEST_CASE("one-way edges are not irreducible", "[chain]") {
    auto err = testing::errc_of([] { build_chain({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "c", 1.0}}); });
    CHECK(err == Errc::NotIrreducible);
    try {
        build_chain({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "a", 1.0}});
        FAIL("expected NotIrreducible");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("{c}") != std::string::npos);
    }
}

TEST_CASE("speedup scales every effective rate", "[chain]") {
    auto c = testing::two_state();
    auto s = c.with_speedup(10.0);
    CHECK(s.rate(0, 1) == 10.0);
    CHECK(s.raw_rate(0, 1) == 1.0);
    CHECK(s.exit_rate(1) == 20.0);
    CHECK(s.max_rate() == 20.0);
    CHECK(c.rate(1, 0) == 2.0);
    CHECK(c.raw_rate(0, 0) == 0.0);
    CHECK_ERRC(c.with_speedup(0.0), NonPositiveRate);
}

TEST_CASE("stationary measure on small chains", "[chain]") {
    SECTION("two states") {
        auto nu = stationary_measure(testing::two_state());
        CHECK(nu[0] == Approx(2.0 / 3.0).epsilon(1e-14));
        CHECK(nu[1] == Approx(1.0 / 3.0).epsilon(1e-14));
    }
    SECTION("uniform ring") {
        std::vector<RateEntry> e;
        for (int i = 0; i < 5; ++i) {
            e.push_back({std::to_string(i), std::to_string((i + 1) % 5), 1.0});
            e.push_back({std::to_string(i), std::to_string((i + 4) % 5), 1.0});
        }
        auto nu = stationary_measure(build_chain({"0", "1", "2", "3", "4"}, e));
        for (std::size_t i = 0; i < 5; ++i) CHECK(nu[i] == Approx(0.2).epsilon(1e-14));
    }
    SECTION("non-reversible directed cycle is uniform") {
        auto c = build_chain({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "c", 1.0}, {"c", "a", 1.0}});
        auto nu = stationary_measure(c);
        for (std::size_t i = 0; i < 3; ++i) CHECK(nu[i] == Approx(1.0 / 3.0).epsilon(1e-14));
        CHECK_FALSE(check_detailed_balance(c, nu).reversible);
    }
}

TEST_CASE("stationary measure matches dense elimination and ignores speedup", "[chain][oracle]") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 3 + rep % 20;
        auto c = rep % 2 ? random_reversible_chain(rng, n) : random_chain(rng, n);
        auto nu = stationary_measure(c);
        auto ref = oracle::stationary(c);
        for (std::size_t i = 0; i < n; ++i) CHECK(nu[i] == Approx(ref[i]).epsilon(1e-9));
        CHECK(stationary_residual(c, nu) <= 1e-10);
        auto fast = stationary_measure(c.with_speedup(1e6));
        for (std::size_t i = 0; i < n; ++i) CHECK(fast[i] == nu[i]);
    }
}

TEST_CASE("probability measures", "[chain]") {
    CHECK_ERRC(ProbabilityMeasure({0.5, 0.4}), DimensionMismatch);
    CHECK_ERRC(ProbabilityMeasure({1.5, -0.5}), DimensionMismatch);
    auto m = ProbabilityMeasure::normalized({1e300, 1e300, 2e300});
    CHECK(m[2] == Approx(0.5));
    auto cond = m.conditioned({0, 2});
    CHECK(cond[0] == Approx(1.0 / 3.0));
    CHECK(m.mass({0, 1}) == Approx(0.5));
}

TEST_CASE("detailed balance checker", "[chain]") {
    std::mt19937_64 rng(3);
    auto c = random_reversible_chain(rng, 12);
    auto nu = stationary_measure(c);
    auto report = check_detailed_balance(c, nu);
    CHECK(report.reversible);
    CHECK(report.worst_violation < 1e-12);
    CHECK_ERRC(check_detailed_balance(c, ProbabilityMeasure({0.5, 0.5})), DimensionMismatch);

    auto cyc = build_chain({"a", "b", "c"},
                           {{"a", "b", 2.0}, {"b", "c", 2.0}, {"c", "a", 2.0}, {"b", "a", 1.0}, {"c", "b", 1.0},
                            {"a", "c", 1.0}});
    auto r = check_detailed_balance(cyc, stationary_measure(cyc));
    CHECK_FALSE(r.reversible);
    CHECK(r.worst_violation > 0.1);
}

TEST_CASE("generator action", "[chain]") {
    auto c = testing::two_state();
    auto lf = apply_generator(c, std::vector<double>{1.0, 0.0});
    CHECK(lf[0] == -1.0);
    CHECK(lf[1] == 2.0);
    std::mt19937_64 rng(5);
    auto r = random_chain(rng, 15);
    auto zero = apply_generator(r, std::vector<double>(15, 3.25));
    for (double x : zero) CHECK(std::abs(x) <= 1e-12 * r.max_rate());
    CHECK_ERRC(apply_generator(c, std::vector<double>{1.0}), DimensionMismatch);
}

TEST_CASE("Dirichlet form hand values", "[chain]") {
    auto p = testing::path3();
    auto nu = stationary_measure(p);
    std::vector<double> f{1.0, 0.5, 0.0};
    CHECK(dirichlet_form(p, nu, f) == Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(dirichlet_form(p, nu, std::vector<double>(3, 7.0)) == 0.0);
    auto c = testing::two_state();
    CHECK(dirichlet_form(c, stationary_measure(c), std::vector<double>{1.0, 0.0}) == Approx(2.0 / 3.0));
    auto cyc = build_chain({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "c", 1.0}, {"c", "a", 1.0}});
    CHECK_ERRC(dirichlet_form(cyc, stationary_measure(cyc), f), NotReversible);
}

TEST_CASE("Dirichlet form: two expressions agree, scale and shift", "[chain][property]") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 2 + rep % 25;
        auto c = random_reversible_chain(rng, n);
        auto nu = stationary_measure(c);
        auto f = testing::random_vector(rng, n);
        const double d = dirichlet_form(c, nu, f);
        CHECK(d >= 0.0);
        CHECK(dirichlet_form_inner(c, nu, f) == Approx(d).epsilon(1e-10));
        std::vector<double> g = f;
        for (double& x : g) x = 2.0 * x + 5.0;
        CHECK(dirichlet_form(c, nu, g) == Approx(4.0 * d).epsilon(1e-10));
        CHECK(dirichlet_form(c.with_speedup(3.0), nu, f) == Approx(3.0 * d).epsilon(1e-12));
    }
}

TEST_CASE("chain JSON round trip", "[chain][io]") {
    std::mt19937_64 rng(23);
    auto c = random_chain(rng, 9).with_speedup(4.0);
    auto back = chain_from_json(chain_to_json(c));
    REQUIRE(back.size() == c.size());
    CHECK(back.speedup() == 4.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(back.label(i) == c.label(i));
        for (std::size_t j = 0; j < c.size(); ++j) CHECK(back.raw_rate(i, j) == c.raw_rate(i, j));
    }
    CHECK_ERRC(chain_from_json(nlohmann::json::parse(R"({"states": ["a"]})")), ParseError);
    CHECK_ERRC(chain_from_json(nlohmann::json::parse(R"({"states": ["a","b"], "rates": [["a","b"]]})")), ParseError);
    auto numeric = chain_from_json(nlohmann::json::parse(R"({"states": [1,2], "rates": [[1,2,1.5],[2,1,0.5]]})"));
    CHECK(numeric.space().index("2") == 1);
}
