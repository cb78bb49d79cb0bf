#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "metastab/potential.hpp"
#include "metastab/random_chains.hpp"
#include "metastab/trace.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace metastab;
using Catch::Approx;

namespace {

// Schur complement L_FF - L_FD L_DD^{-1} L_DF on the dense generator.
oracle::Matrix schur_trace(const Chain& chain, const StateSet& F) {
    const auto L = oracle::generator(chain);
    const StateSet D = complement(chain.size(), F);
    oracle::Matrix out(F.size(), std::vector<double>(F.size()));
    oracle::Matrix LDD(D.size(), std::vector<double>(D.size()));
    for (std::size_t a = 0; a < D.size(); ++a)
        for (std::size_t b = 0; b < D.size(); ++b) LDD[a][b] = L[D[a]][D[b]];
    for (std::size_t q = 0; q < F.size(); ++q) {
        std::vector<double> col(D.size());
        for (std::size_t a = 0; a < D.size(); ++a) col[a] = L[D[a]][F[q]];
        const auto x = D.empty() ? std::vector<double>{} : oracle::gauss_solve(LDD, col);
        for (std::size_t p = 0; p < F.size(); ++p) {
            double acc = L[F[p]][F[q]];
            for (std::size_t a = 0; a < D.size(); ++a) acc -= L[F[p]][D[a]] * x[a];
            out[p][q] = acc;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("eliminating the middle of a path", "[trace]") {
    auto tr = trace_chain(testing::path3(), {0, 2});
    REQUIRE(tr.chain.size() == 2);
    CHECK(tr.chain.rate(0, 1) == Approx(0.5).epsilon(1e-15));
    CHECK(tr.chain.rate(1, 0) == Approx(0.5).epsilon(1e-15));
    CHECK(tr.chain.label(1) == "3");
    CHECK(tr.elimination_order == std::vector<StateIndex>{1});
    CHECK(tr.fill_in.size() == 1);
    REQUIRE(tr.conditioned);
    CHECK((*tr.conditioned)[0] == Approx(0.5));
    CHECK(tr.stationary_residual < 1e-14);
}

TEST_CASE("trace argument validation", "[trace]") {
    auto p = testing::path3();
    CHECK_ERRC(trace_chain(p, {}), EmptySubset);
    CHECK_ERRC(trace_chain(p, {1}), TooSmall);
    CHECK_ERRC(trace_chain(p, {0, 7}), StateNotFound);
    auto same = trace_chain(p, {0, 1, 2});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(same.chain.raw_rate(i, j) == p.raw_rate(i, j));
    CHECK(same.elimination_order.empty());
}

TEST_CASE("trace rates equal the dense Schur complement", "[trace][oracle]") {
    std::mt19937_64 rng(101);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 4 + rep % 18;
        auto c = rep % 3 == 0 ? random_chain(rng, n) : random_reversible_chain(rng, n);
        auto F = random_subset(rng, n, 2 + rep % (n - 2));
        auto tr = trace_chain(c, F);
        auto ref = schur_trace(c, F);
        for (std::size_t p = 0; p < F.size(); ++p) {
            for (std::size_t q = 0; q < F.size(); ++q) {
                if (p == q) continue;
                CHECK(tr.chain.rate(p, q) == Approx(ref[p][q]).epsilon(1e-9).margin(1e-12));
            }
        }
        CHECK(tr.stationary_residual <= 1e-10);
    }
}

TEST_CASE("elimination order does not change the trace", "[trace][property]") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 5 + rep % 6;
        auto c = random_reversible_chain(rng, n, 0.4);
        auto F = random_subset(rng, n, 2 + rep % 3);
        auto base = trace_chain(c, F);
        TraceOptions opt;
        std::vector<StateIndex> order = complement(n, F);
        std::shuffle(order.begin(), order.end(), rng);
        opt.order = order;
        auto other = trace_chain(c, F, opt);
        for (std::size_t p = 0; p < F.size(); ++p)
            for (std::size_t q = 0; q < F.size(); ++q)
                CHECK(other.chain.raw_rate(p, q) == Approx(base.chain.raw_rate(p, q)).epsilon(1e-10).margin(1e-14));
    }
}

TEST_CASE("tracing in stages equals tracing at once", "[trace][property]") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 15; ++rep) {
        const std::size_t n = 8 + rep;
        auto c = random_chain(rng, n);
        auto F = random_subset(rng, n, 5);
        auto G = StateSet{F[0], F[2], F[4]};
        auto direct = trace_chain(c, G);
        auto first = trace_chain(c, F);
        auto staged = trace_chain(first.chain, first.to_trace(G));
        for (std::size_t p = 0; p < 3; ++p)
            for (std::size_t q = 0; q < 3; ++q)
                CHECK(staged.chain.raw_rate(p, q) == Approx(direct.chain.raw_rate(p, q)).epsilon(1e-10).margin(1e-14));
    }
}

TEST_CASE("reduce_one_state and speedup", "[trace]") {
    std::mt19937_64 rng(9);
    auto c = random_chain(rng, 6).with_speedup(7.0);
    auto one = reduce_one_state(c, 2);
    auto tr = trace_chain(c, {0, 1, 3, 4, 5});
    CHECK(one.speedup() == 7.0);
    for (std::size_t p = 0; p < 5; ++p)
        for (std::size_t q = 0; q < 5; ++q) CHECK(one.rate(p, q) == tr.chain.rate(p, q));
    CHECK_ERRC(reduce_one_state(testing::two_state(), 0), TooSmall);
}

TEST_CASE("first-step analysis reproduces trace holding rates and jump laws", "[trace][oracle]") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 4 + rep % 15;
        auto c = random_chain(rng, n);
        auto F = random_subset(rng, n, 2 + rep % (n - 2));
        for (StateIndex eta : F) {
            auto r = verify_g02(c, F, eta);
            CHECK(r.max_deviation <= 1e-9);
            CHECK(r.lambda_trace == Approx(r.lambda_first_step).epsilon(1e-9));
        }
    }
    CHECK_ERRC(verify_g02(testing::path3(), {0, 2}, 1), StartOutsideSubset);
}

TEST_CASE("trace hitting probabilities are the restriction of the full ones", "[trace][property]") {
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 6 + rep % 20;
        auto c = random_reversible_chain(rng, n);
        auto F = random_subset(rng, n, 4 + rep % (n - 4));
        StateSet G1{F[0]}, G2{F[1], F[2]};
        auto tr = trace_chain(c, F);
        auto full = equilibrium_potential(c, G1, G2);
        auto traced = equilibrium_potential(tr.chain, tr.to_trace(G1), tr.to_trace(G2));
        for (std::size_t k = 0; k < F.size(); ++k) CHECK(traced.values[k] == Approx(full.values[F[k]]).margin(1e-10));
    }
}

TEST_CASE("trajectory trace excises time outside F", "[trace][trajectory]") {
    Trajectory traj{0, {{1.0, 1}, {1.5, 2}, {3.0, 0}}, 4.0};
    double excised = -1.0;
    auto t = trace_trajectory(traj, {0, 2}, &excised);
    CHECK(excised == Approx(0.5));
    CHECK(t.horizon == Approx(3.5));
    REQUIRE(t.events.size() == 2);
    CHECK(t.events[0].state == 2);
    CHECK(t.events[0].time == Approx(1.0));
    CHECK(t.events[1].state == 0);
    CHECK(t.events[1].time == Approx(2.5));
    CHECK(traj.occupation(make_mask(3, {1})) == Approx(0.5));
    CHECK(traj.state_at(1.2) == 1);
    CHECK_ERRC(trace_trajectory(traj, {1, 2}), StartOutsideSubset);
}
