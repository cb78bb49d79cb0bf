#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "metastab/meta.hpp"
#include "metastab/models/birth_death.hpp"
#include "metastab/models/two_site.hpp"
#include "metastab/models/zero_range.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace metastab;
using Catch::Approx;

namespace {

// Unnormalized weights 1/prod n^alpha over all configurations, keyed by label.
std::map<std::string, double> zr_weights(int kappa, double alpha, int N) {
    std::map<std::string, double> out;
    std::vector<int> eta(kappa, 0);
    std::function<void(int, int)> rec = [&](int site, int left) {
        if (site == kappa - 1) {
            eta[site] = left;
            double w = 1.0;
            std::string s = "(";
            for (int x = 0; x < kappa; ++x) {
                if (eta[x] > 0) w /= std::pow(eta[x], alpha);
                s += (x ? "," : "") + std::to_string(eta[x]);
            }
            out[s + ")"] = w;
            return;
        }
        for (int k = 0; k <= left; ++k) {
            eta[site] = k;
            rec(site + 1, left - k);
        }
    };
    rec(0, N);
    return out;
}

}  // namespace

TEST_CASE("zero-range rates and counting", "[models][zr]") {
    CHECK(zr::jump_rate(0, 2.0) == 0.0);
    CHECK(zr::jump_rate(1, 2.0) == 1.0);
    CHECK(zr::jump_rate(2, 2.0) == 4.0);
    CHECK(zr::jump_rate(4, 3.0) == Approx(64.0 / 27.0));
    CHECK(zr::composition_count(10, 2) == 11);
    CHECK(zr::composition_count(6, 3) == 28);
    CHECK(zr::composition_count(4, 4) == 35);
    auto comps = zr::compositions(2, 2);
    REQUIRE(comps.size() == 3);
    CHECK(comps[0] == std::vector<int>{2, 0});
    CHECK(comps[2] == std::vector<int>{0, 2});
    CHECK(zr::label({3, 0, 1}) == "(3,0,1)");
}

TEST_CASE("zero-range chain with two particles", "[models][zr]") {
    auto sys = zr::zr_chain(2, 2.0, 2);
    REQUIRE(sys.chain.size() == 3);
    CHECK(sys.chain.label(1) == "(1,1)");
    CHECK(sys.chain.rate(0, 1) == 4.0);
    CHECK(sys.chain.rate(1, 0) == 1.0);
    CHECK(sys.chain.rate(1, 2) == 1.0);
    CHECK(sys.Z == Approx(6.0));
    CHECK(sys.nu[0] == Approx(1.0 / 6.0));
    CHECK(sys.nu[1] == Approx(2.0 / 3.0));
    CHECK(check_detailed_balance(sys.chain, sys.nu).reversible);
}

TEST_CASE("zero-range measure and rates match direct enumeration", "[models][zr][oracle]") {
    for (auto [kappa, N, alpha] : {std::tuple{2, 15, 2.0}, std::tuple{3, 8, 3.0}, std::tuple{4, 5, 2.5}}) {
        auto sys = zr::zr_chain(kappa, alpha, N);
        auto w = zr_weights(kappa, alpha, N);
        REQUIRE(w.size() == sys.chain.size());
        double total = 0.0;
        for (auto& [k, v] : w) total += v;
        for (auto& [k, v] : w) CHECK(sys.nu[sys.chain.space().index(k)] == Approx(v / total).epsilon(1e-12));
        CHECK(stationary_residual(sys.chain, sys.nu) < 1e-10);
        for (std::size_t i = 0; i < sys.configs.size(); ++i) {
            const auto& eta = sys.configs[i];
            for (int x = 0; x < kappa; ++x) {
                for (int y = 0; y < kappa; ++y) {
                    if (x == y || eta[x] == 0) continue;
                    auto next = eta;
                    --next[x];
                    ++next[y];
                    const double g = eta[x] == 1 ? 1.0 : std::pow(eta[x] / (eta[x] - 1.0), alpha);
                    CHECK(sys.chain.rate(i, sys.index_of(next)) == Approx(g));
                }
            }
        }
    }
    CHECK_ERRC(zr::zr_chain(8, 2.0, 40), StateSpaceTooLarge);
}

TEST_CASE("zero-range model geometry", "[models][zr]") {
    CHECK(zr::default_beta(2, 2.0) == 0.2);
    CHECK(zr::default_beta(3, 3.0) == Approx(4.0 / 26.0));
    zr::Spec s{2, 3.0, 20, std::nullopt, std::nullopt};
    CHECK(zr::resolve_ell(s) == 2);
    auto m = zr::zr_build(s);
    CHECK(m.ell == 2);
    CHECK(m.partition.wells[0].size() == 3);
    for (StateIndex i : m.partition.wells[1]) CHECK(m.system.configs[i][1] >= 18);
    CHECK(m.chain().label(*m.overrides.anchors[0]) == "(20,0)");
    CHECK(m.chain().label(*m.overrides.gates[0]) == "(17,3)");
    CHECK(m.chain().label(*m.overrides.gates[1]) == "(3,17)");
    CHECK(contains(m.partition.delta, *m.overrides.gates[0]));
    auto g = make_geometry(m.chain(), m.nu(), m.partition, m.overrides);
    CHECK(g.boundary[0] == StateSet{*m.overrides.gates[0]});

    CHECK_ERRC(zr::zr_build({2, 3.0, 5, 2, std::nullopt}), SpecInvalid);
    CHECK_ERRC(zr::zr_build({2, 1.0, 20, std::nullopt, std::nullopt}), SpecInvalid);
    CHECK_ERRC(zr::zr_build({1, 2.0, 20, std::nullopt, std::nullopt}), SpecInvalid);
    CHECK_ERRC(zr::zr_build({2, 2.0, 20, std::nullopt, 1.5}), SpecInvalid);
}

TEST_CASE("zero-range time scale and inter-well rates", "[models][zr]") {
    for (int kappa : {2, 3}) {
        zr::Spec s{kappa, 2.0, kappa == 2 ? 30 : 12, std::nullopt, std::nullopt};
        auto m = zr::zr_build(s);
        auto th = zr::zr_theta(m);
        CHECK(th.spread <= 1e-10);
        CHECK(th.theta * th.capacities[0] == Approx(1.0));
        auto r = inter_well_rates(th.sped, m.nu(), m.partition);
        double row = 0.0;
        for (int y = 1; y < kappa; ++y) row += r.r(0, y);
        CHECK(row == Approx(1.0 / r.mass[0]).epsilon(1e-9));
        for (int y = 1; y < kappa; ++y) CHECK(r.r(0, y) == Approx(r.r(0, 1)).epsilon(1e-9));
    }
}

TEST_CASE("birth-death grid, measure and rates", "[models][bd]") {
    auto s = bd::double_well(2.0, 10);
    auto grid = bd::build_grid(s);
    REQUIRE(grid.size() == 11);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 1.0);
    CHECK(grid[3] == Approx(0.3));
    auto m = bd::bd_build(s);
    CHECK(m.ell == 2);
    CHECK(m.nu[0] / m.nu[5] == Approx(100.0 / 16.0));
    CHECK(m.chain.rate(1, 0) == Approx(1000.0));
    CHECK(m.chain.rate(0, 1) == Approx(10.0 / 0.0081));
    CHECK(m.partition.wells[0] == StateSet{0, 1, 2});
    CHECK(m.partition.wells[1] == StateSet{8, 9, 10});
    CHECK(stationary_residual(m.chain, m.nu) < 1e-10);
    CHECK(check_detailed_balance(m.chain, m.nu).reversible);
    CHECK(bd::point_label(0.3) == "0.3");

    bd::Spec inner;
    inner.zeros = {0.25, 0.75};
    inner.exponents = {2.0, 2.0};
    inner.N = 20;
    auto g = bd::build_grid(inner);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 1.0);
    CHECK(std::count(g.begin(), g.end(), 0.25) == 1);
}

TEST_CASE("birth-death validation", "[models][bd]") {
    auto s = bd::double_well(2.0, 4);
    CHECK_ERRC(bd::bd_build(s), OverlappingNeighborhoods);
    auto flat = bd::double_well(1.0, 50);
    CHECK_ERRC(bd::bd_build(flat), SpecInvalid);
    auto one = bd::double_well(2.0, 50);
    one.exponents = {2.0, 1.5};
    CHECK_ERRC(bd::bd_build(one), SpecInvalid);
    auto vanish = bd::double_well(2.0, 50);
    vanish.H = [](double x) { return std::pow(x * (1 - x) * (x - 0.5), 2.0); };
    CHECK_ERRC(bd::bd_build(vanish), HVanishesOffZeros);
    auto neg = bd::double_well(2.0, 50);
    neg.lambda = [](double x) { return x - 0.5; };
    CHECK_ERRC(bd::bd_build(neg), SpecInvalid);
    CHECK_ERRC(bd::bd_build(bd::double_well(2.0, 5000)), StateSpaceTooLarge);
}

TEST_CASE("quadrature and limit constants", "[models][bd][oracle]") {
    CHECK(bd::integrate([](double u) { return u * u * (1 - u) * (1 - u); }, 0.0, 1.0) == Approx(1.0 / 30.0).epsilon(1e-12));
    CHECK(bd::integrate([](double u) { return std::sin(u); }, 0.0, std::numbers::pi) == Approx(2.0).epsilon(1e-10));
    auto s = bd::double_well(2.0, 100);
    CHECK(bd::sigma(s, 0.0) == 1);
    CHECK(bd::sigma(s, 0.5) == 2);
    CHECK(bd::m_factor(s, 0.0) == Approx(1.0 + oracle::zeta(2.0)).epsilon(1e-12));
    CHECK(oracle::zeta(2.0) == Approx(std::numbers::pi * std::numbers::pi / 6.0).epsilon(1e-13));
    CHECK(oracle::zeta_truncated(3.0, 1e-10) == Approx(oracle::zeta(3.0)).epsilon(1e-9));
    auto r = bd::bd_limit_rates(s);
    CHECK(r(0, 1) == Approx(30.0 / (1.0 + std::numbers::pi * std::numbers::pi / 6.0)).epsilon(1e-9));
    CHECK(r(1, 0) == Approx(r(0, 1)).epsilon(1e-12));
    auto inner = bd::double_well(3.0, 100);
    inner.zeros = {0.0, 0.5};
    CHECK(bd::m_factor(inner, 0.5) == Approx(1.0 + 2.0 * oracle::zeta(3.0)).epsilon(1e-12));
}

TEST_CASE("birth-death capacity closed form", "[models][bd]") {
    auto m = bd::bd_build(bd::double_well(2.0, 60));
    const auto& p = m.partition;
    auto cf = bd_capacity_closed_form(m.chain, m.nu, p.wells[0].back(), p.wells[1].front());
    auto cap = capacity(m.chain, m.nu, p.wells[0], p.wells[1]);
    CHECK(cf.value == Approx(cap.value).epsilon(1e-10));
}

TEST_CASE("two-site zero-range process maps onto the birth-death chain", "[models][two-site]") {
    CHECK(two_site_lambda(0.1, 10, 2.0) == 1.0);
    CHECK(two_site_lambda(0.5, 10, 2.0) == Approx(std::pow(0.5 / 0.4, 2.0)));
    for (int N : {6, 12, 20}) {
        auto rep = zr_two_site_map({2, 2.0, N, std::nullopt, std::nullopt});
        CHECK(rep.max_deviation <= 1e-12);
        CHECK(rep.transitions_compared == static_cast<std::size_t>(2 * N));
        CHECK(rep.bijection.front() == static_cast<StateIndex>(N));
    }
    CHECK_ERRC(zr_two_site_map({3, 2.0, 6, std::nullopt, std::nullopt}), KappaNotTwo);
}
