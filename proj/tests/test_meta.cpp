#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "metastab/meta.hpp"
#include "metastab/random_chains.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace metastab;
using Catch::Approx;

namespace {

Chain unit_path(std::size_t n) {
    std::vector<std::string> labels;
    std::vector<RateEntry> e;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        e.push_back({labels[i], labels[i + 1], 1.0});
        e.push_back({labels[i + 1], labels[i], 1.0});
    }
    return build_chain(labels, e);
}

}  // namespace

TEST_CASE("well partitions", "[meta]") {
    auto p = WellPartition::from_wells(6, {{0, 1}, {4}});
    CHECK(p.kappa() == 2);
    CHECK(p.delta == StateSet{2, 3, 5});
    CHECK(p.psi == std::vector<int>{0, 0, -1, -1, 1, -1});
    CHECK(p.well_union() == StateSet{0, 1, 4});
    CHECK(p.others(0) == StateSet{4});
    CHECK_ERRC(WellPartition::from_wells(6, {{0, 1}}), PartitionInvalid);
    CHECK_ERRC(WellPartition::from_wells(6, {{0, 1}, {1, 2}}), PartitionInvalid);
    CHECK_ERRC(WellPartition::from_wells(6, {{0}, {}}), PartitionInvalid);
    CHECK_ERRC(WellPartition::from_wells(6, {{0}, {9}}), PartitionInvalid);
    CHECK_ERRC(p.require_matches(unit_path(5)), PartitionInvalid);
}

TEST_CASE("inter-well rates on a uniform path", "[meta]") {
    auto c = unit_path(5);
    auto nu = stationary_measure(c);
    auto p = WellPartition::from_wells(5, {{0}, {4}});
    auto r = inter_well_rates(c, nu, p);
    CHECK(r.r(0, 1) == Approx(0.25).epsilon(1e-13));
    CHECK(r.r(1, 0) == Approx(0.25).epsilon(1e-13));
    CHECK(r.r(0, 0) == 0.0);
    CHECK(r.delta_mass == Approx(0.6));
    CHECK(r.mass[0] == Approx(0.2));
}

TEST_CASE("two-well rates equal capacity over well mass", "[meta][oracle]") {
    std::mt19937_64 rng(61);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 6 + rep % 25;
        auto c = random_reversible_chain(rng, n);
        auto nu = stationary_measure(c);
        auto s = random_subset(rng, n, 4);
        StateSet A{s[0], s[1]}, B{s[2], s[3]};
        auto p = WellPartition::from_wells(n, {A, B});
        auto r = inter_well_rates(c, nu, p);
        const double cap = oracle::capacity(c, nu.weights(), A, B);
        CHECK(r.r(0, 1) == Approx(cap / nu.mass(A)).epsilon(1e-8));
        CHECK(r.r(1, 0) == Approx(cap / nu.mass(B)).epsilon(1e-8));
    }
}

TEST_CASE("aggregated rates satisfy detailed balance", "[meta][property]") {
    std::mt19937_64 rng(67);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 9 + rep % 20;
        auto c = random_reversible_chain(rng, n);
        auto nu = stationary_measure(c);
        auto s = random_subset(rng, n, 6);
        auto p = WellPartition::from_wells(n, {{s[0], s[1]}, {s[2]}, {s[3], s[4], s[5]}});
        auto rep_ = analyze(c, nu, p);
        CHECK(rep_.aggregated_balance <= 1e-9);
        CHECK(rep_.c2.rows() == 3);
        CHECK(rep_.c3.size() == 3);
        for (double v : rep_.c3) CHECK((std::isfinite(v) && v >= 0.0));
        for (std::size_t x = 0; x < 3; ++x) CHECK(p.psi[rep_.geometry.anchors[x]] == static_cast<int>(x));
    }
}

TEST_CASE("geometry of a path with two wells", "[meta]") {
    auto c = unit_path(7);
    auto nu = stationary_measure(c);
    auto p = WellPartition::from_wells(7, {{0, 1}, {5, 6}});
    auto g = make_geometry(c, nu, p);
    CHECK(g.boundary[0] == StateSet{2});
    CHECK(g.boundary[1] == StateSet{4});
    CHECK(g.gates[0] == StateIndex{2});
    CHECK(g.closure[0] == StateSet{0, 1, 2});
    CHECK(g.crossing[0][1] == StateSet{1});
    GeometryOverrides bad;
    bad.gates = {StateIndex{3}, std::nullopt};
    CHECK_ERRC(make_geometry(c, nu, p, bad), PartitionInvalid);
    GeometryOverrides anchor_out;
    anchor_out.anchors = {StateIndex{6}, std::nullopt};
    CHECK_ERRC(make_geometry(c, nu, p, anchor_out), PartitionInvalid);

    auto h = check_H2_H3(c, nu, p, g);
    CHECK(h.nu_delta == Approx(3.0 / 7.0));
    const double gate_cap = capacity(c, nu, {2}, {5, 6}).value;
    CHECK(h.h2[0] == Approx(h.nu_delta / gate_cap).epsilon(1e-12));
}

TEST_CASE("Cauchy diagnostic on synthetic families", "[meta]") {
    CHECK_ERRC(check_C1({1, 2}, [](int) { return Eigen::MatrixXd::Zero(2, 2); }), GridTooSmall);
    auto conv = check_C1({10, 20, 40, 80}, [](int N) {
        Eigen::MatrixXd m(2, 2);
        m << 0.0, 2.0 + 1.0 / N, 3.0 - 1.0 / N, 0.0;
        return m;
    });
    CHECK(conv.plausibly_convergent(0, 1));
    CHECK_FALSE(conv.vanishing(0, 1));
    CHECK(conv.last(0, 1) == Approx(2.0 + 1.0 / 80));
    auto vanish = check_C1({10, 20, 40, 80}, [](int N) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
        m(0, 1) = 100.0 / (N * N);
        m(1, 0) = 1.0;
        return m;
    });
    CHECK(vanish.vanishing(0, 1));
    CHECK_FALSE(vanish.vanishing(1, 0));
    CHECK(vanish.plausibly_convergent(1, 0));
}

TEST_CASE("limit chain", "[meta]") {
    Eigen::MatrixXd r(3, 3);
    r << 0, 1, 2, 3, 0, 0, 0.5, 0.5, 0;
    auto lc = limit_chain(r);
    auto L = lc.generator();
    for (Eigen::Index x = 0; x < 3; ++x) CHECK(std::abs(L.row(x).sum()) < 1e-15);
    CHECK(L(0, 0) == -3.0);
    Eigen::VectorXd f(3);
    f << 1, 0, 0;
    CHECK(lc.apply(f)(1) == 3.0);
    auto c = lc.to_chain();
    CHECK(c.rate(2, 1) == 0.5);
    r(1, 2) = -1.0;
    CHECK_ERRC(limit_chain(r), NegativeRate);
}
