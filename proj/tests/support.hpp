#pragma once

#include <optional>
#include <random>
#include <vector>

#include "metastab/chain.hpp"
#include "metastab/error.hpp"

namespace testing {

/// Error code thrown by `fn`, or nothing if it returned normally.
template <class Fn>
std::optional<metastab::Errc> errc_of(Fn&& fn) {
    try {
        fn();
    } catch (const metastab::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

inline metastab::Chain two_state() {
    return metastab::build_chain({"a", "b"}, {{"a", "b", 1.0}, {"b", "a", 2.0}});
}

/// Path 1 - 2 - 3 with unit rates.
inline metastab::Chain path3() {
    return metastab::build_chain({"1", "2", "3"},
                                 {{"1", "2", 1.0}, {"2", "1", 1.0}, {"2", "3", 1.0}, {"3", "2", 1.0}});
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

}  // namespace testing

#define CHECK_ERRC(expr, code) CHECK(::testing::errc_of([&] { (void)(expr); }) == ::metastab::Errc::code)
