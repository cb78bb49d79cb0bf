#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "metastab/chain.hpp"

namespace metastab {

namespace detail {
inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}
inline std::vector<std::string> numbered_labels(std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("s" + std::to_string(i));
    return labels;
}
}  // namespace detail

/// Reversible chain: random spanning tree plus extra edges, weights nu(i) and
/// symmetric conductances c(i,j) drawn log-uniformly, R(i,j) = c(i,j)/nu(i).
inline Chain random_reversible_chain(std::mt19937_64& rng, std::size_t n, double extra_edge_prob = 0.2) {
    std::vector<double> w(n);
    for (double& x : w) x = detail::log_uniform(rng, 0.05, 1.0);
    std::vector<std::vector<Transition>> out(n);
    std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
    auto connect = [&](std::size_t i, std::size_t j) {
        if (i == j || adj[i][j]) return;
        adj[i][j] = adj[j][i] = 1;
        const double c = detail::log_uniform(rng, 0.1, 10.0);
        out[i].push_back({j, c / w[i]});
        out[j].push_back({i, c / w[j]});
    };
    for (std::size_t i = 1; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        connect(i, pick(rng));
    }
    std::bernoulli_distribution extra(extra_edge_prob);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (extra(rng)) connect(i, j);
        }
    }
    return Chain(std::make_shared<const StateSpace>(detail::numbered_labels(n)), std::move(out));
}

/// Irreducible, generally non-reversible chain: a random directed cycle plus random one-way edges.
inline Chain random_chain(std::mt19937_64& rng, std::size_t n, double extra_edge_prob = 0.25) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
    std::vector<std::vector<Transition>> out(n);
    auto add = [&](std::size_t i, std::size_t j) {
        if (i == j || adj[i][j]) return;
        adj[i][j] = 1;
        out[i].push_back({j, detail::log_uniform(rng, 0.1, 10.0)});
    };
    for (std::size_t k = 0; k < n; ++k) add(perm[k], perm[(k + 1) % n]);
    std::bernoulli_distribution extra(extra_edge_prob);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (extra(rng)) add(i, j);
        }
    }
    return Chain(std::make_shared<const StateSpace>(detail::numbered_labels(n)), std::move(out));
}

/// Random nonempty proper subset of {0..n-1} with the given size.
inline StateSet random_subset(std::mt19937_64& rng, std::size_t n, std::size_t size) {
    std::vector<StateIndex> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(size);
    return make_set(std::move(all));
}

}  // namespace metastab
