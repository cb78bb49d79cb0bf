#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "metastab/error.hpp"

namespace metastab {

using StateIndex = std::size_t;

/// Sorted, duplicate-free list of state indices.
using StateSet = std::vector<StateIndex>;

inline StateSet make_set(std::vector<StateIndex> items) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    return items;
}

inline bool contains(const StateSet& set, StateIndex i) {
    return std::binary_search(set.begin(), set.end(), i);
}

inline StateSet set_union(const StateSet& a, const StateSet& b) {
    StateSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline StateSet set_difference(const StateSet& a, const StateSet& b) {
    StateSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline StateSet set_intersection(const StateSet& a, const StateSet& b) {
    StateSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline StateSet complement(std::size_t n, const StateSet& a) {
    StateSet out;
    out.reserve(n - std::min(n, a.size()));
    std::size_t k = 0;
    for (StateIndex i = 0; i < n; ++i) {
        if (k < a.size() && a[k] == i) {
            ++k;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

inline StateSet all_states(std::size_t n) {
    StateSet out(n);
    for (StateIndex i = 0; i < n; ++i) out[i] = i;
    return out;
}

/// Dense membership lookup for hot loops.
inline std::vector<char> make_mask(std::size_t n, const StateSet& set) {
    std::vector<char> mask(n, 0);
    for (StateIndex i : set) {
        if (i >= n) throw Error(Errc::StateNotFound, "state index out of range");
        mask[i] = 1;
    }
    return mask;
}

inline void require_valid(std::size_t n, const StateSet& set, const char* what) {
    if (!std::is_sorted(set.begin(), set.end()) ||
        std::adjacent_find(set.begin(), set.end()) != set.end()) {
        throw Error(Errc::DimensionMismatch, std::string(what) + " must be sorted and duplicate-free");
    }
    if (!set.empty() && set.back() >= n) {
        throw Error(Errc::StateNotFound, std::string(what) + " refers to a state outside the chain");
    }
}

}  // namespace metastab
