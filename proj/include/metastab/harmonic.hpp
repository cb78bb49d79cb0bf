#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "metastab/chain.hpp"
#include "metastab/linalg.hpp"
#include "metastab/state_set.hpp"

namespace metastab {

/// Boundary-value problem  (L f)(i) = -source(i)  on an interior set, f given elsewhere.
///
/// The interior rows are divided by the exit rate, so the factored matrix is
/// I - P restricted to the interior (P the jump-chain kernel).  One
/// factorization serves any number of right-hand sides.
class DirichletProblem {
public:
    DirichletProblem(const Chain& chain, StateSet interior)
        : chain_(&chain), interior_(std::move(interior)), position_(chain.size(), -1) {
        require_valid(chain.size(), interior_, "interior set");
        const std::size_t m = interior_.size();
        linalg::check_size(m);
        for (std::size_t k = 0; k < m; ++k) position_[interior_[k]] = static_cast<long>(k);
        if (m == 0) return;
        std::vector<linalg::Triplet> triplets;
        for (std::size_t k = 0; k < m; ++k) {
            const StateIndex i = interior_[k];
            const double lambda = chain.raw_exit_rate(i);
            triplets.emplace_back(k, k, 1.0);
            for (const auto& t : chain.transitions(i)) {
                const long p = position_[t.to];
                if (p >= 0) triplets.emplace_back(k, p, -t.rate / lambda);
            }
        }
        matrix_ = linalg::SparseMatrix(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        matrix_.setFromTriplets(triplets.begin(), triplets.end());
        matrix_.makeCompressed();
        lu_ = std::make_unique<Eigen::SparseLU<linalg::SparseMatrix, Eigen::COLAMDOrdering<int>>>();
        lu_->compute(matrix_);
        if (lu_->info() != Eigen::Success) {
            throw Error(Errc::SolverFailure, "interior system is singular: " + lu_->lastErrorMessage());
        }
    }

    const StateSet& interior() const noexcept { return interior_; }

    /// `values` carries the boundary data (interior entries are ignored and overwritten).
    std::vector<double> solve(std::vector<double> values, std::span<const double> source = {}) const {
        const Chain& chain = *chain_;
        require_size(chain, values.size(), "boundary data");
        if (!source.empty()) require_size(chain, source.size(), "source");
        const std::size_t m = interior_.size();
        if (m == 0) return values;
        linalg::Vector rhs(static_cast<Eigen::Index>(m));
        for (std::size_t k = 0; k < m; ++k) {
            const StateIndex i = interior_[k];
            double acc = source.empty() ? 0.0 : source[i] / chain.speedup();
            for (const auto& t : chain.transitions(i)) {
                if (position_[t.to] < 0) acc += t.rate * values[t.to];
            }
            rhs[static_cast<Eigen::Index>(k)] = acc / chain.raw_exit_rate(i);
        }
        linalg::Vector x = lu_->solve(rhs);
        if (lu_->info() != Eigen::Success || !x.allFinite()) {
            throw Error(Errc::SolverFailure, "interior solve failed");
        }
        const linalg::Vector r = rhs - matrix_ * x;
        x += lu_->solve(r);
        if (!x.allFinite()) throw Error(Errc::SolverFailure, "interior solve produced non-finite values");
        for (std::size_t k = 0; k < m; ++k) values[interior_[k]] = x[static_cast<Eigen::Index>(k)];
        return values;
    }

    /// max over the interior of |(L f)(i) + source(i)|, on the effective clock.
    double residual(std::span<const double> f, std::span<const double> source = {}) const {
        const Chain& chain = *chain_;
        double worst = 0.0;
        for (StateIndex i : interior_) {
            double acc = 0.0;
            for (const auto& t : chain.transitions(i)) acc += t.rate * (f[t.to] - f[i]);
            acc *= chain.speedup();
            if (!source.empty()) acc += source[i];
            worst = std::max(worst, std::abs(acc));
        }
        return worst;
    }

private:
    const Chain* chain_;
    StateSet interior_;
    std::vector<long> position_;
    linalg::SparseMatrix matrix_;
    std::unique_ptr<Eigen::SparseLU<linalg::SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
};

}  // namespace metastab
