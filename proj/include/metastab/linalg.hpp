#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "metastab/error.hpp"

namespace metastab::linalg {

/// Hard cap on the number of unknowns in any single solve.
inline constexpr std::size_t kMaxStates = 5000;

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vector = Eigen::VectorXd;

inline void check_size(std::size_t n) {
    if (n > kMaxStates) {
        throw Error(Errc::StateSpaceTooLarge,
                    "linear system with " + std::to_string(n) + " unknowns exceeds the limit of " +
                        std::to_string(kMaxStates));
    }
}

// LU with partial pivoting; one step of iterative refinement.
inline Vector solve_lu(SparseMatrix A, const Vector& b) {
    check_size(static_cast<std::size_t>(A.rows()));
    if (A.rows() == 0) return Vector();
    A.makeCompressed();
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
        throw Error(Errc::SolverFailure, "sparse LU factorization failed: " + lu.lastErrorMessage());
    }
    Vector x = lu.solve(b);
    if (lu.info() != Eigen::Success || !x.allFinite()) {
        throw Error(Errc::SolverFailure, "sparse LU solve failed");
    }
    const Vector r = b - A * x;
    x += lu.solve(r);
    if (!x.allFinite()) throw Error(Errc::SolverFailure, "non-finite solution");
    return x;
}

// Symmetric positive definite systems (variational capacity route).
inline Vector solve_spd(SparseMatrix A, const Vector& b) {
    check_size(static_cast<std::size_t>(A.rows()));
    if (A.rows() == 0) return Vector();
    A.makeCompressed();
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    ldlt.compute(A);
    if (ldlt.info() != Eigen::Success) {
        throw Error(Errc::SolverFailure, "LDLT factorization failed (matrix not positive definite?)");
    }
    Vector x = ldlt.solve(b);
    const Vector r = b - A * x;
    x += ldlt.solve(r);
    if (ldlt.info() != Eigen::Success || !x.allFinite()) {
        throw Error(Errc::SolverFailure, "LDLT solve failed");
    }
    return x;
}

}  // namespace metastab::linalg
