#pragma once

// Sparse storage and linear solves. Thin layer over Eigen's sparse modules.

#include <cstddef>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "blowup_lab/error.hpp"

namespace blowup {

using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Compressed-row sparse matrix.
using CsrMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using CscMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

inline double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

/// LU factorization for general (nonsymmetric or indefinite) sparse systems.
class LuSolver {
 public:
  explicit LuSolver(const CscMatrix& a) {
    lu_.analyzePattern(a);
    lu_.factorize(a);
    if (lu_.info() != Eigen::Success) throw SingularMatrix("sparse LU factorization failed: " + lu_.lastErrorMessage());
  }

  Vector solve(const Vector& b) const {
    Vector x = lu_.solve(b);
    if (!x.allFinite()) throw SingularMatrix("sparse LU solve produced non-finite values");
    return x;
  }

 private:
  // solve() is logically const but Eigen's SparseLU::solve is not marked so
  // in every version; keep the factorization mutable.
  mutable Eigen::SparseLU<CscMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

/// Solver for symmetric positive definite systems. Uses a sparse Cholesky
/// factorization up to `direct_limit` unknowns, Jacobi-preconditioned CG above.
class SpdSolver {
 public:
  static constexpr Index kDefaultDirectLimit = 250000;

  explicit SpdSolver(const CscMatrix& a, Index direct_limit = kDefaultDirectLimit, double cg_tolerance = 1e-12)
      : direct_(a.rows() <= direct_limit) {
    if (direct_) {
      llt_.compute(a);
      if (llt_.info() != Eigen::Success) {
        throw SingularMatrix("Cholesky factorization failed: matrix is not positive definite");
      }
    } else {
      cg_.setTolerance(cg_tolerance);
      cg_.setMaxIterations(10 * a.rows());
      cg_.compute(a);
    }
  }

  bool direct() const { return direct_; }

  Vector solve(const Vector& b) const {
    Vector x;
    if (direct_) {
      x = llt_.solve(b);
    } else {
      x = cg_.solve(b);
      if (cg_.info() != Eigen::Success) {
        throw ConvergenceFailure("conjugate gradient did not converge", cg_.error(),
                                 static_cast<int>(cg_.iterations()));
      }
    }
    if (!x.allFinite()) throw SingularMatrix("SPD solve produced non-finite values");
    return x;
  }

 private:
  bool direct_;
  Eigen::SimplicialLLT<CscMatrix> llt_;
  Eigen::ConjugateGradient<CscMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
};

}  // namespace blowup
