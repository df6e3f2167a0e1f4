#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

// Small helpers for complex Hermitian matrix work shared by the solvers.

namespace qsd {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Largest absolute entry; the operator residual norm used throughout.
inline double max_abs(const CMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

/// (A + A†)/2.
inline CMatrix hermitize(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

/// Smallest eigenvalue of the Hermitian part of `a`.
double min_eigenvalue(const CMatrix& a);

/// |v⟩⟨v| as a dense matrix.
inline CMatrix outer(const CVector& v) { return v * v.adjoint(); }

/// Pseudo square root of a PSD matrix: eigenvalues below
/// `rel_floor * lambda_max` are treated as zero.
CMatrix psd_sqrt(const CMatrix& a, double rel_floor = 1e-14);

/// Pseudo inverse square root of a PSD matrix (inverse on the support).
CMatrix psd_inv_sqrt(const CMatrix& a, double rel_floor = 1e-14);

/// Runs fn(begin, end) over [0, n) split into contiguous blocks, one per
/// worker. Results must be written to preallocated, disjoint slots so the
/// outcome is independent of scheduling.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace qsd
