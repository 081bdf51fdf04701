#pragma once

// Dense linear-algebra kernels shared by every module. Everything here is a
// template over Eigen expressions so callers can pass blocks, maps and
// expressions without materializing copies.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "icl/errors.hpp"

namespace icl {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Euclidean norm of each row.
template <typename Derived>
Vector<typename Derived::Scalar> row_norms(const Eigen::MatrixBase<Derived>& a) {
  return a.rowwise().norm();
}

/// ||A||_{2,inf}: largest row Euclidean norm.
template <typename Derived>
typename Derived::Scalar norm_2_inf(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() == 0) return 0;
  return a.rowwise().norm().maxCoeff();
}

/// ||A||_{2,1}: sum of row Euclidean norms.
template <typename Derived>
typename Derived::Scalar norm_2_1(const Eigen::MatrixBase<Derived>& a) {
  return a.rowwise().norm().sum();
}

struct PowerIterationOptions {
  int max_iterations = 200;
  double rel_tol = 1e-10;
};

/// Spectral (operator 2-) norm by power iteration on A^T A.
///
/// The start vector is deterministic so repeated calls agree bit-for-bit.
template <typename Derived>
typename Derived::Scalar operator_norm(const Eigen::MatrixBase<Derived>& a,
                                       PowerIterationOptions opt = {}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = a.cols();
  if (a.rows() == 0 || n == 0) return Scalar(0);
  Vector<Scalar> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = Scalar(1) + Scalar(i) / Scalar(2 * n + 1);
  v.normalize();
  Scalar sigma = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Vector<Scalar> w = a.transpose() * (a * v);
    const Scalar nw = w.norm();
    if (nw == Scalar(0)) return Scalar(0);
    v = w / nw;
    const Scalar next = std::sqrt(nw);
    if (it > 0 && std::abs(next - sigma) <= Scalar(opt.rel_tol) * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return (a * v).norm();
}

/// Largest eigenvalue modulus, via the real Schur form.
template <typename Derived>
double spectral_radius(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() != a.cols()) throw InvalidInput("spectral_radius: matrix must be square");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a.template cast<double>().eval(), false);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_radius: Schur iteration failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Minimum-norm least-squares solution of X B = Y via thin SVD.
/// Singular values below rcond * sigma_max are treated as zero.
template <typename DX, typename DY>
Matrix<typename DX::Scalar> lstsq_min_norm(const Eigen::MatrixBase<DX>& x,
                                           const Eigen::MatrixBase<DY>& y, double rcond = 1e-10) {
  using Scalar = typename DX::Scalar;
  if (x.rows() == 0) return Matrix<Scalar>::Zero(x.cols(), y.cols());
  Eigen::BDCSVD<Matrix<Scalar>> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = Scalar(rcond) * (s.size() > 0 ? s[0] : Scalar(0));
  Vector<Scalar> inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv[i] = s[i] > cutoff ? Scalar(1) / s[i] : Scalar(0);
  return svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * y);
}

/// Solve S X = B for symmetric positive (semi)definite S, adding jitter
/// eps * trace(S)/n * I with eps escalating 1e-12 -> 1e-8 until LLT succeeds.
template <typename DS, typename DB>
Matrix<typename DS::Scalar> spd_solve(const Eigen::MatrixBase<DS>& s, const Eigen::MatrixBase<DB>& b,
                                      const char* what = "spd_solve") {
  using Scalar = typename DS::Scalar;
  const Eigen::Index n = s.rows();
  Matrix<Scalar> work = s;
  Eigen::LLT<Matrix<Scalar>> llt(work);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  const Scalar scale = std::max<Scalar>(std::abs(s.trace()) / Scalar(std::max<Eigen::Index>(n, 1)),
                                        std::numeric_limits<Scalar>::min());
  for (double eps : {1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
    work = s;
    work.diagonal().array() += Scalar(eps) * scale;
    llt.compute(work);
    if (llt.info() == Eigen::Success) return llt.solve(b);
  }
  Eigen::JacobiSVD<Matrix<Scalar>> svd(s);
  const auto& sv = svd.singularValues();
  std::ostringstream msg;
  msg << what << ": system is numerically singular after jitter 1e-8 (condition estimate "
      << (sv.size() && sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1]
                                              : std::numeric_limits<double>::infinity())
      << ")";
  throw NumericalError(msg.str());
}

/// Lower factor L with L L^T ~= cov for a PSD covariance. Rank-deficient
/// inputs get jitter 1e-12 * trace/d; anything that still fails is rejected.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw InvalidInput("covariance must be square");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidInput("covariance must be symmetric");
  const Eigen::Index d = cov.rows();
  if (d == 0 || cov.isZero(0.0)) return Eigen::MatrixXd::Zero(d, d);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd jittered = cov;
  jittered.diagonal().array() += 1e-12 * cov.trace() / static_cast<double>(d);
  llt.compute(jittered);
  if (llt.info() != Eigen::Success || cov.trace() < 0)
    throw InvalidInput("covariance is not positive semidefinite (Cholesky with jitter failed)");
  return llt.matrixL();
}

}  // namespace icl
