#include "mmimo/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mmimo::linalg {

Complex trace_product(const CMatrix& a, const CMatrix& b) {
  return (a.array() * b.transpose().array()).sum();
}

double hermitian_deviation(const CMatrix& a) {
  const double scale = std::max(a.norm(), 1e-300);
  return (a - a.adjoint()).norm() / scale;
}

double min_eigenvalue(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

CMatrix hpd_inverse(const CMatrix& a) {
  Eigen::LLT<CMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("matrix is not numerically positive definite");
  }
  return llt.solve(CMatrix::Identity(a.rows(), a.cols()));
}

namespace {

double cutoff(const RVector& eigenvalues, double rel_tol) {
  const double top = eigenvalues.size() ? std::max(eigenvalues.maxCoeff(), 0.0) : 0.0;
  return rel_tol * top;
}

}  // namespace

CMatrix psd_pseudo_inverse(const CMatrix& a, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
  const RVector& ev = es.eigenvalues();
  const double floor = cutoff(ev, rel_tol);
  RVector inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > floor && ev(i) > 0.0 ? 1.0 / ev(i) : 0.0;
  const CMatrix& u = es.eigenvectors();
  return u * inv.asDiagonal() * u.adjoint();
}

CMatrix psd_sqrt(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
  RVector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMatrix& u = es.eigenvectors();
  return u * root.asDiagonal() * u.adjoint();
}

Eigen::Index psd_rank(const CMatrix& a, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  const RVector& ev = es.eigenvalues();
  const double floor = cutoff(ev, rel_tol);
  return (ev.array() > floor).count();
}

}  // namespace mmimo::linalg
