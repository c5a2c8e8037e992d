#pragma once

#include "mmimo/common.hpp"

// Small dense helpers for Hermitian matrices shared by all modules.
namespace mmimo::linalg {

// tr(A B) in O(n^2) without forming the product.
Complex trace_product(const CMatrix& a, const CMatrix& b);

// ||A - A^H||_F / max(||A||_F, 1e-300)
double hermitian_deviation(const CMatrix& a);

double min_eigenvalue(const CMatrix& a);
double max_eigenvalue(const CMatrix& a);

// Inverse of a Hermitian positive definite matrix via Cholesky.
// Throws SingularityError when the factorization fails.
CMatrix hpd_inverse(const CMatrix& a);

// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix. Eigenvalues below
// rel_tol * max eigenvalue are treated as zero.
CMatrix psd_pseudo_inverse(const CMatrix& a, double rel_tol = 1e-10);

// Principal square root of a Hermitian PSD matrix, negative eigenvalues
// clamped to zero.
CMatrix psd_sqrt(const CMatrix& a);

// Rank of a Hermitian PSD matrix with the same threshold as psd_pseudo_inverse.
Eigen::Index psd_rank(const CMatrix& a, double rel_tol = 1e-10);

inline CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace mmimo::linalg
