#pragma once
// Dense Hilbert-space layer for short spin-1 chains: state/density types,
// local-operator embedding, vectorization, partial transpose, and the
// LAPACK-backed spectral routines everything else builds on.
//
// Conventions (fixed project-wide):
//   * local basis order (+, 0, -) = (0, 1, 2)
//   * site 1 is the most significant base-3 digit of a configuration index
//   * vectorization is row-major: vec(|i><j|) sits at index i*d + j, so that
//     vec(A rho B) = (A (x) B^T) vec(rho)

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <lapacke.h>

#include <complex>
#include <utility>

#include "frag/core.hpp"

namespace frag {

using cx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using Index = Eigen::Index;

constexpr double kHermTol = 1e-10;   // Hermiticity / trace tolerances
constexpr double kPsdFloor = -1e-9;  // eigenvalue floor for "positive" checks

// ---- state types ------------------------------------------------------------

struct StateVector {
  int n_sites = 0;
  VecC amp;

  Index dim() const { return amp.size(); }

  void check_normalized(double tol = 1e-10) const {
    if (std::abs(amp.norm() - 1.0) > tol) throw InvariantError("state vector not normalized");
  }
};

struct DensityMatrix {
  int n_sites = 0;
  MatC rho;

  Index dim() const { return rho.rows(); }

  // Hermiticity and unit trace within 1e-10; spectrum above the PSD floor.
  void validate(bool check_psd = true) const;
};

// Superoperator over n_sites local sites, acting on row-major vectorized
// operators; entries are 9^n x 9^n.
struct Superoperator {
  int n_sites = 0;
  MatC mat;
  static constexpr const char* vectorization = "row-major";

  Index op_dim() const { return pow3(n_sites); }
};

// ---- spectral routines ------------------------------------------------------

struct EigSym {
  VecR values;  // ascending
  MatR vectors; // columns
};

struct EigHerm {
  VecR values;  // ascending
  MatC vectors; // columns
};

// dsyevd on a copy of A (divide & conquer; robust for heavily clustered
// spectra, which is the common case here).
inline EigSym sym_eig(const MatR& A) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  EigSym out;
  out.vectors = A;
  out.values.resize(n);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n, out.values.data());
  if (info != 0) throw FragError("dsyevd failed, info=" + std::to_string(info));
  return out;
}

inline VecR sym_eigvals(const MatR& A) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  MatR work = A;
  VecR w(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, work.data(), n, w.data());
  if (info != 0) throw FragError("dsyevd failed, info=" + std::to_string(info));
  return w;
}

inline double herm_defect(const MatC& A) { return (A - A.adjoint()).cwiseAbs().maxCoeff(); }

// Eigendecomposition of a Hermitian matrix (input checked within 1e-10).
inline EigHerm hermitian_eig(const MatC& A) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if (herm_defect(A) > kHermTol * scale) throw InvariantError("hermitian_eig: input not Hermitian");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  EigHerm out;
  out.vectors = A;
  out.values.resize(n);
  const lapack_int info = LAPACKE_zheevd(
      LAPACK_COL_MAJOR, 'V', 'L', n,
      reinterpret_cast<lapack_complex_double*>(out.vectors.data()), n, out.values.data());
  if (info != 0) throw FragError("zheevd failed, info=" + std::to_string(info));
  return out;
}

inline VecR hermitian_eigvals(const MatC& A) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if (herm_defect(A) > kHermTol * scale) throw InvariantError("hermitian_eigvals: input not Hermitian");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  MatC work = A;
  VecR w(n);
  const lapack_int info = LAPACKE_zheevd(
      LAPACK_COL_MAJOR, 'N', 'L', n, reinterpret_cast<lapack_complex_double*>(work.data()), n,
      w.data());
  if (info != 0) throw FragError("zheevd failed, info=" + std::to_string(info));
  return w;
}

inline MatC matrix_exp(const MatC& A) { return A.exp(); }

// ---- norms and distances ----------------------------------------------------

// Trace norm ||A||_1.  Hermitian inputs go through the symmetric eigensolver;
// anything else falls back to singular values.
inline double trace_norm(const MatC& A) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if (herm_defect(A) <= kHermTol * scale) {
    return hermitian_eigvals(A).cwiseAbs().sum();
  }
  Eigen::BDCSVD<MatC> svd(A);
  return svd.singularValues().sum();
}

inline double trace_norm(const MatR& A) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() <= kHermTol * scale)
    return sym_eigvals(A).cwiseAbs().sum();
  Eigen::BDCSVD<MatR> svd(A);
  return svd.singularValues().sum();
}

inline double trace_distance(const MatC& a, const MatC& b) { return 0.5 * trace_norm(MatC(a - b)); }

// ---- vectorization ----------------------------------------------------------

inline VecC vectorize(const MatC& rho) {
  const Index d = rho.rows();
  VecC v(d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) v(i * d + j) = rho(i, j);
  return v;
}

inline MatC devectorize(const VecC& v, Index d) {
  MatC rho(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) rho(i, j) = v(i * d + j);
  return rho;
}

// ---- embedding --------------------------------------------------------------

// Add coeff * (1 (x) op (x) 1) to target, with `op` covering `width` sites
// starting at 1-based start_site.  Avoids materializing the Kronecker factors.
template <typename DerivedT, typename DerivedO>
void add_embedded(Eigen::MatrixBase<DerivedT>& target, const Eigen::MatrixBase<DerivedO>& op,
                  int start_site, int n_sites, typename DerivedT::Scalar coeff) {
  const Index d = op.rows();
  int width = 0;
  Index t = 1;
  while (t < d) {
    t *= 3;
    ++width;
  }
  if (t != d || width == 0) throw FragError("add_embedded: op dimension must be a power of 3");
  const Index dl = pow3(start_site - 1);
  const Index dr = pow3(n_sites - start_site + 1 - width);
  if (dl * d * dr != target.rows()) throw FragError("add_embedded: dimension mismatch");
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) {
      const typename DerivedT::Scalar w = coeff * typename DerivedT::Scalar(op(a, b));
      if (w == typename DerivedT::Scalar(0)) continue;
      for (Index L = 0; L < dl; ++L) {
        const Index ra = (L * d + a) * dr;
        const Index rb = (L * d + b) * dr;
        for (Index R = 0; R < dr; ++R) target(ra + R, rb + R) += w;
      }
    }
}

// Dense 1 (x) op (x) 1 over n_sites sites.
inline MatC embed_local(const MatC& op, int start_site, int n_sites) {
  const Index dim = pow3(n_sites);
  MatC out = MatC::Zero(dim, dim);
  add_embedded(out, op, start_site, n_sites, cx(1.0));
  return out;
}

// ---- partial transpose ------------------------------------------------------

// Transpose the contiguous right block B = sites cut+1..N.  1 <= cut < N.
template <typename Derived>
typename Derived::PlainObject partial_transpose_right(const Eigen::MatrixBase<Derived>& rho,
                                                      int n_sites, int cut) {
  if (cut < 1 || cut >= n_sites) throw ConfigError("partial_transpose: cut must satisfy 1 <= cut < N");
  const Index dA = pow3(cut);
  const Index dB = pow3(n_sites - cut);
  typename Derived::PlainObject out(rho.rows(), rho.cols());
  for (Index a = 0; a < dA; ++a)
    for (Index ap = 0; ap < dA; ++ap)
      for (Index b = 0; b < dB; ++b)
        for (Index bp = 0; bp < dB; ++bp)
          out(a * dB + b, ap * dB + bp) = rho(a * dB + bp, ap * dB + b);
  return out;
}

inline MatC partial_transpose(const DensityMatrix& rho, int cut) {
  return partial_transpose_right(rho.rho, rho.n_sites, cut);
}

// ---- density-matrix validation ----------------------------------------------

inline void DensityMatrix::validate(bool check_psd) const {
  const double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
  if (herm_defect(rho) > kHermTol * scale) throw InvariantError("density matrix not Hermitian");
  if (std::abs(rho.trace() - cx(1.0)) > kHermTol) throw InvariantError("density matrix trace != 1");
  if (check_psd && hermitian_eigvals(rho).minCoeff() < kPsdFloor)
    throw InvariantError("density matrix has eigenvalue below PSD floor");
}

// ---- channel checks ---------------------------------------------------------

// Choi matrix C[(i,k),(j,l)] = S[(i,j),(k,l)] of a superoperator in the
// row-major convention.
inline MatC choi_matrix(const Superoperator& S) {
  const Index d = S.op_dim();
  MatC C(d * d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k)
        for (Index l = 0; l < d; ++l) C(i * d + k, j * d + l) = S.mat(i * d + j, k * d + l);
  return C;
}

struct CptpReport {
  double trace_defect = 0.0;    // max |sum_i S[(ii),(kl)] - delta_kl|
  double choi_min_eig = 0.0;    // most negative Choi eigenvalue
  bool ok(double tol = 1e-9) const { return trace_defect <= tol && choi_min_eig >= -tol; }
};

inline CptpReport check_cptp(const Superoperator& S) {
  const Index d = S.op_dim();
  CptpReport rep;
  for (Index k = 0; k < d; ++k)
    for (Index l = 0; l < d; ++l) {
      cx acc = 0.0;
      for (Index i = 0; i < d; ++i) acc += S.mat(i * d + i, k * d + l);
      const double want = (k == l) ? 1.0 : 0.0;
      rep.trace_defect = std::max(rep.trace_defect, std::abs(acc - want));
    }
  rep.choi_min_eig = hermitian_eigvals(choi_matrix(S)).minCoeff();
  return rep;
}

// ---- random states ----------------------------------------------------------

inline StateVector random_haar_state(int n_sites, Rng& rng) {
  StateVector psi;
  psi.n_sites = n_sites;
  psi.amp.resize(pow3(n_sites));
  for (Index i = 0; i < psi.amp.size(); ++i) psi.amp(i) = cx(rng.normal(), rng.normal());
  psi.amp /= psi.amp.norm();
  return psi;
}

inline DensityMatrix pure_density(const StateVector& psi) {
  DensityMatrix rho;
  rho.n_sites = psi.n_sites;
  rho.rho = psi.amp * psi.amp.adjoint();
  return rho;
}

inline DensityMatrix basis_density(std::int64_t config, int n_sites) {
  DensityMatrix rho;
  rho.n_sites = n_sites;
  const Index dim = pow3(n_sites);
  rho.rho = MatC::Zero(dim, dim);
  rho.rho(config, config) = 1.0;
  return rho;
}

}  // namespace frag
