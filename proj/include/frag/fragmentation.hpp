#pragma once
// Krylov-sector structure of the chains.
//
// Two routes are provided:
//   * enumerate_pf_krylov: exact enumeration for the generic pair-exchange
//     model, whose sectors are labelled by irreducible color words ("dot
//     patterns") obtained by stack reduction.  The commutant is abelian.
//   * krylov_decompose_numerical: model-agnostic numerical decomposition of
//     the algebra generated by a list of Hermitian local terms, following the
//     probe-element strategy: eigendecompose one random algebra element,
//     close orbits seeded from its eigenvectors, match isomorphic subspaces
//     through their restricted spectra, and fix the pairing gauge with a
//     second random element.  This exposes non-abelian commutants (multiple
//     isomorphic copies per class).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "frag/models.hpp"

namespace frag {

// ---- dot patterns -----------------------------------------------------------

// Stack reduction: adjacent equal colors annihilate (they can be swapped to
// any other equal pair, so they carry no conserved label); what survives is
// the irreducible word.
inline std::vector<std::uint8_t> reduce_word(const std::vector<std::uint8_t>& w) {
  std::vector<std::uint8_t> st;
  st.reserve(w.size());
  for (auto c : w) {
    if (!st.empty() && st.back() == c)
      st.pop_back();
    else
      st.push_back(c);
  }
  return st;
}

inline std::string config_pattern(std::int64_t config, int n_sites) {
  return colors_to_string(reduce_word(config_colors(config, n_sites)));
}

// ---- decomposition data model -----------------------------------------------

// One equivalence class of isomorphic irreducible Krylov subspaces.
struct KrylovClass {
  int lambda_id = 0;  // rank in the canonical (D, spectrum) ordering
  Index D = 0;        // dimension of each copy
  Index d = 0;        // number of copies (multiplicity)

  // Orthonormal bases of the copies, concatenated column-wise (dim x d*D);
  // copy i occupies columns [i*D, (i+1)*D).  For numerical decompositions the
  // copies are aligned: B_i B_0^T intertwines the generator action.  Real
  // generator sets are kept in real storage.
  MatR basis_r;
  MatC basis_cx;
  bool real = true;

  VecR spectrum;             // restricted spectrum of the probe element
  std::vector<Index> seeds;  // seeding eigenvector index per copy
  std::string pattern;       // dot-pattern label (abelian route only)

  MatC basis() const { return real ? MatC(basis_r.cast<cx>()) : basis_cx; }

  Eigen::Ref<const MatR> copy_r(Index i) const { return basis_r.middleCols(i * D, D); }
  MatC copy(Index i) const {
    return real ? MatC(basis_r.middleCols(i * D, D).cast<cx>()) : basis_cx.middleCols(i * D, D);
  }

  // Intertwiner between copies a <- b in the aligned gauge (dense; small N)
  MatC intertwiner(Index a, Index b) const { return copy(a) * copy(b).adjoint(); }
};

struct KrylovDecomposition {
  int n_sites = 0;
  Index dim = 0;
  bool abelian = false;  // exact sector enumeration (diagonal commutant)
  std::vector<KrylovClass> classes;
  // abelian route: computational-basis indices of each class (sector)
  std::vector<std::vector<Index>> sectors;

  // diagnostics from the numerical route
  double resolution_defect = 0.0;   // || sum_i D_i - dim || bookkeeping + orthonormality checks
  double invariance_defect = 0.0;   // max || g B_i - B_i (B_i^+ g B_i) ||_F
  double intertwiner_defect = 0.0;  // max || [B_i B_0^+, g] ||_F
  int retries_used = 0;

  Index n_classes() const { return static_cast<Index>(classes.size()); }
  Index n_subspaces() const {  // K
    Index k = 0;
    for (const auto& c : classes) k += c.d;
    return k;
  }
  Index commutant_dim() const {
    Index s = 0;
    for (const auto& c : classes) s += c.d * c.d;
    return s;
  }
  Index d_max() const {
    Index m = 0;
    for (const auto& c : classes) m = std::max(m, c.D);
    return m;
  }
  Index check_sum() const {  // sum_lambda d_lambda D_lambda, must equal dim
    Index s = 0;
    for (const auto& c : classes) s += c.d * c.D;
    return s;
  }
};

struct FragmentationStats {
  Index K = 0;      // number of Krylov subspaces
  Index D_max = 0;  // largest subspace dimension
  // decay exponent of D_max/3^N ~ exp(-a N); NaN until fitted across sizes
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
};

// ---- exact enumeration (pair-exchange model) --------------------------------

// Group configurations by dot pattern.  Classes are sectors (d = 1 each),
// ordered by (D ascending, pattern lexicographic).
inline KrylovDecomposition enumerate_pf_krylov(int n_sites) {
  if (n_sites < 1 || n_sites > 10) throw ConfigError("enumerate_pf_krylov: N must be in [1,10]");
  KrylovDecomposition dec;
  dec.n_sites = n_sites;
  dec.dim = pow3(n_sites);
  dec.abelian = true;

  std::map<std::string, std::vector<Index>> by_pattern;
  for (Index idx = 0; idx < dec.dim; ++idx)
    by_pattern[config_pattern(idx, n_sites)].push_back(idx);

  std::vector<std::pair<std::string, std::vector<Index>>> sorted(by_pattern.begin(),
                                                                 by_pattern.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second.size() != b.second.size()) return a.second.size() < b.second.size();
    return a.first < b.first;
  });

  int id = 0;
  for (auto& [pat, idxs] : sorted) {
    KrylovClass c;
    c.lambda_id = id++;
    c.D = static_cast<Index>(idxs.size());
    c.d = 1;
    c.pattern = pat;
    dec.classes.push_back(std::move(c));
    dec.sectors.push_back(std::move(idxs));
  }
  return dec;
}

inline FragmentationStats pf_stats(const KrylovDecomposition& dec) {
  FragmentationStats s;
  s.K = dec.n_subspaces();
  s.D_max = 0;
  for (const auto& c : dec.classes) s.D_max = std::max(s.D_max, c.D);
  return s;
}

// Least-squares decay exponent a from D_max(N)/3^N ~ exp(-a N).
inline double fit_fragmentation_exponent(const std::vector<std::pair<int, Index>>& dmax_by_n) {
  if (dmax_by_n.size() < 2) throw ConfigError("fit_fragmentation_exponent: need >= 2 sizes");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(dmax_by_n.size());
  for (const auto& [N, Dm] : dmax_by_n) {
    const double x = N;
    const double y = std::log(static_cast<double>(Dm) / static_cast<double>(pow3(N)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -slope;
}

// ---- numerical decomposition ------------------------------------------------

struct DecomposeOptions {
  double group_tol = 1e-6;   // relative spectral gap separating degeneracy groups
  double seed_tol = 1e-6;    // residual below which an eigenvector is already covered
  // Orbit acceptance threshold.  A column admitted from residual r carries
  // direction noise ~eps_eff/r (eps_eff ~ 5e-13 for dense double apply+project),
  // and its generator images read back as residuals ~3*eps_eff/r.  Stability of
  // the stopping rule therefore needs tol > sqrt(3*eps_eff) ~ 1e-6; below that
  // a single near-threshold acceptance snowballs and the orbit overshoots D.
  // Contaminated attempts are caught by the verify_tol gate and redrawn.
  double orbit_tol = 1e-6;
  double match_tol = 1e-6;   // relative tolerance matching restricted spectra
  double verify_tol = 1e-8;  // intertwiner commutation tolerance
  int max_retries = 5;
};

namespace detail {

struct RetryDecomposition : FragError {
  using FragError::FragError;
};

inline void eig_in_place(MatR& A, VecR& w) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  w.resize(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, A.data(), n, w.data());
  if (info != 0) throw FragError("dsyevd failed, info=" + std::to_string(info));
}

inline void eig_in_place(MatC& A, VecR& w) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  w.resize(n);
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                         reinterpret_cast<lapack_complex_double*>(A.data()), n,
                                         w.data());
  if (info != 0) throw FragError("zheevd failed, info=" + std::to_string(info));
}

template <class Mat>
struct PreparedTerm {
  int site = 1;
  Mat op;  // 3x3 or 9x9 local block
};

// Y += coeff * (1 (x) op (x) 1) X for a block of columns, using the stride
// structure instead of an embedded dense operator.
template <class Mat>
void apply_term(const PreparedTerm<Mat>& t, const Eigen::Ref<const Mat>& X, Eigen::Ref<Mat> Y,
                int n_sites, typename Mat::Scalar coeff) {
  const Index d = t.op.rows();
  const int width = (d == 9) ? 2 : 1;
  const Index nl = pow3(t.site - 1);
  const Index nr = pow3(n_sites - t.site + 1 - width);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) {
      const auto w = coeff * t.op(a, b);
      if (w == typename Mat::Scalar(0)) continue;
      for (Index L = 0; L < nl; ++L)
        Y.middleRows((L * d + a) * nr, nr).noalias() += w * X.middleRows((L * d + b) * nr, nr);
    }
}

template <class Mat>
Mat apply_combo(const std::vector<PreparedTerm<Mat>>& terms, const VecR& coeff,
                const Eigen::Ref<const Mat>& X, int n_sites) {
  Mat Y = Mat::Zero(X.rows(), X.cols());
  for (std::size_t j = 0; j < terms.size(); ++j)
    apply_term<Mat>(terms[j], X, Y, n_sites, typename Mat::Scalar(coeff(j)));
  return Y;
}

inline double re_trace_prod(const MatR& A, const MatR& B) {
  return A.cwiseProduct(B.transpose()).sum();
}
inline double re_trace_prod(const MatC& A, const MatC& B) {
  return A.cwiseProduct(B.transpose()).sum().real();
}

template <class Mat>
struct RawCopy {
  Index start = 0;  // first column in the shared basis matrix
  Index D = 0;
  Index seed = 0;  // global eigenvector index that seeded the copy
};

// One full decomposition attempt over a fixed coefficient draw.  Throws
// RetryDecomposition on spectral ambiguity.
template <class Mat>
void decompose_attempt(const std::vector<PreparedTerm<Mat>>& terms, int n_sites,
                       const VecR& c_probe, const DecomposeOptions& opts,
                       KrylovDecomposition& out) {
  using Scalar = typename Mat::Scalar;
  const Index dim = pow3(n_sites);

  // probe element and its eigenbasis
  Mat V = Mat::Zero(dim, dim);
  for (std::size_t j = 0; j < terms.size(); ++j)
    add_embedded(V, terms[j].op, terms[j].site, n_sites, Scalar(c_probe(j)));
  VecR w;
  eig_in_place(V, w);  // V now holds eigenvectors

  const double scale = std::max({1.0, std::abs(w(0)), std::abs(w(dim - 1))});
  const double gap_thr = opts.group_tol * scale;

  // degeneracy groups; gaps in the ambiguity window force a re-draw
  std::vector<Index> group_start{0};
  for (Index i = 0; i + 1 < dim; ++i) {
    const double gap = w(i + 1) - w(i);
    if (gap > gap_thr) {
      if (gap < 5.0 * gap_thr)
        throw RetryDecomposition("spectral gap inside ambiguity window");
      group_start.push_back(i + 1);
    } else if (gap > gap_thr / 5.0) {
      throw RetryDecomposition("spectral gap inside ambiguity window");
    }
  }
  group_start.push_back(dim);

  // orbit closure
  Mat B(dim, dim);
  Index nb = 0;
  std::vector<RawCopy<Mat>> copies;

  for (std::size_t gi = 0; gi + 1 < group_start.size(); ++gi) {
    const Index lo = group_start[gi], hi = group_start[gi + 1];
    Mat R = V.middleCols(lo, hi - lo);
    for (int pass = 0; pass < 2; ++pass)
      if (nb > 0) R.noalias() -= B.leftCols(nb) * (B.leftCols(nb).adjoint() * R).eval();

    for (Index e = 0; e < hi - lo; ++e) {
      if (R.col(e).norm() <= opts.seed_tol) continue;  // already inside known subspaces

      if (nb >= dim) throw RetryDecomposition("orbit closure overflow");
      const Index copy_start = nb;
      B.col(nb++) = R.col(e) / R.col(e).norm();

      // breadth-first closure; candidates are screened against this copy
      // first (cheap), then cleaned against the full basis on acceptance
      Index frontier_lo = copy_start;
      while (frontier_lo < nb) {
        const Index frontier_n = nb - frontier_lo;
        Mat C = Mat::Zero(dim, static_cast<Index>(terms.size()) * frontier_n);
        for (std::size_t j = 0; j < terms.size(); ++j)
          apply_term<Mat>(terms[j], B.middleCols(frontier_lo, frontier_n),
                          C.middleCols(static_cast<Index>(j) * frontier_n, frontier_n), n_sites,
                          Scalar(1));
        frontier_lo = nb;
        for (Index k = 0; k < C.cols(); ++k) {
          auto cand = C.col(k);
          const double n0 = std::max(1.0, cand.norm());
          const Index cn = nb - copy_start;
          for (int pass = 0; pass < 2; ++pass)
            cand.noalias() -=
                B.middleCols(copy_start, cn) * (B.middleCols(copy_start, cn).adjoint() * cand).eval();
          if (cand.norm() <= opts.orbit_tol * n0) continue;
          // In exact arithmetic orthogonality to prior subspaces is automatic
          // (they are invariant, so generators cannot leak), but the leaked
          // weight of near-threshold acceptances compounds across large
          // groups and overflows the closure around dim ~ 6561.  Cleaning
          // survivors against the full basis costs O(accepted) gemvs only.
          for (int pass = 0; pass < 2; ++pass)
            cand.noalias() -= B.leftCols(nb) * (B.leftCols(nb).adjoint() * cand).eval();
          if (cand.norm() <= opts.orbit_tol * n0) continue;
          if (nb >= dim) throw RetryDecomposition("orbit closure overflow");
          B.col(nb++) = cand / cand.norm();
        }
      }
      copies.push_back({copy_start, nb - copy_start, lo + e});

      // deflate the remaining eigenvectors of this group against the new copy
      if (e + 1 < hi - lo) {
        auto rest = R.middleCols(e + 1, hi - lo - e - 1);
        const Index D = nb - copy_start;
        rest.noalias() -= B.middleCols(copy_start, D) * (B.middleCols(copy_start, D).adjoint() * rest).eval();
      }
    }
  }

  if (nb != dim) throw RetryDecomposition("orbit closure did not resolve the identity");

  // restricted probe spectra align each copy internally
  struct Aligned {
    Index D = 0;
    Index seed = 0;
    VecR spec;
    Mat basis;
  };
  std::vector<Aligned> aligned;
  aligned.reserve(copies.size());
  {
    Mat HB = apply_combo<Mat>(terms, c_probe, B.leftCols(nb), n_sites);
    for (const auto& cp : copies) {
      Mat X = B.middleCols(cp.start, cp.D).adjoint() * HB.middleCols(cp.start, cp.D);
      X = Scalar(0.5) * (X + Mat(X.adjoint()));
      VecR ws;
      Mat U = X;
      eig_in_place(U, ws);
      Aligned a;
      a.D = cp.D;
      a.seed = cp.seed;
      a.spec = ws;
      a.basis = B.middleCols(cp.start, cp.D) * U;
      aligned.push_back(std::move(a));
    }
  }
  std::sort(aligned.begin(), aligned.end(),
            [](const Aligned& a, const Aligned& b) { return a.seed < b.seed; });

  // match copies into classes through (D, restricted spectrum)
  const double match_thr = opts.match_tol * scale;
  struct ClassAcc {
    Index D = 0;
    VecR spec;
    std::vector<Index> members;  // indices into `aligned`
  };
  std::vector<ClassAcc> accs;
  for (Index i = 0; i < static_cast<Index>(aligned.size()); ++i) {
    const auto& a = aligned[i];
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < accs.size(); ++q) {
      if (accs[q].D != a.D) continue;
      const double dist = (accs[q].spec - a.spec).cwiseAbs().maxCoeff();
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(q);
      }
    }
    if (best >= 0 && best_dist < match_thr) {
      if (best_dist > match_thr / 5.0) throw RetryDecomposition("spectrum match ambiguous");
      accs[best].members.push_back(i);
    } else {
      if (best >= 0 && best_dist < 5.0 * match_thr)
        throw RetryDecomposition("spectrum match ambiguous");
      accs.push_back({a.D, a.spec, {i}});
    }
  }

  // canonical class order: (D ascending, spectrum lexicographic)
  std::vector<Index> order(accs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index x, Index y) {
    if (accs[x].D != accs[y].D) return accs[x].D < accs[y].D;
    for (Index k = 0; k < accs[x].D; ++k) {
      if (accs[x].spec(k) != accs[y].spec(k)) return accs[x].spec(k) < accs[y].spec(k);
    }
    return false;
  });

  out.classes.clear();
  out.sectors.clear();
  int id = 0;
  for (Index oi : order) {
    const auto& acc = accs[oi];
    KrylovClass cls;
    cls.lambda_id = id++;
    cls.D = acc.D;
    cls.d = static_cast<Index>(acc.members.size());
    cls.real = std::is_same_v<Mat, MatR>;
    cls.spectrum = acc.spec;
    Mat basis(dim, cls.d * cls.D);
    for (Index m = 0; m < cls.d; ++m) {
      basis.middleCols(m * cls.D, cls.D) = aligned[acc.members[m]].basis;
      cls.seeds.push_back(aligned[acc.members[m]].seed);
    }
    if constexpr (std::is_same_v<Mat, MatR>)
      cls.basis_r = std::move(basis);
    else
      cls.basis_cx = std::move(basis);
    out.classes.push_back(std::move(cls));
  }
}

template <class Mat>
Eigen::Ref<const Mat> class_basis(const KrylovClass& cls);
template <>
inline Eigen::Ref<const MatR> class_basis<MatR>(const KrylovClass& cls) {
  return cls.basis_r;
}
template <>
inline Eigen::Ref<const MatC> class_basis<MatC>(const KrylovClass& cls) {
  return cls.basis_cx;
}
template <class Mat>
Mat& class_basis_mut(KrylovClass& cls);
template <>
inline MatR& class_basis_mut<MatR>(KrylovClass& cls) {
  return cls.basis_r;
}
template <>
inline MatC& class_basis_mut<MatC>(KrylovClass& cls) {
  return cls.basis_cx;
}

// Fix the relative gauge of the copies in each class so that B_i B_0^+
// intertwines, using the restricted blocks of a second random element; then
// verify invariance and commutation.  Throws RetryDecomposition if the gauge
// cannot be fixed or residuals exceed tolerance.
template <class Mat>
void align_and_verify(const std::vector<PreparedTerm<Mat>>& terms, int n_sites, const VecR& c_gauge,
                      const DecomposeOptions& opts, KrylovDecomposition& out) {
  using Scalar = typename Mat::Scalar;
  const Index dim = pow3(n_sites);
  double max_inv = 0.0, max_comm = 0.0;

  for (auto& cls : out.classes) {
    Mat& basis = class_basis_mut<Mat>(cls);
    const Index D = cls.D, d = cls.d;

    if (D > 1 && d > 1) {
      Mat GB = apply_combo<Mat>(terms, c_gauge, basis, n_sites);
      std::vector<Mat> M(d);
      for (Index i = 0; i < d; ++i)
        M[i] = basis.middleCols(i * D, D).adjoint() * GB.middleCols(i * D, D);

      // phase/sign assignment spanning the index graph of M[0], largest
      // entries first
      std::vector<std::tuple<double, Index, Index>> edges;
      for (Index a = 0; a < D; ++a)
        for (Index b = a + 1; b < D; ++b)
          edges.emplace_back(std::abs(M[0](a, b)), a, b);
      std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
        return std::get<0>(x) > std::get<0>(y);
      });

      for (Index i = 1; i < d; ++i) {
        std::vector<Scalar> phase(D, Scalar(0));
        phase[0] = Scalar(1);
        Index assigned = 1;
        bool progress = true;
        while (assigned < D && progress) {
          progress = false;
          for (const auto& [mag, a, b] : edges) {
            if (mag < 1e-8) break;
            const bool ha = phase[a] != Scalar(0), hb = phase[b] != Scalar(0);
            if (ha == hb) continue;
            const Scalar ratio = M[0](a, b) / M[i](a, b);
            Scalar u;
            if constexpr (std::is_same_v<Scalar, double>)
              u = ratio >= 0 ? 1.0 : -1.0;
            else
              u = ratio / std::abs(ratio);
            // M_i'(a,b) = conj(phase_a) phase_b M_i(a,b) must equal M_0(a,b)
            if (ha)
              phase[b] = phase[a] * u;
            else
              phase[a] = phase[b] * (Scalar(1) / u);
            ++assigned;
            progress = true;
          }
        }
        if (assigned < D) throw RetryDecomposition("gauge graph disconnected");
        for (Index k = 0; k < D; ++k) basis.middleCols(i * D, D).col(k) *= phase[k];
      }
    }

    // verification: invariance of every copy and commutation of the
    // intertwiners with every generator.  With R_i = g B_i - B_i X_i the
    // commutator norm splits exactly (residuals are orthogonal to the copies):
    //   ||[B_i B_0^+, g]||_F^2 = ||X_i - X_0||^2 + ||R_i||^2 + ||R_0||^2
    for (const auto& t : terms) {
      std::vector<PreparedTerm<Mat>> one{t};
      VecR cone = VecR::Ones(1);
      Mat GB = apply_combo<Mat>(one, cone, basis, n_sites);
      std::vector<Mat> X(d);
      std::vector<double> rn(d);
      for (Index i = 0; i < d; ++i) {
        auto Bi = basis.middleCols(i * D, D);
        auto Pi = GB.middleCols(i * D, D);
        X[i] = Bi.adjoint() * Pi;
        rn[i] = (Pi - Bi * X[i]).norm();
        max_inv = std::max(max_inv, rn[i]);
      }
      for (Index i = 1; i < d; ++i) {
        const double c2 = (X[i] - X[0]).squaredNorm() + rn[i] * rn[i] + rn[0] * rn[0];
        max_comm = std::max(max_comm, std::sqrt(c2));
      }
    }
  }

  if (std::max(max_inv, max_comm) > opts.verify_tol)
    throw RetryDecomposition("intertwiner verification failed: inv=" + std::to_string(max_inv) +
                             " comm=" + std::to_string(max_comm));
  out.invariance_defect = max_inv;
  out.intertwiner_defect = max_comm;
}

template <class Mat>
KrylovDecomposition decompose_path(const std::vector<PreparedTerm<Mat>>& terms, int n_sites,
                                   Rng& rng, const DecomposeOptions& opts) {
  KrylovDecomposition out;
  out.n_sites = n_sites;
  out.dim = pow3(n_sites);
  out.abelian = false;

  std::string last;
  for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
    VecR c_probe(terms.size()), c_gauge(terms.size());
    for (Index j = 0; j < c_probe.size(); ++j) c_probe(j) = rng.normal();
    for (Index j = 0; j < c_gauge.size(); ++j) c_gauge(j) = rng.normal();
    try {
      decompose_attempt(terms, n_sites, c_probe, opts, out);
      align_and_verify(terms, n_sites, c_gauge, opts, out);
      out.retries_used = attempt;
      return out;
    } catch (const RetryDecomposition& e) {
      last = e.what();
    }
  }
  throw InvariantError("krylov_decompose_numerical: retries exhausted (" + last + ")");
}

}  // namespace detail

// Decompose the Hilbert space into irreducible invariant subspaces of the
// algebra generated by `generators` (Hermitian local terms, independent
// coefficients).  N <= 8.
inline KrylovDecomposition krylov_decompose_numerical(const std::vector<LocalTerm>& generators,
                                                      int n_sites, Rng& rng,
                                                      const DecomposeOptions& opts = {}) {
  if (n_sites < 2 || n_sites > 8)
    throw ConfigError("krylov_decompose_numerical: N must be in [2,8]");
  if (generators.empty()) throw ConfigError("krylov_decompose_numerical: no generators");
  bool real = true;
  for (const auto& g : generators) {
    if (herm_defect(g.op) > 1e-12) throw ConfigError("generators must be Hermitian");
    if (g.op.imag().cwiseAbs().maxCoeff() > 0.0) real = false;
  }
  if (real) {
    std::vector<detail::PreparedTerm<MatR>> terms;
    for (const auto& g : generators) terms.push_back({g.site, g.op.real()});
    return detail::decompose_path(terms, n_sites, rng, opts);
  }
  std::vector<detail::PreparedTerm<MatC>> terms;
  for (const auto& g : generators) terms.push_back({g.site, g.op});
  return detail::decompose_path(terms, n_sites, rng, opts);
}

// Decomposition of the joint algebra of Hamiltonian terms and (Hermitian)
// jump operators: the invariant structure that survives the open dynamics.
inline KrylovDecomposition open_bond_decomposition(const std::vector<LocalTerm>& h_terms,
                                                   const std::vector<LocalTerm>& jump_terms,
                                                   int n_sites, Rng& rng,
                                                   const DecomposeOptions& opts = {}) {
  for (const auto& j : jump_terms)
    if (herm_defect(j.op) > 1e-12)
      throw ConfigError("open_bond_decomposition: non-Hermitian jump operator");
  std::vector<LocalTerm> all = h_terms;
  all.insert(all.end(), jump_terms.begin(), jump_terms.end());
  return krylov_decompose_numerical(all, n_sites, rng, opts);
}

// Dense basis of an abelian sector (unit columns).
inline MatR sector_basis(const KrylovDecomposition& dec, Index class_id) {
  if (!dec.abelian) throw ConfigError("sector_basis: decomposition is not abelian");
  const auto& idxs = dec.sectors[class_id];
  MatR B = MatR::Zero(dec.dim, static_cast<Index>(idxs.size()));
  for (Index k = 0; k < static_cast<Index>(idxs.size()); ++k) B(idxs[k], k) = 1.0;
  return B;
}

// Explicit orthonormality + resolution-of-identity defect (small N).
inline double resolution_defect(const KrylovDecomposition& dec) {
  if (dec.abelian) {
    std::vector<char> seen(dec.dim, 0);
    for (const auto& s : dec.sectors)
      for (Index i : s) seen[i]++;
    for (Index i = 0; i < dec.dim; ++i)
      if (seen[i] != 1) return 1.0;
    return 0.0;
  }
  MatC all(dec.dim, dec.check_sum());
  Index at = 0;
  for (const auto& c : dec.classes) {
    all.middleCols(at, c.d * c.D) = c.basis();
    at += c.d * c.D;
  }
  if (at != dec.dim) return static_cast<double>(std::abs(at - dec.dim));
  return (all.adjoint() * all - MatC::Identity(dec.dim, dec.dim)).cwiseAbs().maxCoeff();
}

}  // namespace frag
