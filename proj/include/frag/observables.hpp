#pragma once
// Measurement layer: infinite-temperature autocorrelators, Mazur bounds
// (closed-form per decomposition and the general correlation-matrix form),
// logarithmic negativity, and operator-space entanglement with its
// number/residual split.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "frag/dynamics.hpp"

namespace frag {

// ---- autocorrelation --------------------------------------------------------

struct CorrelatorSeries {
  std::vector<int> times;
  std::vector<double> values;     // <O(t) O(0)>; disconnected part removed up front
  std::vector<double> variances;  // variance of the mean (typicality estimator; 0 when exact)
};

enum class CorrelatorMode { closed_typicality, open_heisenberg };

namespace detail {

// gather/gemm/scatter application of a local operator to a state vector
inline void apply_local_state(VecC& psi, const MatC& op, int site, int n_sites) {
  const int w = op.rows() == 9 ? 2 : 1;
  const Index P = pow3(site - 1);
  const Index R = pow3(n_sites - site - (w - 1));
  const Index L = op.rows();
  const Index M = P * R;
  MatC t(L, M);
  for (Index p = 0; p < P; ++p)
    for (Index a = 0; a < L; ++a)
      t.row(a).segment(p * R, R) = psi.segment(p * L * R + a * R, R).transpose();
  const MatC u = op * t;
  for (Index p = 0; p < P; ++p)
    for (Index a = 0; a < L; ++a)
      psi.segment(p * L * R + a * R, R) = u.row(a).segment(p * R, R).transpose();
}

// columnwise one-site operator on a dense real basis matrix (O * B)
inline MatR apply_one_site_cols(const MatR& B, const MatR& op3, int site, int n_sites) {
  const Index P = pow3(site - 1);
  const Index R = pow3(n_sites - site);
  MatR out(B.rows(), B.cols());
  for (Index p = 0; p < P; ++p)
    for (Index a = 0; a < 3; ++a) {
      auto dst = out.middleRows(p * 3 * R + a * R, R);
      dst.setZero();
      for (Index b = 0; b < 3; ++b)
        if (op3(a, b) != 0.0) dst += op3(a, b) * B.middleRows(p * 3 * R + b * R, R);
    }
  return out;
}

// Tr(X * embed(op, site)) without forming the embedded operator
inline cx trace_with_local(const MatC& X, const MatC& op, int site, int n_sites) {
  const int w = op.rows() == 9 ? 2 : 1;
  const Index P = pow3(site - 1);
  const Index R = pow3(n_sites - site - (w - 1));
  const Index L = op.rows();
  cx acc = 0.0;
  for (Index p = 0; p < P; ++p)
    for (Index a = 0; a < L; ++a)
      for (Index b = 0; b < L; ++b) {
        if (op(b, a) == cx(0.0)) continue;
        acc += op(b, a) * X.block(p * L * R + a * R, p * L * R + b * R, R, R).trace();
      }
  return acc;
}

inline MatC center_observable(const MatC& op) {
  return op - (op.trace() / static_cast<double>(op.rows())) * MatC::Identity(op.rows(), op.cols());
}

inline double entropy_nats(const VecR& probs) {
  double s = 0.0;
  for (Index i = 0; i < probs.size(); ++i)
    if (probs(i) > 1e-15) s -= probs(i) * std::log(probs(i));
  return s;
}

}  // namespace detail

// Infinite-temperature autocorrelator of a local observable under the
// brick-wall circuit.  closed_typicality: gamma must be 0; Haar-state sampling
// with a shared coupling table across samples.  open_heisenberg: exact
// Tr(O(t)O)/3^N via forward evolution of the observable.
inline CorrelatorSeries autocorrelation(const LocalTerm& obs, CorrelatorMode mode,
                                        const LindbladCircuitSpec& spec, int n_samples = 20) {
  spec.validate();
  const int n = spec.n_sites;
  if (obs.site < 1 || obs.site + obs.width() - 1 > n)
    throw ConfigError("autocorrelation: observable out of range");
  if (herm_defect(obs.op) > kHermTol) throw ConfigError("autocorrelation: observable not Hermitian");
  const MatC oc = detail::center_observable(obs.op);
  const double dim = static_cast<double>(pow3(n));

  CorrelatorSeries out;
  out.times.resize(spec.n_steps + 1);
  std::iota(out.times.begin(), out.times.end(), 0);
  out.values.assign(spec.n_steps + 1, 0.0);
  out.variances.assign(spec.n_steps + 1, 0.0);

  const auto bonds = detail::step_bonds(n);
  const auto js = sample_circuit_couplings(spec);

  if (mode == CorrelatorMode::closed_typicality) {
    if (spec.gamma != 0.0)
      throw ConfigError("autocorrelation: closed mode requires gamma = 0");
    if (n_samples <= 0) throw ConfigError("autocorrelation: n_samples must be positive");
    // precompute the unitary gate of every (step, bond)
    std::vector<std::vector<MatC>> gates(spec.n_steps);
    for (int t = 0; t < spec.n_steps; ++t)
      for (std::size_t g = 0; g < bonds.size(); ++g)
        gates[t].push_back(matrix_exp(MatC(cx(0, -js[t][g]) * tl_term())));

    std::vector<std::vector<double>> samples(spec.n_steps + 1);
    for (int s = 0; s < n_samples; ++s) {
      Rng rng(spec.rng_seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(s + 1));
      VecC a = random_haar_state(n, rng).amp;
      VecC b = a;
      detail::apply_local_state(b, oc, obs.site, n);
      for (int t = 0; t <= spec.n_steps; ++t) {
        VecC ob = b;
        detail::apply_local_state(ob, oc, obs.site, n);
        samples[t].push_back((a.dot(ob)).real());
        if (t == spec.n_steps) break;
        for (std::size_t g = 0; g < bonds.size(); ++g) {
          detail::apply_local_state(a, gates[t][g], bonds[g], n);
          detail::apply_local_state(b, gates[t][g], bonds[g], n);
        }
      }
    }
    for (int t = 0; t <= spec.n_steps; ++t) {
      double mean = 0.0;
      for (double v : samples[t]) mean += v;
      mean /= n_samples;
      out.values[t] = mean;
      if (n_samples > 1) {
        double acc = 0.0;
        for (double v : samples[t]) acc += (v - mean) * (v - mean);
        out.variances[t] = acc / (static_cast<double>(n_samples) * (n_samples - 1));
      }
    }
    return out;
  }

  // open_heisenberg: C(t) = Tr(O Phi_t(...Phi_1(O)))/3^N, one forward pass
  if (n > 8) throw ConfigError("autocorrelation: open mode needs N <= 8 (dense operator)");
  MatC x = embed_local(oc, obs.site, n);
  out.values[0] = detail::trace_with_local(x, oc, obs.site, n).real() / dim;
  for (int t = 0; t < spec.n_steps; ++t) {
    for (std::size_t g = 0; g < bonds.size(); ++g) {
      const Superoperator gate = liouvillian_gate(
          tl_term(), gate_jumps(spec.channel, bonds[g], n, spec.weighting), js[t][g], spec.gamma);
      detail::apply_two_site_superop(x, gate.mat, bonds[g], n);
    }
    out.values[t + 1] = detail::trace_with_local(x, oc, obs.site, n).real() / dim;
  }
  return out;
}

// Arithmetic mean over the final `window` recorded values.
inline double saturation_value(const CorrelatorSeries& series, int window = 100) {
  if (series.values.empty()) throw ConfigError("saturation_value: empty series");
  const int n = static_cast<int>(series.values.size());
  const int w = std::min(window, n);
  double acc = 0.0;
  for (int i = n - w; i < n; ++i) acc += series.values[i];
  return acc / w;
}

// ---- Mazur bounds -----------------------------------------------------------

// Abelian (sector-projector) bound: (1/3^N) sum_a [Tr(Pi_a O)]^2 / D_a.
inline double mazur_bound_pf(const MatC& O, const KrylovDecomposition& dec) {
  if (!dec.abelian) throw ConfigError("mazur_bound_pf: decomposition is not abelian");
  double m = 0.0;
  for (const auto& sector : dec.sectors) {
    double tr = 0.0;
    for (Index i : sector) tr += O(i, i).real();
    m += tr * tr / static_cast<double>(sector.size());
  }
  return m / static_cast<double>(dec.dim);
}

// Same bound for a diagonal observable given by its diagonal (large N).
inline double mazur_bound_pf(const VecR& diag, const KrylovDecomposition& dec) {
  if (!dec.abelian) throw ConfigError("mazur_bound_pf: decomposition is not abelian");
  if (diag.size() != dec.dim) throw ConfigError("mazur_bound_pf: diagonal size mismatch");
  double m = 0.0;
  for (const auto& sector : dec.sectors) {
    double tr = 0.0;
    for (Index i : sector) tr += diag(i);
    m += tr * tr / static_cast<double>(sector.size());
  }
  return m / static_cast<double>(dec.dim);
}

// Non-abelian bound over projectors and intertwiners:
// (1/3^N) sum_lambda sum_{a,b} |Tr(Pi^lambda_ab O)|^2 / D_lambda.
inline double mazur_bound_tl(const MatC& O, const KrylovDecomposition& dec) {
  if (dec.abelian) return mazur_bound_pf(O, dec);
  double m = 0.0;
  for (const auto& cls : dec.classes) {
    const MatC ob = O * cls.basis();
    const MatC b = cls.basis();
    for (Index a = 0; a < cls.d; ++a)
      for (Index c = 0; c < cls.d; ++c) {
        cx tr = 0.0;
        for (Index k = 0; k < cls.D; ++k)
          tr += b.col(a * cls.D + k).dot(ob.col(c * cls.D + k));
        m += std::norm(tr) / static_cast<double>(cls.D);
      }
  }
  return m / static_cast<double>(dec.dim);
}

// One-site observable fast path (real bases stay in real arithmetic; N = 8).
inline double mazur_bound_tl(const LocalTerm& obs, const KrylovDecomposition& dec) {
  if (obs.width() != 1) throw ConfigError("mazur_bound_tl: one-site observable expected");
  if (dec.abelian || !std::all_of(dec.classes.begin(), dec.classes.end(),
                                  [](const KrylovClass& c) { return c.real; }) ||
      obs.op.imag().cwiseAbs().maxCoeff() > 0.0)
    return mazur_bound_tl(embed_local(obs.op, obs.site, dec.n_sites), dec);
  const MatR op3 = obs.op.real();
  double m = 0.0;
  for (const auto& cls : dec.classes) {
    const MatR ob = detail::apply_one_site_cols(cls.basis_r, op3, obs.site, dec.n_sites);
    for (Index a = 0; a < cls.d; ++a)
      for (Index c = 0; c < cls.d; ++c) {
        double tr = 0.0;
        for (Index k = 0; k < cls.D; ++k)
          tr += cls.basis_r.col(a * cls.D + k).dot(ob.col(c * cls.D + k));
        m += tr * tr / static_cast<double>(cls.D);
      }
  }
  return m / static_cast<double>(dec.dim);
}

// General bound from an explicit conserved set: b^dag K^{-1} b with
// K_mn = <Q_m^dag Q_n>, b_m = <Q_m^dag O>, <X> = Tr(X)/3^N.  Works in real
// arithmetic when the set is real.  Tr(A^dag B) = vec(A)^dag vec(B), so K is a
// single Gram product of the stacked vectorizations.
template <typename Mat>
inline double mazur_bound_general(const Mat& O, const std::vector<Mat>& Q, int n_sites) {
  using Scalar = typename Mat::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (Q.empty()) throw ConfigError("mazur_bound_general: empty conserved set");
  const double dim = static_cast<double>(pow3(n_sites));
  const Index d2 = O.size();
  const Index m = static_cast<Index>(Q.size());
  Mat V(d2, m);
  for (Index i = 0; i < m; ++i) {
    if (Q[i].size() != d2) throw ConfigError("mazur_bound_general: operator size mismatch");
    V.col(i) = Eigen::Map<const Vec>(Q[i].data(), d2);
  }
  Mat K = (V.adjoint() * V) / dim;
  const Vec b = V.adjoint() * Eigen::Map<const Vec>(O.data(), d2) / dim;
  VecR ev;
  detail::eig_in_place(K, ev);  // K now holds the eigenvectors
  if (ev(0) <= 0.0 || ev(ev.size() - 1) / ev(0) > 1e12)
    throw ConfigError("mazur_bound_general: correlation matrix singular");
  const Vec c = K.adjoint() * b;
  double out = 0.0;
  for (Index i = 0; i < m; ++i) out += std::norm(c(i)) / ev(i);
  return out;
}

// ---- logarithmic negativity -------------------------------------------------

// Partial transpose over sites cut+1..N (site 1 is the most significant trit).
template <typename Mat>
inline Mat partial_transpose(const Mat& rho, int n_sites, int cut) {
  if (cut < 1 || cut >= n_sites) throw ConfigError("partial_transpose: cut out of range");
  const Index A = pow3(cut);
  const Index B = pow3(n_sites - cut);
  if (rho.rows() != A * B || rho.cols() != A * B)
    throw ConfigError("partial_transpose: dimension mismatch");
  Mat out(A * B, A * B);
  for (Index ia = 0; ia < A; ++ia)
    for (Index ja = 0; ja < A; ++ja)
      out.block(ia * B, ja * B, B, B) = rho.block(ia * B, ja * B, B, B).transpose();
  return out;
}

namespace detail {

inline double negativity_from_eigs(const VecR& ev) {
  double tn = 0.0;
  for (Index i = 0; i < ev.size(); ++i) tn += std::abs(ev(i));
  double v = std::log(tn);
  if (v < 0.0) {
    if (v < -1e-9) throw InvariantError("log_negativity: trace norm below 1");
    v = 0.0;
  }
  return v;
}

}  // namespace detail

// E_N = ln ||rho^{T_B}||_1 over the cut |1..cut : cut+1..N| (natural log).
inline double log_negativity(const DensityMatrix& rho, int cut) {
  const MatC pt = partial_transpose(rho.rho, rho.n_sites, cut);
  return detail::negativity_from_eigs(hermitian_eigvals(pt));
}

// Real-storage path for large stationary states.
inline double log_negativity(const MatR& rho, int n_sites, int cut) {
  MatR pt = partial_transpose(rho, n_sites, cut);
  pt = 0.5 * (pt + pt.transpose()).eval();
  VecR ev;
  detail::eig_in_place(pt, ev);
  return detail::negativity_from_eigs(ev);
}

// ---- operator-space entanglement --------------------------------------------

struct EntanglementRecord {
  int cut = 0;
  double e_n = 0.0;
  double s_op = 0.0;
  double s_num = std::numeric_limits<double>::quiet_NaN();
  double s_res = std::numeric_limits<double>::quiet_NaN();
  // |S_OP - S_num - S_res|; meaningful when the left-pattern blocks occupy
  // orthogonal right spaces (single-sector stationary states)
  double split_defect = std::numeric_limits<double>::quiet_NaN();
};

using LeftClassifier = std::function<std::string(std::int64_t word, int n_left)>;

// Schmidt entropy of vec(rho)/||rho||_F across the doubled spatial cut, plus
// the number entropy over left-pattern blocks and the residual remainder.
inline EntanglementRecord operator_entanglement(const DensityMatrix& rho, int cut,
                                                const LeftClassifier& classify = {}) {
  const int n = rho.n_sites;
  if (cut < 1 || cut >= n) throw ConfigError("operator_entanglement: cut out of range");
  const Index A = pow3(cut);
  const Index B = pow3(n - cut);
  const double fnorm = rho.rho.norm();
  if (fnorm <= 0.0) throw ConfigError("operator_entanglement: zero operator");

  // rows (iA, jA), cols (iB, jB) of the vectorized state
  MatC m(A * A, B * B);
  for (Index ia = 0; ia < A; ++ia)
    for (Index ja = 0; ja < A; ++ja)
      for (Index ib = 0; ib < B; ++ib)
        m.row(ia * A + ja).segment(ib * B, B) = rho.rho.row(ia * B + ib).segment(ja * B, B) / fnorm;

  EntanglementRecord rec;
  rec.cut = cut;
  rec.e_n = log_negativity(rho, cut);

  const bool rows_small = A <= B;
  const MatC gram = rows_small ? MatC(m * m.adjoint()) : MatC(m.adjoint() * m);
  VecR ev = hermitian_eigvals(gram);
  const double drift = std::abs(ev.sum() - 1.0);
  if (drift > 1e-8) throw InvariantError("operator_entanglement: Schmidt normalization drift");
  ev = ev.cwiseMax(0.0);
  rec.s_op = detail::entropy_nats(ev);

  auto label_of = [&](std::int64_t word) {
    return classify ? classify(word, cut) : config_pattern(word, cut);
  };
  std::map<std::string, std::vector<Index>> groups;
  for (Index ia = 0; ia < A; ++ia)
    for (Index ja = 0; ja < A; ++ja)
      groups[label_of(ia) + "|" + label_of(ja)].push_back(ia * A + ja);

  double s_num = 0.0, s_res = 0.0;
  for (const auto& [label, rows] : groups) {
    MatC blk(static_cast<Index>(rows.size()), B * B);
    for (Index r = 0; r < blk.rows(); ++r) blk.row(r) = m.row(rows[r]);
    const double w = blk.squaredNorm();
    if (w <= 1e-15) continue;
    s_num -= w * std::log(w);
    const bool small_rows = blk.rows() <= blk.cols();
    const MatC g = small_rows ? MatC(blk * blk.adjoint()) : MatC(blk.adjoint() * blk);
    VecR bev = hermitian_eigvals(g).cwiseMax(0.0) / w;
    s_res += w * detail::entropy_nats(bev);
  }
  rec.s_num = s_num;
  rec.s_res = s_res;
  rec.split_defect = std::abs(rec.s_op - rec.s_num - rec.s_res);
  return rec;
}

}  // namespace frag
