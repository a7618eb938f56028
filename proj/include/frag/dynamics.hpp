// Brick-wall Lindblad circuit: two-site dissipative gates applied on odd then
// even bonds per step, with fresh couplings per gate.  Stationary states are
// assembled analytically from a Krylov decomposition (sector weights in the
// abelian case, per-class overlap matrices in general) and cross-checked
// against the dynamics by fixed-point residuals and a block kernel census.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "frag/fragmentation.hpp"
#include "frag/hilbert.hpp"
#include "frag/models.hpp"

namespace frag {

enum class DissipatorWeighting { paper, uniform };

inline const char* weighting_name(DissipatorWeighting w) {
  return w == DissipatorWeighting::paper ? "paper" : "uniform";
}

struct LindbladCircuitSpec {
  Channel channel = Channel::dephasing;
  double gamma = 1.0;
  double j_lo = 0.8;
  double j_hi = 1.2;
  int n_steps = 0;
  std::uint64_t rng_seed = 0;
  int n_sites = 2;
  DissipatorWeighting weighting = DissipatorWeighting::paper;

  void validate() const {
    if (gamma < 0.0) throw ConfigError("LindbladCircuitSpec: gamma must be >= 0");
    if (n_steps < 0) throw ConfigError("LindbladCircuitSpec: n_steps must be >= 0");
    if (n_sites < 2 || n_sites > 8) throw ConfigError("LindbladCircuitSpec: N must be in [2,8]");
    if (j_hi < j_lo) throw ConfigError("LindbladCircuitSpec: empty coupling interval");
  }
};

struct WeightedJump {
  MatC op;        // on the 9-dim two-site space
  double weight;  // multiplies gamma inside this gate
};

// Jump operators entering the gate at `bond` (sites bond, bond+1).  With
// `uniform` weighting one-site dissipators on sites touched by two gates per
// step carry weight 1/2, so every site relaxes at rate gamma per step; with
// `paper` weighting each gate carries the full dissipator of both its sites.
inline std::vector<WeightedJump> gate_jumps(Channel channel, int bond, int n_sites,
                                            DissipatorWeighting weighting) {
  if (bond < 1 || bond >= n_sites) throw ConfigError("gate_jumps: bond out of range");
  const MatC id = MatC::Identity(3, 3);
  auto site_weight = [&](int site) {
    if (weighting == DissipatorWeighting::paper) return 1.0;
    return (site == 1 || site == n_sites) ? 1.0 : 0.5;
  };
  std::vector<WeightedJump> out;
  switch (channel) {
    case Channel::dephasing:
    case Channel::spin_flip: {
      const MatC l = channel == Channel::dephasing ? spin_z() : spin_x();
      out.push_back({Eigen::kroneckerProduct(l, id).eval(), site_weight(bond)});
      out.push_back({Eigen::kroneckerProduct(id, l).eval(), site_weight(bond + 1)});
      break;
    }
    case Channel::structure_preserving:
      out.push_back({tl_term(), 1.0});  // one bond term per gate; no double counting
      break;
  }
  return out;
}

// Two-site Lindblad generator in row-major vectorization:
//   L(rho) = -iJ[h,rho] + gamma sum_k w_k (L rho L+  - {L+L, rho}/2)
inline Superoperator liouvillian_bond(const MatC& h, const std::vector<WeightedJump>& jumps,
                                      double J, double gamma) {
  if (gamma < 0.0) throw ConfigError("liouvillian_bond: gamma must be >= 0");
  if (h.rows() != 9 || h.cols() != 9) throw ConfigError("liouvillian_bond: h must be 9x9");
  if (herm_defect(h) > kHermTol) throw InvariantError("liouvillian_bond: h not Hermitian");
  const MatC id = MatC::Identity(9, 9);
  MatC gen = cx(0.0, -J) * (Eigen::kroneckerProduct(h, id) -
                            Eigen::kroneckerProduct(id, h.transpose()));
  for (const auto& [l, w] : jumps) {
    const MatC ld_l = l.adjoint() * l;
    gen += gamma * w *
           (Eigen::kroneckerProduct(l, l.conjugate()) -
            0.5 * (Eigen::kroneckerProduct(ld_l, id) + Eigen::kroneckerProduct(id, ld_l.transpose())));
  }
  Superoperator s;
  s.n_sites = 2;
  s.mat = std::move(gen);
  return s;
}

// Gate U = exp(L).  CPTP by construction; at gamma=0 it is conjugation by
// exp(-iJh).  `adjoint` builds exp(L+) for Heisenberg-picture evolution.
inline Superoperator liouvillian_gate(const MatC& h, const std::vector<WeightedJump>& jumps,
                                      double J, double gamma, bool adjoint = false) {
  Superoperator gen = liouvillian_bond(h, jumps, J, gamma);
  if (adjoint) gen.mat = gen.mat.adjoint().eval();
  gen.mat = matrix_exp(gen.mat);
  return gen;
}

namespace detail {

// Apply an 81x81 superoperator G to the two-site block (bond, bond+1) of a
// dense operator on N sites: rho'[(p a r),(p' b r')] = sum G[(ab),(a'b')] rho.
// Gathers spectator-index columns in blocks so scratch stays bounded.
template <class Mat>
void apply_two_site_superop(Mat& rho, const Eigen::Matrix<typename Mat::Scalar, -1, -1>& G,
                            int bond, int n_sites) {
  const Index P = pow3(bond - 1);
  const Index R = pow3(n_sites - bond - 1);
  const Index M = P * R * P * R;
  const Index BS = std::min<Index>(M, Index(1) << 14);
  Eigen::Matrix<typename Mat::Scalar, -1, -1> T(81, BS), U(81, BS);
  for (Index c0 = 0; c0 < M; c0 += BS) {
    const Index bs = std::min(BS, M - c0);
    for (Index cc = 0; cc < bs; ++cc) {
      Index m = c0 + cc;
      const Index r2 = m % R; m /= R;
      const Index p2 = m % P; m /= P;
      const Index r = m % R; m /= R;
      const Index p = m;
      for (Index a = 0; a < 9; ++a)
        for (Index b = 0; b < 9; ++b)
          T(a * 9 + b, cc) = rho((p * 9 + a) * R + r, (p2 * 9 + b) * R + r2);
    }
    U.leftCols(bs).noalias() = G * T.leftCols(bs);
    for (Index cc = 0; cc < bs; ++cc) {
      Index m = c0 + cc;
      const Index r2 = m % R; m /= R;
      const Index p2 = m % P; m /= P;
      const Index r = m % R; m /= R;
      const Index p = m;
      for (Index a = 0; a < 9; ++a)
        for (Index b = 0; b < 9; ++b)
          rho((p * 9 + a) * R + r, (p2 * 9 + b) * R + r2) = U(a * 9 + b, cc);
    }
  }
}

// Gate schedule of one step: odd bonds ascending, then even bonds ascending.
// One coupling draw per gate, in this order; the classical mirror and the
// Heisenberg picture must consume the same stream to share realizations.
inline std::vector<int> step_bonds(int n_sites) {
  std::vector<int> bonds;
  for (int j = 1; j < n_sites; j += 2) bonds.push_back(j);
  for (int j = 2; j < n_sites; j += 2) bonds.push_back(j);
  return bonds;
}

}  // namespace detail

// Couplings for a full trajectory, in draw order (step-major, odd bonds then
// even bonds).  Exposed so the classical-chain mirror can share realizations.
inline std::vector<std::vector<double>> sample_circuit_couplings(const LindbladCircuitSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  const auto bonds = detail::step_bonds(spec.n_sites);
  std::vector<std::vector<double>> js(spec.n_steps, std::vector<double>(bonds.size()));
  for (auto& row : js)
    for (auto& j : row) j = rng.uniform(spec.j_lo, spec.j_hi);
  return js;
}

struct EvolveResult {
  std::vector<std::pair<int, DensityMatrix>> snapshots;  // (step, state)
  int steps_run = 0;
  bool converged = false;
  int converged_step = -1;
  double max_trace_drift = 0.0;
};

// Run the circuit on a density matrix.  Snapshots are recorded at the listed
// steps (0 = initial state); the final state is always recorded.  Stops early
// once ten consecutive steps move the state by trace distance < 1e-9.
inline EvolveResult evolve_density(const DensityMatrix& rho0, const LindbladCircuitSpec& spec,
                                   std::vector<int> record_steps = {}) {
  spec.validate();
  if (rho0.n_sites != spec.n_sites) throw ConfigError("evolve_density: N mismatch");
  rho0.validate(false);
  std::sort(record_steps.begin(), record_steps.end());

  const auto bonds = detail::step_bonds(spec.n_sites);
  Rng rng(spec.rng_seed);
  EvolveResult out;
  MatC rho = rho0.rho;
  MatC prev;
  const Index dim = rho.rows();
  const double conv_tol = 1e-9;
  int streak = 0;

  auto record = [&](int step) {
    out.snapshots.push_back({step, DensityMatrix{spec.n_sites, rho}});
  };
  if (std::binary_search(record_steps.begin(), record_steps.end(), 0)) record(0);

  int step = 0;
  for (; step < spec.n_steps; ++step) {
    prev = rho;
    for (int bond : bonds) {
      const double J = rng.uniform(spec.j_lo, spec.j_hi);
      const Superoperator gate =
          liouvillian_gate(tl_term(), gate_jumps(spec.channel, bond, spec.n_sites, spec.weighting),
                           J, spec.gamma);
      detail::apply_two_site_superop(rho, gate.mat, bond, spec.n_sites);
    }
    const double drift = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
    out.max_trace_drift = std::max(out.max_trace_drift, drift);
    if (drift > 1e-8)
      throw InvariantError("evolve_density: trace drift " + std::to_string(drift) + " at step " +
                           std::to_string(step + 1));
    if (std::binary_search(record_steps.begin(), record_steps.end(), step + 1)) record(step + 1);

    // convergence certificate: Frobenius prefilter, exact trace norm only in
    // the undecided band
    const double fro = 0.5 * (rho - prev).norm();
    bool small;
    if (fro >= conv_tol) small = false;
    else if (fro * std::sqrt(double(dim)) < conv_tol) small = true;
    else small = 0.5 * trace_norm(MatC(rho - prev)) < conv_tol;
    streak = small ? streak + 1 : 0;
    if (streak >= 10) {
      out.converged = true;
      out.converged_step = step + 1;
      ++step;
      break;
    }
  }
  out.steps_run = step;
  if (out.snapshots.empty() || out.snapshots.back().first != step) record(step);
  return out;
}

struct OperatorEvolveResult {
  std::vector<std::pair<int, MatC>> snapshots;  // (adjoint steps applied, O(t))
  int steps_run = 0;
};

// Heisenberg picture: O(t) accumulates the adjoint gates of the final t steps
// of the same trajectory evolve_density would run at this seed, consumed in
// reverse order, so Tr(O(T) rho0) = Tr(O rho(T)) realization by realization.
inline OperatorEvolveResult evolve_operator(const MatC& O, const LindbladCircuitSpec& spec,
                                            std::vector<int> record_steps = {}) {
  spec.validate();
  const Index dim = pow3(spec.n_sites);
  if (O.rows() != dim || O.cols() != dim) throw ConfigError("evolve_operator: dimension mismatch");
  if (herm_defect(O) > kHermTol) throw ConfigError("evolve_operator: O not Hermitian");
  std::sort(record_steps.begin(), record_steps.end());

  const auto bonds = detail::step_bonds(spec.n_sites);
  const auto js = sample_circuit_couplings(spec);
  OperatorEvolveResult out;
  MatC op = O;
  auto record = [&](int t) { out.snapshots.push_back({t, op}); };
  if (std::binary_search(record_steps.begin(), record_steps.end(), 0)) record(0);

  for (int t = 1; t <= spec.n_steps; ++t) {
    const auto& row = js[spec.n_steps - t];  // reverse time order
    for (Index g = static_cast<Index>(bonds.size()); g-- > 0;) {
      const int bond = bonds[g];
      const Superoperator gate =
          liouvillian_gate(tl_term(), gate_jumps(spec.channel, bond, spec.n_sites, spec.weighting),
                           row[g], spec.gamma, /*adjoint=*/true);
      detail::apply_two_site_superop(op, gate.mat, bond, spec.n_sites);
    }
    if (std::binary_search(record_steps.begin(), record_steps.end(), t)) record(t);
  }
  out.steps_run = spec.n_steps;
  if (out.snapshots.empty() || out.snapshots.back().first != spec.n_steps) record(spec.n_steps);
  return out;
}

struct StationaryState {
  DensityMatrix state;
  std::vector<double> class_weights;  // classical: c_alpha per sector
  std::vector<MatC> overlap_blocks;   // quantum: M_lambda per class
};

// rho_ss = sum_alpha c_alpha Pi_alpha / D_alpha with c_alpha = Tr(Pi_alpha rho0).
inline StationaryState stationary_state_classical(const DensityMatrix& rho0,
                                                  const KrylovDecomposition& dec) {
  if (!dec.abelian)
    for (const auto& c : dec.classes)
      if (c.d != 1) throw ConfigError("stationary_state_classical: degenerate class present");
  if (rho0.n_sites != dec.n_sites) throw ConfigError("stationary_state_classical: N mismatch");
  StationaryState out;
  VecC diag = VecC::Zero(dec.dim);
  double total = 0.0;
  if (dec.abelian) {
    for (const auto& sector : dec.sectors) {
      cx c = 0.0;
      for (Index i : sector) c += rho0.rho(i, i);
      const double w = std::max(0.0, c.real());
      out.class_weights.push_back(w);
      total += c.real();
      for (Index i : sector) diag(i) = w / static_cast<double>(sector.size());
    }
    if (std::abs(total - 1.0) > 1e-10)
      throw InvariantError("stationary_state_classical: weights sum to " + std::to_string(total));
    out.state.n_sites = dec.n_sites;
    out.state.rho = diag.asDiagonal();
    out.state.validate(false);
    return out;
  }
  // non-abelian bases with d=1: project blockwise
  MatC rho = MatC::Zero(dec.dim, dec.dim);
  for (const auto& cls : dec.classes) {
    const MatC b = cls.copy(0);
    const double w = std::max(0.0, (b.adjoint() * rho0.rho * b).trace().real());
    out.class_weights.push_back(w);
    total += w;
    rho.noalias() += (w / static_cast<double>(cls.D)) * (b * b.adjoint());
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw InvariantError("stationary_state_classical: weights sum to " + std::to_string(total));
  out.state.n_sites = dec.n_sites;
  out.state.rho = std::move(rho);
  out.state.validate(false);
  return out;
}

namespace detail {

// M_lambda(a,a') = Tr(Pi_{a'a} rho0) = tr(B_a^+ rho0 B_a'); contributions are
// assembled blockwise as B (M/D kron I_D) B^+ without materializing any Pi.
template <class Mat>
Mat assemble_stationary(const std::vector<Mat>& overlaps, const KrylovDecomposition& dec,
                        const std::vector<Mat>& bases) {
  const Index dim = dec.dim;
  Mat rho = Mat::Zero(dim, dim);
  for (std::size_t ci = 0; ci < dec.classes.size(); ++ci) {
    const auto& cls = dec.classes[ci];
    const Mat& b = bases[ci];
    const Mat& m = overlaps[ci];
    Mat mid = Mat::Zero(cls.d * cls.D, cls.d * cls.D);
    for (Index a = 0; a < cls.d; ++a)
      for (Index a2 = 0; a2 < cls.d; ++a2)
        mid.block(a * cls.D, a2 * cls.D, cls.D, cls.D) =
            (m(a, a2) / static_cast<double>(cls.D)) *
            Mat::Identity(cls.D, cls.D);
    rho.noalias() += b * mid * b.adjoint();
  }
  return rho;
}

}  // namespace detail

// rho_ss = sum_lambda sum_{aa'} (M_lambda)_{aa'} Pi_{aa'} / D_lambda.
inline StationaryState stationary_state_quantum(const DensityMatrix& rho0,
                                                const KrylovDecomposition& dec) {
  if (dec.abelian) throw ConfigError("stationary_state_quantum: needs intertwiner bases");
  if (rho0.n_sites != dec.n_sites) throw ConfigError("stationary_state_quantum: N mismatch");
  StationaryState out;
  double total = 0.0;
  std::vector<MatC> bases;
  for (const auto& cls : dec.classes) bases.push_back(cls.basis());
  for (std::size_t ci = 0; ci < dec.classes.size(); ++ci) {
    const auto& cls = dec.classes[ci];
    MatC m(cls.d, cls.d);
    for (Index a = 0; a < cls.d; ++a)
      for (Index a2 = 0; a2 < cls.d; ++a2)
        m(a, a2) = (bases[ci].middleCols(a * cls.D, cls.D).adjoint() * rho0.rho *
                    bases[ci].middleCols(a2 * cls.D, cls.D))
                       .trace();
    if (herm_defect(m) > 1e-8)
      throw InvariantError("stationary_state_quantum: overlap block not Hermitian");
    m = 0.5 * (m + m.adjoint().eval());
    const VecR ev = hermitian_eigvals(m);
    if (ev(0) < kPsdFloor)
      throw InvariantError("stationary_state_quantum: overlap block not PSD (bad gauge?)");
    total += m.trace().real();
    out.overlap_blocks.push_back(std::move(m));
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw InvariantError("stationary_state_quantum: block traces sum to " + std::to_string(total));
  out.state.n_sites = dec.n_sites;
  out.state.rho = detail::assemble_stationary<MatC>(out.overlap_blocks, dec, bases);
  out.state.validate(false);
  return out;
}

// Real fast path for large N: pure initial state, real decomposition bases.
// Returns the real stationary density; overlap blocks via per-copy vectors.
inline MatR stationary_density_real(const VecR& psi0, const KrylovDecomposition& dec) {
  if (dec.abelian) throw ConfigError("stationary_density_real: needs intertwiner bases");
  bool real = true;
  for (const auto& c : dec.classes) real = real && c.real;
  if (!real) throw ConfigError("stationary_density_real: decomposition basis is complex");
  if (psi0.size() != dec.dim) throw ConfigError("stationary_density_real: dimension mismatch");
  MatR rho = MatR::Zero(dec.dim, dec.dim);
  double total = 0.0;
  for (const auto& cls : dec.classes) {
    // u_a = B_a^T psi; M(a,a') = u_{a'} . u_a
    MatR u(cls.D, cls.d);
    for (Index a = 0; a < cls.d; ++a) u.col(a) = cls.copy_r(a).transpose() * psi0;
    MatR m = u.transpose() * u;
    total += m.trace();
    // rho += sum_{a,a'} m(a,a')/D * B_a B_{a'}^T  computed as (B (m/D kron I)) B^T
    MatR mid(cls.d * cls.D, cls.d * cls.D);
    mid.setZero();
    for (Index a = 0; a < cls.d; ++a)
      for (Index a2 = 0; a2 < cls.d; ++a2)
        mid.block(a * cls.D, a2 * cls.D, cls.D, cls.D) =
            (m(a, a2) / static_cast<double>(cls.D)) * MatR::Identity(cls.D, cls.D);
    rho.noalias() += cls.basis_r * mid * cls.basis_r.transpose();
  }
  if (std::abs(total - 1.0) > 1e-8)
    throw InvariantError("stationary_density_real: block traces sum to " + std::to_string(total));
  return rho;
}

// Image of an observable under the infinite-time dissipative projection.
enum class StationaryMode { classical, quantum };

inline MatC stationary_operator(const MatC& O, const KrylovDecomposition& dec,
                                StationaryMode mode) {
  const Index dim = dec.dim;
  if (O.rows() != dim || O.cols() != dim) throw ConfigError("stationary_operator: dim mismatch");
  if (herm_defect(O) > kHermTol) throw ConfigError("stationary_operator: O not Hermitian");
  MatC out = MatC::Zero(dim, dim);
  if (mode == StationaryMode::classical) {
    if (dec.abelian) {
      for (const auto& sector : dec.sectors) {
        cx tr = 0.0;
        for (Index i : sector) tr += O(i, i);
        for (Index i : sector) out(i, i) = tr / static_cast<double>(sector.size());
      }
      return out;
    }
    for (const auto& cls : dec.classes)
      for (Index a = 0; a < cls.d; ++a) {
        const MatC b = cls.copy(a);
        const cx tr = (b.adjoint() * O * b).trace();
        out.noalias() += (tr / static_cast<double>(cls.D)) * (b * b.adjoint());
      }
    return out;
  }
  if (dec.abelian) throw ConfigError("stationary_operator: quantum mode needs intertwiners");
  for (const auto& cls : dec.classes) {
    const MatC b = cls.basis();
    MatC m(cls.d, cls.d);
    for (Index a = 0; a < cls.d; ++a)
      for (Index a2 = 0; a2 < cls.d; ++a2)
        m(a, a2) =
            (b.middleCols(a * cls.D, cls.D).adjoint() * O * b.middleCols(a2 * cls.D, cls.D)).trace();
    MatC mid = MatC::Zero(cls.d * cls.D, cls.d * cls.D);
    for (Index a = 0; a < cls.d; ++a)
      for (Index a2 = 0; a2 < cls.d; ++a2)
        mid.block(a * cls.D, a2 * cls.D, cls.D, cls.D) =
            (m(a, a2) / static_cast<double>(cls.D)) * MatC::Identity(cls.D, cls.D);
    out.noalias() += b * mid * b.adjoint();
  }
  return out;
}

// Max Frobenius norm of the per-bond generator applied to rho at J=1; the
// stationary states commute with every local term, so this vanishes bondwise.
inline double lindblad_residual(const DensityMatrix& rho, Channel channel, double gamma,
                                int n_sites, DissipatorWeighting weighting) {
  double worst = 0.0;
  for (int bond = 1; bond < n_sites; ++bond) {
    const Superoperator gen =
        liouvillian_bond(tl_term(), gate_jumps(channel, bond, n_sites, weighting), 1.0, gamma);
    MatC work = rho.rho;
    detail::apply_two_site_superop(work, gen.mat, bond, n_sites);
    worst = std::max(worst, work.norm());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// steady-structure verification (small N): restrict the circuit-averaged
// generator to the blocks B_{aa'} spanned by |b_a,k><b_a',l| and count kernel
// dimensions; the unique-fixed-point statement is kernel 1 on diagonal and
// same-class blocks, kernel 0 across classes.

struct BlockKernelRecord {
  Index class_a = 0, copy_a = 0, class_b = 0, copy_b = 0;
  Index block_dim = 0;
  Index kernel_dim = 0;
};

struct SteadyStructureReport {
  std::vector<BlockKernelRecord> blocks;
  bool census_ok = true;          // kernel pattern matches the convex-set argument
  bool spectrum_computed = false;
  double max_re_lambda = 0.0;     // over the full generator spectrum
  double biorth_defect = 0.0;     // max |Tr(sigma_m+ rho_n) - delta_mn|
  Index n_defective = 0;          // eigenvalue groups with ill-conditioned pairing
};

namespace detail {

// out += c * A kron B in the row-major superoperator convention.
inline void kron_acc(MatC& out, const MatC& A, const MatC& B, cx c) {
  const Index d = A.rows();
  for (Index k = 0; k < d; ++k)
    for (Index l = 0; l < d; ++l) {
      for (Index i = 0; i < d; ++i) {
        const cx aik = A(i, k);
        if (aik == cx(0, 0)) continue;
        for (Index j = 0; j < d; ++j) out(i * d + j, k * d + l) += c * aik * B(j, l);
      }
    }
}

inline MatC full_generator(Channel channel, double gamma, int n_sites,
                           DissipatorWeighting weighting, double J) {
  const Index dim = pow3(n_sites);
  MatC gen = MatC::Zero(dim * dim, dim * dim);
  const MatC id = MatC::Identity(dim, dim);
  for (int bond = 1; bond < n_sites; ++bond) {
    const MatC h = embed_local(tl_term(), bond, n_sites);
    kron_acc(gen, h, id, cx(0.0, -J));
    kron_acc(gen, id, h.transpose(), cx(0.0, J));
    for (const auto& [l9, w] : gate_jumps(channel, bond, n_sites, weighting)) {
      const MatC l = embed_local(l9, bond, n_sites);
      const MatC ldl = l.adjoint() * l;
      kron_acc(gen, l, l.conjugate(), gamma * w);
      kron_acc(gen, ldl, id, -0.5 * gamma * w);
      kron_acc(gen, id, ldl.transpose(), -0.5 * gamma * w);
    }
  }
  return gen;
}

}  // namespace detail

inline SteadyStructureReport verify_steady_structure(const KrylovDecomposition& dec,
                                                     const LindbladCircuitSpec& spec,
                                                     bool with_spectrum = true) {
  spec.validate();
  if (spec.n_sites > 4)
    throw ConfigError("verify_steady_structure: full superoperator needs N <= 4");
  if (dec.n_sites != spec.n_sites) throw ConfigError("verify_steady_structure: N mismatch");
  const Index dim = dec.dim;
  const MatC gen = detail::full_generator(spec.channel, spec.gamma, spec.n_sites, spec.weighting,
                                          /*J=*/1.0);

  // enumerate subspaces as (class, copy) with their bases
  std::vector<std::pair<std::pair<Index, Index>, MatC>> subs;
  if (dec.abelian) {
    for (std::size_t s = 0; s < dec.sectors.size(); ++s)
      subs.push_back({{static_cast<Index>(s), 0}, sector_basis(dec, s).cast<cx>()});
  } else {
    for (std::size_t c = 0; c < dec.classes.size(); ++c)
      for (Index a = 0; a < dec.classes[c].d; ++a)
        subs.push_back({{static_cast<Index>(c), a}, dec.classes[c].copy(a)});
  }

  SteadyStructureReport rep;
  const double scale = std::max(1.0, gen.cwiseAbs().maxCoeff());
  for (const auto& [ia, ba] : subs)
    for (const auto& [ib, bb] : subs) {
      const Index da = ba.cols(), db = bb.cols();
      MatC t(dim * dim, da * db);
      for (Index k = 0; k < da; ++k)
        for (Index l = 0; l < db; ++l) {
          // vec(|a_k><b_l|) = a_k kron conj(b_l)
          for (Index i = 0; i < dim; ++i)
            t.col(k * db + l).segment(i * dim, dim) = ba(i, k) * bb.col(l).conjugate();
        }
      const MatC x = t.adjoint() * gen * t;
      Eigen::ComplexEigenSolver<MatC> es(x, false);
      Index kdim = 0;
      for (Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i)) <= 1e-9 * scale) ++kdim;
      BlockKernelRecord rec{ia.first, ia.second, ib.first, ib.second, da * db, kdim};
      rep.blocks.push_back(rec);
      const bool same_sub = ia == ib;
      const bool same_class = ia.first == ib.first;
      const Index expect = (same_sub || same_class) ? 1 : 0;
      if (kdim != expect) rep.census_ok = false;
    }

  if (with_spectrum) {
    const MatC& m = gen;
    const Index n = m.rows();
    Eigen::ComplexEigenSolver<MatC> es(m, true);
    if (es.info() != Eigen::Success)
      throw InvariantError("verify_steady_structure: eigensolver failed");
    rep.spectrum_computed = true;
    rep.max_re_lambda = es.eigenvalues().real().maxCoeff();

    // The left system sigma_m^dag = rows of V^-1 is biorthonormal to V by
    // construction; it consists of genuine left eigenvectors iff V^-1 m V is
    // diagonal, so the reported defect folds in the off-diagonal remainder.
    // Clusters whose right eigenvectors are nearly dependent (Jordan
    // structure) are counted instead of asserted.
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto key = [&](Index a) {
      const cx v = es.eigenvalues()(a);
      return std::make_pair(v.real(), v.imag());
    };
    std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return key(a) < key(b); });
    MatC V(n, n);
    VecC lam(n);
    for (Index i = 0; i < n; ++i) {
      V.col(i) = es.eigenvectors().col(idx[i]);
      lam(i) = es.eigenvalues()(idx[i]);
    }
    const double lscale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    const double gtol = 1e-8 * lscale;
    Index at = 0;
    while (at < n) {
      Index end = at + 1;
      while (end < n && std::abs(lam(end) - lam(end - 1)) <= gtol) ++end;
      const Index g = end - at;
      if (g > 1) {
        Eigen::JacobiSVD<MatC> svd(V.middleCols(at, g));
        if (svd.singularValues()(g - 1) < 1e-10 * svd.singularValues()(0)) ++rep.n_defective;
      }
      at = end;
    }
    if (rep.n_defective == 0) {
      const MatC Vi = V.partialPivLu().inverse();
      const double gram = (Vi * V - MatC::Identity(n, n)).cwiseAbs().maxCoeff();
      MatC y = Vi * m * V;
      y.diagonal().setZero();
      rep.biorth_defect = std::max(gram, y.cwiseAbs().maxCoeff() / lscale);
    }
  }
  return rep;
}

}  // namespace frag
