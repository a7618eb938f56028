#pragma once
// Model definitions for the three-color spin-1 chains: on-site spin matrices,
// the two-site pair-exchange building blocks, Hamiltonian assembly, jump
// operators for the three noise channels, and coupling disorder.

#include <map>
#include <string>
#include <vector>

#include "frag/hilbert.hpp"

namespace frag {

// ---- local operators --------------------------------------------------------

inline MatC spin_z() {
  MatC s = MatC::Zero(3, 3);
  s(0, 0) = 1.0;
  s(2, 2) = -1.0;
  return s;
}

inline MatC spin_x() {
  MatC s = MatC::Zero(3, 3);
  const double v = 1.0 / std::sqrt(2.0);
  s(0, 1) = s(1, 0) = s(1, 2) = s(2, 1) = v;
  return s;
}

// |dimer> = (|++> + |00> + |-->)/sqrt(3) on two sites
inline VecC dimer_state() {
  VecC d = VecC::Zero(9);
  d(0) = d(4) = d(8) = 1.0 / std::sqrt(3.0);
  return d;
}

// Rank-1 projector |dimer><dimer| (trace 1).
inline MatC tl_projector() { return dimer_state() * dimer_state().adjoint(); }

// Two-site pair-exchange operator sum_{ab} |aa><bb| = 3 |dimer><dimer|.
// This is the normalization used in Hamiltonians and jump operators; the
// trace-1 projector above is the same operator divided by 3.
inline MatC tl_term() { return 3.0 * tl_projector(); }

// ---- Hamiltonian ------------------------------------------------------------

// One Hamiltonian or jump term acting on `width()` consecutive sites starting
// at 1-based `site`.
struct LocalTerm {
  int site = 1;
  MatC op;

  int width() const { return op.rows() == 9 ? 2 : 1; }
};

// Pair-exchange couplings g_j^{ab} (bond j, color pair ab, symmetric in ab)
// and on-site fields l_j^a.
struct PFCouplings {
  std::vector<Eigen::Matrix3d> g;  // size N-1
  std::vector<Eigen::Vector3d> l;  // size N

  static PFCouplings uniform(int n_sites, double g0 = 1.0, double l0 = 0.0) {
    PFCouplings c;
    c.g.assign(n_sites - 1, Eigen::Matrix3d::Constant(g0));
    c.l.assign(n_sites, Eigen::Vector3d::Constant(l0));
    return c;
  }
};

// H = sum_j sum_{ab} g_j^{ab} |aa><bb|_{j,j+1} + sum_j sum_a l_j^a |a><a|_j,
// returned as local terms (bond terms first, then fields).
inline std::vector<LocalTerm> pf_hamiltonian(const PFCouplings& c, int n_sites) {
  if (static_cast<int>(c.g.size()) != n_sites - 1 || static_cast<int>(c.l.size()) != n_sites)
    throw ConfigError("pf_hamiltonian: coupling table sizes do not match N");
  std::vector<LocalTerm> terms;
  for (int j = 1; j < n_sites; ++j) {
    const Eigen::Matrix3d& g = c.g[j - 1];
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-14)
      throw ConfigError("pf_hamiltonian: g_j must be symmetric in the color pair");
    MatC op = MatC::Zero(9, 9);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) op(a * 3 + a, b * 3 + b) = g(a, b);
    terms.push_back({j, op});
  }
  for (int j = 1; j <= n_sites; ++j) {
    if (c.l[j - 1].cwiseAbs().maxCoeff() == 0.0) continue;
    MatC op = MatC::Zero(3, 3);
    for (int a = 0; a < 3; ++a) op(a, a) = c.l[j - 1](a);
    terms.push_back({j, op});
  }
  return terms;
}

// Dense Hamiltonian from local terms (small N only).
inline MatC assemble_dense(const std::vector<LocalTerm>& terms, int n_sites) {
  const Index dim = pow3(n_sites);
  MatC H = MatC::Zero(dim, dim);
  for (const auto& t : terms) add_embedded(H, t.op, t.site, n_sites, cx(1.0));
  return H;
}

// ---- noise channels ---------------------------------------------------------

enum class Channel { dephasing, structure_preserving, spin_flip };

inline std::string channel_name(Channel c) {
  switch (c) {
    case Channel::dephasing: return "dephasing";
    case Channel::structure_preserving: return "structure_preserving";
    case Channel::spin_flip: return "spin_flip";
  }
  throw FragError("unreachable");
}

inline Channel parse_channel(const std::string& s) {
  if (s == "dephasing") return Channel::dephasing;
  if (s == "structure_preserving") return Channel::structure_preserving;
  if (s == "spin_flip") return Channel::spin_flip;
  throw ConfigError("unknown channel '" + s + "'");
}

// Jump operators: S^z_j on every site (dephasing), the pair-exchange operator
// on every bond (structure_preserving), S^x_j on every site (spin_flip).
inline std::vector<LocalTerm> jump_operators(Channel c, int n_sites) {
  std::vector<LocalTerm> terms;
  switch (c) {
    case Channel::dephasing:
      for (int j = 1; j <= n_sites; ++j) terms.push_back({j, spin_z()});
      break;
    case Channel::structure_preserving:
      for (int j = 1; j < n_sites; ++j) terms.push_back({j, tl_term()});
      break;
    case Channel::spin_flip:
      for (int j = 1; j <= n_sites; ++j) terms.push_back({j, spin_x()});
      break;
  }
  return terms;
}

// ---- coupling disorder ------------------------------------------------------

// n independent draws J ~ U[lo, hi], in call order.
inline VecR sample_couplings(Rng& rng, int n, double lo = 0.8, double hi = 1.2) {
  VecR J(n);
  for (int i = 0; i < n; ++i) J(i) = rng.uniform(lo, hi);
  return J;
}

}  // namespace frag
