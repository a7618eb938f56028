#include <catch2/catch_amalgamated.hpp>

#include "frag/dynamics.hpp"

using namespace frag;

namespace {

MatC kron(const MatC& a, const MatC& b) { return Eigen::kroneckerProduct(a, b).eval(); }

// (dimer dimer) at N=4
VecC dimer_pair_state() {
  const VecC d = dimer_state();
  VecC psi = VecC::Zero(81);
  for (Index i = 0; i < 9; ++i)
    for (Index j = 0; j < 9; ++j) psi(i * 9 + j) = d(i) * d(j);
  return psi;
}

// (|dimer dimer> + |dimer>|+-> + |dimer>|-+>)/sqrt(3): nonzero overlap with
// exactly three invariant subspaces (fully paired + two degenerate one-pair copies)
VecC two_degenerate_state() {
  VecC psi = VecC::Zero(81);
  const VecC d = dimer_state();
  const double c = 1.0 / std::sqrt(3.0);
  for (Index k : {Index(0), Index(4), Index(8)}) {
    for (Index l : {Index(0), Index(4), Index(8)}) psi(k * 9 + l) += c * d(k) * d(l);
    psi(k * 9 + 2) += c * d(k);  // colors '+','-' -> 0*3+2
    psi(k * 9 + 6) += c * d(k);  // colors '-','+' -> 2*3+0
  }
  return psi;
}

LindbladCircuitSpec make_spec(Channel ch, double gamma, int n, int steps, std::uint64_t seed) {
  LindbladCircuitSpec s;
  s.channel = ch;
  s.gamma = gamma;
  s.n_sites = n;
  s.n_steps = steps;
  s.rng_seed = seed;
  return s;
}

}  // namespace

TEST_CASE("trivial gates: identity at gamma=0,h=0 and unitary conjugation") {
  const Superoperator id_gate = liouvillian_gate(MatC::Zero(9, 9), {}, 1.0, 0.0);
  REQUIRE((id_gate.mat - MatC::Identity(81, 81)).cwiseAbs().maxCoeff() < 1e-12);

  const double J = 0.93;
  const Superoperator g = liouvillian_gate(tl_term(), {}, J, 0.0);
  const MatC u = matrix_exp(MatC(cx(0, -J) * tl_term()));
  REQUIRE((g.mat - kron(u, u.conjugate())).cwiseAbs().maxCoeff() < 1e-10);

  // purity of a pure two-site state survives the unitary gate
  Rng rng(5);
  const VecC psi = random_haar_state(2, rng).amp;
  MatC rho = psi * psi.adjoint();
  detail::apply_two_site_superop(rho, g.mat, 1, 2);
  REQUIRE(std::abs((rho * rho).trace().real() - 1.0) < 1e-12);
  REQUIRE(std::abs(rho.trace().real() - 1.0) < 1e-12);
}

TEST_CASE("gates are CPTP for every channel") {
  for (Channel ch : {Channel::dephasing, Channel::structure_preserving, Channel::spin_flip}) {
    const Superoperator g = liouvillian_gate(tl_term(), gate_jumps(ch, 1, 2, DissipatorWeighting::paper),
                                             1.1, 0.8);
    const CptpReport rep = check_cptp(g);
    INFO(channel_name(ch) << " trace defect " << rep.trace_defect << " choi " << rep.choi_min_eig);
    REQUIRE(rep.trace_defect < 1e-10);
    REQUIRE(rep.choi_min_eig > -1e-9);
  }
}

TEST_CASE("pure one-site dephasing damps coherences at rate (dm)^2 gamma/2") {
  // h=0, jump S^z on site 1 only: element |m=+1><m=-1| decays by e^{-2 gamma}
  const double gamma = 3.0;
  std::vector<WeightedJump> jumps{{kron(spin_z(), MatC::Identity(3, 3)), 1.0}};
  const Superoperator g = liouvillian_gate(MatC::Zero(9, 9), jumps, 0.0, gamma);
  const Index a = 0;  // colors (+,+) -> m1=+1
  const Index b = 6;  // colors (-,+) -> m1=-1
  REQUIRE(std::abs(g.mat(a * 9 + b, a * 9 + b).real() - std::exp(-2.0 * gamma)) < 1e-12);
  // dm=1 pair decays by e^{-gamma/2}
  const Index c = 3;  // colors (0,+) -> m1=0
  REQUIRE(std::abs(g.mat(a * 9 + c, a * 9 + c).real() - std::exp(-0.5 * gamma)) < 1e-12);
  // populations untouched
  REQUIRE(std::abs(g.mat(a * 9 + a, a * 9 + a).real() - 1.0) < 1e-12);
}

TEST_CASE("uniform weighting halves interior one-site dissipators") {
  const auto paper = gate_jumps(Channel::dephasing, 2, 4, DissipatorWeighting::paper);
  const auto uni = gate_jumps(Channel::dephasing, 2, 4, DissipatorWeighting::uniform);
  REQUIRE(paper.size() == 2);
  REQUIRE(paper[0].weight == 1.0);
  REQUIRE(paper[1].weight == 1.0);
  REQUIRE(uni[0].weight == 0.5);  // site 2, interior
  REQUIRE(uni[1].weight == 0.5);  // site 3, interior
  const auto edge = gate_jumps(Channel::dephasing, 1, 4, DissipatorWeighting::uniform);
  REQUIRE(edge[0].weight == 1.0);  // site 1, boundary
  REQUIRE(edge[1].weight == 0.5);
  // two-site jump never double-counts
  REQUIRE(gate_jumps(Channel::structure_preserving, 2, 4, DissipatorWeighting::uniform)[0].weight ==
          1.0);
}

TEST_CASE("maximally mixed state is a fixed point of every channel") {
  for (Channel ch : {Channel::dephasing, Channel::structure_preserving, Channel::spin_flip}) {
    DensityMatrix rho0{3, MatC::Identity(27, 27) / 27.0};
    const auto res = evolve_density(rho0, make_spec(ch, 1.3, 3, 5, 11));
    REQUIRE((res.snapshots.back().second.rho - rho0.rho).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("closed evolution preserves Krylov support and purity") {
  Rng rng(21);
  const auto dec = krylov_decompose_numerical(
      {{1, tl_term()}, {2, tl_term()}, {3, tl_term()}}, 4, rng);
  const VecC psi = dimer_pair_state();
  // locate the class holding the state
  std::size_t home = dec.classes.size();
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    const MatC b = dec.classes[c].basis();
    if ((b.adjoint() * psi).norm() > 0.9) home = c;
  }
  REQUIRE(home < dec.classes.size());
  REQUIRE(dec.classes[home].D == 2);

  DensityMatrix rho0{4, psi * psi.adjoint()};
  const auto res =
      evolve_density(rho0, make_spec(Channel::structure_preserving, 0.0, 4, 30, 7), {});
  const MatC& rho_t = res.snapshots.back().second.rho;
  REQUIRE(std::abs((rho_t * rho_t).trace().real() - 1.0) < 1e-10);
  const MatC b = dec.classes[home].basis();
  REQUIRE(std::abs((b.adjoint() * rho_t * b).trace().real() - 1.0) < 1e-10);
}

TEST_CASE("conserved sector weights along noisy trajectories") {
  // dephasing at N=3: every abelian sector weight is constant
  Rng rng(33);
  const auto dec = open_bond_decomposition({{1, tl_term()}, {2, tl_term()}},
                                           jump_operators(Channel::dephasing, 3), 3, rng);
  const VecC psi = random_haar_state(3, rng).amp;
  DensityMatrix rho0{3, psi * psi.adjoint()};
  const auto res = evolve_density(rho0, make_spec(Channel::dephasing, 0.9, 3, 20, 17), {});
  const MatC& rho_t = res.snapshots.back().second.rho;
  for (std::size_t s = 0; s < dec.classes.size(); ++s) {
    const MatC b = dec.classes[s].basis();
    const double w0 = (b.adjoint() * rho0.rho * b).trace().real();
    const double wt = (b.adjoint() * rho_t * b).trace().real();
    REQUIRE(std::abs(w0 - wt) < 1e-8);
  }
}

TEST_CASE("off-diagonal intertwiner overlaps are conserved too") {
  Rng rng(41);
  const auto dec = krylov_decompose_numerical({{1, tl_term()}}, 2, rng);
  const VecC psi = random_haar_state(2, rng).amp;
  DensityMatrix rho0{2, psi * psi.adjoint()};
  const auto res =
      evolve_density(rho0, make_spec(Channel::structure_preserving, 1.1, 2, 25, 3), {});
  const MatC& rho_t = res.snapshots.back().second.rho;
  std::size_t deg = dec.classes.size();
  for (std::size_t c = 0; c < dec.classes.size(); ++c)
    if (dec.classes[c].d == 8) deg = c;
  REQUIRE(deg < dec.classes.size());
  const auto& cls = dec.classes[deg];
  for (Index a = 0; a < 3; ++a)
    for (Index b = a + 1; b < 3; ++b) {
      const cx w0 = (cls.copy(b).adjoint() * rho0.rho * cls.copy(a)).trace();
      const cx wt = (cls.copy(b).adjoint() * rho_t * cls.copy(a)).trace();
      REQUIRE(std::abs(w0 - wt) < 1e-8);
    }
}

TEST_CASE("purity is monotone under unital circuits") {
  Rng rng(55);
  const VecC psi = random_haar_state(3, rng).amp;
  DensityMatrix rho0{3, psi * psi.adjoint()};
  const auto res = evolve_density(rho0, make_spec(Channel::dephasing, 0.8, 3, 15, 29),
                                  {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
  double last = 1.0 + 1e-12;
  for (const auto& [step, dm] : res.snapshots) {
    const double p = (dm.rho * dm.rho).trace().real();
    REQUIRE(p <= last + 1e-10);
    last = p;
  }
}

TEST_CASE("dephasing kills inter-sector coherence monotonically") {
  const auto dec = enumerate_pf_krylov(4);
  const VecC psi = two_degenerate_state();
  DensityMatrix rho0{4, psi * psi.adjoint()};
  std::vector<int> rec;
  for (int t = 1; t <= 40; ++t) rec.push_back(t);
  const auto res = evolve_density(rho0, make_spec(Channel::dephasing, 1.0, 4, 40, 99), rec);

  // label each basis index with its sector
  std::vector<int> sector(81, -1);
  for (std::size_t s = 0; s < dec.sectors.size(); ++s)
    for (Index i : dec.sectors[s]) sector[i] = static_cast<int>(s);
  auto offmass = [&](const MatC& r) {
    double m = 0.0;
    for (Index i = 0; i < 81; ++i)
      for (Index j = 0; j < 81; ++j)
        if (sector[i] != sector[j]) m += std::norm(r(i, j));
    return std::sqrt(m);
  };
  REQUIRE(offmass(rho0.rho) > 0.4);  // the state starts with real inter-sector coherence
  double last = offmass(rho0.rho);
  for (const auto& [step, dm] : res.snapshots) {
    const double m = offmass(dm.rho);
    REQUIRE(m <= last + 1e-10);
    last = m;
  }
  REQUIRE(last < 1e-6);
}

TEST_CASE("Heisenberg picture: identity and conserved projectors are fixed") {
  const auto spec = make_spec(Channel::dephasing, 1.2, 2, 10, 13);
  const auto id_res = evolve_operator(MatC::Identity(9, 9), spec, {});
  REQUIRE((id_res.snapshots.back().second - MatC::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-10);

  const auto dec = enumerate_pf_krylov(2);
  const MatR b = sector_basis(dec, 0);
  const MatC proj = (b * b.transpose()).cast<cx>();
  const auto res = evolve_operator(proj, spec, {});
  REQUIRE((res.snapshots.back().second - proj).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("Schrodinger and Heisenberg pictures agree realization by realization") {
  Rng rng(83);
  for (Channel ch : {Channel::dephasing, Channel::structure_preserving}) {
    const auto spec = make_spec(ch, 0.7, 4, 7, 123);
    const VecC psi = random_haar_state(4, rng).amp;
    DensityMatrix rho0{4, psi * psi.adjoint()};
    MatC O = MatC::Random(81, 81);
    O = (O + O.adjoint()).eval();
    const auto fw = evolve_density(rho0, spec, {});
    const auto bw = evolve_operator(O, spec, {});
    const cx lhs = (bw.snapshots.back().second * rho0.rho).trace();
    const cx rhs = (O * fw.snapshots.back().second.rho).trace();
    INFO(channel_name(ch));
    REQUIRE(std::abs(lhs - rhs) < 1e-8);
  }
}

TEST_CASE("classical stationary state: sector projector and exact fixedness") {
  Rng rng(91);
  const auto dec = enumerate_pf_krylov(4);

  // all_plus sits in the 15-dim empty-pattern sector
  const DensityMatrix rho0 = basis_density(0, 4);
  const auto ss = stationary_state_classical(rho0, dec);
  std::size_t hit = 0;
  double wmax = 0.0;
  for (std::size_t s = 0; s < ss.class_weights.size(); ++s)
    if (ss.class_weights[s] > wmax) wmax = ss.class_weights[s], hit = s;
  REQUIRE(wmax == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(dec.sectors[hit].size() == 15);
  for (Index i : dec.sectors[hit])
    REQUIRE(std::abs(ss.state.rho(i, i).real() - 1.0 / 15.0) < 1e-12);
  REQUIRE(std::abs(ss.state.rho.trace().real() - 1.0) < 1e-10);

  // identity/3^N maps to itself
  DensityMatrix mixed{4, MatC::Identity(81, 81) / 81.0};
  const auto ss2 = stationary_state_classical(mixed, dec);
  REQUIRE((ss2.state.rho - mixed.rho).cwiseAbs().maxCoeff() < 1e-12);

  // a generic state: fixed bondwise and under the circuit
  const VecC psi = random_haar_state(4, rng).amp;
  const auto ss3 = stationary_state_classical(DensityMatrix{4, psi * psi.adjoint()}, dec);
  REQUIRE(lindblad_residual(ss3.state, Channel::dephasing, 0.7, 4, DissipatorWeighting::paper) <
          1e-8);
  const auto res = evolve_density(ss3.state, make_spec(Channel::dephasing, 0.7, 4, 3, 5), {});
  REQUIRE(trace_distance(res.snapshots.back().second.rho, ss3.state.rho) < 1e-9);
}

TEST_CASE("quantum stationary state: pure sector input and degenerate coherences") {
  Rng rng(101);
  const auto dec = krylov_decompose_numerical(
      {{1, tl_term()}, {2, tl_term()}, {3, tl_term()}}, 4, rng);

  // dimer pair state lives in the D=2, d=1 class: rho_ss = Pi/2
  const VecC dp = dimer_pair_state();
  const auto ss = stationary_state_quantum(DensityMatrix{4, dp * dp.adjoint()}, dec);
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    if (dec.classes[c].D == 2) {
      const MatC b = dec.classes[c].basis();
      REQUIRE((ss.state.rho - 0.5 * b * b.adjoint()).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  // two_degenerate: weight 1/3 in the fully-paired class, 2/3 in the
  // degenerate class as a single coherent rank-1 component (the copy basis is
  // gauge-arbitrary, so only per-class traces and block spectra are pinned)
  const VecC td = two_degenerate_state();
  const auto ss2 = stationary_state_quantum(DensityMatrix{4, td * td.adjoint()}, dec);
  double tr_sum = 0.0;
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    const MatC& m = ss2.overlap_blocks[c];
    tr_sum += m.trace().real();
    if (dec.classes[c].D == 1) REQUIRE(m.trace().real() < 1e-12);
    if (dec.classes[c].D == 2)
      REQUIRE(m(0, 0).real() == Catch::Approx(1.0 / 3.0).margin(1e-10));
    if (dec.classes[c].D == 3) {
      REQUIRE(m.trace().real() == Catch::Approx(2.0 / 3.0).margin(1e-10));
      const VecR ev = hermitian_eigvals(m);
      REQUIRE(ev(ev.size() - 1) == Catch::Approx(2.0 / 3.0).margin(1e-9));
      REQUIRE(std::abs(ev(ev.size() - 2)) < 1e-10);
      double best_off = 0.0;
      for (Index a = 0; a < m.rows(); ++a)
        for (Index b2 = 0; b2 < m.cols(); ++b2)
          if (a != b2) best_off = std::max(best_off, std::abs(m(a, b2)));
      REQUIRE(best_off > 1e-3);  // inter-copy coherence survives
    }
  }
  REQUIRE(tr_sum == Catch::Approx(1.0).margin(1e-10));

  // stationarity under the matching channel
  REQUIRE(lindblad_residual(ss2.state, Channel::structure_preserving, 1.0, 4,
                            DissipatorWeighting::paper) < 1e-8);
  const auto res =
      evolve_density(ss2.state, make_spec(Channel::structure_preserving, 1.0, 4, 3, 19), {});
  REQUIRE(trace_distance(res.snapshots.back().second.rho, ss2.state.rho) < 1e-9);
}

TEST_CASE("real fast path matches the complex constructor") {
  Rng rng(111);
  const auto dec = krylov_decompose_numerical(
      {{1, tl_term()}, {2, tl_term()}, {3, tl_term()}}, 4, rng);
  const VecC td = two_degenerate_state();
  const VecR tdr = td.real();
  const MatR fast = stationary_density_real(tdr, dec);
  const auto slow = stationary_state_quantum(DensityMatrix{4, td * td.adjoint()}, dec);
  REQUIRE((fast.cast<cx>() - slow.state.rho).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("stationary operator map: identity and projector fixed points") {
  Rng rng(121);
  const auto dec_ab = enumerate_pf_krylov(4);
  const MatC id = MatC::Identity(81, 81);
  REQUIRE((stationary_operator(id, dec_ab, StationaryMode::classical) - id).cwiseAbs().maxCoeff() <
          1e-12);
  const MatR b = sector_basis(dec_ab, 3);
  const MatC proj = (b * b.transpose()).cast<cx>();
  REQUIRE((stationary_operator(proj, dec_ab, StationaryMode::classical) - proj)
              .cwiseAbs()
              .maxCoeff() < 1e-12);

  const auto dec_q = krylov_decompose_numerical(
      {{1, tl_term()}, {2, tl_term()}, {3, tl_term()}}, 4, rng);
  REQUIRE((stationary_operator(id, dec_q, StationaryMode::quantum) - id).cwiseAbs().maxCoeff() <
          1e-9);
  const MatC cp = dec_q.classes[1].copy(0) * dec_q.classes[1].copy(0).adjoint();
  REQUIRE((stationary_operator(cp, dec_q, StationaryMode::quantum) - cp).cwiseAbs().maxCoeff() <
          1e-9);
}

TEST_CASE("convergence certificate fires on a relaxing chain") {
  Rng rng(131);
  const VecC psi = random_haar_state(2, rng).amp;
  const auto res = evolve_density(DensityMatrix{2, psi * psi.adjoint()},
                                  make_spec(Channel::dephasing, 1.5, 2, 400, 7), {});
  REQUIRE(res.converged);
  REQUIRE(res.steps_run < 400);

  Rng rng2(7);
  const auto dec = open_bond_decomposition({{1, tl_term()}}, jump_operators(Channel::dephasing, 2),
                                           2, rng2);
  const auto ss = stationary_state_classical(DensityMatrix{2, psi * psi.adjoint()}, dec);
  REQUIRE(trace_distance(res.snapshots.back().second.rho, ss.state.rho) < 1e-6);
}

TEST_CASE("steady-structure census: dephasing sectors vs degenerate TL copies") {
  Rng rng(141);
  const auto spec_d = make_spec(Channel::dephasing, 1.0, 2, 1, 0);
  const auto dec_d = open_bond_decomposition({{1, tl_term()}}, jump_operators(Channel::dephasing, 2),
                                             2, rng);
  const auto rep = verify_steady_structure(dec_d, spec_d, true);
  REQUIRE(rep.census_ok);
  Index diag_blocks = 0;
  for (const auto& b : rep.blocks)
    if (b.class_a == b.class_b && b.copy_a == b.copy_b) {
      ++diag_blocks;
      REQUIRE(b.kernel_dim == 1);
    }
  REQUIRE(diag_blocks == 7);
  REQUIRE(rep.spectrum_computed);
  REQUIRE(rep.max_re_lambda <= 1e-9);
  REQUIRE(rep.n_defective == 0);
  REQUIRE(rep.biorth_defect < 1e-8);

  const auto spec_sp = make_spec(Channel::structure_preserving, 1.0, 2, 1, 0);
  const auto dec_sp = krylov_decompose_numerical({{1, tl_term()}}, 2, rng);
  const auto rep2 = verify_steady_structure(dec_sp, spec_sp, true);
  REQUIRE(rep2.census_ok);
  Index same_class_pairs = 0;
  for (const auto& b : rep2.blocks)
    if (b.class_a == b.class_b) {
      ++same_class_pairs;
      REQUIRE(b.kernel_dim == 1);
    }
  REQUIRE(same_class_pairs == 65);  // 1 + 8*8 subspace pairs share a class
  REQUIRE(rep2.max_re_lambda <= 1e-9);
}

TEST_CASE("spec validation rejects bad input") {
  LindbladCircuitSpec bad;
  bad.gamma = -1.0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad.gamma = 1.0;
  bad.n_steps = -3;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  REQUIRE_THROWS_AS(gate_jumps(Channel::dephasing, 0, 4, DissipatorWeighting::paper), ConfigError);
  REQUIRE_THROWS_AS(liouvillian_bond(MatC::Identity(3, 3), {}, 1.0, 1.0), ConfigError);
}
