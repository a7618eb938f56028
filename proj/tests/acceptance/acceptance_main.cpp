// Acceptance suite: ten end-to-end checks of the library against its frozen
// quantitative targets.  One PASS/FAIL line per criterion; exit code is the
// number of failed criteria.
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "frag/experiments.hpp"

using namespace frag;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double wall_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

LindbladCircuitSpec circuit(Channel ch, double gamma, int n, int steps, std::uint64_t seed) {
  LindbladCircuitSpec s;
  s.channel = ch;
  s.gamma = gamma;
  s.n_sites = n;
  s.n_steps = steps;
  s.rng_seed = seed;
  return s;
}

double open_saturation(Channel ch, int n, int steps, std::uint64_t seed, int window) {
  const LocalTerm op{n / 2, spin_z()};
  const auto series =
      autocorrelation(op, CorrelatorMode::open_heisenberg, circuit(ch, 1.0, n, steps, seed));
  return saturation_value(series, window);
}

std::vector<LocalTerm> tl_bonds(int n) {
  std::vector<LocalTerm> t;
  for (int b = 1; b < n; ++b) t.push_back({b, tl_term()});
  return t;
}

// ---- criterion 1: dephasing saturation = abelian Mazur bound ----------------

Outcome criterion1() {
  const int n = 6, steps = 150;
  const double sat = open_saturation(Channel::dephasing, n, steps, 41, 50);
  const double bound =
      mazur_bound_pf(embed_local(spin_z(), n / 2, n), enumerate_pf_krylov(n));
  const double err = std::abs(sat - bound);
  return {err <= 1e-4, "N=6 saturation " + fmt(sat) + " vs M_PF " + fmt(bound) + ", |err| " +
                           fmt(err) + " (tol 1e-4)"};
}

// ---- criterion 2: structure-preserving saturation = non-abelian bound -------

Outcome criterion2() {
  std::ostringstream d;
  bool pass = true;
  for (int n : {4, 6}) {
    const int steps = n == 6 ? 150 : 200;
    const double sat = open_saturation(Channel::structure_preserving, n, steps, 43, 50);
    Rng rng(5);
    const auto dec = krylov_decompose_numerical(tl_bonds(n), n, rng);
    const double m_tl = mazur_bound_tl(LocalTerm{n / 2, spin_z()}, dec);
    const double m_pf =
        mazur_bound_pf(embed_local(spin_z(), n / 2, n), enumerate_pf_krylov(n));
    const double err = std::abs(sat - m_tl);
    pass = pass && err <= 1e-4 && m_tl > m_pf;
    d << "N=" << n << ": sat " << fmt(sat) << " vs M_TL " << fmt(m_tl) << " (|err| " << fmt(err)
      << ", tol 1e-4), M_PF " << fmt(m_pf) << (m_tl > m_pf ? " < M_TL" : " NOT < M_TL") << "; ";
  }
  return {pass, d.str()};
}

// ---- criterion 3: spin flip is ergodic --------------------------------------

Outcome criterion3() {
  const double sat = open_saturation(Channel::spin_flip, 6, 150, 47, 50);
  return {std::abs(sat) <= 1e-3,
          "N=6 spin-flip saturation " + fmt(sat) + " (tol 1e-3)"};
}

// ---- criterion 4: evolution converges to both stationary constructors -------

Outcome criterion4() {
  std::ostringstream d;
  bool pass = true;
  for (const char* state : {"all_plus", "two_degenerate"}) {
    const DensityMatrix rho0 = initial_density(state, 4);
    {
      const auto ev = evolve_density(rho0, circuit(Channel::dephasing, 1.0, 4, 400, 53));
      const auto ss = stationary_state_classical(rho0, enumerate_pf_krylov(4));
      const double dist = 0.5 * trace_norm(MatC(ev.snapshots.back().second.rho - ss.state.rho));
      pass = pass && dist <= 1e-6;
      d << state << "/dephasing " << fmt(dist) << "; ";
    }
    {
      Rng rng(5);
      const auto dec = krylov_decompose_numerical(tl_bonds(4), 4, rng);
      const auto ev =
          evolve_density(rho0, circuit(Channel::structure_preserving, 1.0, 4, 400, 59));
      const auto ss = stationary_state_quantum(rho0, dec);
      const double dist = 0.5 * trace_norm(MatC(ev.snapshots.back().second.rho - ss.state.rho));
      pass = pass && dist <= 1e-6;
      d << state << "/structure " << fmt(dist) << "; ";
    }
  }
  return {pass, d.str() + "(tol 1e-6)"};
}

// ---- criterion 5: negativity dichotomy --------------------------------------

Outcome criterion5() {
  std::ostringstream d;
  bool pass = true;

  // dephasing stationary states are PPT on every cut
  const auto pf4 = enumerate_pf_krylov(4);
  Rng rng(61);
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    VecC psi(81);
    for (Index i = 0; i < 81; ++i) psi(i) = cx(rng.normal(), rng.normal());
    psi /= psi.norm();
    const DensityMatrix rho0{4, psi * psi.adjoint()};
    const auto ss = stationary_state_classical(rho0, pf4);
    for (int cut = 1; cut < 4; ++cut)
      worst = std::max(worst, log_negativity(ss.state, cut));
  }
  pass = pass && worst <= 1e-9;
  d << "dephasing max E_N over 50 states x 3 cuts " << fmt(worst) << " (tol 1e-9); ";

  // structure-preserving stationary negativity grows with N
  double prev = 0.0;
  for (int n : {4, 6, 8}) {
    Rng drng(5);
    const auto dec = krylov_decompose_numerical(tl_bonds(n), n, drng);
    const auto ss = stationary_state_quantum(initial_density("all_plus", n), dec);
    const double en = log_negativity(ss.state, n / 2);
    pass = pass && en > 0.0 && en > prev;
    d << "E_N(N=" << n << ") " << fmt(en) << "; ";
    prev = en;
  }
  return {pass, d.str() + "(positive and increasing)"};
}

// ---- criterion 6: bulk Mazur bound scales as 1/N ----------------------------

Outcome criterion6() {
  std::vector<double> scaled;
  std::ostringstream d;
  for (int n : {4, 6, 8, 10}) {
    VecR diag(pow3(n));
    const MatC sz = spin_z();
    for (Index c = 0; c < pow3(n); ++c)
      diag(c) = sz(site_color(c, n / 2, n), site_color(c, n / 2, n)).real();
    const double m = mazur_bound_pf(diag, enumerate_pf_krylov(n));
    scaled.push_back(m * n);
    d << "N=" << n << ": M*N " << fmt(m * n) << "; ";
  }
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  const double spread = (*hi - *lo) / *lo;
  return {spread <= 0.20, d.str() + "spread " + fmt(spread) + " (tol 0.20)"};
}

// ---- criterion 7: second-order effective theory -----------------------------

// Deviation of the classical mirror from the exact evolution: max abs error in
// fully-paired-block populations over all recorded steps of a shared-coupling
// run.
double effective_eps(double gamma) {
  const int n = 4, steps = 20;
  const auto spec = circuit(Channel::dephasing, gamma, n, steps, 21);
  std::vector<int> record(steps + 1);
  std::iota(record.begin(), record.end(), 0);
  const auto ev = evolve_density(initial_density("all_plus", n), spec, record);

  VecR p = VecR::Zero(pow3(n));
  p(0) = 1.0;
  const auto js = sample_circuit_couplings(spec);
  const auto bonds = frag::detail::step_bonds(n);
  double eps = 0.0;
  std::size_t snap = 0;
  for (int step = 0; step <= steps; ++step) {
    if (snap < ev.snapshots.size() && ev.snapshots[snap].first == step) {
      const auto& rho = ev.snapshots[snap].second.rho;
      for (Index c = 0; c < pow3(n); ++c)
        eps = std::max(eps, std::abs(rho(c, c).real() - p(c)));
      ++snap;
    }
    if (step == steps) break;
    for (std::size_t g = 0; g < bonds.size(); ++g) {
      const MatR gate = gate_probability(js[static_cast<std::size_t>(step)][g], gamma);
      frag::detail::apply_pair_stochastic(p, gate, bonds[g], n);
    }
  }
  return eps;
}

Outcome criterion7() {
  const double e10 = effective_eps(10.0);
  const double e20 = effective_eps(20.0);
  const bool pass = e20 < e10 && e10 < 0.05;
  return {pass, "eps(10) " + fmt(e10) + ", eps(20) " + fmt(e20) + " (must decrease)"};
}

// ---- criterion 8: number entropy: stationary match and sqrt(N) growth -------

Outcome criterion8() {
  std::ostringstream d;
  bool pass = true;
  for (int n : {8, 12, 16}) {
    const int steps = 40 * n;  // diffusive pairing needs O(N^2) circuit depth
    Rng rng(67);
    std::vector<ClassicalTrajectory> trajs;
    trajs.reserve(10000);
    for (int t = 0; t < 10000; ++t)
      trajs.push_back(run_stochastic_circuit(0, steps, n, 4.0, rng));
    Rng boot(68);
    const auto series = number_entropy_series(trajs, n / 2, boot);
    const double sat = series.s_num.back();
    const double sigma = series.std_err.back();
    const double target = stationary_number_entropy(n);
    const double err = std::abs(sat - target);
    pass = pass && err <= 3.0 * sigma;
    d << "N=" << n << ": S " << fmt(sat) << " vs " << fmt(target) << " (3sigma " << fmt(3 * sigma)
      << "); ";
  }
  std::vector<double> ratio;
  for (int n : {64, 128, 200}) ratio.push_back(stationary_number_entropy(n) / std::sqrt(n));
  const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  const double var = (*hi - *lo) / *lo;
  pass = pass && var < 0.10;
  d << "S/sqrt(N) variation " << fmt(var) << " (tol 0.10)";
  return {pass, d.str()};
}

// ---- criterion 9: algebraic suite -------------------------------------------

Outcome criterion9() {
  std::ostringstream d;
  bool pass = true;

  // projector resolution and orthogonality of the sector decomposition
  for (int n : {2, 4, 6}) {
    const auto dec = enumerate_pf_krylov(n);
    std::vector<char> seen(static_cast<std::size_t>(pow3(n)), 0);
    long long total = 0;
    for (const auto& sec : dec.sectors)
      for (Index c : sec) {
        pass = pass && !seen[static_cast<std::size_t>(c)];
        seen[static_cast<std::size_t>(c)] = 1;
        ++total;
      }
    pass = pass && total == pow3(n);
  }
  d << "sector partition exact N<=6; ";

  // intertwiner relations on the non-abelian decomposition
  {
    Rng rng(71);
    const auto dec = krylov_decompose_numerical(tl_bonds(4), 4, rng);
    pass = pass && dec.invariance_defect <= 1e-8 && dec.intertwiner_defect <= 1e-8;
    double worst = 0.0;
    const MatC h = assemble_dense(tl_bonds(4), 4);
    for (const auto& cls : dec.classes) {
      if (cls.d < 2) continue;
      const MatC t = cls.intertwiner(1, 0);
      worst = std::max(worst, (h * t - t * h).cwiseAbs().maxCoeff());
    }
    pass = pass && worst <= 1e-8;
    d << "intertwiners commute with H at N=4 (max " << fmt(worst) << ", tol 1e-8); ";
  }

  // CPTP gate checks: trace preservation and complete positivity via the
  // Choi matrix of the two-site gate
  {
    double worst_tp = 0.0, worst_cp = 0.0;
    for (Channel ch : {Channel::dephasing, Channel::structure_preserving, Channel::spin_flip}) {
      const auto gate = liouvillian_gate(
          tl_term(), gate_jumps(ch, 1, 2, DissipatorWeighting::paper), 0.7, 1.0);
      MatC choi = MatC::Zero(81, 81);
      for (Index a = 0; a < 9; ++a)
        for (Index b = 0; b < 9; ++b) {
          MatC e = MatC::Zero(9, 9);
          e(a, b) = 1.0;
          const MatC img =
              Eigen::Map<const MatC>((gate.mat * Eigen::Map<const VecC>(e.data(), 81)).eval().data(), 9, 9);
          worst_tp = std::max(worst_tp, std::abs(img.trace() - e.trace()));
          for (Index i = 0; i < 9; ++i)
            for (Index j = 0; j < 9; ++j) choi(a * 9 + i, b * 9 + j) = img(i, j);
        }
      const auto es = hermitian_eig(choi);
      worst_cp = std::max(worst_cp, std::max(0.0, -es.values(0)));
    }
    pass = pass && worst_tp <= 1e-10 && worst_cp <= 1e-10;
    d << "gates CPTP (TP " << fmt(worst_tp) << ", CP " << fmt(worst_cp) << ", tol 1e-10); ";
  }

  // dot-pattern conservation, exhaustive over configurations and pair flips
  {
    bool ok = true;
    for (int n = 2; n <= 6; ++n)
      for (Index c = 0; c < pow3(n); ++c) {
        const std::string p0 = config_pattern(c, n);
        for (int bond = 1; bond < n && ok; ++bond) {
          const int a = site_color(c, bond, n), b = site_color(c, bond + 1, n);
          if (a != b) continue;
          for (int t = 0; t < 3; ++t) {
            const Index img = c + (t - a) * pow3(n - bond) + (t - a) * pow3(n - bond - 1);
            ok = ok && config_pattern(img, n) == p0;
          }
        }
      }
    pass = pass && ok;
    d << "pattern conservation exhaustive N<=6; ";
  }

  // open commutant: TL plus dephasing jumps collapses to the abelian structure
  for (int n : {2, 4}) {
    Rng rng(73);
    const auto open_dec =
        open_bond_decomposition(tl_bonds(n), jump_operators(Channel::dephasing, n), n, rng);
    const auto pf = enumerate_pf_krylov(n);
    std::multiset<std::pair<Index, Index>> got, want;
    for (const auto& c : open_dec.classes) got.insert({c.D, c.d});
    for (const auto& c : pf.classes) want.insert({c.D, c.d});
    pass = pass && got == want;
    d << "open commutant = abelian sectors at N=" << n << "; ";
  }

  // kernel-dimension census at N=2: pattern multiplicities of the 7 sectors
  {
    const auto dec = enumerate_pf_krylov(2);
    std::map<Index, int> by_dim;
    for (const auto& c : dec.classes) ++by_dim[c.D];
    pass = pass && dec.classes.size() == 7 && by_dim[3] == 1 && by_dim[1] == 6;
    d << "N=2 census: one 3-dim + six 1-dim sectors";
  }
  return {pass, d.str()};
}

// ---- criterion 10: counting checks ------------------------------------------

Outcome criterion10() {
  std::ostringstream d;
  bool pass = true;

  const auto pf2 = enumerate_pf_krylov(2);
  pass = pass && pf2.classes.size() == 7;
  d << "K(2) " << pf2.classes.size() << "; ";

  Rng rng(79);
  const auto tl2 = krylov_decompose_numerical(tl_bonds(2), 2, rng);
  pass = pass && tl2.commutant_dim() == 65;
  d << "dim C_TL(2) " << tl2.commutant_dim() << "; ";

  Index d1 = 0;
  for (const auto& c : tl2.classes)
    if (c.D == 1) d1 = std::max(d1, c.d);
  pass = pass && d1 == 8;
  d << "d_1(2) " << d1 << "; ";

  // fully-paired sector dimensions at N=2 and N=4
  std::vector<Index> paired;
  for (int n : {2, 4}) {
    const auto dec = enumerate_pf_krylov(n);
    for (const auto& c : dec.classes)
      if (c.pattern.empty()) paired.push_back(c.D);
  }
  pass = pass && paired == std::vector<Index>{3, 15};
  d << "fully-paired dims {" << paired[0] << "," << paired[1] << "}; ";

  for (int n : {2, 4, 6}) {
    Rng r2(83);
    const auto dec = krylov_decompose_numerical(tl_bonds(n), n, r2);
    Index sum = 0;
    for (const auto& c : dec.classes) sum += c.D * c.d;
    pass = pass && sum == pow3(n);
    d << "sum dD(N=" << n << ") " << sum << "; ";
  }
  return {pass, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"saturation equals abelian Mazur bound (dephasing)", criterion1},
      {"saturation equals non-abelian bound (structure-preserving)", criterion2},
      {"spin-flip ergodicity", criterion3},
      {"stationary-state oracle equivalence", criterion4},
      {"negativity dichotomy", criterion5},
      {"bulk 1/N scaling of the Mazur bound", criterion6},
      {"second-order effective theory", criterion7},
      {"number-entropy saturation and sqrt(N) growth", criterion8},
      {"algebraic suite", criterion9},
      {"counting checks", criterion10},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2zu %s: %s — %s [%.1fs]\n", i + 1, o.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), o.detail.c_str(), wall_s(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  if (failed) std::printf("%d criteria FAILED\n", failed);
  else std::printf("all criteria passed\n");
  return failed;
}
