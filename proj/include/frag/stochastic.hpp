#pragma once
// Strong-dephasing effective classical layer: the second-order two-site Markov
// generator, its gate probability matrices, the Monte Carlo pair-flip circuit
// over fully-paired configurations, number-entropy estimation with bootstrap
// errors, and the exact tree-walk stationary number entropy.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "frag/dynamics.hpp"

namespace frag {

// ---- effective generator ----------------------------------------------------

struct EffectiveGenerator {
  MatR m;              // unscaled 9x9 two-site generator, product-basis order
  double scale = 0.0;  // J^2/gamma multiplying m inside W_eff

  void validate() const {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw InvariantError("EffectiveGenerator: not symmetric");
    for (Index i = 0; i < 9; ++i) {
      if (m(i, i) < 0.0) throw InvariantError("EffectiveGenerator: negative diagonal");
      if (std::abs(m.row(i).sum()) > 1e-12)
        throw InvariantError("EffectiveGenerator: row sum nonzero");
      for (Index j = 0; j < 9; ++j)
        if (j != i && m(i, j) > 0.0)
          throw InvariantError("EffectiveGenerator: positive off-diagonal");
    }
  }
};

// Second-order reduction of one noisy gate to a classical generator on the
// two-site configurations.  Only the equal-pair block {++,00,--} = indices
// {0,4,8} is active; unequal pairs are frozen.
inline EffectiveGenerator effective_generator(double j, double gamma) {
  if (gamma <= 0.0) throw ConfigError("effective_generator: gamma must be > 0");
  EffectiveGenerator g;
  g.m = MatR::Zero(9, 9);
  g.m(0, 0) = g.m(8, 8) = 2.5;
  g.m(4, 4) = 4.0;
  g.m(0, 4) = g.m(4, 0) = g.m(4, 8) = g.m(8, 4) = -2.0;
  g.m(0, 8) = g.m(8, 0) = -0.5;
  g.scale = j * j / gamma;
  return g;
}

// P = exp(-(J^2/gamma) M) through the closed eigensystem of the active block:
// eigenvalues {0, 3, 6} with eigenvectors (1,1,1)/sqrt3, (1,0,-1)/sqrt2,
// (1,-2,1)/sqrt6.  Rows with unequal colors stay identity.
inline MatR gate_probability(double j, double gamma) {
  if (gamma <= 0.0) throw ConfigError("gate_probability: gamma must be > 0");
  const double x = j * j / gamma;
  if (x == 0.0) return MatR::Identity(9, 9);
  const double e3 = std::exp(-3.0 * x), e6 = std::exp(-6.0 * x);
  const double v2[3] = {1.0 / std::sqrt(2.0), 0.0, -1.0 / std::sqrt(2.0)};
  const double v3[3] = {1.0 / std::sqrt(6.0), -2.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0)};
  MatR p = MatR::Identity(9, 9);
  const Index blk[3] = {0, 4, 8};
  for (Index a = 0; a < 3; ++a)
    for (Index b = 0; b < 3; ++b)
      p(blk[a], blk[b]) = 1.0 / 3.0 + e3 * v2[a] * v2[b] + e6 * v3[a] * v3[b];
  return p;
}

// ---- stochastic circuit -----------------------------------------------------

struct ClassicalTrajectory {
  int n_sites = 0;
  std::uint64_t rng_seed = 0;
  std::vector<std::int64_t> configurations;  // one entry per step, n_steps+1 total
};

// Brick-wall classical circuit: per gate draw J, and when the bond carries an
// equal pair sample its replacement from the matching row of gate_probability.
inline ClassicalTrajectory run_stochastic_circuit(std::int64_t config0, int n_steps, int n_sites,
                                                  double gamma, Rng& rng, double j_lo = 0.8,
                                                  double j_hi = 1.2) {
  if (n_sites < 2 || n_sites > 39)
    throw ConfigError("run_stochastic_circuit: N must be in [2,39]");
  if (n_steps < 0) throw ConfigError("run_stochastic_circuit: n_steps must be >= 0");
  if (gamma <= 0.0) throw ConfigError("run_stochastic_circuit: gamma must be > 0");
  if (config0 < 0 || config0 >= pow3(n_sites))
    throw ConfigError("run_stochastic_circuit: configuration out of range");
  if (!config_pattern(config0, n_sites).empty())
    throw ConfigError("run_stochastic_circuit: start outside the fully-paired sector");

  const auto bonds = detail::step_bonds(n_sites);
  const double s2 = 1.0 / std::sqrt(2.0), s6 = 1.0 / std::sqrt(6.0);
  const double v2[3] = {s2, 0.0, -s2};
  const double v3[3] = {s6, -2.0 * s6, s6};

  ClassicalTrajectory out;
  out.n_sites = n_sites;
  out.rng_seed = rng.seed();
  out.configurations.reserve(n_steps + 1);
  out.configurations.push_back(config0);
  std::int64_t cfg = config0;
  for (int t = 0; t < n_steps; ++t) {
    for (int b : bonds) {
      const double jg = rng.uniform(j_lo, j_hi);
      const int sa = site_color(cfg, b, n_sites);
      const int sb = site_color(cfg, b + 1, n_sites);
      if (sa != sb) continue;  // frozen pair
      const double x = jg * jg / gamma;
      const double e3 = std::exp(-3.0 * x), e6 = std::exp(-6.0 * x);
      const double u = rng.uniform();
      double acc = 0.0;
      int target = 2;
      for (int c = 0; c < 3; ++c) {
        acc += 1.0 / 3.0 + e3 * v2[sa] * v2[c] + e6 * v3[sa] * v3[c];
        if (u < acc) {
          target = c;
          break;
        }
      }
      cfg += static_cast<std::int64_t>(target - sa) * pow3(n_sites - b) +
             static_cast<std::int64_t>(target - sb) * pow3(n_sites - b - 1);
    }
    out.configurations.push_back(cfg);
  }
  return out;
}

// ---- number entropy ---------------------------------------------------------

struct PatternDistribution {
  std::map<std::string, double> p;  // left dot pattern -> probability
  int n_samples = 0;
};

// Empirical left-pattern distribution across trajectories at one step.
inline PatternDistribution pattern_distribution(const std::vector<ClassicalTrajectory>& trajs,
                                                int step, int cut) {
  if (trajs.empty()) throw ConfigError("pattern_distribution: no trajectories");
  const int n = trajs[0].n_sites;
  if (cut < 1 || cut >= n) throw ConfigError("pattern_distribution: cut out of range");
  const std::int64_t div = pow3(n - cut);
  PatternDistribution out;
  for (const auto& tr : trajs) {
    if (tr.n_sites != n) throw ConfigError("pattern_distribution: mixed system sizes");
    if (step < 0 || step >= static_cast<int>(tr.configurations.size()))
      throw ConfigError("pattern_distribution: step out of range");
    out.p[config_pattern(tr.configurations[step] / div, cut)] += 1.0;
  }
  out.n_samples = static_cast<int>(trajs.size());
  for (auto& kv : out.p) kv.second /= out.n_samples;
  return out;
}

struct NumberEntropySeries {
  std::vector<int> times;
  std::vector<double> s_num;
  std::vector<double> std_err;  // bootstrap standard error
};

// Per-step number entropy of the left-pattern distribution, with trajectory
// bootstrap (shared resample indices across steps).
inline NumberEntropySeries number_entropy_series(const std::vector<ClassicalTrajectory>& trajs,
                                                 int cut, Rng& rng, int n_bootstrap = 200) {
  if (trajs.size() < 100) throw ConfigError("number_entropy_series: need >= 100 trajectories");
  if (n_bootstrap < 2) throw ConfigError("number_entropy_series: need >= 2 bootstrap resamples");
  const int n_traj = static_cast<int>(trajs.size());
  const int n = trajs[0].n_sites;
  const int len = static_cast<int>(trajs[0].configurations.size());
  for (const auto& tr : trajs)
    if (tr.n_sites != n || static_cast<int>(tr.configurations.size()) != len)
      throw ConfigError("number_entropy_series: inhomogeneous trajectories");
  if (cut < 1 || cut >= n) throw ConfigError("number_entropy_series: cut out of range");
  const std::int64_t div = pow3(n - cut);

  std::vector<std::vector<int>> boot(n_bootstrap, std::vector<int>(n_traj));
  for (auto& row : boot)
    for (auto& i : row) i = static_cast<int>(rng.uniform_int(n_traj));

  const auto entropy_of_counts = [](const std::vector<int>& counts, int total) {
    double s = 0.0;
    for (int c : counts)
      if (c > 0) s -= static_cast<double>(c) * std::log(static_cast<double>(c));
    return s / total + std::log(static_cast<double>(total));
  };

  NumberEntropySeries out;
  out.times.resize(len);
  out.s_num.resize(len);
  out.std_err.resize(len);
  std::map<std::string, int> id_of;
  std::vector<int> ids(n_traj);
  for (int t = 0; t < len; ++t) {
    out.times[t] = t;
    for (int i = 0; i < n_traj; ++i) {
      const auto pat = config_pattern(trajs[i].configurations[t] / div, cut);
      const auto [it, fresh] = id_of.try_emplace(pat, static_cast<int>(id_of.size()));
      (void)fresh;
      ids[i] = it->second;
    }
    const int n_pat = static_cast<int>(id_of.size());
    std::vector<int> counts(n_pat, 0);
    for (int i = 0; i < n_traj; ++i) ++counts[ids[i]];
    out.s_num[t] = entropy_of_counts(counts, n_traj);

    double mean = 0.0, msq = 0.0;
    std::vector<int> bc(n_pat);
    for (int r = 0; r < n_bootstrap; ++r) {
      std::fill(bc.begin(), bc.end(), 0);
      for (int i : boot[r]) ++bc[ids[i]];
      const double s = entropy_of_counts(bc, n_traj);
      mean += s;
      msq += s * s;
    }
    mean /= n_bootstrap;
    const double var = std::max(0.0, (msq / n_bootstrap - mean * mean)) *
                       (static_cast<double>(n_bootstrap) / (n_bootstrap - 1));
    out.std_err[t] = std::sqrt(var);
  }
  return out;
}

// ---- exact stationary number entropy ----------------------------------------

namespace detail {

// Occupation profile of the reduction walk on the 3-regular tree after L
// steps, normalized each step; second member is ln of the dropped norm.
// n_{L+1}(0) = 3 n_L(1); n_{L+1}(k) = n_L(k-1) + 2 n_L(k+1).
inline std::pair<std::vector<double>, double> tree_walk_profile(int L) {
  std::vector<double> n(L + 1, 0.0);
  n[0] = 1.0;
  double logz = 0.0;
  for (int s = 0; s < L; ++s) {
    std::vector<double> m(L + 1, 0.0);
    if (L >= 1) m[0] = 3.0 * n[1];
    for (int k = 1; k <= L; ++k) {
      m[k] = n[k - 1];
      if (k + 1 <= L) m[k] += 2.0 * n[k + 1];
    }
    double tot = 0.0;
    for (double v : m) tot += v;
    for (double& v : m) v /= tot;
    logz += std::log(tot);
    n = std::move(m);
  }
  return {n, logz};
}

}  // namespace detail

// Number entropy of the uniform fully-paired stationary state across the
// half cut: p(specific length-k pattern) proportional to n_{N/2}(k)^2, with
// one empty pattern and 3*2^(k-1) patterns per length k >= 1.
inline double stationary_number_entropy(int n_sites) {
  if (n_sites < 2 || n_sites > 200 || n_sites % 2 != 0)
    throw ConfigError("stationary_number_entropy: N must be even and in [2,200]");
  const int L = n_sites / 2;
  const auto [prof, logz] = detail::tree_walk_profile(L);
  (void)logz;
  long double z = 0.0L;
  for (int k = 0; k <= L; ++k) {
    const long double cnt = k == 0 ? 1.0L : 3.0L * std::pow(2.0L, static_cast<long double>(k - 1));
    z += cnt * static_cast<long double>(prof[k]) * prof[k];
  }
  long double s = 0.0L;
  for (int k = 0; k <= L; ++k) {
    const long double q = static_cast<long double>(prof[k]) * prof[k] / z;
    if (q <= 0.0L) continue;
    const long double cnt = k == 0 ? 1.0L : 3.0L * std::pow(2.0L, static_cast<long double>(k - 1));
    s -= cnt * q * std::log(static_cast<double>(q));
  }
  return static_cast<double>(s);
}

// ---- classical mirror of the noisy circuit ----------------------------------

namespace detail {

inline void apply_pair_stochastic(VecR& p, const MatR& gate, int bond, int n_sites) {
  const Index P = pow3(bond - 1);
  const Index R = pow3(n_sites - bond - 1);
  Eigen::Matrix<double, 9, 1> v;
  for (Index u = 0; u < P; ++u)
    for (Index r = 0; r < R; ++r) {
      for (Index a = 0; a < 9; ++a) v(a) = p((u * 9 + a) * R + r);
      const Eigen::Matrix<double, 9, 1> w = gate.transpose() * v;
      for (Index a = 0; a < 9; ++a) p((u * 9 + a) * R + r) = w(a);
    }
}

}  // namespace detail

// Deterministic propagation of a configuration distribution through the
// brick-wall of gate_probability matrices, consuming the same coupling stream
// as the quantum circuit with the same spec (dephasing only).
inline VecR effective_circuit_distribution(const VecR& p0, const LindbladCircuitSpec& spec) {
  spec.validate();
  if (spec.channel != Channel::dephasing)
    throw ConfigError("effective_circuit_distribution: effective theory requires dephasing");
  if (spec.gamma <= 0.0)
    throw ConfigError("effective_circuit_distribution: gamma must be > 0");
  if (p0.size() != pow3(spec.n_sites))
    throw ConfigError("effective_circuit_distribution: distribution size mismatch");
  if (p0.minCoeff() < -1e-12 || std::abs(p0.sum() - 1.0) > 1e-10)
    throw ConfigError("effective_circuit_distribution: not a probability distribution");
  const auto bonds = detail::step_bonds(spec.n_sites);
  const auto js = sample_circuit_couplings(spec);
  VecR p = p0;
  for (int t = 0; t < spec.n_steps; ++t)
    for (std::size_t g = 0; g < bonds.size(); ++g)
      detail::apply_pair_stochastic(p, gate_probability(js[t][g], spec.gamma), bonds[g],
                                    spec.n_sites);
  return p;
}

}  // namespace frag
