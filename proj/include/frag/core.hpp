#pragma once
// Shared basics: error types, deterministic RNG, base-3 index helpers.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace frag {

// ---- errors -----------------------------------------------------------------

struct FragError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A mathematical invariant failed (non-physical state, broken conservation law,
// verification residual above tolerance).  CLI maps this to exit code 3.
struct InvariantError : FragError {
  using FragError::FragError;
};

// Bad user input (config file, flags).  CLI maps this to exit code 2.
struct ConfigError : FragError {
  using FragError::FragError;
};

// ---- RNG --------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled uniform/normal conversions so that streams are
// bit-reproducible across standard libraries (std::*_distribution is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0,1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0,n)
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = gen_();
    while (x >= lim) x = gen_();
    return x % n;
  }

  // standard normal via Box-Muller (cached spare)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0x1.0p-100) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  // independent child stream; deterministic in (seed, id)
  Rng child(std::uint64_t id) const { return Rng(splitmix64(seed_ ^ splitmix64(id + 1))); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---- base-3 configurations --------------------------------------------------
//
// A chain configuration over colors {+,0,-} = {0,1,2} is stored as an integer
// in [0, 3^N) with site 1 the most significant trit.

inline std::int64_t pow3(int n) {
  std::int64_t r = 1;
  for (int i = 0; i < n; ++i) r *= 3;
  return r;
}

inline std::int64_t pow9(int n) { return pow3(2 * n); }

// color of 1-based `site` in configuration `idx`
inline int site_color(std::int64_t idx, int site, int n_sites) {
  return static_cast<int>((idx / pow3(n_sites - site)) % 3);
}

inline std::vector<std::uint8_t> config_colors(std::int64_t idx, int n_sites) {
  std::vector<std::uint8_t> c(n_sites);
  for (int s = n_sites; s >= 1; --s) {
    c[s - 1] = static_cast<std::uint8_t>(idx % 3);
    idx /= 3;
  }
  return c;
}

inline std::int64_t colors_to_config(const std::vector<std::uint8_t>& c) {
  std::int64_t idx = 0;
  for (auto v : c) idx = idx * 3 + v;
  return idx;
}

inline char color_char(int c) { return c == 0 ? '+' : (c == 1 ? '0' : '-'); }

inline int char_color(char ch) {
  switch (ch) {
    case '+': return 0;
    case '0': return 1;
    case '-': return 2;
    default: throw ConfigError(std::string("bad color character '") + ch + "'");
  }
}

inline std::string colors_to_string(const std::vector<std::uint8_t>& c) {
  std::string s;
  s.reserve(c.size());
  for (auto v : c) s.push_back(color_char(v));
  return s;
}

inline std::vector<std::uint8_t> string_to_colors(const std::string& s) {
  std::vector<std::uint8_t> c;
  c.reserve(s.size());
  for (char ch : s) c.push_back(static_cast<std::uint8_t>(char_color(ch)));
  return c;
}

}  // namespace frag
