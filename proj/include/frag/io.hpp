#pragma once
// Experiment plumbing: flat key=value configs with per-scenario sections,
// named initial states, deterministic CSV/JSON emission, and the content hash
// that ties an output directory to the decomposition it was computed from.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "frag/fragmentation.hpp"
#include "frag/models.hpp"
#include "json.hpp"

namespace frag {

// ---- logging ----------------------------------------------------------------

// FRAG_LOG={error|info|debug}; anything unrecognized falls back to error.
inline int log_level() {
  static const int lvl = [] {
    const char* e = std::getenv("FRAG_LOG");
    if (!e) return 0;
    const std::string s(e);
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
  }();
  return lvl;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= 1) {
    std::fprintf(stderr, "[frag] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= 2) {
    std::fprintf(stderr, "[frag:debug] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

// ---- experiment configuration -----------------------------------------------

struct ExperimentConfig {
  std::string scenario;
  int n_sites = 6;
  Channel channel = Channel::dephasing;
  double gamma = 1.0;
  int n_steps = 100;
  int n_realizations = 1;
  std::uint64_t seed = 1;
  int cut = 0;  // 0 = N/2
  std::string initial_state = "infinite_temperature";
  std::string out_dir = "out";

  int cut_or_default() const { return cut > 0 ? cut : n_sites / 2; }

  void validate() const {
    if (scenario.empty()) throw ConfigError("config: scenario id missing");
    if (n_sites < 2 || n_sites > 39) throw ConfigError("config: N out of range");
    if (gamma < 0.0) throw ConfigError("config: gamma must be >= 0");
    if (n_steps <= 0) throw ConfigError("config: n_steps must be positive");
    if (n_realizations <= 0) throw ConfigError("config: n_realizations must be positive");
    if (cut < 0 || cut >= n_sites) throw ConfigError("config: cut out of range");
    if (initial_state.empty()) throw ConfigError("config: initial_state missing");
    if (out_dir.empty()) throw ConfigError("config: output directory missing");
  }

  bool operator==(const ExperimentConfig&) const = default;
};

// One "[scenario]" section of a config file, serialized in fixed key order so
// parse(serialize(c)) round-trips byte for byte.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[" << c.scenario << "]\n";
  os << "n_sites = " << c.n_sites << "\n";
  os << "channel = " << channel_name(c.channel) << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", c.gamma);
  os << "gamma = " << buf << "\n";
  os << "n_steps = " << c.n_steps << "\n";
  os << "n_realizations = " << c.n_realizations << "\n";
  os << "seed = " << c.seed << "\n";
  os << "cut = " << c.cut << "\n";
  os << "initial_state = " << c.initial_state << "\n";
  os << "out_dir = " << c.out_dir << "\n";
  return os.str();
}

namespace detail {

inline std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& val,
                             int line_no) {
  try {
    if (key == "n_sites")
      c.n_sites = std::stoi(val);
    else if (key == "channel")
      c.channel = parse_channel(val);
    else if (key == "gamma")
      c.gamma = std::stod(val);
    else if (key == "n_steps")
      c.n_steps = std::stoi(val);
    else if (key == "n_realizations")
      c.n_realizations = std::stoi(val);
    else if (key == "seed")
      c.seed = std::stoull(val);
    else if (key == "cut")
      c.cut = std::stoi(val);
    else if (key == "initial_state")
      c.initial_state = val;
    else if (key == "out_dir")
      c.out_dir = val;
    else
      throw ConfigError("config: unknown key '" + key + "' (line " + std::to_string(line_no) +
                        ")");
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: bad value for '" + key + "' (line " + std::to_string(line_no) +
                      ")");
  } catch (const std::out_of_range&) {
    throw ConfigError("config: value out of range for '" + key + "' (line " +
                      std::to_string(line_no) + ")");
  }
}

}  // namespace detail

// Parse every "[id]" section of a flat key=value config text.  '#' starts a
// comment; keys outside any section are rejected.
inline std::map<std::string, ExperimentConfig> parse_config_text(const std::string& text) {
  std::map<std::string, ExperimentConfig> out;
  ExperimentConfig* cur = nullptr;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: unterminated section header (line " +
                                                std::to_string(line_no) + ")");
      const std::string id = detail::strip(line.substr(1, line.size() - 2));
      if (id.empty()) throw ConfigError("config: empty section id (line " +
                                        std::to_string(line_no) + ")");
      auto [it, fresh] = out.try_emplace(id);
      if (!fresh) throw ConfigError("config: duplicate section '" + id + "'");
      it->second.scenario = id;
      cur = &it->second;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value (line " + std::to_string(line_no) + ")");
    if (!cur)
      throw ConfigError("config: key outside any [scenario] section (line " +
                        std::to_string(line_no) + ")");
    detail::apply_config_key(*cur, detail::strip(line.substr(0, eq)),
                             detail::strip(line.substr(eq + 1)), line_no);
  }
  return out;
}

inline std::map<std::string, ExperimentConfig> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config_text(os.str());
}

// ---- named initial states ---------------------------------------------------

// "all_plus" | "two_degenerate" (N=4) | "infinite_temperature" | explicit
// color word over {+,0,-} of length N.
inline DensityMatrix initial_density(const std::string& spec, int n_sites) {
  const Index dim = pow3(n_sites);
  if (spec == "infinite_temperature") {
    DensityMatrix rho{n_sites, MatC::Identity(dim, dim) / static_cast<double>(dim)};
    return rho;
  }
  if (spec == "all_plus") return basis_density(0, n_sites);
  if (spec == "two_degenerate") {
    if (n_sites != 4) throw ConfigError("initial_density: two_degenerate is an N=4 state");
    // (|dimer,dimer> + |dimer>|+-> + |dimer>|-+>)/sqrt(3): overlaps exactly
    // three invariant subspaces, two of them degenerate copies
    VecC psi = VecC::Zero(81);
    const VecC d = dimer_state();
    const double c = 1.0 / std::sqrt(3.0);
    for (Index k : {Index(0), Index(4), Index(8)}) {
      for (Index l : {Index(0), Index(4), Index(8)}) psi(k * 9 + l) += c * d(k) * d(l);
      psi(k * 9 + 2) += c * d(k);
      psi(k * 9 + 6) += c * d(k);
    }
    return DensityMatrix{n_sites, psi * psi.adjoint()};
  }
  if (static_cast<int>(spec.size()) == n_sites) {
    std::int64_t config = 0;
    for (char ch : spec) {
      int color;
      if (ch == '+')
        color = 0;
      else if (ch == '0')
        color = 1;
      else if (ch == '-')
        color = 2;
      else
        throw ConfigError("initial_density: bad color '" + std::string(1, ch) + "' in '" + spec +
                          "'");
      config = config * 3 + color;
    }
    return basis_density(config, n_sites);
  }
  throw ConfigError("initial_density: unknown state spec '" + spec + "'");
}

// ---- output writers ---------------------------------------------------------

// One CSV per observable: comma separator, '.' decimal, LF endings, mandatory
// header, %.17g so re-runs are byte-identical.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& observable)
      : f_(path, std::ios::binary), observable_(observable) {
    if (!f_) throw ConfigError("csv: cannot open '" + path.string() + "'");
    f_ << "step,observable_name,value_real,value_imag\n";
  }

  void row(int step, double re, double im = 0.0) { row(step, observable_, re, im); }

  void row(int step, const std::string& name, double re, double im = 0.0) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g\n", step, name.c_str(), re, im);
    f_ << buf;
    if (!f_) throw ConfigError("csv: write failed");
  }

 private:
  std::ofstream f_;
  std::string observable_;
};

// One summary line: a measured value against the invariant that validates it.
struct SummaryEntry {
  std::string observable;
  double saturation_value = 0.0;
  double bound_value = 0.0;
  double abs_error = 0.0;
  std::string invariant;  // module-level invariant this value is checked against
  double tolerance = 0.0;
  bool pass = true;
};

// SHA-1 over a git-style framed blob of the gauge-invariant decomposition
// content (class table and dot patterns; bases are gauge-dependent and spectra
// are draw-dependent, so neither enters the hash).
inline std::string decomposition_hash(const KrylovDecomposition& dec) {
  std::ostringstream os;
  os << "krylov v1\nn_sites=" << dec.n_sites << " dim=" << dec.dim
     << " abelian=" << (dec.abelian ? 1 : 0) << "\n";
  if (dec.abelian) {
    for (const auto& c : dec.classes) os << "sector " << c.pattern << " D=" << c.D << "\n";
  } else {
    for (const auto& c : dec.classes)
      os << "class " << c.lambda_id << " D=" << c.D << " d=" << c.d << "\n";
  }
  const std::string body = os.str();
  const std::string framed = "blob " + std::to_string(body.size()) + '\0' + body;

  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(framed.data(), framed.size(), md, &len, EVP_sha1(), nullptr))
    throw FragError("decomposition_hash: EVP_Digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("json: cannot open '" + path.string() + "'");
  f << j.dump(2) << "\n";
}

inline nlohmann::json config_json(const ExperimentConfig& c) {
  return {{"scenario", c.scenario},
          {"n_sites", c.n_sites},
          {"channel", channel_name(c.channel)},
          {"gamma", c.gamma},
          {"n_steps", c.n_steps},
          {"n_realizations", c.n_realizations},
          {"seed", c.seed},
          {"cut", c.cut},
          {"initial_state", c.initial_state},
          {"out_dir", c.out_dir}};
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& c,
                           const std::vector<std::string>& dec_hashes) {
  nlohmann::json j;
  j["config"] = config_json(c);
  j["versions"] = {{"frag", "0.1.0"},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  j["decomposition_hashes"] = dec_hashes;
  write_json(dir / "manifest.json", j);
}

inline void write_summary(const std::filesystem::path& dir,
                          const std::vector<SummaryEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries)
    arr.push_back({{"observable", e.observable},
                   {"saturation_value", e.saturation_value},
                   {"bound_value", e.bound_value},
                   {"abs_error", e.abs_error},
                   {"invariant", e.invariant},
                   {"tolerance", e.tolerance},
                   {"pass", e.pass}});
  write_json(dir / "summary.json", nlohmann::json{{"summary", arr}});
}

}  // namespace frag
