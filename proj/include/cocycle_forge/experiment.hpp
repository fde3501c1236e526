#pragma once

// Flat key = value experiment configs, the closed-form registry they refer to, and
// the experiment runner that writes CSV tables plus a JSON manifest.

#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cocycle_forge/averaging.hpp"
#include "cocycle_forge/base_dynamics.hpp"
#include "cocycle_forge/cocycle.hpp"
#include "cocycle_forge/drift.hpp"
#include "cocycle_forge/fields.hpp"
#include "cocycle_forge/hyperbolized_solver.hpp"
#include "cocycle_forge/oracles.hpp"

namespace cocycle_forge {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_anomaly = 3 };

/// A config that does not validate.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

using ConfigMap = std::map<std::string, std::string>;

namespace config {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline ConfigMap parse_text(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }
  return out;
}

inline ConfigMap parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

inline double parse_double(const std::string& key, std::string_view s) {
  const std::string t = trim(s);
  if (t == "golden") return kGoldenTurns;
  double v = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError(key + ": '" + t + "' is not a finite number");
  }
  return v;
}

inline std::int64_t parse_int(const std::string& key, std::string_view s) {
  const std::string t = trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec == std::errc() && ptr == t.data() + t.size()) return v;
  // Accept integral values written as 1e5.
  const double d = parse_double(key, t);
  if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError(key + ": '" + t + "' is not an integer");
  return static_cast<std::int64_t>(d);
}

inline bool parse_bool(const std::string& key, std::string_view s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": '" + t + "' is not a boolean");
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto q = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, q == std::string_view::npos ? std::string_view::npos : q - pos)));
    if (q == std::string_view::npos) break;
    pos = q + 1;
  }
  return out;
}

inline std::vector<double> parse_doubles(const std::string& key, std::string_view s) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(key, part));
  return out;
}

inline std::vector<std::int64_t> parse_ints(const std::string& key, std::string_view s) {
  std::vector<std::int64_t> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_int(key, part));
  return out;
}

/// "a", "bi", "a+bi", "a-bi", "-i".
inline std::complex<double> parse_complex(const std::string& key, std::string_view s) {
  std::string t;
  for (char c : s) {
    if (c != ' ' && c != '\t') t += c;
  }
  if (t.empty()) throw ConfigError(key + ": empty complex number");
  if (t.back() != 'i' && t.back() != 'j') return {parse_double(key, t), 0.0};
  t.pop_back();
  std::size_t split_at = std::string::npos;
  for (std::size_t i = t.size(); i-- > 1;) {
    if ((t[i] == '+' || t[i] == '-') && t[i - 1] != 'e' && t[i - 1] != 'E') {
      split_at = i;
      break;
    }
  }
  auto imag_of = [&](const std::string& u) {
    if (u.empty() || u == "+") return 1.0;
    if (u == "-") return -1.0;
    return parse_double(key, u);
  };
  if (split_at == std::string::npos) return {0.0, imag_of(t)};
  return {parse_double(key, t.substr(0, split_at)), imag_of(t.substr(split_at))};
}

/// "(k, c), (k, c), ..." with c complex.
inline std::vector<std::pair<std::int64_t, std::complex<double>>> parse_fourier(const std::string& key,
                                                                                std::string_view s) {
  std::vector<std::pair<std::int64_t, std::complex<double>>> out;
  std::size_t pos = 0;
  const std::string t(s);
  while (true) {
    const auto open = t.find('(', pos);
    if (open == std::string::npos) break;
    const auto close = t.find(')', open);
    if (close == std::string::npos) throw ConfigError(key + ": unbalanced parenthesis");
    const auto parts = split(std::string_view(t).substr(open + 1, close - open - 1), ',');
    if (parts.size() != 2) throw ConfigError(key + ": each term must be (k, coefficient)");
    out.emplace_back(parse_int(key, parts[0]), parse_complex(key, parts[1]));
    pos = close + 1;
  }
  if (out.empty() && !trim(s).empty()) throw ConfigError(key + ": expected a list of (k, coefficient)");
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (out[i].first == out[j].first) throw ConfigError(key + ": harmonic listed twice");
    }
  }
  return out;
}

/// 64-bit FNV-1a over the canonical "key=value\n" listing (keys sorted).
inline std::string hash(const ConfigMap& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [k, v] : cfg) {
    for (const char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace config

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
inline OrthogonalMap random_orthogonal(std::mt19937_64& rng, int l) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(l, l);
  for (int i = 0; i < l; ++i) {
    for (int j = 0; j < l; ++j) a(i, j) = g(rng);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(l, l);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < l; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return OrthogonalMap(FiberMatrix(q));
}

/// Random table cocycle on a cyclic base: Haar Psi_i and Gaussian rho_i.
inline CocycleSpec random_cyclic_spec(std::mt19937_64& rng, std::int64_t period, int l) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<OrthogonalMap> psi;
  std::vector<FiberVector> rho;
  for (std::int64_t i = 0; i < period; ++i) {
    psi.push_back(random_orthogonal(rng, l));
    FiberVector v(l);
    for (int k = 0; k < l; ++k) v[k] = g(rng);
    rho.push_back(v);
  }
  return {BaseSystem::cyclic(period), OrthogonalField::table(std::move(psi)), VectorField::table(std::move(rho))};
}

struct RegistryEntry {
  std::string category;
  std::string name;
  std::string parameters;
};

/// Built-in registry entries followed by config-defined rho entries
/// (keys registry.rho.<name>.fourier / registry.rho.<name>.constant).
inline std::vector<RegistryEntry> list_registry(const ConfigMap& custom = {}) {
  std::vector<RegistryEntry> out{
      {"base", "circle", "base.alpha (turns or 'golden')"},
      {"base", "torus", "base.alpha (comma list of turns), base.dim"},
      {"base", "cyclic", "base.period"},
      {"psi", "identity", "cocycle.dim"},
      {"psi", "constant_rotation", "cocycle.beta (radians); l = 2"},
      {"psi", "diagonal_rotations",
       "cocycle.dim, cocycle.psi.angles, optional cocycle.psi.windings / amplitudes / harmonics"},
      {"psi", "random", "cyclic base only; seeded Haar table, cocycle.dim"},
      {"rho", "zero", "cocycle.dim"},
      {"rho", "constant", "cocycle.rho.constant (comma list)"},
      {"rho", "fourier", "cocycle.rho.fourier = (k, a+bi), ...; l = 2, k over axis 0"},
      {"rho", "random", "cyclic base only; seeded Gaussian table, cocycle.dim"},
  };
  const std::string prefix = "registry.rho.";
  for (const auto& [k, v] : custom) {
    if (k.rfind(prefix, 0) != 0) continue;
    const auto rest = k.substr(prefix.size());
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos) throw ConfigError("registry key '" + k + "' needs a field (fourier or constant)");
    const auto name = rest.substr(0, dot);
    const auto field = rest.substr(dot + 1);
    if (field == "fourier") {
      config::parse_fourier(k, v);
    } else if (field == "constant") {
      config::parse_doubles(k, v);
    } else {
      throw ConfigError("registry key '" + k + "': unknown field '" + field + "'");
    }
    out.push_back({"rho", name, field + " = " + v + " (custom)"});
  }
  return out;
}

/// A validated experiment description.
struct ExperimentConfig {
  ConfigMap raw;
  std::string hash;
  std::string kind;
  std::optional<BaseSystem> base;
  std::size_t grid_size = 1024;
  double grid_offset = 0.0;
  std::string psi_kind;
  std::string rho_kind;
  int dim = 2;
  /// Null for randomized instance families.
  std::shared_ptr<const CocycleSpec> spec;
  std::vector<std::pair<std::int64_t, std::complex<double>>> rho_fourier;
  std::vector<double> lambdas;
  double eps = 1e-10;
  std::vector<std::int64_t> n_schedule;
  std::vector<std::int64_t> averaging_n;
  std::string averaging_twist = "psi";
  std::size_t averaging_points = 4;
  std::vector<double> candidate_lambdas;
  std::string oracle_kind = "auto";
  double denom_threshold = 1e-8;
  std::int64_t instances = 1;
  std::int64_t max_period = 16;
  std::vector<std::int64_t> random_dims{1, 2, 3};
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  unsigned threads = 1;

  SampleGrid grid() const { return make_grid(*base, grid_size, grid_offset); }
};

/// The vortex case: circle base, constant rotation and a trigonometric rho.
inline bool fourier_oracle_applicable(const ExperimentConfig& c) {
  return c.base && c.base->kind() == BaseKind::circle && c.psi_kind == "constant_rotation" &&
         (c.rho_kind == "fourier" || c.rho_kind == "zero" || !c.rho_fourier.empty());
}

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "base.kind", "base.alpha", "base.dim", "base.period", "base.uniquely_ergodic_extension", "grid.size",
      "grid.offset", "cocycle.dim", "cocycle.beta", "cocycle.psi.kind", "cocycle.psi.angles",
      "cocycle.psi.windings", "cocycle.psi.amplitudes", "cocycle.psi.harmonics", "cocycle.rho.kind",
      "cocycle.rho.fourier", "cocycle.rho.constant", "experiment.kind", "experiment.lambdas", "experiment.eps",
      "experiment.n_schedule", "experiment.averaging_n", "experiment.averaging_twist",
      "experiment.averaging_points", "experiment.candidate_lambdas", "experiment.instances", "oracle.kind",
      "oracle.denom_threshold", "oracle.max_period", "oracle.dims", "output.dir", "seed", "threads"};
  return keys;
}

inline const std::set<std::string>& experiment_kinds() {
  static const std::set<std::string> k{"solve",    "sweep",     "drift", "displacement",
                                       "theoremB", "averaging", "oracle-check"};
  return k;
}

class Reader {
 public:
  explicit Reader(const ConfigMap& m) : m_(m) {}
  bool has(const std::string& k) const { return m_.count(k) != 0; }
  const std::string& str(const std::string& k) const {
    const auto it = m_.find(k);
    if (it == m_.end()) throw ConfigError("missing required key '" + k + "'");
    return it->second;
  }
  std::string str(const std::string& k, const std::string& def) const { return has(k) ? str(k) : def; }
  double num(const std::string& k) const { return config::parse_double(k, str(k)); }
  double num(const std::string& k, double def) const { return has(k) ? num(k) : def; }
  std::int64_t integer(const std::string& k, std::int64_t def) const {
    return has(k) ? config::parse_int(k, str(k)) : def;
  }

 private:
  const ConfigMap& m_;
};

}  // namespace detail

/// Validates `raw` completely; nothing is written before this succeeds.
inline ExperimentConfig load_config(const ConfigMap& raw) {
  using detail::Reader;
  ExperimentConfig c;
  c.raw = raw;
  c.hash = config::hash(raw);
  const auto custom = list_registry(raw);  // validates registry.* keys
  for (const auto& [k, v] : raw) {
    if (k.rfind("registry.", 0) == 0) continue;
    if (!detail::known_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  const Reader r(raw);

  c.kind = r.str("experiment.kind");
  if (!detail::experiment_kinds().count(c.kind)) throw ConfigError("unknown experiment.kind '" + c.kind + "'");

  const std::int64_t seed = r.integer("seed", 0);
  if (seed < 0) throw ConfigError("seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  const std::int64_t threads = r.integer("threads", 1);
  if (threads < 1 || threads > 1024) throw ConfigError("threads must lie in [1, 1024]");
  c.threads = static_cast<unsigned>(threads);
  c.output_dir = r.str("output.dir", "out");
  if (c.output_dir.empty()) throw ConfigError("output.dir is empty");

  // Base.
  const std::string base_kind = r.str("base.kind", "circle");
  const bool ue = r.has("base.uniquely_ergodic_extension")
                      ? config::parse_bool("base.uniquely_ergodic_extension", r.str("base.uniquely_ergodic_extension"))
                      : false;
  try {
    if (base_kind == "circle") {
      c.base = BaseSystem::circle(r.num("base.alpha", kGoldenTurns), ue);
    } else if (base_kind == "torus") {
      auto alphas = config::parse_doubles("base.alpha", r.str("base.alpha"));
      if (r.has("base.dim") && r.integer("base.dim", 0) != static_cast<std::int64_t>(alphas.size())) {
        throw ConfigError("base.dim does not match the number of base.alpha entries");
      }
      c.base = BaseSystem::torus(std::move(alphas), ue);
    } else if (base_kind == "cyclic") {
      c.base = BaseSystem::cyclic(r.integer("base.period", 0));
    } else {
      throw ConfigError("unknown base.kind '" + base_kind + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("base: ") + e.what());
  }
  const std::int64_t grid_size = r.integer("grid.size", 1024);
  if (grid_size < 1 || grid_size > 100000000) throw ConfigError("grid.size must lie in [1, 1e8]");
  c.grid_size = static_cast<std::size_t>(grid_size);
  c.grid_offset = r.num("grid.offset", 0.0);

  // Schedules and tolerances.
  c.eps = r.num("experiment.eps", 1e-10);
  if (!(c.eps > 0.0)) throw ConfigError("experiment.eps must be positive");
  c.lambdas = r.has("experiment.lambdas") ? config::parse_doubles("experiment.lambdas", r.str("experiment.lambdas"))
                                          : default_lambda_schedule();
  try {
    check_lambda_schedule(c.lambdas);
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("experiment.lambdas: ") + e.what());
  }
  c.n_schedule = r.has("experiment.n_schedule")
                     ? config::parse_ints("experiment.n_schedule", r.str("experiment.n_schedule"))
                     : default_n_schedule();
  c.averaging_n = r.has("experiment.averaging_n")
                      ? config::parse_ints("experiment.averaging_n", r.str("experiment.averaging_n"))
                      : std::vector<std::int64_t>{100, 1000, 10000};
  for (const auto* sched : {&c.n_schedule, &c.averaging_n}) {
    for (std::size_t k = 0; k < sched->size(); ++k) {
      if ((*sched)[k] < 2 || (k > 0 && (*sched)[k] <= (*sched)[k - 1])) {
        throw ConfigError("n schedules must be increasing integers >= 2");
      }
    }
  }
  c.averaging_twist = r.str("experiment.averaging_twist", "psi");
  if (c.averaging_twist != "psi" && c.averaging_twist != "inverse_psi") {
    throw ConfigError("experiment.averaging_twist must be psi or inverse_psi");
  }
  const std::int64_t ap = r.integer("experiment.averaging_points", 4);
  if (ap < 1) throw ConfigError("experiment.averaging_points must be >= 1");
  c.averaging_points = static_cast<std::size_t>(ap);
  if (r.has("experiment.candidate_lambdas")) {
    c.candidate_lambdas = config::parse_doubles("experiment.candidate_lambdas", r.str("experiment.candidate_lambdas"));
    for (double l : c.candidate_lambdas) {
      if (!(l > 0.0 && l < 1.0)) throw ConfigError("experiment.candidate_lambdas entries must lie in (0, 1)");
    }
  }
  c.instances = r.integer("experiment.instances", 1);
  if (c.instances < 1) throw ConfigError("experiment.instances must be >= 1");

  c.oracle_kind = r.str("oracle.kind", "auto");
  if (c.oracle_kind != "auto" && c.oracle_kind != "fourier" && c.oracle_kind != "cyclic" && c.oracle_kind != "none") {
    throw ConfigError("oracle.kind must be auto, fourier, cyclic or none");
  }
  c.denom_threshold = r.num("oracle.denom_threshold", 1e-8);
  if (!(c.denom_threshold >= 0.0)) throw ConfigError("oracle.denom_threshold must be nonnegative");
  c.max_period = r.integer("oracle.max_period", 16);
  if (c.max_period < 1) throw ConfigError("oracle.max_period must be >= 1");
  if (r.has("oracle.dims")) c.random_dims = config::parse_ints("oracle.dims", r.str("oracle.dims"));
  for (auto d : c.random_dims) {
    if (d < 1 || d > kMaxFiberDim) throw ConfigError("oracle.dims entries must lie in [1, 8]");
  }

  // Cocycle.
  c.psi_kind = r.str("cocycle.psi.kind", "identity");
  c.rho_kind = r.str("cocycle.rho.kind", "zero");
  const bool cyclic = c.base->kind() == BaseKind::finite_cyclic;
  if ((c.psi_kind == "random") != (c.rho_kind == "random")) {
    throw ConfigError("random instances need both cocycle.psi.kind and cocycle.rho.kind = random");
  }
  if (c.psi_kind == "random") {
    if (!cyclic) throw ConfigError("random instances need a cyclic base");
    c.dim = static_cast<int>(r.integer("cocycle.dim", 2));
    if (c.dim < 1 || c.dim > kMaxFiberDim) throw ConfigError("cocycle.dim must lie in [1, 8]");
    if (c.kind != "oracle-check") throw ConfigError("random instances are only supported by oracle-check");
    return c;
  }

  try {
    std::optional<VectorField> rho;
    if (c.rho_kind == "fourier") {
      c.rho_fourier = config::parse_fourier("cocycle.rho.fourier", r.str("cocycle.rho.fourier"));
      rho = c.rho_fourier.empty() ? VectorField::zero(2) : VectorField::fourier_circle(c.rho_fourier);
    } else if (c.rho_kind == "constant") {
      const auto vals = config::parse_doubles("cocycle.rho.constant", r.str("cocycle.rho.constant"));
      if (vals.empty() || static_cast<int>(vals.size()) > kMaxFiberDim) {
        throw ConfigError("cocycle.rho.constant needs 1..8 components");
      }
      rho = VectorField::constant(Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    } else if (c.rho_kind == "zero") {
      rho = VectorField::zero(static_cast<int>(r.integer("cocycle.dim", 2)));
    } else {
      const std::string fk = "registry.rho." + c.rho_kind + ".fourier";
      const std::string ck = "registry.rho." + c.rho_kind + ".constant";
      if (r.has(fk)) {
        c.rho_fourier = config::parse_fourier(fk, r.str(fk));
        rho = c.rho_fourier.empty() ? VectorField::zero(2) : VectorField::fourier_circle(c.rho_fourier);
      } else if (r.has(ck)) {
        const auto vals = config::parse_doubles(ck, r.str(ck));
        rho = VectorField::constant(Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
      } else {
        throw ConfigError("unknown registry entry cocycle.rho.kind = '" + c.rho_kind + "'");
      }
    }
    c.dim = rho->dim();
    if (r.has("cocycle.dim") && r.integer("cocycle.dim", 0) != c.dim) {
      throw ConfigError("cocycle.dim does not match the rho entry");
    }

    std::optional<OrthogonalField> psi;
    if (c.psi_kind == "identity") {
      psi = OrthogonalField::identity(c.dim);
    } else if (c.psi_kind == "constant_rotation") {
      psi = OrthogonalField::constant_rotation(r.num("cocycle.beta"));
    } else if (c.psi_kind == "diagonal_rotations") {
      const auto offsets = config::parse_doubles("cocycle.psi.angles", r.str("cocycle.psi.angles"));
      auto optional_list = [&](const std::string& k) {
        std::vector<double> v = r.has(k) ? config::parse_doubles(k, r.str(k)) : std::vector<double>{};
        if (!v.empty() && v.size() != offsets.size()) throw ConfigError(k + " must match cocycle.psi.angles");
        return v;
      };
      const auto windings = optional_list("cocycle.psi.windings");
      const auto amplitudes = optional_list("cocycle.psi.amplitudes");
      const auto harmonics = optional_list("cocycle.psi.harmonics");
      std::vector<AngleFunction> blocks;
      for (std::size_t b = 0; b < offsets.size(); ++b) {
        AngleFunction f;
        f.offset = offsets[b];
        if (!windings.empty()) {
          if (windings[b] != std::floor(windings[b])) throw ConfigError("cocycle.psi.windings must be integers");
          f.winding = static_cast<std::int64_t>(windings[b]);
        }
        if (!amplitudes.empty()) f.amplitude = amplitudes[b];
        if (!harmonics.empty()) f.harmonic = static_cast<std::int64_t>(harmonics[b]);
        blocks.push_back(f);
      }
      psi = OrthogonalField::diagonal_rotations(c.dim, std::move(blocks));
    } else {
      throw ConfigError("unknown registry entry cocycle.psi.kind = '" + c.psi_kind + "'");
    }
    c.spec = std::make_shared<const CocycleSpec>(*c.base, std::move(*psi), std::move(*rho));
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("cocycle: ") + e.what());
  }
  (void)custom;

  // Experiment-specific feasibility, so that a run never fails half-way.
  if (c.oracle_kind == "fourier" && !fourier_oracle_applicable(c)) {
    throw ConfigError("oracle.kind = fourier needs a circle base, constant_rotation psi and a fourier rho");
  }
  if (c.oracle_kind == "cyclic" && !cyclic) throw ConfigError("oracle.kind = cyclic needs a cyclic base");
  for (const double l : c.lambdas) {
    try {
      (void)series_truncation(l, c.spec->rho_sup(), c.eps);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("experiment.lambdas: ") + e.what());
    }
  }
  return c;
}

/// One CSV table held in memory until the whole run has succeeded.
struct Table {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct RunResult {
  std::vector<Table> tables;
  /// Extra JSON documents (file name, content).
  std::vector<std::pair<std::string, nlohmann::json>> reports;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> anomalies;
};

/// Full precision (17 significant digits) scientific notation.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::vector<std::string> point_columns(const BasePoint& x) {
  std::vector<std::string> out;
  if (x.kind() == BaseKind::finite_cyclic) {
    out.push_back(std::to_string(x.index()));
  } else {
    for (double t : x.coords()) out.push_back(fmt(t));
  }
  return out;
}

inline std::vector<std::string> point_header(const BaseSystem& sys) {
  if (sys.kind() == BaseKind::torus) {
    std::vector<std::string> h;
    for (int a = 0; a < sys.torus_dim(); ++a) h.push_back("x" + std::to_string(a));
    return h;
  }
  return {"x"};
}

inline std::vector<std::string> component_header(const std::string& prefix, int l) {
  if (l == 2) return {prefix + "_re", prefix + "_im"};
  std::vector<std::string> h;
  for (int i = 0; i < l; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

inline void append(std::vector<std::string>& row, const FiberVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(fmt(v[i]));
}

inline nlohmann::json to_json(const FourierOracle& o) {
  nlohmann::json j;
  j["alpha"] = o.alpha;
  j["beta"] = o.beta;
  j["lambda"] = o.lambda;
  j["denom_threshold"] = o.denom_threshold;
  j["min_denominator"] = std::isfinite(o.min_denominator) ? nlohmann::json(o.min_denominator) : nlohmann::json();
  j["rejected"] = o.rejected;
  auto& hs = j["harmonics"] = nlohmann::json::array();
  for (const auto& h : o.harmonics) {
    hs.push_back({{"k", h.k},
                  {"rho", {h.rho.real(), h.rho.imag()}},
                  {"denominator", {h.denominator.real(), h.denominator.imag()}},
                  {"denominator_abs", std::abs(h.denominator)},
                  {"u", {h.u.real(), h.u.imag()}},
                  {"retained", h.retained}});
  }
  return j;
}

namespace detail {

/// u* for the configured cocycle when an exact solver applies (empty otherwise).
inline SectionFn exact_solution(const ExperimentConfig& c, nlohmann::json* report = nullptr) {
  const bool fourier = c.oracle_kind == "fourier" || (c.oracle_kind == "auto" && fourier_oracle_applicable(c));
  const bool cyclic =
      c.oracle_kind == "cyclic" || (c.oracle_kind == "auto" && c.base->kind() == BaseKind::finite_cyclic);
  if (fourier) {
    const auto o = fourier_solve(c.base->alpha(), std::arg(c.spec->psi().planar_value(BasePoint::circle(0.0))),
                                 c.rho_fourier, c.denom_threshold);
    if (report) *report = to_json(o);
    if (!o.complete()) return {};
    const VectorField u = o.solution();
    return [u](const BasePoint& x) { return u(x); };
  }
  if (cyclic) {
    const auto o = cyclic_solve(*c.spec, 1.0);
    if (report) {
      *report = {{"kernel_dim", o.kernel_dim}, {"singular", o.singular}, {"solvable", o.solvable},
                 {"condition_number", std::isfinite(o.condition_number) ? nlohmann::json(o.condition_number) : nlohmann::json()},
                 {"residual", o.residual}};
    }
    if (!o.solvable) return {};
    return [o](const BasePoint& x) { return o(x); };
  }
  return {};
}

inline RunResult run_solve(const ExperimentConfig& c) {
  RunResult r;
  const SampleGrid grid = c.grid();
  nlohmann::json oracle_report;
  const SectionFn oracle = exact_solution(c, &oracle_report);
  if (!oracle_report.is_null()) r.summary["oracle"] = oracle_report;
  std::vector<FiberVector> reference;
  if (oracle) {
    for (const auto& x : grid.points) reference.push_back(oracle(x));
  }
  Table t{"solve.csv", {"lambda"}, {}};
  for (const auto& h : point_header(*c.base)) t.header.push_back(h);
  for (const auto& h : component_header("u", c.dim)) t.header.push_back(h);
  for (const auto* h : {"residual_lambda", "residual_one", "dist_to_oracle"}) t.header.push_back(h);
  const double bound = 2.0 * c.eps + 1e-10;
  auto& per_lambda = r.summary["lambdas"] = nlohmann::json::array();
  for (const double lambda : c.lambdas) {
    const Section u = solve_u_lambda(c.spec, lambda, grid, c.eps, c.threads);
    std::vector<FiberVector> images(grid.size());
    parallel_for(grid.size(), c.threads, [&](std::size_t i) { images[i] = u(c.spec->step(grid[i], 1)); });
    double max_res = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const FiberVector base_part = c.spec->psi()(grid[i]) * u.values[i] + c.spec->rho()(grid[i]);
      const double res_l = (lambda * images[i] - base_part).norm();
      const double res_1 = (images[i] - base_part).norm();
      max_res = std::max(max_res, res_l);
      std::vector<std::string> row{fmt(lambda)};
      for (auto& p : point_columns(grid[i])) row.push_back(std::move(p));
      append(row, u.values[i]);
      row.push_back(fmt(res_l));
      row.push_back(fmt(res_1));
      row.push_back(oracle ? fmt((u.values[i] - reference[i]).norm()) : "");
      t.rows.push_back(std::move(row));
    }
    per_lambda.push_back({{"lambda", lambda}, {"max_residual_lambda", max_res}, {"bound", bound},
                          {"sup_u", u.sup_norm}});
    if (max_res > bound) {
      r.anomalies.push_back("solve: residual " + fmt(max_res) + " exceeds 2 eps + 1e-10 at lambda " + fmt(lambda));
    }
  }
  r.tables.push_back(std::move(t));
  return r;
}

inline RunResult run_sweep(const ExperimentConfig& c) {
  RunResult r;
  const SampleGrid grid = c.grid();
  nlohmann::json oracle_report;
  const SectionFn oracle = exact_solution(c, &oracle_report);
  if (!oracle_report.is_null()) r.summary["oracle"] = oracle_report;
  const LambdaSweep sw = sweep(c.spec, c.lambdas, grid, c.eps, oracle, c.threads);
  Table t{"sweep.csv",
          {"lambda", "residual_lambda", "residual_one", "sup_u_image", "dist_sup", "dist_l1", "dist_l2"},
          {}};
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& e : sw.entries) {
    t.rows.push_back({fmt(e.lambda), fmt(e.residual_lambda), fmt(e.residual_one), fmt(e.image_sup),
                      opt(e.dist_sup), opt(e.dist_l1), opt(e.dist_l2)});
    if (e.residual_lambda > 2.0 * c.eps + 1e-10) {
      r.anomalies.push_back("sweep: residual exceeds 2 eps + 1e-10 at lambda " + fmt(e.lambda));
    }
  }
  r.summary["oracle_available"] = static_cast<bool>(oracle);
  if (oracle) {
    r.summary["distances_decreasing"] = sw.decreasing;
    if (!sw.decreasing) r.anomalies.push_back("sweep: distances to the exact solution are not decreasing");
  }
  r.tables.push_back(std::move(t));
  return r;
}

inline Table drift_table(const DriftEstimate& d) {
  Table t{"drift.csv", {"n", "D_n", "n_D_n", "C_fit"}, {}};
  for (std::size_t k = 0; k < d.n.size(); ++k) {
    t.rows.push_back({std::to_string(d.n[k]), fmt(d.d[k]), fmt(static_cast<double>(d.n[k]) * d.d[k]), fmt(d.c_fit)});
  }
  return t;
}

inline nlohmann::json drift_summary(const DriftEstimate& d) {
  return {{"zero_drift", d.zero_drift},
          {"c_fit", d.c_fit},
          {"intercept", d.intercept},
          {"r_squared", d.r_squared},
          {"max_n_times_d", d.max_n_times_d},
          {"decay_exponent", std::isfinite(d.decay_exponent) ? nlohmann::json(d.decay_exponent) : nlohmann::json()}};
}

inline Table displacement_table(const DisplacementCurve& cv) {
  Table t{"displacement.csv", {"lambda", "displacement", "bound"}, {}};
  for (std::size_t k = 0; k < cv.lambda.size(); ++k) {
    t.rows.push_back({fmt(cv.lambda[k]), fmt(cv.displacement[k]), fmt(cv.bound[k])});
  }
  return t;
}

inline RunResult run_drift(const ExperimentConfig& c) {
  RunResult r;
  const auto d = drift_estimate(*c.spec, c.grid(), c.n_schedule, std::nullopt, c.threads);
  r.tables.push_back(drift_table(d));
  r.summary = drift_summary(d);
  return r;
}

inline RunResult run_displacement(const ExperimentConfig& c) {
  RunResult r;
  const auto cv = displacement_curve(c.spec, c.lambdas, c.grid(), c.eps, c.threads);
  r.tables.push_back(displacement_table(cv));
  r.summary = {{"identity_gap", cv.identity_gap}, {"strictly_decreasing", cv.strictly_decreasing}};
  if (cv.identity_gap > 2.0 * c.eps + 1e-10) {
    r.anomalies.push_back("displacement differs from (1 - lambda) sup|u_lambda(Tx)| by " + fmt(cv.identity_gap));
  }
  return r;
}

inline Table averaging_table(const std::vector<BasePoint>& pts, const std::vector<AveragingReport>& reps, int l,
                             double bound) {
  Table t{"averaging.csv", {"x", "N_or_lambda", "method"}, {}};
  for (const auto& h : component_header("z", l)) t.header.push_back(h);
  t.header.push_back("bound");
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const std::string x = point_columns(pts[p]).front();
    const auto& rep = reps[p];
    for (std::size_t k = 0; k < rep.n.size(); ++k) {
      std::vector<std::string> ces{x, std::to_string(rep.n[k]), "cesaro"};
      append(ces, rep.cesaro[k]);
      ces.push_back(fmt(bound));
      t.rows.push_back(std::move(ces));
      std::vector<std::string> abel{x, fmt(rep.lambda[k]), "abel"};
      append(abel, rep.abel[k]);
      abel.push_back(fmt(bound));
      t.rows.push_back(std::move(abel));
    }
  }
  return t;
}

inline nlohmann::json averaging_summary(const std::vector<AveragingReport>& reps) {
  double disc = 0.0;
  bool tracks = true;
  bool bounded = true;
  for (const auto& r : reps) {
    disc = std::max(disc, r.max_discrepancy);
    tracks = tracks && r.tracks;
    bounded = bounded && r.bounded;
  }
  return {{"max_discrepancy", disc}, {"tracks", tracks}, {"bounded", bounded}};
}

inline RunResult run_theorem_b(const ExperimentConfig& c) {
  RunResult r;
  const SampleGrid grid = c.grid();
  TheoremBOptions opt;
  opt.eps = c.eps;
  opt.averaging_schedule = c.averaging_n;
  opt.threads = c.threads;
  for (const double l : c.candidate_lambdas) {
    auto spec = c.spec;
    const double eps = c.eps;
    opt.candidates.push_back({"u_lambda(" + fmt(l) + ")",
                              [spec, l, eps](const BasePoint& x) { return evaluate_u_lambda(*spec, l, x, eps); }});
  }
  const auto rep = theorem_B_pipeline(c.spec, grid, c.lambdas, c.n_schedule, opt);
  r.tables.push_back(drift_table(rep.drift));
  r.tables.push_back(displacement_table(rep.curve));
  r.tables.push_back(averaging_table({grid[0]}, {rep.averaging}, c.dim, c.spec->rho_sup()));
  r.summary["drift"] = drift_summary(rep.drift);
  r.summary["displacement"] = {{"identity_gap", rep.curve.identity_gap},
                               {"strictly_decreasing", rep.curve.strictly_decreasing}};
  r.summary["averaging"] = averaging_summary({rep.averaging});
  auto& cands = r.summary["candidates"] = nlohmann::json::array();
  for (const auto& ch : rep.candidates) {
    cands.push_back({{"name", ch.name}, {"displacement", ch.displacement}, {"sup", ch.sup},
                     {"contradiction_at", ch.contradiction_at ? nlohmann::json(*ch.contradiction_at) : nlohmann::json()}});
  }
  r.anomalies = rep.anomalies;
  return r;
}

inline RunResult run_averaging(const ExperimentConfig& c) {
  RunResult r;
  const SampleGrid grid = c.grid();
  std::vector<BasePoint> pts;
  for (std::size_t i = 0; i < std::min(c.averaging_points, grid.size()); ++i) pts.push_back(grid[i]);
  std::vector<AveragingReport> reps(pts.size());
  auto run = [&](const auto& seq) {
    parallel_for(pts.size(), c.threads,
                 [&](std::size_t i) { reps[i] = frobenius_compare(seq, pts[i], c.averaging_n, std::nullopt, c.eps); });
  };
  if (c.averaging_twist == "psi") {
    run(TwistedSequence(*c.base, c.spec->psi(), c.spec->rho(), c.spec->rho_sup()));
  } else {
    run(TwistedSequence(*c.base, InverseField(c.spec->psi()), c.spec->rho(), c.spec->rho_sup()));
  }
  r.tables.push_back(averaging_table(pts, reps, c.dim, c.spec->rho_sup()));
  r.summary = averaging_summary(reps);
  const SampleGrid vn_grid = make_grid(*c.base, std::min<std::size_t>(grid.size(), 64));
  auto& vn = r.summary["von_neumann_residual"] = nlohmann::json::array();
  const TwistedSequence seq(*c.base, c.spec->psi(), c.spec->rho(), c.spec->rho_sup());
  for (const auto n : c.averaging_n) vn.push_back({{"N", n}, {"residual", von_neumann_residual(seq, vn_grid, n)}});
  return r;
}

inline RunResult run_oracle_check(const ExperimentConfig& c) {
  RunResult r;
  constexpr double kTolerance = 1e-12;
  double worst = 0.0;
  if (c.psi_kind == "random" || (c.spec && c.base->kind() == BaseKind::finite_cyclic)) {
    Table t{"oracle_check.csv",
            {"instance", "period", "dim", "lambda", "max_abs_diff", "oracle_residual", "condition_number"},
            {}};
    std::mt19937_64 rng(c.seed);
    for (std::int64_t inst = 0; inst < c.instances; ++inst) {
      std::shared_ptr<const CocycleSpec> spec = c.spec;
      if (c.psi_kind == "random") {
        std::uniform_int_distribution<std::int64_t> period(1, c.max_period);
        std::uniform_int_distribution<std::size_t> dim_pick(0, c.random_dims.size() - 1);
        const std::int64_t p = period(rng);
        const int l = static_cast<int>(c.random_dims[dim_pick(rng)]);
        spec = std::make_shared<const CocycleSpec>(random_cyclic_spec(rng, p, l));
      }
      const std::int64_t p = spec->base().period();
      for (const double lambda : c.lambdas) {
        const auto o = cyclic_solve(*spec, lambda);
        double diff = 0.0;
        for (std::int64_t i = 0; i < p; ++i) {
          const BasePoint x = BasePoint::cyclic(i, p);
          diff = std::max(diff, (evaluate_u_lambda(*spec, lambda, x, c.eps) - o(x)).norm());
        }
        worst = std::max(worst, diff);
        t.rows.push_back({std::to_string(inst), std::to_string(p), std::to_string(spec->dim()), fmt(lambda), fmt(diff),
                          fmt(o.residual), fmt(o.condition_number)});
      }
      if (c.psi_kind != "random") {
        const auto o = cyclic_solve(*spec, 1.0);
        r.summary["lambda_one"] = {{"kernel_dim", o.kernel_dim}, {"singular", o.singular}, {"solvable", o.solvable},
                                   {"residual", o.residual}};
      }
    }
    r.tables.push_back(std::move(t));
  } else if (fourier_oracle_applicable(c)) {
    const SampleGrid grid = c.grid();
    const double alpha = c.base->alpha();
    const double beta = std::arg(c.spec->psi().planar_value(grid[0]));
    Table t{"oracle_check.csv", {"lambda", "max_abs_diff", "min_denominator", "rejected"}, {}};
    nlohmann::json reports = nlohmann::json::array();
    for (const double lambda : c.lambdas) {
      const auto o = fourier_solve(alpha, beta, c.rho_fourier, c.denom_threshold, lambda);
      reports.push_back(to_json(o));
      double diff = 0.0;
      if (o.complete()) {
        std::vector<double> d(grid.size());
        parallel_for(grid.size(), c.threads, [&](std::size_t i) {
          d[i] = std::abs(to_complex(evaluate_u_lambda(*c.spec, lambda, grid[i], c.eps)) - o(grid[i].angle()));
        });
        for (double v : d) diff = std::max(diff, v);
        worst = std::max(worst, diff);
      }
      t.rows.push_back({fmt(lambda), o.complete() ? fmt(diff) : "", fmt(o.min_denominator),
                        std::to_string(o.rejected.size())});
    }
    const auto exact = fourier_solve(alpha, beta, c.rho_fourier, c.denom_threshold);
    reports.push_back(to_json(exact));
    if (exact.complete()) {
      const VectorField u = exact.solution();
      const Section s = Section::sample(grid, [u](const BasePoint& x) { return u(x); }, c.threads);
      r.summary["residual_lambda_one"] = residual(*c.spec, 1.0, s, c.threads);
    } else {
      r.summary["rejected_harmonics"] = exact.rejected;
    }
    r.reports.emplace_back("oracle.json", std::move(reports));
    r.tables.push_back(std::move(t));
  } else {
    throw ConfigError("oracle-check needs a cyclic base or the circle vortex (constant_rotation psi, fourier rho)");
  }
  r.summary["max_abs_diff"] = worst;
  r.summary["tolerance"] = kTolerance;
  if (worst > kTolerance) r.anomalies.push_back("oracle-check: series and oracle differ by " + fmt(worst));
  return r;
}

}  // namespace detail

/// Runs the configured experiment in memory; nothing is written.
inline RunResult run_experiment(const ExperimentConfig& c) {
  if (c.kind == "solve") return detail::run_solve(c);
  if (c.kind == "sweep") return detail::run_sweep(c);
  if (c.kind == "drift") return detail::run_drift(c);
  if (c.kind == "displacement") return detail::run_displacement(c);
  if (c.kind == "theoremB") return detail::run_theorem_b(c);
  if (c.kind == "averaging") return detail::run_averaging(c);
  return detail::run_oracle_check(c);
}

/// Writes every table (each headed by a "# config_hash=..." comment row), the JSON
/// reports and manifest.json into `dir`.
inline void write_outputs(const ExperimentConfig& c, const RunResult& r, double wall_seconds,
                          const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
  const std::string stamp = "# config_hash=" + c.hash + " seed=" + std::to_string(c.seed) + " experiment=" + c.kind +
                            " version=" + kVersion + "\n";
  nlohmann::json files = nlohmann::json::array();
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + (fs::path(dir) / name).string() + "'");
    files.push_back(name);
    return out;
  };
  for (const auto& t : r.tables) {
    auto out = open(t.file);
    out << stamp;
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << "\n";
    }
    if (!out) throw Error("failed writing '" + t.file + "'");
  }
  for (const auto& [name, doc] : r.reports) {
    auto out = open(name);
    nlohmann::json wrapped = {{"config_hash", c.hash}, {"seed", c.seed}, {"report", doc}};
    out << wrapped.dump(2) << "\n";
  }
  nlohmann::json m;
  m["artifact"] = "cocycle-forge";
  m["version"] = kVersion;
  m["config_hash"] = c.hash;
  m["seed"] = c.seed;
  m["threads"] = c.threads;
  m["experiment"] = c.kind;
  m["wall_clock_seconds"] = wall_seconds;
  m["summary"] = r.summary;
  m["anomalies"] = r.anomalies;
  m["files"] = files;
  m["config"] = c.raw;
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write manifest in '" + dir + "'");
  out << m.dump(2) << "\n";
}

/// Thread count precedence: explicit flag, then COCYCLE_FORGE_THREADS, then config.
inline unsigned resolve_threads(std::optional<unsigned> flag, unsigned from_config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("COCYCLE_FORGE_THREADS"); env && *env) {
    const auto v = config::parse_int("COCYCLE_FORGE_THREADS", env);
    if (v < 1 || v > 1024) throw ConfigError("COCYCLE_FORGE_THREADS must lie in [1, 1024]");
    return static_cast<unsigned>(v);
  }
  return from_config;
}

}  // namespace cocycle_forge
