#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "energy.hpp"
#include "geometry.hpp"
#include "horizon.hpp"
#include "kernel.hpp"
#include "nlgrad.hpp"

namespace nlfilm {

struct KernelConfig {
  std::string family = "truncated-fractional";
  double s = 0.5;
  std::string cutoff = "bump";
};

struct GridConfig {
  std::array<int, 3> dims{48, 48, 12};
  std::array<double, 3> lengths{4.8, 4.8, 4.0};
};

struct DomainConfig {
  std::string cross_section = "rectangle";
  std::vector<double> size{2.0, 2.0};  // rectangle sides, or a single disk radius
  std::array<double, 2> center{2.4, 2.4};
  std::array<double, 2> interval{4.0 / 3.0, 7.0 / 3.0};
  std::array<double, 2> horizon{1.0, 1.0};  // fattening horizon for geometry queries
  double jitter = 0.0;                      // shift of the placement, in cells
};

struct DensityConfig {
  std::string family = "anisotropic";
  double p = 2.0;
  double alpha = 1.0;
  std::array<double, 3> v{0.0, 0.0, 0.5};
  double lambda = 1.0;
};

struct RegimeConfig {
  std::string name = "aniso";
  double epsilon = 0.1;
  std::optional<std::array<double, 2>> horizon;  // physical horizon; defaults to the regime's δ(ε)
  std::string realization = "compact";
};

struct SweepBlockConfig {
  std::vector<double> eps_list{0.4, 0.2, 0.1, 0.05};
  int max_iters = 20000;
  double gradient_tol = 1e-6;
  int memory = 12;
  double slack = 0.1;
  int test_fields = 20;
  double force_amplitude = 1.0;
  bool dump_fields = true;
};

struct RunConfig {
  KernelConfig kernel;
  GridConfig grid;
  DomainConfig domain;
  DensityConfig density;
  RegimeConfig regime;
  SweepBlockConfig sweep;
  std::string output = "results";
  std::uint64_t seed = 1;
  int threads = 1;
};

namespace detail {

inline std::string short_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

class YamlReader {
 public:
  explicit YamlReader(std::string path) : path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& key, const YAML::Node& n, const std::string& msg) const {
    const int line = n.IsDefined() && n.Mark().line >= 0 ? n.Mark().line + 1 : -1;
    throw ConfigError(path_ + ": " + key + ": " + msg, key, line);
  }

  void expect_map(const YAML::Node& n, const std::string& key) const {
    if (!n.IsMap()) fail(key, n, "expected a mapping");
  }

  void only_keys(const YAML::Node& n, const std::string& prefix, const std::set<std::string>& allowed) const {
    for (const auto& kv : n) {
      const auto k = kv.first.as<std::string>();
      if (!allowed.count(k)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(prefix.empty() ? k : prefix + "." + k, kv.first, "unknown key (allowed: " + list + ")");
      }
    }
  }

  template <class T>
  void get(const YAML::Node& parent, const std::string& prefix, const std::string& key, T& out) const {
    const YAML::Node n = parent[key];
    if (!n.IsDefined() || n.IsNull()) return;
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      fail(path, n, "wrong type");
    }
  }

  template <class T, std::size_t N>
  void get(const YAML::Node& parent, const std::string& prefix, const std::string& key, std::array<T, N>& out) const {
    const YAML::Node n = parent[key];
    if (!n.IsDefined() || n.IsNull()) return;
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!n.IsSequence() || n.size() != N) fail(path, n, "expected a list of " + std::to_string(N) + " numbers");
    try {
      for (std::size_t i = 0; i < N; ++i) out[i] = n[i].as<T>();
    } catch (const YAML::Exception&) {
      fail(path, n, "wrong element type");
    }
  }

 private:
  std::string path_;
};

}  // namespace detail

inline void validate_config(const RunConfig& c, const YAML::Node& root, const detail::YamlReader& r) {
  const auto node = [&](const std::string& block, const std::string& key) {
    const YAML::Node b = root[block];
    return b.IsDefined() && b[key].IsDefined() ? b[key] : (b.IsDefined() ? b : root);
  };
  if (c.kernel.family != "truncated-fractional")
    r.fail("kernel.family", node("kernel", "family"), "only truncated-fractional is supported");
  if (!(c.kernel.s > 0.0 && c.kernel.s < 1.0)) r.fail("kernel.s", node("kernel", "s"), "must lie in (0, 1)");
  if (c.kernel.cutoff != "bump" && c.kernel.cutoff != "plateau")
    r.fail("kernel.cutoff", node("kernel", "cutoff"), "expected bump|plateau");
  for (int a = 0; a < 3; ++a) {
    if (c.grid.dims[a] < 4 || c.grid.dims[a] % 2) r.fail("grid.dims", node("grid", "dims"), "entries must be even and >= 4");
    if (!(c.grid.lengths[a] > 0.0)) r.fail("grid.lengths", node("grid", "lengths"), "entries must be positive");
  }
  if (c.domain.cross_section == "rectangle") {
    if (c.domain.size.size() != 2) r.fail("domain.size", node("domain", "size"), "rectangle needs [a, b]");
  } else if (c.domain.cross_section == "disk") {
    if (c.domain.size.size() != 1) r.fail("domain.size", node("domain", "size"), "disk needs [R]");
  } else {
    r.fail("domain.cross_section", node("domain", "cross_section"), "expected rectangle|disk");
  }
  for (double v : c.domain.size)
    if (!(v > 0.0)) r.fail("domain.size", node("domain", "size"), "entries must be positive");
  if (!(c.domain.interval[1] > c.domain.interval[0]))
    r.fail("domain.interval", node("domain", "interval"), "needs z0 < z1");
  for (double v : c.domain.horizon)
    if (!(v >= 0.0 && v <= 1.0)) r.fail("domain.horizon", node("domain", "horizon"), "components must lie in [0, 1]");
  if (c.density.family != "power" && c.density.family != "anisotropic" && c.density.family != "double-well")
    r.fail("density.family", node("density", "family"), "expected power|anisotropic|double-well");
  if (!(c.density.p > 1.0)) r.fail("density.p", node("density", "p"), "must exceed 1");
  if (!(c.density.alpha >= 0.0)) r.fail("density.alpha", node("density", "alpha"), "must be non-negative");
  if (!(c.density.lambda > 0.0)) r.fail("density.lambda", node("density", "lambda"), "must be positive");
  if (c.regime.name != "aniso" && c.regime.name != "iso") r.fail("regime.name", node("regime", "name"), "expected aniso|iso");
  if (c.regime.realization != "compact" && c.regime.realization != "spectral")
    r.fail("regime.realization", node("regime", "realization"), "expected compact|spectral");
  if (!(c.regime.epsilon > 0.0 && c.regime.epsilon <= 1.0))
    r.fail("regime.epsilon", node("regime", "epsilon"), "must lie in (0, 1]");
  if (c.regime.horizon) {
    const auto& h = *c.regime.horizon;
    if (!(h[0] >= 0.0 && h[0] <= 1.0 && h[1] >= 0.0 && h[1] <= 1.0))
      r.fail("regime.horizon", node("regime", "horizon"), "components must lie in [0, 1]");
    if (h[1] > c.regime.epsilon)
      r.fail("regime.horizon", node("regime", "horizon"),
             "out-of-plane horizon " + detail::short_number(h[1]) + " exceeds thickness epsilon " + detail::short_number(c.regime.epsilon) +
                 " (the thin-film model requires delta_3 <= epsilon)");
  }
  if (c.sweep.eps_list.empty()) r.fail("sweep.eps_list", node("sweep", "eps_list"), "must not be empty");
  for (std::size_t i = 0; i < c.sweep.eps_list.size(); ++i) {
    if (!(c.sweep.eps_list[i] > 0.0 && c.sweep.eps_list[i] <= 1.0))
      r.fail("sweep.eps_list", node("sweep", "eps_list"), "entries must lie in (0, 1]");
    if (i && !(c.sweep.eps_list[i] < c.sweep.eps_list[i - 1]))
      r.fail("sweep.eps_list", node("sweep", "eps_list"), "must be strictly decreasing");
  }
  if (c.sweep.max_iters < 1) r.fail("sweep.max_iters", node("sweep", "max_iters"), "must be positive");
  if (!(c.sweep.gradient_tol > 0.0)) r.fail("sweep.gradient_tol", node("sweep", "gradient_tol"), "must be positive");
  if (c.sweep.memory < 1) r.fail("sweep.memory", node("sweep", "memory"), "must be at least 1");
  if (!(c.sweep.slack >= 0.0)) r.fail("sweep.slack", node("sweep", "slack"), "must be non-negative");
  if (c.sweep.test_fields < 0) r.fail("sweep.test_fields", node("sweep", "test_fields"), "must be non-negative");
  if (c.threads < 1) r.fail("threads", root["threads"], "must be at least 1");
}

inline RunConfig parse_config_node(const YAML::Node& root, const std::string& source) {
  const detail::YamlReader r(source);
  RunConfig c;
  if (root.IsNull()) return c;
  r.expect_map(root, "<root>");
  r.only_keys(root, "", {"kernel", "grid", "domain", "density", "regime", "sweep", "output", "seed", "threads"});
  if (auto n = root["kernel"]; n.IsDefined()) {
    r.expect_map(n, "kernel");
    r.only_keys(n, "kernel", {"family", "s", "cutoff"});
    r.get(n, "kernel", "family", c.kernel.family);
    r.get(n, "kernel", "s", c.kernel.s);
    r.get(n, "kernel", "cutoff", c.kernel.cutoff);
  }
  if (auto n = root["grid"]; n.IsDefined()) {
    r.expect_map(n, "grid");
    r.only_keys(n, "grid", {"dims", "lengths"});
    r.get(n, "grid", "dims", c.grid.dims);
    r.get(n, "grid", "lengths", c.grid.lengths);
  }
  if (auto n = root["domain"]; n.IsDefined()) {
    r.expect_map(n, "domain");
    r.only_keys(n, "domain", {"cross_section", "size", "center", "interval", "horizon", "jitter"});
    r.get(n, "domain", "cross_section", c.domain.cross_section);
    r.get(n, "domain", "size", c.domain.size);
    r.get(n, "domain", "center", c.domain.center);
    r.get(n, "domain", "interval", c.domain.interval);
    r.get(n, "domain", "horizon", c.domain.horizon);
    r.get(n, "domain", "jitter", c.domain.jitter);
  }
  if (auto n = root["density"]; n.IsDefined()) {
    r.expect_map(n, "density");
    r.only_keys(n, "density", {"family", "p", "alpha", "v", "lambda"});
    r.get(n, "density", "family", c.density.family);
    r.get(n, "density", "p", c.density.p);
    r.get(n, "density", "alpha", c.density.alpha);
    r.get(n, "density", "v", c.density.v);
    r.get(n, "density", "lambda", c.density.lambda);
  }
  if (auto n = root["regime"]; n.IsDefined()) {
    r.expect_map(n, "regime");
    r.only_keys(n, "regime", {"name", "epsilon", "horizon", "realization"});
    r.get(n, "regime", "name", c.regime.name);
    r.get(n, "regime", "epsilon", c.regime.epsilon);
    r.get(n, "regime", "realization", c.regime.realization);
    if (n["horizon"].IsDefined() && !n["horizon"].IsNull()) {
      std::array<double, 2> h{};
      r.get(n, "regime", "horizon", h);
      c.regime.horizon = h;
    }
  }
  if (auto n = root["sweep"]; n.IsDefined()) {
    r.expect_map(n, "sweep");
    r.only_keys(n, "sweep", {"eps_list", "max_iters", "gradient_tol", "memory", "slack", "test_fields",
                             "force_amplitude", "dump_fields"});
    r.get(n, "sweep", "eps_list", c.sweep.eps_list);
    r.get(n, "sweep", "max_iters", c.sweep.max_iters);
    r.get(n, "sweep", "gradient_tol", c.sweep.gradient_tol);
    r.get(n, "sweep", "memory", c.sweep.memory);
    r.get(n, "sweep", "slack", c.sweep.slack);
    r.get(n, "sweep", "test_fields", c.sweep.test_fields);
    r.get(n, "sweep", "force_amplitude", c.sweep.force_amplitude);
    r.get(n, "sweep", "dump_fields", c.sweep.dump_fields);
  }
  r.get(root, "", "output", c.output);
  r.get(root, "", "seed", c.seed);
  r.get(root, "", "threads", c.threads);
  validate_config(c, root, r);
  return c;
}

inline RunConfig parse_config_string(const std::string& text, const std::string& source = "<string>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ": " + e.what(), "<root>", e.mark.line + 1);
  }
  return parse_config_node(root, source);
}

inline RunConfig parse_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file " + path, "<file>", -1);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(path + ": " + e.what(), "<root>", e.mark.line + 1);
  }
  return parse_config_node(root, path);
}

inline std::string to_yaml(const RunConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap << YAML::Key << "family" << YAML::Value << c.kernel.family
    << YAML::Key << "s" << YAML::Value << c.kernel.s << YAML::Key << "cutoff" << YAML::Value << c.kernel.cutoff
    << YAML::EndMap;
  e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap << YAML::Key << "dims" << YAML::Value << YAML::Flow
    << std::vector<int>(c.grid.dims.begin(), c.grid.dims.end()) << YAML::Key << "lengths" << YAML::Value << YAML::Flow
    << std::vector<double>(c.grid.lengths.begin(), c.grid.lengths.end()) << YAML::EndMap;
  e << YAML::Key << "domain" << YAML::Value << YAML::BeginMap << YAML::Key << "cross_section" << YAML::Value
    << c.domain.cross_section << YAML::Key << "size" << YAML::Value << YAML::Flow << c.domain.size << YAML::Key
    << "center" << YAML::Value << YAML::Flow << std::vector<double>(c.domain.center.begin(), c.domain.center.end())
    << YAML::Key << "interval" << YAML::Value << YAML::Flow
    << std::vector<double>(c.domain.interval.begin(), c.domain.interval.end()) << YAML::Key << "horizon"
    << YAML::Value << YAML::Flow << std::vector<double>(c.domain.horizon.begin(), c.domain.horizon.end())
    << YAML::Key << "jitter" << YAML::Value << c.domain.jitter << YAML::EndMap;
  e << YAML::Key << "density" << YAML::Value << YAML::BeginMap << YAML::Key << "family" << YAML::Value
    << c.density.family << YAML::Key << "p" << YAML::Value << c.density.p << YAML::Key << "alpha" << YAML::Value
    << c.density.alpha << YAML::Key << "v" << YAML::Value << YAML::Flow
    << std::vector<double>(c.density.v.begin(), c.density.v.end()) << YAML::Key << "lambda" << YAML::Value
    << c.density.lambda << YAML::EndMap;
  e << YAML::Key << "regime" << YAML::Value << YAML::BeginMap << YAML::Key << "name" << YAML::Value << c.regime.name
    << YAML::Key << "epsilon" << YAML::Value << c.regime.epsilon;
  if (c.regime.horizon)
    e << YAML::Key << "horizon" << YAML::Value << YAML::Flow
      << std::vector<double>(c.regime.horizon->begin(), c.regime.horizon->end());
  e << YAML::Key << "realization" << YAML::Value << c.regime.realization << YAML::EndMap;
  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap << YAML::Key << "eps_list" << YAML::Value << YAML::Flow
    << c.sweep.eps_list << YAML::Key << "max_iters" << YAML::Value << c.sweep.max_iters << YAML::Key
    << "gradient_tol" << YAML::Value << c.sweep.gradient_tol << YAML::Key << "memory" << YAML::Value
    << c.sweep.memory << YAML::Key << "slack" << YAML::Value << c.sweep.slack << YAML::Key << "test_fields"
    << YAML::Value << c.sweep.test_fields << YAML::Key << "force_amplitude" << YAML::Value
    << c.sweep.force_amplitude << YAML::Key << "dump_fields" << YAML::Value << c.sweep.dump_fields << YAML::EndMap;
  e << YAML::Key << "output" << YAML::Value << c.output << YAML::Key << "seed" << YAML::Value << c.seed << YAML::Key
    << "threads" << YAML::Value << c.threads;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["kernel"] = {{"family", c.kernel.family}, {"s", c.kernel.s}, {"cutoff", c.kernel.cutoff}};
  j["grid"] = {{"dims", c.grid.dims}, {"lengths", c.grid.lengths}};
  j["domain"] = {{"cross_section", c.domain.cross_section}, {"size", c.domain.size}, {"center", c.domain.center},
                 {"interval", c.domain.interval}, {"horizon", c.domain.horizon}, {"jitter", c.domain.jitter}};
  j["density"] = {{"family", c.density.family}, {"p", c.density.p}, {"alpha", c.density.alpha},
                  {"v", c.density.v}, {"lambda", c.density.lambda}};
  j["regime"] = {{"name", c.regime.name}, {"epsilon", c.regime.epsilon}, {"realization", c.regime.realization}};
  j["regime"]["horizon"] = c.regime.horizon ? nlohmann::ordered_json(*c.regime.horizon) : nlohmann::ordered_json();
  j["sweep"] = {{"eps_list", c.sweep.eps_list},       {"max_iters", c.sweep.max_iters},
                {"gradient_tol", c.sweep.gradient_tol}, {"memory", c.sweep.memory},
                {"slack", c.sweep.slack},               {"test_fields", c.sweep.test_fields},
                {"force_amplitude", c.sweep.force_amplitude}, {"dump_fields", c.sweep.dump_fields}};
  j["output"] = c.output;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

// ---------------------------------------------------------------------------
// builders

inline RadialKernel make_kernel(const KernelConfig& k, int dim = 3) {
  return make_truncated_fractional(k.s, Cutoff::from_name(k.cutoff), dim);
}

inline SlabDomain make_domain(const RunConfig& c) {
  const Grid<3> g(c.grid.dims, c.grid.lengths);
  Point2 center = c.domain.center;
  for (int a = 0; a < 2; ++a) center[a] += c.domain.jitter * g.spacing(a);
  const CrossSection cs = c.domain.cross_section == "disk"
                              ? CrossSection::disk(c.domain.size[0], center)
                              : CrossSection::rectangle(c.domain.size[0], c.domain.size[1], center);
  return SlabDomain{cs, c.domain.interval[0], c.domain.interval[1],
                    Horizon(c.domain.horizon[0], c.domain.horizon[1]), g};
}

inline EnergyDensity make_density(const DensityConfig& d) {
  return density_from_name(d.family, d.p, d.alpha, {d.v[0], d.v[1], d.v[2]});
}

inline Realization make_realization(const std::string& s) {
  if (s == "compact") return Realization::compact;
  if (s == "spectral") return Realization::spectral;
  throw DomainError("unknown realization '" + s + "' (expected compact|spectral)");
}

// physical horizon used for single-ε evaluations
inline Horizon physical_horizon_of(const RegimeConfig& r) {
  if (r.horizon) return Horizon((*r.horizon)[0], (*r.horizon)[1]);
  return physical_horizon(regime_from_string(r.name), r.epsilon);
}

}  // namespace nlfilm
