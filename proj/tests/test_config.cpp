#include <gtest/gtest.h>

#include <fstream>

#include "nlfilm/config.hpp"

using namespace nlfilm;

namespace {

ConfigError parse_error(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a ConfigError for:\n" << text;
  return ConfigError("", "", -1);
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const RunConfig c = parse_config_string("");
  EXPECT_EQ(c.kernel.s, 0.5);
  EXPECT_EQ(c.kernel.cutoff, "bump");
  EXPECT_EQ(c.grid.dims, (std::array<int, 3>{48, 48, 12}));
  EXPECT_EQ(c.regime.name, "aniso");
  EXPECT_EQ(c.sweep.eps_list, (std::vector<double>{0.4, 0.2, 0.1, 0.05}));
  EXPECT_EQ(c.seed, 1u);
  const auto j = to_json(c);
  for (const char* block : {"kernel", "grid", "domain", "density", "regime", "sweep", "output", "seed", "threads"})
    EXPECT_TRUE(j.contains(block)) << block;
}

TEST(Config, MinimalConfigFillsTheRest) {
  const RunConfig c = parse_config_string("kernel:\n  s: 0.25\nregime:\n  name: iso\n");
  EXPECT_EQ(c.kernel.s, 0.25);
  EXPECT_EQ(c.regime.name, "iso");
  EXPECT_EQ(c.density.family, "anisotropic");
  EXPECT_EQ(c.domain.center, (std::array<double, 2>{2.4, 2.4}));
}

TEST(Config, UnknownKeyIsNamedWithItsLine) {
  const ConfigError e = parse_error("kernel:\n  s: 0.5\nregime:\n  horizonn: [1, 0.1]\n");
  EXPECT_EQ(e.key, "regime.horizonn");
  EXPECT_EQ(e.line, 4);
  EXPECT_NE(std::string(e.what()).find("horizonn"), std::string::npos);
  EXPECT_EQ(parse_error("horizonn: 1\n").key, "horizonn");
}

TEST(Config, OutOfPlaneHorizonAboveThicknessIsRejected) {
  const ConfigError e = parse_error("regime:\n  epsilon: 0.1\n  horizon: [1.0, 0.2]\n");
  EXPECT_EQ(e.key, "regime.horizon");
  EXPECT_EQ(e.line, 3);
  EXPECT_NE(std::string(e.what()).find("delta_3 <= epsilon"), std::string::npos);
  EXPECT_NO_THROW(parse_config_string("regime:\n  epsilon: 0.2\n  horizon: [1.0, 0.2]\n"));
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_EQ(parse_error("kernel:\n  s: high\n").key, "kernel.s");
  EXPECT_EQ(parse_error("kernel:\n  s: 1.5\n").key, "kernel.s");
  EXPECT_EQ(parse_error("grid:\n  dims: [48, 48]\n").key, "grid.dims");
  EXPECT_EQ(parse_error("grid:\n  dims: [48, 47, 12]\n").key, "grid.dims");
  EXPECT_EQ(parse_error("sweep:\n  eps_list: [0.1, 0.2]\n").key, "sweep.eps_list");
  EXPECT_EQ(parse_error("density:\n  family: rubber\n").key, "density.family");
  EXPECT_EQ(parse_error("kernel: [1, 2]\n").key, "kernel");
  EXPECT_EQ(parse_error("kernel:\n  s: [0.5\n").key, "<root>");
  EXPECT_THROW(parse_config("/nonexistent/nlfilm.yaml"), ConfigError);
}

TEST(Config, ReserializationIsIdempotent) {
  const std::string text =
      "kernel: {s: 0.75, cutoff: plateau}\n"
      "grid: {dims: [32, 32, 8], lengths: [4.8, 4.8, 4.0]}\n"
      "domain: {cross_section: disk, size: [1.1], center: [2.4, 2.4], jitter: 0.3}\n"
      "density: {family: power, p: 3}\n"
      "regime: {name: iso, epsilon: 0.3, horizon: [0.3, 0.3]}\n"
      "sweep: {eps_list: [0.3, 0.15], gradient_tol: 1.0e-6}\n"
      "output: out/run\nseed: 42\n";
  const RunConfig a = parse_config_string(text);
  const std::string once = to_yaml(a);
  const RunConfig b = parse_config_string(once);
  EXPECT_EQ(to_yaml(b), once);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.domain.cross_section, "disk");
  EXPECT_EQ(b.regime.horizon, (std::array<double, 2>{0.3, 0.3}));
  EXPECT_EQ(b.seed, 42u);
  // default config survives a round trip too, including thirds
  const std::string d = to_yaml(RunConfig{});
  EXPECT_EQ(to_yaml(parse_config_string(d)), d);
  EXPECT_EQ(parse_config_string(d).domain.interval[0], 4.0 / 3.0);
}

TEST(Config, BuildersHonourTheConfig) {
  const RunConfig c = parse_config_string(
      "domain: {cross_section: disk, size: [1.0], jitter: 0.5}\nregime: {name: iso, epsilon: 0.2}\n");
  const SlabDomain d = make_domain(c);
  EXPECT_EQ(d.cross_section.kind, CrossSection::Kind::disk);
  EXPECT_NEAR(d.cross_section.center[0], 2.4 + 0.5 * 4.8 / 48, 1e-12);
  const Horizon h = physical_horizon_of(c.regime);
  EXPECT_EQ(h, Horizon(0.2, 0.2));
  EXPECT_EQ(make_density(c.density).family, "anisotropic");
  EXPECT_EQ(make_realization("spectral"), Realization::spectral);
}

}  // namespace
