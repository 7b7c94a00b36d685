// nlfilm command-line front end
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <random>

#include "nlfilm/config.hpp"
#include "nlfilm/nlfilm.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nlfilm;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitTrend = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

struct Globals {
  std::string out;
  std::uint64_t seed = 1;
  bool seed_set = false;
  int threads = 1;
  bool threads_set = false;
  std::string config;
};

// records outputs and writes manifest.json; a run that throws leaves a partial manifest
class Manifest {
 public:
  Manifest(fs::path dir, std::string command) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    doc_["command"] = std::move(command);
    doc_["partial"] = true;
  }
  ~Manifest() { flush(); }
  void set(const std::string& k, json v) { doc_[k] = std::move(v); }
  fs::path file(const std::string& name) {
    doc_["outputs"].push_back(name);
    return dir_ / name;
  }
  void finish(const std::string& status) {
    doc_["status"] = status;
    doc_["partial"] = false;
    flush();
  }
  void flush() { io::write_json(dir_ / "manifest.json", doc_); }

 private:
  fs::path dir_;
  json doc_;
};

RunConfig load_config(const Globals& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : parse_config(g.config);
  if (!g.out.empty()) c.output = g.out;
  if (g.seed_set) c.seed = g.seed;
  if (g.threads_set) c.threads = g.threads;
  return c;
}

json horizon_json(const Horizon& h) { return json::array({h.inplane, h.outofplane}); }

json terms_json(const EnergyTerms& t) {
  return {{"bulk", t.bulk}, {"stab_lp", t.stab_lp}, {"stab_nl", t.stab_nl}, {"force", t.force}, {"lambda", t.lambda}};
}

// "cutoff:s", e.g. bump:0.5
KernelConfig parse_kernel_flag(const std::string& s, KernelConfig base) {
  if (s.empty()) return base;
  const auto colon = s.find(':');
  base.cutoff = s.substr(0, colon);
  if (colon != std::string::npos) base.s = std::stod(s.substr(colon + 1));
  return base;
}

Horizon parse_horizon_flag(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw DomainError("horizon must be given as inplane,outofplane");
  return Horizon(std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1)));
}

// ---------------------------------------------------------------------------

int cmd_kernel_check(const Globals& g, int radii) {
  const RunConfig c = load_config(g);
  Manifest man(c.output, "kernel check");
  man.set("config", to_json(c));
  const RadialKernel k = make_kernel(c.kernel);
  const HypothesisReport rep = check_hypotheses(k);
  const RadialKernel kbar = reduce_kernel(k);
  const HypothesisReport rep2 = check_hypotheses(kbar);
  std::vector<double> rs;
  for (int i = 0; i < radii; ++i) rs.push_back(0.02 + 0.96 * i / std::max(1, radii - 1));
  const auto red = reduced_q_identity_check(k, kbar, rs);
  double worst = 0.0;
  for (const auto& r : red) worst = std::max(worst, r.discrepancy);
  const FourierProfile fp = fourier_profile(k, 64.0, 2049);

  const bool mass_ok = std::abs(k.mass() - 3.0) <= 1e-6;
  const bool l1_ok = std::abs(k.q_l1() - 1.0) <= 1e-6;
  const bool red_mass_ok = std::abs(kbar.mass() - 2.0) <= 1e-5;
  const bool red_ok = worst <= 1e-5;
  const bool pass = rep.all_pass() && rep2.all_pass() && mass_ok && l1_ok && red_mass_ok && red_ok;

  const auto checks = [](const HypothesisReport& r) {
    json a = json::array();
    for (const auto& h : r.checks) a.push_back({{"name", h.name}, {"pass", h.pass}, {"value", h.value}, {"detail", h.detail}});
    return a;
  };
  json out;
  out["kernel"] = {{"s", c.kernel.s}, {"cutoff", c.kernel.cutoff}, {"normalization", k.normalization()}};
  out["mass"] = k.mass();
  out["q_l1"] = k.q_l1();
  out["reduced_mass"] = kbar.mass();
  out["reduced_q_l1"] = kbar.q_l1();
  out["reduction_max_discrepancy"] = worst;
  out["fourier_refinement_error"] = fp.refinement_error();
  out["hypotheses"] = checks(rep);
  out["reduced_hypotheses"] = checks(rep2);
  out["pass"] = pass;
  io::write_json(man.file("kernel_report.json"), out);

  io::CsvWriter prof(man.file("q_profile.csv"), {"r", "q", "reduced_q"});
  for (int i = 1; i <= 200; ++i) {
    const double r = i / 200.0;
    prof.row({r, k.q(r), kbar.q(r)});
  }
  io::CsvWriter rc(man.file("reduction.csv"), {"r", "fiber_integral", "reduced_q", "discrepancy"});
  for (const auto& r : red) rc.row({r.radius, r.fiber_integral, r.reduced_q, r.discrepancy});
  std::cout << "kernel s=" << c.kernel.s << " cutoff=" << c.kernel.cutoff << " mass=" << k.mass()
            << " q_l1=" << k.q_l1() << " reduced_mass=" << kbar.mass() << " reduction_max=" << worst << "\n"
            << (pass ? "all checks pass" : "CHECK FAILED") << "\n";
  man.finish(pass ? "pass" : "fail");
  return pass ? kExitPass : kExitTrend;
}

template <int Dim>
int apply_operator(const Globals& g, const fs::path& in, const fs::path& out, const KernelConfig& kc,
                   const Horizon& h, const std::string& realization, const std::string& which) {
  const Field<Dim> u = io::read_field<Dim>(in);
  RadialKernel k = make_kernel(kc, 3);
  if constexpr (Dim == 2) k = reduce_kernel(k);
  const NonlocalOperator<Dim> op(k, h, u.grid, make_realization(realization));
  Field<Dim> r;
  if (which == "gradient") r = op.gradient(u);
  else if (which == "divergence") r = op.divergence(u);
  else if (which == "average") r = op.average(u);
  else if (which == "inverse") r = op.inverse_average(u).field;
  else throw DomainError("unknown operation '" + which + "' (expected gradient|divergence|average|inverse)");
  io::write_field(out, r);
  const fs::path dir = g.out.empty() ? (out.has_parent_path() ? out.parent_path() : fs::path(".")) : fs::path(g.out);
  Manifest man(dir, "nlgrad apply");
  man.set("input", in.string());
  man.set("output", out.string());
  man.set("operation", which);
  man.set("kernel", {{"s", kc.s}, {"cutoff", kc.cutoff}, {"dimension", Dim}});
  man.set("horizon", horizon_json(h));
  man.set("realization", realization);
  std::cout << which << " written to " << out.string() << " (" << r.components << " channels)\n";
  man.finish("pass");
  return kExitPass;
}

int cmd_nlgrad_apply(const Globals& g, const std::string& in, const std::string& out, const std::string& kernel,
                     const std::string& horizon, const std::string& realization, const std::string& which) {
  const RunConfig c = load_config(g);
  const KernelConfig kc = parse_kernel_flag(kernel, c.kernel);
  const Horizon h = parse_horizon_flag(horizon);
  return io::field_dimension(in) == 2 ? apply_operator<2>(g, in, out, kc, h, realization, which)
                                      : apply_operator<3>(g, in, out, kc, h, realization, which);
}

int cmd_nlgrad_nullspace(const Globals& g, int dumps, int samples) {
  const RunConfig c = load_config(g);
  Manifest man(c.output, "nlgrad nullspace");
  man.set("config", to_json(c));
  const SlabDomain d = make_domain(c);
  const RadialKernel k = make_kernel(c.kernel);
  const NonlocalOperator<3> op(k, d.horizon, d.grid, Realization::compact);
  const DomainMasks m = reach_masks(d, op);
  const NullspaceBasis nb = nullspace(op, m.omega, m.fattened);
  const double residual = nullspace_residual(op, nb);
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Field<3> u(d.grid, 3);
    for (auto& v : u.data) v = normal(rng);
    u.restrict_to(m.fattened);
    worst = std::max(worst, poincare_ratio(op, nb, u).ratio);
  }
  const ConstancyReport cr = x3_constancy_check(op, nb, 5, c.seed);
  json out;
  out["horizon"] = horizon_json(d.horizon);
  out["omega_nodes"] = mask_count(m.omega);
  out["support_nodes"] = nb.support_nodes.size();
  out["scalar_dimension"] = nb.scalar_dimension();
  out["vector_dimension"] = nb.dimension(3);
  out["threshold"] = nb.threshold;
  out["largest_singular_value"] = nb.singular_values.size() ? nb.singular_values[0] : 0.0;
  out["smallest_nonzero_singular_value"] = nb.smallest_nonzero();
  out["basis_residual"] = residual;
  out["poincare_samples"] = samples;
  out["poincare_ratio_max"] = worst;
  out["poincare_bound"] = nb.smallest_nonzero() > 0 ? 1.0 / nb.smallest_nonzero() : 0.0;
  out["x3_constancy_residual"] = cr.worst_residual;
  io::write_json(man.file("nullspace.json"), out);
  for (int j = 0; j < std::min(dumps, nb.scalar_dimension()); ++j)
    io::write_field(man.file("basis_" + std::to_string(j) + ".bin"), nb.field(j));
  std::cout << "null space: scalar dimension " << nb.scalar_dimension() << ", vector dimension " << nb.dimension(3)
            << ", residual " << residual << ", Poincare ratio max " << worst << "\n";
  const bool pass = residual <= 1e-8;
  man.finish(pass ? "pass" : "fail");
  return pass ? kExitPass : kExitTrend;
}

int cmd_geometry_weight(const Globals& g, int points) {
  const RunConfig c = load_config(g);
  Manifest man(c.output, "geometry weight");
  man.set("config", to_json(c));
  const SlabDomain d = make_domain(c);
  const DomainMasks m = masks(d);
  const Horizon& h = d.horizon;
  const auto he = d.cross_section.half_extent();
  const double reach = he[0] + h.inplane;
  const double h3 = d.grid.spacing(2);
  io::CsvWriter csv(man.file("weight_profile.csv"), {"x1", "x2", "distance", "weight"});
  for (int i = 0; i < points; ++i) {
    const double x1 = d.cross_section.center[0] + reach * i / std::max(1, points - 1);
    const Point2 x{x1, d.cross_section.center[1]};
    double w = 0.0;
    try {
      w = limit_weight(d, h, x);
    } catch (const DomainError&) {
      w = 0.0;
    }
    csv.row({x[0], x[1], inplane_distance(d, x), w});
  }
  // column lengths of the rendered mask next to the formula
  const Field<2> cw = column_weights(d, m.fattened);
  const Grid<2> g2 = d.inplane_grid();
  io::CsvWriter cc(man.file("weight_columns.csv"), {"x1", "x2", "distance", "weight", "mask_weight"});
  for (std::size_t i = 0; i < g2.size(); ++i) {
    if (!m.section_fattened[i]) continue;
    const Point2 x = g2.node(i);
    double w = 0.0;
    try {
      w = limit_weight(d, h, x);
    } catch (const DomainError&) {
    }
    cc.row({x[0], x[1], inplane_distance(d, x), w, cw.data[i]});
  }
  json out;
  out["horizon"] = horizon_json(h);
  out["omega_nodes"] = mask_count(m.omega);
  out["fattened_nodes"] = mask_count(m.fattened);
  out["fattened_volume"] = mask_count(m.fattened) * d.grid.cell_volume();
  out["cell_height"] = h3;
  io::write_json(man.file("geometry.json"), out);
  std::cout << "fattened volume " << out["fattened_volume"].get<double>() << " (" << mask_count(m.fattened)
            << " nodes)\n";
  man.finish("pass");
  return kExitPass;
}

int cmd_energy_eval(const Globals& g, const std::string& in) {
  const RunConfig c = load_config(g);
  Manifest man(c.output, "energy eval");
  man.set("config", to_json(c));
  const SlabDomain d = make_domain(c);
  const RadialKernel k = make_kernel(c.kernel);
  const EnergyDensity w = make_density(c.density);
  const double eps = c.regime.epsilon;
  const Horizon physical = physical_horizon_of(c.regime);
  const NonlocalOperator<3> op = thin_film_operator(k, physical, eps, d.grid, make_realization(c.regime.realization));
  if (op.realization() != Realization::compact)
    throw UnsupportedCaseError("energy evaluation needs the compact realization for its support masks");
  const DomainMasks m = reach_masks(d, op);
  Field<3> u;
  std::string source;
  if (!in.empty()) {
    u = io::read_field<3>(in);
    source = in;
  } else {
    // recovery field of a smooth cross-section pair
    const Grid<2> g2 = d.inplane_grid();
    Field<2> ubar(g2, 3), dfield(g2, 3);
    for (std::size_t i = 0; i < g2.size(); ++i) {
      const auto x = g2.node(i);
      const double a = 2.0 * std::numbers::pi * x[0] / g2.lengths[0], b = 2.0 * std::numbers::pi * x[1] / g2.lengths[1];
      ubar(0, i) = x[0] + 0.1 * std::sin(a);
      ubar(1, i) = x[1] + 0.1 * std::cos(b);
      ubar(2, i) = 0.2 * std::sin(a) * std::sin(b);
      dfield(2, i) = 1.0 + 0.1 * std::cos(a);
    }
    const NonlocalOperator<2> op2(reduce_kernel(k), Horizon(op.horizon().inplane, 0.0), g2, Realization::compact);
    u = recovery_field(ubar, dfield, op2, d, m.fattened, eps);
    source = "recovery field of a smooth (u, d) pair";
  }
  const EnergyTerms t = stabilized_energy(w, op, m, eps, c.density.lambda, u);
  json rec;
  rec["epsilon"] = eps;
  rec["horizon"] = horizon_json(op.horizon());
  rec["physical_horizon"] = horizon_json(physical);
  rec["value"] = t.total();
  rec["terms"] = terms_json(t);
  rec["field"] = source;
  io::write_json(man.file("energy.json"), rec);
  std::cout << rec.dump(2) << "\n";
  man.finish(std::isfinite(t.total()) ? "pass" : "fail");
  return std::isfinite(t.total()) ? kExitPass : kExitNumerical;
}

int cmd_gamma_sweep(const Globals& g) {
  const RunConfig c = load_config(g);
  Manifest man(c.output, "gamma sweep");
  man.set("config", to_json(c));
  const SlabDomain d = make_domain(c);
  const RadialKernel k = make_kernel(c.kernel);
  const EnergyDensity w = make_density(c.density);
  SweepConfig sc;
  sc.regime = regime_from_string(c.regime.name);
  sc.eps_list = c.sweep.eps_list;
  sc.lambda = c.density.lambda;
  sc.minimize.max_iters = c.sweep.max_iters;
  sc.minimize.gradient_tol = c.sweep.gradient_tol;
  sc.minimize.memory = c.sweep.memory;
  sc.threads = c.threads;
  sc.slack = c.sweep.slack;
  sc.test_fields = c.sweep.test_fields;
  std::optional<Field<3>> potential;
  if (c.sweep.force_amplitude != 0.0) potential = smooth_potential(d, masks(d.with_horizon(Horizon(0, 0))).omega, c.sweep.force_amplitude);
  const SweepResult s = gamma_sweep(k, d, w, sc, potential);
  const CompactnessReport cr = compactness_diagnostic(s);

  io::CsvWriter csv(man.file("sweep.csv"), {"epsilon", "energy", "gap", "distance", "recovery_energy",
                                            "limit_of_average", "stab_nl", "iterations"});
  json recs = json::array();
  for (const auto& r : s.records) {
    csv.row({r.eps, r.energy, r.gap, r.distance, r.recovery_energy, r.limit_of_average, r.terms.stab_nl,
             double(r.iterations)});
    recs.push_back({{"epsilon", r.eps},
                    {"horizon", horizon_json(r.horizon)},
                    {"value", r.energy},
                    {"terms", terms_json(r.terms)},
                    {"gap", r.gap},
                    {"distance", r.distance},
                    {"recovery_energy", r.recovery_energy},
                    {"limit_of_average", r.limit_of_average},
                    {"scaled_gradient_lp", r.scaled_gradient_lp},
                    {"iterations", r.iterations},
                    {"converged", r.converged},
                    {"gradient_norm", r.gradient_norm},
                    {"pairings", r.pairings}});
    if (c.sweep.dump_fields) {
      std::ostringstream name;
      name << "minimizer_eps_" << r.eps << ".bin";
      io::write_field(man.file(name.str()), r.minimizer);
    }
  }
  if (c.sweep.dump_fields) io::write_field(man.file("limit_minimizer.bin"), s.limit.minimizer);
  json out;
  out["regime"] = to_string(s.regime);
  out["limit"] = {{"horizon", horizon_json(s.limit.horizon)},
                  {"value", s.limit.energy.value()},
                  {"terms", terms_json(s.limit.energy.terms)},
                  {"upper_bound", s.limit.energy.upper_bound},
                  {"iterations", s.limit.iterations},
                  {"converged", s.limit.converged},
                  {"pairings", s.limit.pairings}};
  out["records"] = recs;
  out["complete"] = s.complete;
  out["failure"] = s.failure;
  out["energy_trend"] = s.energy_trend;
  out["distance_trend"] = s.distance_trend;
  out["recovery_bound"] = s.recovery_bound;
  out["compactness"] = {{"sup_scaled_gradient", cr.sup_scaled_gradient},
                        {"median_scaled_gradient", cr.median_scaled_gradient},
                        {"non_exploding", cr.non_exploding},
                        {"stabilizer_nonlocal", cr.stabilizer_nonlocal},
                        {"stabilizer_decreasing", cr.stabilizer_decreasing},
                        {"pairing_error", cr.pairing_error}};
  io::write_json(man.file("sweep.json"), out);
  for (const auto& r : s.records)
    std::cout << "eps=" << r.eps << " energy=" << r.energy << " gap=" << r.gap << " distance=" << r.distance << "\n";
  std::cout << "limit energy=" << s.limit.energy.value() << " trends: energy=" << s.energy_trend
            << " distance=" << s.distance_trend << "\n";
  if (!s.complete) {
    std::cerr << "sweep aborted: " << s.failure << "\n";
    man.set("status", "aborted");
    return kExitNumerical;  // manifest stays partial
  }
  const bool pass = s.energy_trend && s.distance_trend;
  man.finish(pass ? "pass" : "trend-failure");
  return pass ? kExitPass : kExitTrend;
}

int cmd_field_info(const std::string& in) {
  json out;
  if (io::field_dimension(in) == 2) {
    const Field<2> u = io::read_field<2>(in);
    out = {{"dimension", 2}, {"dims", u.grid.dims}, {"lengths", u.grid.lengths}, {"components", u.components},
           {"l2", lp_norm(u, 2.0).value}, {"sup", sup_norm(u)}, {"finite", u.finite()},
           {"support_nodes", u.support ? json(mask_count(*u.support)) : json()}};
  } else {
    const Field<3> u = io::read_field<3>(in);
    out = {{"dimension", 3}, {"dims", u.grid.dims}, {"lengths", u.grid.lengths}, {"components", u.components},
           {"l2", lp_norm(u, 2.0).value}, {"sup", sup_norm(u)}, {"finite", u.finite()},
           {"support_nodes", u.support ? json(mask_count(*u.support)) : json()}};
  }
  std::cout << out.dump(2) << "\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlfilm: anisotropic nonlocal gradients and thin-film energies"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--out", g.out, "output directory");
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { g.seed = s, g.seed_set = true; }, "random seed");
  app.add_option_function<int>("--threads", [&](int t) { g.threads = t, g.threads_set = true; }, "worker threads");
  app.add_option("--config", g.config, "YAML run configuration");
  for (auto* o : app.get_options()) o->configurable(false);
  app.fallthrough();

  auto* kernel = app.add_subcommand("kernel", "kernel certification")->require_subcommand(1)->fallthrough();
  int radii = 20;
  auto* kcheck = kernel->add_subcommand("check", "hypotheses, masses and the reduction identity");
  kcheck->add_option("--radii", radii, "number of reduction probe radii");

  auto* nlgrad = app.add_subcommand("nlgrad", "nonlocal operators")->require_subcommand(1)->fallthrough();
  std::string in, out_field, kernel_flag, horizon_flag = "1,1", realization = "spectral", which = "gradient";
  auto* apply = nlgrad->add_subcommand("apply", "apply an operator to a field dump");
  apply->add_option("--in", in, "input field (.bin with .json sidecar)")->required();
  apply->add_option("--result", out_field, "output field path")->required();
  apply->add_option("--kernel", kernel_flag, "cutoff:s, e.g. bump:0.5");
  apply->add_option("--horizon", horizon_flag, "inplane,outofplane");
  apply->add_option("--realization", realization, "spectral|compact");
  apply->add_option("--op", which, "gradient|divergence|average|inverse");
  int dumps = 3, samples = 50;
  auto* ns = nlgrad->add_subcommand("nullspace", "discrete null space on a tiny grid");
  ns->add_option("--dump", dumps, "number of basis fields to write");
  ns->add_option("--samples", samples, "random fields for the Poincare ratio");

  auto* geometry = app.add_subcommand("geometry", "slab geometry")->require_subcommand(1)->fallthrough();
  int points = 101;
  auto* gweight = geometry->add_subcommand("weight", "limit weight profile");
  gweight->add_option("--points", points, "profile samples");

  auto* energy = app.add_subcommand("energy", "energy functionals")->require_subcommand(1)->fallthrough();
  std::string energy_in;
  auto* eeval = energy->add_subcommand("eval", "evaluate the stabilized thin-film energy");
  eeval->add_option("--in", energy_in, "3-D field dump (default: a recovery field)");

  auto* gamma = app.add_subcommand("gamma", "Gamma-convergence experiments")->require_subcommand(1)->fallthrough();
  auto* sweep = gamma->add_subcommand("sweep", "epsilon sweep of stabilized minimizers");

  auto* field = app.add_subcommand("field", "field dumps")->require_subcommand(1)->fallthrough();
  std::string info_in;
  auto* finfo = field->add_subcommand("info", "summarize a field dump");
  finfo->add_option("--in", info_in, "field dump")->required();

  for (auto* sc : {kcheck, apply, ns, gweight, eeval, sweep, finfo}) sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*kcheck) return cmd_kernel_check(g, radii);
    if (*apply) return cmd_nlgrad_apply(g, in, out_field, kernel_flag, horizon_flag, realization, which);
    if (*ns) return cmd_nlgrad_nullspace(g, dumps, samples);
    if (*gweight) return cmd_geometry_weight(g, points);
    if (*eeval) return cmd_energy_eval(g, energy_in);
    if (*sweep) return cmd_gamma_sweep(g);
    if (*finfo) return cmd_field_info(info_in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
