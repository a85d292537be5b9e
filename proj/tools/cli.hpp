#ifndef DTN_TOOLS_CLI_HPP
#define DTN_TOOLS_CLI_HPP

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dtn/domains.hpp"
#include "dtn/io.hpp"
#include "dtn/linalg_model.hpp"
#include "dtn/parallel.hpp"
#include "dtn/positivity.hpp"
#include "dtn/traceform.hpp"

namespace dtn::cli {

/// Parsed command line (after merging the optional key=value configuration file).
struct RunConfig {
  std::string subcommand;
  std::string domain;
  double z_min = -5.0;
  double z_max = 40.0;
  int count = 400;
  std::vector<int> branches{0};
  double tolerance = 1e-10;
  double e_max = 100.0;
  std::string out;
  std::string format;
  std::uint64_t seed = 0x5EED;
  int draws = 50;
  int samples = 100;
  double beta = 1.0;
  std::size_t n = 12;
  std::size_t m = 4;
  std::size_t trials = 50;
  std::string model_path;
};

inline constexpr int kGalerkinSize = 12;

inline std::string labels_text(const DirichletMode &mode) {
  std::string s;
  for (const auto &lab : mode.labels) {
    if (!s.empty()) s += ';';
    s += '(';
    for (std::size_t i = 0; i < lab.size(); ++i) s += (i ? "," : "") + std::to_string(lab[i]);
    s += ')';
  }
  return '"' + s + '"';
}

inline DomainId require_domain(const RunConfig &cfg) {
  if (cfg.domain.empty()) throw std::invalid_argument("--domain is required");
  return parse_domain(cfg.domain);
}

inline void require_format(const RunConfig &cfg, std::initializer_list<const char *> allowed) {
  for (const char *f : allowed)
    if (cfg.format == f) return;
  throw std::invalid_argument("unsupported --format " + cfg.format + " for " + cfg.subcommand);
}

inline std::vector<double> sweep(double lo, double hi, int count) {
  std::vector<double> z(count);
  for (int i = 0; i < count; ++i) z[i] = i + 1 == count ? hi : lo + (hi - lo) * i / (count - 1);
  return z;
}

// ---------------------------------------------------------------------------
// Subcommands

inline std::string run_spectrum(const RunConfig &cfg) {
  const DomainId d = require_domain(cfg);
  require_format(cfg, {"csv", "json"});
  const auto modes = enumerate_modes(d, cfg.e_max);
  if (cfg.format == "json") {
    ordered_json arr = ordered_json::array();
    for (const auto &m : modes) arr.push_back(to_json(m));
    return arr.dump(2) + "\n";
  }
  std::string out = "E,multiplicity,labels\n";
  for (const auto &m : modes) out += format_double(m.E) + "," + std::to_string(m.multiplicity) + "," + labels_text(m) + "\n";
  return out;
}

inline std::string run_branch(const RunConfig &cfg) {
  const DomainId d = require_domain(cfg);
  require_format(cfg, {"csv"});
  if (cfg.count < 2) throw std::invalid_argument("--count must be at least 2");
  if (!(cfg.z_min < cfg.z_max)) throw std::invalid_argument("--z-min must be below --z-max");
  if (!(cfg.tolerance > 0 && cfg.tolerance <= 1e-4)) throw std::invalid_argument("--tol must lie in (0, 1e-4]");
  for (int k : cfg.branches)
    if (k < 0 || (d == DomainId::Square && k >= kGalerkinSize))
      throw std::invalid_argument("branch index out of range: " + std::to_string(k));
  const auto zs = sweep(cfg.z_min, cfg.z_max, cfg.count);
  const std::size_t nk = cfg.branches.size();
  std::vector<std::string> rows(zs.size() * nk);

  if (d == DomainId::Square) {
    auto spec = make_spec(d);
    spec.tolerance = cfg.tolerance;
    const auto basis = standard_basis(spec.grid, kGalerkinSize);
    parallel_for(zs.size(), [&](std::size_t i) {
      const double z = zs[i];
      try {
        const auto sys = galerkin_system(spec, z, basis);
        const auto eig = jacobi_eigen(sys.matrix);
        for (std::size_t b = 0; b < nk; ++b)
          rows[b * zs.size() + i] = format_double(z) + "," + std::to_string(cfg.branches[b]) + "," +
                                    format_double(eig.values[cfg.branches[b]]) + "," + format_double(sys.tail_bound) +
                                    "," + format_double(sys.pole_distance);
      } catch (const PoleError &e) {
        for (std::size_t b = 0; b < nk; ++b)
          rows[b * zs.size() + i] = format_double(z) + "," + std::to_string(cfg.branches[b]) + ",pole,," +
                                    format_double(std::fabs(z - e.pole()));
      }
    });
  } else {
    parallel_for(rows.size(), [&](std::size_t r) {
      const int k = cfg.branches[r / zs.size()];
      const double z = zs[r % zs.size()];
      std::string row = format_double(z) + "," + std::to_string(k) + ",";
      try {
        const auto bv = family_branch(d, k, z, cfg.tolerance);
        row += format_double(bv.value.real()) + "," + format_double(bv.tail_bound) + "," + format_double(bv.pole_distance);
      } catch (const PoleError &e) {
        row += "pole,," + format_double(std::fabs(z - e.pole()));
      }
      rows[r] = std::move(row);
    });
  }
  std::string out = "z,branch_k,value,tail_bound,pole_distance\n";
  for (const auto &r : rows) out += r + "\n";
  return out;
}

/// Unit-norm normal derivative of the first member of a mode, sampled on the grid.
inline BoundaryFunction unit_normal_derivative(const DirichletMode &mode, const GridPtr &grid) {
  auto f = normal_derivative(mode, 0, grid);
  const double norm = std::sqrt(inner(f, f));
  for (double &v : f.samples) v /= norm;
  f.tag = "unit-dnu";
  return f;
}

inline std::string run_laurent(const RunConfig &cfg) {
  const DomainId d = require_domain(cfg);
  require_format(cfg, {"json"});
  auto spec = make_spec(d);
  spec.tolerance = cfg.tolerance;
  const auto modes = enumerate_modes(d, cfg.e_max);
  std::vector<ordered_json> records(modes.size());
  parallel_for(modes.size(), [&](std::size_t i) {
    const auto &mode = modes[i];
    const auto psi = unit_normal_derivative(mode, spec.grid);
    const auto ld = laurent_data(spec, mode, psi);
    const double numeric = contour_residue([&](cplx z) { return eval_form(spec, z, psi, psi).value; }, mode.E,
                                           1e-4 * mode.E);
    auto rec = to_json(ld);
    rec["labels"] = mode.labels;
    rec["multiplicity"] = mode.multiplicity;
    rec["test_function"] = "normalized d_nu of member 0";
    rec["numeric_residue"] = numeric;
    records[i] = std::move(rec);
  });
  ordered_json out = {{"domain", to_string(d)}, {"poles", records}};
  return out.dump(2) + "\n";
}

inline std::string run_positivity(const RunConfig &cfg) {
  const DomainId d = require_domain(cfg);
  require_format(cfg, {"json", "csv"});
  const auto spec = make_spec(d);
  const auto modes = enumerate_modes(d, cfg.e_max);
  std::vector<PositivityVerdict> verdicts;
  for (const auto &mode : modes) {
    const auto reports = probe_reports(mode, cfg.seed, cfg.draws);
    verdicts.push_back(certify_from(mode, Side::Left, reports, spec.grid));
    verdicts.push_back(certify_from(mode, Side::Right, reports, spec.grid));
  }
  std::vector<BelowGroundReport> below;
  if (cfg.samples > 0) {
    const double e0 = enumerate_modes(d, 1e3).front().E;
    for (double lambda : {-1.0, 0.0, 0.9 * e0}) below.push_back(below_ground_check(spec, lambda, cfg.samples, cfg.seed));
  }
  if (cfg.format == "csv") {
    std::string out = "domain,E,multiplicity,labels,side,verdict,witness,normalized_S\n";
    for (const auto &v : verdicts) {
      const std::string witness = v.witnesses.empty() ? "" : v.witnesses.front().descriptor;
      const std::string rel = v.witnesses.empty() ? "" : format_double(v.witnesses.front().normalized());
      out += to_string(d) + "," + format_double(v.mode.E) + "," + std::to_string(v.mode.multiplicity) + "," +
             labels_text(v.mode) + "," + to_string(v.side) + "," + to_string(v.verdict) + ",\"" + witness + "\"," + rel +
             "\n";
    }
    for (const auto &b : below)
      out += to_string(d) + "," + format_double(b.lambda) + ",,,below-ground," +
             (b.violations == 0 ? "PP" : "NotPP") + ",," + format_double(b.max_value) + "\n";
    return out;
  }
  ordered_json vj = ordered_json::array(), bj = ordered_json::array();
  for (const auto &v : verdicts) vj.push_back(to_json(v));
  for (const auto &b : below) bj.push_back(to_json(b));
  ordered_json out = {{"domain", to_string(d)}, {"seed", cfg.seed}, {"draws", cfg.draws}, {"verdicts", vj},
                      {"below_ground", bj}};
  return out.dump(2) + "\n";
}

inline std::string run_robin(const RunConfig &cfg) {
  const DomainId d = cfg.domain.empty() ? DomainId::Disc : parse_domain(cfg.domain);
  require_format(cfg, {"json"});
  if (!(cfg.beta > 0)) throw std::invalid_argument("--beta must be positive");
  const auto neumann = make_spec(d);
  auto robin = neumann;
  const double beta = cfg.beta;
  robin.robin_beta = [beta](const BoundaryPoint &) { return beta; };
  robin.validate();

  ordered_json poles = ordered_json::array();
  bool identical = true;
  for (const auto &mode : enumerate_modes(d, cfg.e_max)) {
    const auto nrep = probe_reports(mode, cfg.seed, cfg.draws);
    const auto rrep = robin_reports(robin, mode, cfg.seed, cfg.draws);
    ordered_json rec = {{"E", mode.E}, {"labels", mode.labels}};
    for (const Side side : {Side::Left, Side::Right}) {
      const auto nv = certify_from(mode, side, nrep, neumann.grid);
      const auto rv = certify_from(mode, side, rrep, neumann.grid);
      rec[to_string(side)] = {{"neumann", to_string(nv.verdict)}, {"robin", to_string(rv.verdict)}};
      identical = identical && nv.verdict == rv.verdict;
    }
    poles.push_back(rec);
  }

  // Q_z - E_z on a few test functions across the z sweep.
  std::vector<BoundaryFunction> tests;
  for (int i = 0; i < 4; ++i) tests.push_back(sample(neumann.grid, basis_function(d, i), "basis"));
  std::mt19937_64 rng(cfg.seed);
  tests.push_back(sample(neumann.grid, random_trig(d, rng), "random"));
  double spread = 0.0;
  ordered_json offsets = ordered_json::array();
  const int count = std::max(cfg.count, 2);
  for (const auto &f : tests) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < count; ++i) {
      const double z = cfg.z_min + (cfg.z_max - cfg.z_min) * (i + 0.5) / count;
      if (nearest_pole(d, z).second <= 1e-6 * std::max(1.0, std::fabs(z))) continue;
      const double q = robin_form(robin, z, f, f).value.real();
      const double e = eval_form(neumann, z, f, f).value.real();
      lo = std::min(lo, q - e);
      hi = std::max(hi, q - e);
    }
    spread = std::max(spread, hi - lo);
    offsets.push_back({{"test_function", f.tag}, {"offset", json_number(0.5 * (lo + hi))}, {"spread", json_number(hi - lo)}});
  }
  ordered_json out = {{"domain", to_string(d)},  {"beta", beta},         {"poles", poles},
                      {"verdicts_identical", identical}, {"offsets", offsets}, {"offset_spread", spread}};
  return out.dump(2) + "\n";
}

/// Returns the report and whether every residual passed.
inline std::pair<std::string, bool> run_model(const RunConfig &cfg) {
  require_format(cfg, {"json"});
  if (!cfg.model_path.empty()) {
    const auto model = model_from_json(nlohmann::json::parse(read_file(cfg.model_path), nullptr, false));
    const auto rep = check_model(model, cfg.seed);
    ordered_json res = ordered_json::object();
    for (const auto &r : rep.residuals)
      res[r.name] = {{"value", r.value}, {"tolerance", r.tolerance}, {"passed", r.passed()}};
    ordered_json spectrum = ordered_json::array();
    for (double e : rep.analysis.dirichlet.values) spectrum.push_back(e);
    ordered_json out = {{"model", to_json(model)}, {"dirichlet_spectrum", spectrum}, {"passed", rep.passed()},
                        {"residuals", res}};
    return {out.dump(2) + "\n", rep.passed()};
  }
  SuiteConfig sc;
  sc.n = cfg.n;
  sc.m = cfg.m;
  sc.trials = cfg.trials;
  sc.seed = cfg.seed;
  const auto rep = run_model_suite(sc);
  return {to_json(rep).dump(2) + "\n", rep.passed()};
}

inline void emit(const RunConfig &cfg, const std::string &artifact, std::ostream &out) {
  if (cfg.out.empty()) out << artifact;
  else atomic_write(cfg.out, artifact);
}

/// Parses argv, runs the subcommand and maps failures to exit codes
/// (2 arguments, 3 numerical, 1 I/O).
inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  CLI::App app{"Dirichlet-to-Neumann trace forms: catalogs, branches, Laurent data, positivity, finite models"};
  app.set_config("--config", "", "key=value configuration file (flags override)");
  app.require_subcommand(1);
  RunConfig cfg;
  std::string seed_text;
  app.add_option("--domain", cfg.domain, "disc, square or ball");
  app.add_option("--z-min", cfg.z_min, "sweep start");
  app.add_option("--z-max", cfg.z_max, "sweep end");
  app.add_option("--count", cfg.count, "sweep points (>= 2)");
  app.add_option("--k", cfg.branches, "branch indices")->expected(1, -1);
  app.add_option("--tol", cfg.tolerance, "relative truncation tolerance in (0, 1e-4]");
  app.add_option("--e-max", cfg.e_max, "largest Dirichlet eigenvalue included");
  app.add_option("--out", cfg.out, "artifact path (stdout when absent)");
  app.add_option("--format", cfg.format, "csv or json");
  app.add_option("--seed", seed_text, "random seed (decimal or 0x hex)");
  app.add_option("--draws", cfg.draws, "random probes per mode")->check(CLI::NonNegativeNumber);
  app.add_option("--samples", cfg.samples, "below-ground samples per lambda")->check(CLI::NonNegativeNumber);
  app.add_option("--beta", cfg.beta, "constant Robin coefficient");
  app.add_option("--n", cfg.n, "model dimension (0: random in [3, 20])");
  app.add_option("--m", cfg.m, "trace dimension (0: random in [1, n-1])");
  app.add_option("--trials", cfg.trials, "random models")->check(CLI::PositiveNumber);
  app.add_option("--model", cfg.model_path, "model JSON {n, m, E, J, seed} to check instead of the random suite");

  const std::vector<std::pair<std::string, std::string>> subcommands = {
      {"spectrum", "enumerate Dirichlet modes"},
      {"branch", "sweep eigenvalue branches"},
      {"laurent", "residues and regular parts at catalog poles"},
      {"positivity", "certify positivity on both sides of each pole"},
      {"robin", "compare the Robin form with the Neumann form"},
      {"model", "finite-dimensional verification suite"}};
  for (const auto &[name, help] : subcommands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  if (cfg.format.empty()) cfg.format = cfg.subcommand == "spectrum" || cfg.subcommand == "branch" ? "csv" : "json";

  try {
    if (!seed_text.empty()) {
      std::size_t used = 0;
      cfg.seed = std::stoull(seed_text, &used, 0);
      if (used != seed_text.size()) throw std::invalid_argument("bad --seed " + seed_text);
    }
    if (cfg.subcommand == "model") {
      const auto [artifact, passed] = run_model(cfg);
      emit(cfg, artifact, out);
      if (!passed) {
        err << "dtn: finite-model residual checks failed\n";
        return 3;
      }
      return 0;
    }
    std::string artifact;
    if (cfg.subcommand == "spectrum") artifact = run_spectrum(cfg);
    else if (cfg.subcommand == "branch") artifact = run_branch(cfg);
    else if (cfg.subcommand == "laurent") artifact = run_laurent(cfg);
    else if (cfg.subcommand == "positivity") artifact = run_positivity(cfg);
    else artifact = run_robin(cfg);
    emit(cfg, artifact, out);
    return 0;
  } catch (const IoError &e) {
    err << "dtn: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError &e) {
    err << "dtn: numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument &e) {
    err << "dtn: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range &e) {
    err << "dtn: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    err << "dtn: " << e.what() << "\n";
    return 1;
  }
}

} // namespace dtn::cli

#endif // DTN_TOOLS_CLI_HPP
