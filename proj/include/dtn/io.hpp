#ifndef DTN_IO_HPP
#define DTN_IO_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "domains.hpp"
#include "errors.hpp"
#include "linalg_model.hpp"
#include "positivity.hpp"
#include "traceform.hpp"

namespace dtn {

using ordered_json = nlohmann::ordered_json;

/// Shortest text that round-trips: 17 significant digits.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Writes `content` to a temporary file next to `path` and renames it into place.
inline void atomic_write(const std::filesystem::path &path, const std::string &content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move artifact into " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// JSON number, or null when not finite.
inline ordered_json json_number(double x) {
  return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr);
}

// ---------------------------------------------------------------------------
// Catalog and verdicts

inline ordered_json to_json(const DirichletMode &m) {
  return {{"domain", to_string(m.domain)}, {"E", m.E}, {"multiplicity", m.multiplicity}, {"labels", m.labels}};
}

inline ordered_json to_json(const SignTestReport &r) {
  ordered_json plus = ordered_json::array(), minus = ordered_json::array();
  for (double v : r.plus_integrals) plus.push_back(v);
  for (double v : r.minus_integrals) minus.push_back(v);
  return {{"descriptor", r.descriptor},       {"plus_integrals", plus},
          {"minus_integrals", minus},         {"S", r.S},
          {"normalized_S", r.normalized()},   {"implication", to_string(r.implication)}};
}

inline ordered_json to_json(const PositivityVerdict &v) {
  ordered_json witnesses = ordered_json::array();
  for (const auto &w : v.witnesses) witnesses.push_back(to_json(w));
  return {{"domain", to_string(v.mode.domain)}, {"E", v.mode.E},        {"multiplicity", v.mode.multiplicity},
          {"labels", v.mode.labels},            {"side", to_string(v.side)}, {"verdict", to_string(v.verdict)},
          {"reason", v.reason},                 {"witness_summary", witnesses}};
}

inline ordered_json to_json(const LaurentData &d) {
  return {{"E", d.E},
          {"residue", d.residue},
          {"regular_part", d.regular_part},
          {"left_limit", d.left_limit < 0 ? "-inf" : "finite"},
          {"right_limit", d.right_limit > 0 ? "+inf" : "finite"}};
}

inline ordered_json to_json(const BelowGroundReport &r) {
  return {{"lambda", r.lambda},
          {"samples", r.samples},
          {"max_value", json_number(r.max_value)},
          {"violations", r.violations},
          {"one_signed", r.one_signed}};
}

// ---------------------------------------------------------------------------
// Finite models

inline ordered_json to_json(const FiniteModel &m) {
  return {{"n", m.n}, {"m", m.m}, {"E", m.E.values()}, {"J", m.J.values()}, {"seed", m.seed}};
}

inline FiniteModel model_from_json(const nlohmann::json &j) {
  try {
    FiniteModel m;
    m.n = j.at("n").get<std::size_t>();
    m.m = j.at("m").get<std::size_t>();
    const auto e = j.at("E").get<std::vector<double>>();
    const auto t = j.at("J").get<std::vector<double>>();
    m.E = Matrix::from_rows(m.n, m.n, e);
    m.J = Matrix::from_rows(m.m, m.n, t);
    m.seed = j.value("seed", std::uint64_t{0});
    m.validate();
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw std::invalid_argument(std::string("model json: ") + e.what());
  }
}

inline ordered_json to_json(const SuiteReport &r) {
  ordered_json residuals = ordered_json::object();
  for (const auto &x : r.residuals)
    residuals[x.name] = {{"value", x.value}, {"tolerance", x.tolerance}, {"samples", x.samples}, {"passed", x.passed()}};
  return {{"config",
           {{"n", r.config.n}, {"m", r.config.m}, {"trials", r.config.trials}, {"seed", r.config.seed}}},
          {"models", r.models},
          {"rejected", r.rejected},
          {"passed", r.passed()},
          {"residuals", residuals}};
}

} // namespace dtn

#endif // DTN_IO_HPP
