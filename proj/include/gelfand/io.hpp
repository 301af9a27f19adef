#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gelfand/branch.hpp"
#include "gelfand/free_energy.hpp"

namespace gelfand {

/// Everything a run needs, read from a versioned JSON document.
struct RunConfig {
  DomainSpec domain;
  SingularitySpec singularities;
  double h_max = 0.05;
  MeshOptions mesh;
  BranchOptions branch;
  std::string output = "out";
};

namespace detail {

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

inline Point point_of(const nlohmann::json& j) {
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
  if (j.is_object() && j.contains("x") && j.contains("y")) return {j.at("x").get<double>(), j.at("y").get<double>()};
  throw ConfigError("expected a point as [x, y] or {\"x\": .., \"y\": ..}");
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError("malformed JSON at " + detail::line_column(text, byte));
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (detail::get_or<int>(j, "schema", 0) != 1) throw ConfigError("config needs \"schema\": 1");

  RunConfig cfg;
  const std::string shape = detail::get_or<std::string>(j, "shape", "unit_disk");
  const nlohmann::json params = j.contains("params") ? j.at("params") : nlohmann::json::object();
  try {
    if (shape == "unit_disk") {
      cfg.domain.shape = UnitDisk{};
    } else if (shape == "ellipse") {
      cfg.domain.shape = Ellipse{params.at("a").get<double>(), params.at("b").get<double>()};
    } else if (shape == "polygon") {
      Polygon poly;
      for (const auto& v : params.at("vertices")) poly.vertices.push_back(detail::point_of(v));
      cfg.domain.shape = poly;
    } else {
      throw ConfigError("unknown shape '" + shape + "'");
    }
    if (j.contains("singularities")) {
      for (const auto& s : j.at("singularities")) {
        cfg.singularities.points.push_back({detail::point_of(s), s.at("alpha").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid domain description: ") + e.what());
  }

  const nlohmann::json mesh = j.contains("mesh") ? j.at("mesh") : nlohmann::json::object();
  cfg.h_max = detail::get_or(mesh, "h_max", cfg.h_max);
  cfg.domain.boundary_refinement = detail::get_or(mesh, "boundary_refinement", cfg.domain.boundary_refinement);
  if (mesh.contains("refine")) {
    for (const auto& r : mesh.at("refine")) {
      RefinePoint rp;
      rp.location = detail::point_of(r);
      rp.levels = detail::get_or(r, "levels", rp.levels);
      rp.ring_points = detail::get_or(r, "ring_points", rp.ring_points);
      cfg.mesh.refine.push_back(rp);
    }
  }
  cfg.mesh.min_angle_deg = detail::get_or(mesh, "min_angle_deg", cfg.mesh.min_angle_deg);

  const nlohmann::json br = j.contains("branch") ? j.at("branch") : nlohmann::json::object();
  auto& b = cfg.branch;
  b.lambda_min = detail::get_or(br, "lambda_min", b.lambda_min);
  b.negative_points = detail::get_or(br, "negative_points", b.negative_points);
  b.uniform_points = detail::get_or(br, "uniform_points", b.uniform_points);
  b.eps_stop = detail::get_or(br, "eps_stop", b.eps_stop);
  b.eps_classify = detail::get_or(br, "eps_classify", b.eps_classify);
  b.approach_ratio = detail::get_or(br, "approach_ratio", b.approach_ratio);
  b.modes = detail::get_or(br, "modes", b.modes);
  b.spectra = detail::get_or(br, "spectra", b.spectra);

  const nlohmann::json sv = j.contains("solver") ? j.at("solver") : nlohmann::json::object();
  b.newton.tolerance = detail::get_or(sv, "tolerance", b.newton.tolerance);
  b.newton.max_iterations = detail::get_or(sv, "max_iterations", b.newton.max_iterations);
  b.lanczos.tolerance = detail::get_or(sv, "eigen_tolerance", b.lanczos.tolerance);

  cfg.output = detail::get_or<std::string>(j, "output", cfg.output);

  if (!(cfg.h_max > 0.0)) throw ConfigError("mesh.h_max must be positive");
  if (!(b.newton.tolerance > 0.0) || !(b.lanczos.tolerance > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(b.eps_stop > 0.0) || !(b.eps_classify > 0.0)) throw ConfigError("eps_stop and eps_classify must be positive");
  if (!(b.lambda_min < 0.0 && 0.0 < 8.0 * std::numbers::pi - b.eps_stop)) {
    throw ConfigError("need lambda_min < 0 < 8pi - eps_stop");
  }
  if (!(b.approach_ratio > 0.0 && b.approach_ratio < 1.0)) throw ConfigError("approach_ratio must lie in (0, 1)");
  if (b.modes < 1) throw ConfigError("modes must be at least 1");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline Problem make_problem(const RunConfig& cfg) {
  return make_problem(cfg.domain, cfg.singularities, cfg.h_max, cfg.mesh);
}

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("malformed number '" + s + "' in CSV");
  return x;
}

inline constexpr const char* kBranchHeader = "lambda,mu,E,dEdlambda,g,sigma1,tau1,CP,sup_psi,residual";

inline void write_branch_csv(const std::vector<BranchPoint>& rows, std::ostream& out) {
  out << kBranchHeader << '\n';
  for (const auto& r : rows) {
    const double v[] = {r.lambda, r.mu, r.energy, r.dE_dlambda, r.g, r.sigma1, r.tau1, r.poincare, r.sup_psi, r.residual};
    for (int i = 0; i < 10; ++i) out << (i ? "," : "") << format_double(v[i]);
    out << '\n';
  }
}

inline std::vector<BranchPoint> read_branch_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kBranchHeader) throw ConfigError("unexpected CSV header");
  std::vector<BranchPoint> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(parse_double(cell));
    if (v.size() != 10) throw ConfigError("CSV line " + std::to_string(lineno) + " does not have 10 columns");
    rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
  }
  if (rows.empty()) throw ConfigError("CSV has no data rows");
  return rows;
}

inline constexpr const char* kFreeEnergyHeader = "lambda,n,F,entropy,energy,linear,iterations";

inline void write_free_energy_csv(const std::vector<DensityState>& rows, std::ostream& out) {
  out << kFreeEnergyHeader << '\n';
  for (const auto& r : rows) {
    out << format_double(r.lambda) << ',' << format_double(r.n) << ',' << format_double(r.free_energy) << ','
        << format_double(r.entropy()) << ',' << format_double(r.energy) << ',' << format_double(r.linear) << ','
        << r.iterations << '\n';
  }
}

/// JSON dump of a solved state: scalar header plus ψ at the vertices.
inline nlohmann::json state_json(const MeanFieldState& s) {
  nlohmann::json j;
  j["lambda"] = s.lambda;
  j["mu"] = s.mu;
  j["E"] = s.energy;
  j["residual"] = s.residual;
  j["iterations"] = s.iterations;
  j["sup_psi"] = s.sup_psi();
  j["mass"] = s.mass_check;
  j["psi"] = std::vector<double>(s.psi.data(), s.psi.data() + s.psi.size());
  return j;
}

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
};

struct SvgOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::optional<double> vertical_asymptote;  // dashed line at this x
  bool zero_line = false;
};

namespace detail {

inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace detail

/// Line plot with a fixed 640x480 viewport; output depends only on the data.
inline std::string svg_plot(const SvgSeries& s, const SvgOptions& opt) {
  if (s.x.empty() || s.x.size() != s.y.size()) throw Error("cannot plot an empty series");
  const double w = 640, h = 480, left = 80, right = 20, top = 40, bottom = 60;
  double x0 = *std::min_element(s.x.begin(), s.x.end());
  double x1 = *std::max_element(s.x.begin(), s.x.end());
  double y0 = *std::min_element(s.y.begin(), s.y.end());
  double y1 = *std::max_element(s.y.begin(), s.y.end());
  if (opt.vertical_asymptote) {
    x0 = std::min(x0, *opt.vertical_asymptote);
    x1 = std::max(x1, *opt.vertical_asymptote);
  }
  if (opt.zero_line) {
    y0 = std::min(y0, 0.0);
    y1 = std::max(y1, 0.0);
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double y) { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
  o << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  o << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" << opt.title << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << detail::fixed(px(xv)) << "\" y=\"" << h - bottom + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << detail::tick(xv) << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << detail::fixed(py(yv) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::tick(yv) << "</text>\n";
  }
  o << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 16
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << opt.xlabel << "</text>\n";
  o << "<text x=\"18\" y=\"" << (top + h - bottom) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
    << " transform=\"rotate(-90 18 " << (top + h - bottom) / 2 << ")\">" << opt.ylabel << "</text>\n";
  if (opt.zero_line) {
    o << "<line x1=\"" << left << "\" y1=\"" << detail::fixed(py(0.0)) << "\" x2=\"" << w - right << "\" y2=\""
      << detail::fixed(py(0.0)) << "\" stroke=\"gray\" stroke-width=\"0.8\"/>\n";
  }
  if (opt.vertical_asymptote) {
    const double ax = px(*opt.vertical_asymptote);
    o << "<line x1=\"" << detail::fixed(ax) << "\" y1=\"" << top << "\" x2=\"" << detail::fixed(ax) << "\" y2=\"" << h - bottom
      << "\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n";
  }
  o << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << detail::fixed(px(s.x[i])) << ',' << detail::fixed(py(s.y[i]));
  o << "\"/>\n</svg>\n";
  return o.str();
}

/// Writes energy_lambda.svg, g_lambda.svg, mu_E.svg and E_mu.svg; returns the paths.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<BranchPoint>& rows, const std::filesystem::path& dir) {
  if (rows.empty()) throw Error("cannot plot an empty diagram");
  std::filesystem::create_directories(dir);
  SvgSeries le, lg, em, me;
  for (const auto& r : rows) {
    le.x.push_back(r.lambda);
    le.y.push_back(r.energy);
    lg.x.push_back(r.lambda);
    lg.y.push_back(r.g);
    em.x.push_back(r.energy);
    em.y.push_back(r.mu);
    me.x.push_back(r.mu);
    me.y.push_back(r.energy);
  }
  const double pi8 = 8.0 * std::numbers::pi;
  const std::vector<std::pair<std::string, std::string>> files = {
      {"energy_lambda.svg", svg_plot(le, {"Energy along the branch", "lambda", "E", pi8, false})},
      {"g_lambda.svg", svg_plot(lg, {"Fold indicator g", "lambda", "g", std::nullopt, true})},
      {"mu_E.svg", svg_plot(em, {"Bifurcation diagram", "E", "mu", std::nullopt, true})},
      {"E_mu.svg", svg_plot(me, {"Bifurcation diagram", "mu", "E", std::nullopt, false})},
  };
  std::vector<std::filesystem::path> out;
  for (const auto& [name, text] : files) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
    out.push_back(path);
  }
  return out;
}

/// branch.csv plus the four plots.
inline void emit_diagram(const BranchDiagram& d, const std::filesystem::path& dir) {
  if (d.rows.empty()) throw Error("cannot emit an empty diagram");
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "branch.csv", std::ios::binary);
  if (!csv) throw Error("cannot write " + (dir / "branch.csv").string());
  write_branch_csv(d.rows, csv);
  emit_plots(d.rows, dir);
}

}  // namespace gelfand
