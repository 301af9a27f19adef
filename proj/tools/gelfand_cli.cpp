#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gelfand/io.hpp"

namespace fs = std::filesystem;
using namespace gelfand;

namespace {

constexpr int kSolverFailure = 1;
constexpr int kConfigError = 2;

fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = fs::path(dir) / ".write_probe";
  std::ofstream f(probe);
  if (ec || !f) throw ConfigError("output directory '" + dir + "' is not writable");
  f.close();
  fs::remove(probe, ec);
  return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

nlohmann::json fold_json(const Fold& f) {
  return {{"lambda", f.lambda}, {"mu", f.mu}, {"E", f.energy}, {"g", f.g},
          {"z3", f.z3},         {"z_min", f.z_min}, {"sign_changes", f.sign_changes}};
}

nlohmann::json summary_json(const Problem& prob, const BranchDiagram& d) {
  nlohmann::json j;
  j["kind"] = to_string(d.kind);
  j["termination"] = d.termination;
  j["E0"] = d.e0;
  j["mu_min"] = d.mu_min;
  j["mu_last"] = d.mu_last;
  j["rows"] = d.rows.size();
  j["warnings"] = d.warnings;
  const KindEvidence ev = kind_evidence(d);
  j["evidence"] = {{"energy_slope", ev.energy_slope}, {"sup_u_slope", ev.sup_u_slope}, {"energy_ratio", ev.energy_ratio}};
  if (d.fold) {
    j["fold"] = fold_json(*d.fold);
  } else {
    j["fold"] = nullptr;
  }
  j["mesh"] = {{"vertices", prob.mesh.num_vertices()}, {"triangles", prob.mesh.triangles.size()}};
  return j;
}

BranchDiagram trace_with_fold(const Problem& prob, const RunConfig& cfg) {
  BranchDiagram d = trace_branch(prob, cfg.branch);
  if (g_sign_changes(d) > 0) {
    try {
      d.fold = find_fold(prob, d, 1e-8, cfg.branch.newton);
    } catch (const Error& e) {
      d.warnings.push_back(std::string("fold refinement failed: ") + e.what());
    }
  }
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean field equation solver and branch tracer"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  double lambda = 0.0;
  std::optional<double> mu;
  int modes = 10;
  std::vector<double> lambdas;
  std::vector<double> ns;
  double delta = 0.1;
  std::string csv;

  auto* solve = app.add_subcommand("solve", "Solve MP_lambda (or LP_mu) once and dump the state");
  solve->add_option("--config", config, "Run configuration")->required();
  solve->add_option("--lambda", lambda, "Mean field parameter");
  solve->add_option("--mu", mu, "Solve the Gelfand problem at this mu instead");
  solve->add_option("--out", out, "Output directory");

  auto* branch = app.add_subcommand("branch", "Trace the branch and emit CSV and plots");
  branch->add_option("--config", config, "Run configuration")->required();
  branch->add_option("--out", out, "Output directory");

  auto* spectrum = app.add_subcommand("spectrum", "Weighted eigenvalues at one lambda");
  spectrum->add_option("--config", config, "Run configuration")->required();
  spectrum->add_option("--lambda", lambda, "Mean field parameter");
  spectrum->add_option("--k", modes, "Number of eigenvalues")->check(CLI::PositiveNumber);
  spectrum->add_option("--out", out, "Output directory");

  auto* classify = app.add_subcommand("classify", "Decide whether the domain is of first or second kind");
  classify->add_option("--config", config, "Run configuration")->required();
  classify->add_option("--out", out, "Output directory");

  auto* freeenergy = app.add_subcommand("freeenergy", "Minimise the free energy for lambda < 0");
  freeenergy->add_option("--config", config, "Run configuration")->required();
  freeenergy->add_option("--lambda", lambdas, "Negative parameters")->required();
  freeenergy->add_option("--n", ns, "Approximation indices of the weight")->required();
  freeenergy->add_option("--delta", delta, "Collar width for the energy bound");
  freeenergy->add_option("--out", out, "Output directory");

  auto* plot = app.add_subcommand("plot", "Render SVG plots from a branch CSV");
  plot->add_option("--csv", csv, "branch.csv written by the branch subcommand")->required();
  plot->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (plot->parsed()) {
      std::ifstream in(csv);
      if (!in) throw ConfigError("cannot open CSV '" + csv + "'");
      const auto rows = read_branch_csv(in);
      const fs::path dir = prepare_output(out.empty() ? fs::path(csv).parent_path().string() : out);
      for (const auto& p : emit_plots(rows, dir)) std::cout << p.string() << '\n';
      return 0;
    }

    const RunConfig cfg = load_config(config);
    const fs::path dir = prepare_output(out.empty() ? cfg.output : out);
    const Problem prob = make_problem(cfg);

    if (solve->parsed()) {
      MeanFieldState s;
      if (mu) {
        LpOptions lo;
        lo.newton = cfg.branch.newton;
        s = solve_LP(prob, *mu, lo);
      } else {
        s = solve_MP(prob, lambda, Vector(), cfg.branch.newton);
      }
      write_json(dir / "state.json", state_json(s));
      std::ofstream nodes(dir / "mesh_nodes.txt");
      std::ofstream elems(dir / "mesh_elements.txt");
      write_mesh_text(prob.mesh, nodes, elems);
      std::cout << "lambda " << format_double(s.lambda) << " mu " << format_double(s.mu) << " E "
                << format_double(s.energy) << " residual " << format_double(s.residual) << '\n';
      return 0;
    }

    if (branch->parsed()) {
      const BranchDiagram d = trace_with_fold(prob, cfg);
      emit_diagram(d, dir);
      write_json(dir / "summary.json", summary_json(prob, d));
      std::cout << "kind " << to_string(d.kind) << ", " << d.rows.size() << " rows, " << d.termination << '\n';
      if (d.fold) std::cout << "fold lambda " << format_double(d.fold->lambda) << " mu " << format_double(d.fold->mu) << '\n';
      return 0;
    }

    if (spectrum->parsed()) {
      const MeanFieldState s = solve_MP(prob, lambda, Vector(), cfg.branch.newton);
      const SpectrumReport rep = weighted_eigs(prob, s, modes, cfg.branch.lanczos);
      nlohmann::json j;
      j["lambda"] = lambda;
      j["sigma"] = std::vector<double>(rep.sigmas.data(), rep.sigmas.data() + rep.sigmas.size());
      j["means"] = std::vector<double>(rep.means.data(), rep.means.data() + rep.means.size());
      j["tau1"] = standard_tau1(prob, s, cfg.branch.lanczos);
      j["CP"] = poincare_constant(prob, s, cfg.branch.lanczos);
      j["orthonormality_error"] = rep.orthonormality_error;
      j["mass_condition"] = rep.mass_condition;
      write_json(dir / "spectrum.json", j);
      std::cout << "sigma1 " << format_double(rep.sigmas[0]) << " tau1 " << format_double(j["tau1"].get<double>())
                << " CP " << format_double(j["CP"].get<double>()) << '\n';
      return 0;
    }

    if (classify->parsed()) {
      const BranchDiagram d = trace_with_fold(prob, cfg);
      write_json(dir / "classify.json", summary_json(prob, d));
      std::cout << to_string(d.kind) << '\n';
      return 0;
    }

    if (freeenergy->parsed()) {
      std::vector<DensityState> rows;
      nlohmann::json bounds = nlohmann::json::array();
      for (double l : lambdas) {
        for (double n : ns) {
          const EnergyBoundReport r = verify_energy_bound(prob, l, n, delta);
          rows.push_back(r.minimizer);
          bounds.push_back({{"lambda", l},
                            {"n", n},
                            {"delta", delta},
                            {"minimizer_slack", r.minimizer_slack},
                            {"entropy_slack", r.entropy_slack},
                            {"linear_slack", r.linear_slack},
                            {"energy_slack", r.energy_slack},
                            {"jensen_slack", r.jensen_slack},
                            {"holds", r.holds()}});
        }
      }
      std::ofstream f(dir / "freeenergy.csv", std::ios::binary);
      write_free_energy_csv(rows, f);
      write_json(dir / "energy_bound.json", bounds);
      write_free_energy_csv(rows, std::cout);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidDomain& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidSingularity& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidDelta& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const UnsupportedRegime& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  return 0;
}
