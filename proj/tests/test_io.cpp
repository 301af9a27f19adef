#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gelfand/io.hpp"
#include "oracles.hpp"

using namespace gelfand;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gelfand_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<BranchPoint> synthetic_rows() {
  std::vector<BranchPoint> rows;
  for (int i = 0; i < 12; ++i) {
    const double l = -10.0 + 2.7 * i;
    rows.push_back({l, 1.0 / 3.0 + i, 0.01 * std::exp(0.1 * l), 1e-3 * (i + 1), 1.0 - 0.1 * i, 5.0 + std::sqrt(2.0) * i,
                    5.0, 3.0 + 1e-17 * i, 0.1 * i, 1e-13});
  }
  return rows;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GELFAND_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesEveryShape) {
  RunConfig c = parse_config(R"({"schema": 1})");
  EXPECT_TRUE(std::holds_alternative<UnitDisk>(c.domain.shape));
  EXPECT_EQ(c.h_max, 0.05);

  c = parse_config(R"({"schema": 1, "shape": "ellipse", "params": {"a": 1.3, "b": 0.8},
                       "singularities": [{"x": 0.1, "y": -0.2, "alpha": 0.5}],
                       "mesh": {"h_max": 0.08, "refine": [{"x": 0, "y": 0, "levels": 3, "ring_points": 16}]},
                       "branch": {"lambda_min": -50, "modes": 4},
                       "solver": {"tolerance": 1e-10},
                       "output": "somewhere"})");
  const auto& e = std::get<Ellipse>(c.domain.shape);
  EXPECT_EQ(e.a, 1.3);
  EXPECT_EQ(e.b, 0.8);
  ASSERT_EQ(c.singularities.points.size(), 1u);
  EXPECT_EQ(c.singularities.points[0].alpha, 0.5);
  EXPECT_EQ(c.singularities.points[0].location.y(), -0.2);
  EXPECT_EQ(c.h_max, 0.08);
  ASSERT_EQ(c.mesh.refine.size(), 1u);
  EXPECT_EQ(c.mesh.refine[0].levels, 3);
  EXPECT_EQ(c.branch.lambda_min, -50.0);
  EXPECT_EQ(c.branch.modes, 4);
  EXPECT_EQ(c.branch.newton.tolerance, 1e-10);
  EXPECT_EQ(c.output, "somewhere");

  c = parse_config(R"({"schema": 1, "shape": "polygon", "params": {"vertices": [[0,0],[1,0],[1,1],[0,1]]}})");
  EXPECT_EQ(std::get<Polygon>(c.domain.shape).vertices.size(), 4u);
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"disk", "disk_alpha1", "offcenter", "ellipse"}) {
    EXPECT_NO_THROW(load_config(std::string(GELFAND_CONFIG_DIR) + "/" + name + ".json")) << name;
  }
}

TEST(Config, MalformedJsonReportsPosition) {
  const std::string msg = config_error("{\n  \"schema\": 1,\n  \"mesh\": {h_max: 0.1}\n}");
  EXPECT_NE(msg.find("malformed JSON"), std::string::npos);
  EXPECT_NE(msg.find("line 3, column 12"), std::string::npos) << msg;
}

TEST(Config, SchemaAndValidation) {
  EXPECT_NE(config_error("{}").find("schema"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema": 2})").find("schema"), std::string::npos);
  EXPECT_NE(config_error("[1, 2]"), "");
  EXPECT_NE(config_error(R"({"schema": 1, "shape": "torus"})").find("torus"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema": 1, "shape": "ellipse"})"), "");
  EXPECT_NE(config_error(R"({"schema": 1, "mesh": {"h_max": -1}})").find("h_max"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema": 1, "mesh": {"h_max": "fine"}})").find("h_max"), std::string::npos);
  EXPECT_NE(config_error(R"({"schema": 1, "solver": {"tolerance": 0}})"), "");
  EXPECT_NE(config_error(R"({"schema": 1, "branch": {"lambda_min": 5}})"), "");
  EXPECT_NE(config_error(R"({"schema": 1, "branch": {"approach_ratio": 1.5}})"), "");
  EXPECT_NE(config_error(R"({"schema": 1, "branch": {"modes": 0}})"), "");
  EXPECT_NE(config_error(R"({"schema": 1, "singularities": [{"x": 0, "y": 0}]})"), "");
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Csv, HeaderIsExact) {
  std::ostringstream out;
  write_branch_csv({}, out);
  EXPECT_EQ(out.str(), "lambda,mu,E,dEdlambda,g,sigma1,tau1,CP,sup_psi,residual\n");
  std::ostringstream fe;
  write_free_energy_csv({}, fe);
  EXPECT_EQ(fe.str(), "lambda,n,F,entropy,energy,linear,iterations\n");
}

TEST(Csv, RoundTripIsBitExact) {
  const auto rows = synthetic_rows();
  std::stringstream io;
  write_branch_csv(rows, io);
  const auto back = read_branch_csv(io);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].lambda, rows[i].lambda);
    EXPECT_EQ(back[i].mu, rows[i].mu);
    EXPECT_EQ(back[i].energy, rows[i].energy);
    EXPECT_EQ(back[i].dE_dlambda, rows[i].dE_dlambda);
    EXPECT_EQ(back[i].g, rows[i].g);
    EXPECT_EQ(back[i].sigma1, rows[i].sigma1);
    EXPECT_EQ(back[i].tau1, rows[i].tau1);
    EXPECT_EQ(back[i].poincare, rows[i].poincare);
    EXPECT_EQ(back[i].sup_psi, rows[i].sup_psi);
    EXPECT_EQ(back[i].residual, rows[i].residual);
  }
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 8.0 * oracle::pi}) EXPECT_EQ(parse_double(format_double(x)), x);
}

TEST(Csv, RejectsBrokenInput) {
  std::istringstream empty("");
  EXPECT_THROW(read_branch_csv(empty), ConfigError);
  std::istringstream header_only(std::string(kBranchHeader) + "\n");
  EXPECT_THROW(read_branch_csv(header_only), ConfigError);
  std::istringstream wrong_header("lambda,mu\n1,2\n");
  EXPECT_THROW(read_branch_csv(wrong_header), ConfigError);
  std::istringstream short_row(std::string(kBranchHeader) + "\n1,2,3\n");
  EXPECT_THROW(read_branch_csv(short_row), ConfigError);
  std::istringstream bad_number(std::string(kBranchHeader) + "\n1,2,3,4,5,6,7,8,9,x\n");
  EXPECT_THROW(read_branch_csv(bad_number), ConfigError);
}

TEST(Svg, DeterministicWithAsymptote) {
  const auto rows = synthetic_rows();
  const fs::path a = scratch_dir("svg_a");
  const fs::path b = scratch_dir("svg_b");
  const auto pa = emit_plots(rows, a);
  emit_plots(rows, b);
  ASSERT_EQ(pa.size(), 4u);
  for (const auto& p : pa) {
    const std::string text = slurp(p);
    EXPECT_EQ(text, slurp(b / p.filename()));
    EXPECT_EQ(text.rfind("<svg", 0), 0u);
    EXPECT_NE(text.find("</svg>"), std::string::npos);
  }
  const std::string energy = slurp(a / "energy_lambda.svg");
  EXPECT_NE(energy.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(energy.find("25.13"), std::string::npos);  // 8π tick on the λ axis
  EXPECT_EQ(slurp(a / "g_lambda.svg").find("stroke-dasharray"), std::string::npos);
}

TEST(Svg, RejectsEmptyData) {
  EXPECT_THROW(emit_plots({}, scratch_dir("svg_empty")), Error);
  EXPECT_THROW(svg_plot({}, {}), Error);
  BranchDiagram d;
  EXPECT_THROW(emit_diagram(d, scratch_dir("diagram_empty")), Error);
}

TEST(Export, DiagramAndState) {
  const fs::path dir = scratch_dir("export");
  BranchDiagram d;
  d.rows = synthetic_rows();
  emit_diagram(d, dir);
  std::ifstream csv(dir / "branch.csv");
  EXPECT_EQ(read_branch_csv(csv).size(), d.rows.size());

  const Problem prob = make_problem({}, {}, 0.1);
  const MeanFieldState s = solve_MP(prob, 0.0);
  const nlohmann::json j = state_json(s);
  EXPECT_EQ(j.at("lambda").get<double>(), 0.0);
  EXPECT_EQ(j.at("E").get<double>(), s.energy);
  EXPECT_EQ(j.at("psi").size(), static_cast<std::size_t>(prob.mesh.num_vertices()));

  std::ostringstream nodes, elems;
  write_mesh_text(prob.mesh, nodes, elems);
  std::istringstream ni(nodes.str()), ei(elems.str());
  int nv = 0, nt = 0;
  ni >> nv;
  ei >> nt;
  EXPECT_EQ(nv, prob.mesh.num_vertices());
  EXPECT_EQ(nt, prob.mesh.num_triangles());
  int idx = 0, on = 0;
  double x = 0, y = 0;
  ni >> idx >> x >> y >> on;
  EXPECT_EQ(idx, 0);
  EXPECT_EQ(x, prob.mesh.vertices[0].x());
}

TEST(Cli, ExitCodesAndOutputs) {
  const fs::path dir = scratch_dir("cli");
  const fs::path cfg = dir / "coarse.json";
  std::ofstream(cfg) << R"({"schema": 1, "mesh": {"h_max": 0.1}, "output": ")" << (dir / "default").string() << "\"}\n";
  const fs::path broken = dir / "broken.json";
  std::ofstream(broken) << "{\n  \"schema\": 1,\n  oops\n}\n";

  EXPECT_EQ(run_cli("solve --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("solve --config " + broken.string()), 2);
  EXPECT_EQ(run_cli("solve"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("freeenergy --config " + cfg.string() + " --lambda 1 --n 10 --out " + (dir / "fe_bad").string()), 2);

  ASSERT_EQ(run_cli("solve --config " + cfg.string() + " --lambda 0 --out " + (dir / "solve").string()), 0);
  const nlohmann::json state = nlohmann::json::parse(slurp(dir / "solve" / "state.json"));
  EXPECT_NEAR(state.at("E").get<double>(), 1.0 / (16.0 * oracle::pi), 0.02 / (16.0 * oracle::pi));
  EXPECT_TRUE(fs::exists(dir / "solve" / "mesh_nodes.txt"));
  EXPECT_TRUE(fs::exists(dir / "solve" / "mesh_elements.txt"));

  ASSERT_EQ(run_cli("solve --config " + cfg.string() + " --lambda 0"), 0);
  EXPECT_TRUE(fs::exists(dir / "default" / "state.json"));

  ASSERT_EQ(run_cli("freeenergy --config " + cfg.string() + " --lambda -2 -20 --n 10 --out " + (dir / "fe").string()), 0);
  const nlohmann::json bounds = nlohmann::json::parse(slurp(dir / "fe" / "energy_bound.json"));
  ASSERT_EQ(bounds.size(), 2u);
  for (const auto& b : bounds) EXPECT_TRUE(b.at("holds").get<bool>());

  {
    std::ofstream csv(dir / "branch.csv");
    write_branch_csv(synthetic_rows(), csv);
  }
  ASSERT_EQ(run_cli("plot --csv " + (dir / "branch.csv").string() + " --out " + (dir / "plots").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "plots" / "E_mu.svg"));
  std::ofstream(dir / "empty.csv") << "";
  EXPECT_EQ(run_cli("plot --csv " + (dir / "empty.csv").string() + " --out " + (dir / "plots2").string()), 2);
}
