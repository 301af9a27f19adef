#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "gelfand/problem.hpp"
#include "oracles.hpp"

using namespace gelfand;

namespace {

SingularitySpec single(Point p, double alpha) {
  SingularitySpec s;
  s.points.push_back({p, alpha});
  return s;
}

// ∫_A^B log|x - p| ds along a straight segment.
double segment_log_integral(const Point& a, const Point& b, const Point& p) {
  const double len = (b - a).norm();
  const Point e = (b - a) / len;
  const double s0 = (a - p).dot(e);
  const double s1 = s0 + len;
  const double d = std::abs(geom::cross(e, a - p));
  auto prim = [&](double s) {
    const double r2 = s * s + d * d;
    const double log_part = r2 > 0.0 ? 0.5 * s * std::log(r2) : 0.0;
    const double atan_part = d > 0.0 ? d * std::atan(s / d) : 0.0;
    return log_part - s + atan_part;
  };
  return prim(s1) - prim(s0);
}

double l2_error_h(const Mesh& mesh, const Vector& h, const Point& p) {
  const SparseMatrix m = assemble_mass(mesh);
  Vector e(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Point pstar = p / p.squaredNorm();
    e[i] = h[i] - std::log(p.norm() * (mesh.vertices[i] - pstar).norm()) / (2.0 * oracle::pi);
  }
  return std::sqrt(e.dot(m * e));
}

}  // namespace

TEST(Mesh, DiskBoundaryVerticesLieOnCircle) {
  const Mesh mesh = build_mesh({}, {}, 0.1);
  EXPECT_GT(mesh.num_vertices(), 250);
  EXPECT_LT(mesh.num_vertices(), 800);
  for (int i : mesh.boundary_loop) EXPECT_NEAR(mesh.vertices[i].norm(), 1.0, 1e-12);
  EXPECT_GE(mesh.min_angle_deg(), 20.0);
}

TEST(Mesh, EulerCharacteristicOfSimplyConnectedDomain) {
  for (double h : {0.2, 0.1, 0.05}) {
    const Mesh mesh = build_mesh({}, single(Point(0.3, -0.2), 0.5), h);
    std::set<std::pair<int, int>> edges;
    for (const auto& t : mesh.triangles) {
      for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[k], t[(k + 1) % 3]));
    }
    EXPECT_EQ(mesh.num_vertices() - static_cast<int>(edges.size()) + mesh.num_triangles(), 1);
  }
}

TEST(Mesh, TrianglesAreCounterClockwiseAndTileThePolygon) {
  DomainSpec d;
  d.shape = Ellipse{1.3, 0.8};
  const Mesh mesh = build_mesh(d, {}, 0.08);
  for (int t = 0; t < mesh.num_triangles(); ++t) EXPECT_GT(mesh.triangle_area(t), 0.0);
  EXPECT_NEAR(mesh.area(), std::abs(geom::signed_area(mesh.boundary_polygon())), 1e-12);
  EXPECT_NEAR(mesh.area(), exact_area(d), 2e-2 * exact_area(d));
}

TEST(Mesh, SingularPointIsExactVertex) {
  const Mesh mesh = build_mesh({}, single(Point(0, 0), 1.0), 0.1);
  ASSERT_EQ(mesh.singular_vertex.size(), 1u);
  EXPECT_EQ(mesh.vertices[mesh.singular_vertex[0]], Point(0, 0));

  const Mesh off = build_mesh({}, single(Point(0.5, 0.0), 0.05), 0.1);
  EXPECT_EQ(off.vertices[off.singular_vertex[0]], Point(0.5, 0.0));
}

TEST(Mesh, GradedTowardSingularity) {
  const double h = 0.1;
  const Mesh mesh = build_mesh({}, single(Point(0.2, 0.1), 1.0), h);
  const int sv = mesh.singular_vertex[0];
  const Point p = mesh.vertices[sv];
  double incident = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (tri[0] == sv || tri[1] == sv || tri[2] == sv) incident = std::max(incident, mesh.triangle_diameter(t));
  }
  EXPECT_LT(incident, h / 8.0);
  // Mean element size grows with distance from the singular point.
  std::vector<double> sum(4, 0.0);
  std::vector<int> cnt(4, 0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point c = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
    const double r = (c - p).norm();
    const int bin = r < 0.02 ? 0 : r < 0.05 ? 1 : r < 0.1 ? 2 : r < 0.3 ? 3 : -1;
    if (bin >= 0) {
      sum[bin] += mesh.triangle_diameter(t);
      ++cnt[bin];
    }
  }
  for (int b = 0; b + 1 < 4; ++b) EXPECT_LT(sum[b] / cnt[b], sum[b + 1] / cnt[b + 1]);
}

TEST(Mesh, MinimumAngleAcrossConfigurations) {
  DomainSpec ell;
  ell.shape = Ellipse{1.3, 0.8};
  DomainSpec square;
  square.shape = Polygon{{Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)}};
  EXPECT_GE(build_mesh({}, single(Point(0, 0), 1.0), 0.05).min_angle_deg(), 20.0);
  EXPECT_GE(build_mesh({}, single(Point(0.5, 0), 0.05), 0.05).min_angle_deg(), 20.0);
  EXPECT_GE(build_mesh(ell, {}, 0.05).min_angle_deg(), 20.0);
  EXPECT_GE(build_mesh(square, single(Point(0.5, 0.5), 2.0), 0.05).min_angle_deg(), 20.0);
}

TEST(Mesh, RejectsInvalidInput) {
  EXPECT_THROW(build_mesh({}, single(Point(1.5, 0), 1.0), 0.1), InvalidSingularity);
  EXPECT_THROW(build_mesh({}, single(Point(1.0, 0), 1.0), 0.1), InvalidSingularity);
  EXPECT_THROW(build_mesh({}, single(Point(0, 0), 0.0), 0.1), InvalidSingularity);
  EXPECT_THROW(build_mesh({}, single(Point(0, 0), -1.0), 0.1), InvalidSingularity);
  SingularitySpec twice = single(Point(0.1, 0), 1.0);
  twice.points.push_back({Point(0.1, 0), 0.5});
  EXPECT_THROW(build_mesh({}, twice, 0.1), InvalidSingularity);

  DomainSpec bow;
  bow.shape = Polygon{{Point(0, 0), Point(1, 1), Point(1, 0), Point(0, 1)}};
  EXPECT_THROW(build_mesh(bow, {}, 0.1), InvalidDomain);
  DomainSpec flat;
  flat.shape = Polygon{{Point(0, 0), Point(1, 0), Point(2, 0)}};
  EXPECT_THROW(build_mesh(flat, {}, 0.1), InvalidDomain);
  DomainSpec bad_ellipse;
  bad_ellipse.shape = Ellipse{1.0, -1.0};
  EXPECT_THROW(build_mesh(bad_ellipse, {}, 0.1), InvalidDomain);
  EXPECT_THROW(build_mesh({}, {}, 0.0), MeshFailure);
}

TEST(Green, CentredDiskMatchesLogarithm) {
  const Mesh mesh = build_mesh({}, single(Point(0, 0), 1.0), 0.05);
  const DirichletSolver solver(mesh, assemble_stiffness(mesh));
  const GreenFunction g = green_function(mesh, solver, Point(0, 0));
  EXPECT_LT(g.regular.cwiseAbs().maxCoeff(), 1e-12);
  const Vector nodal = g.nodal(mesh);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (i == g.pole_vertex) continue;
    EXPECT_NEAR(nodal[i], oracle::disk_green(mesh.vertices[i], Point(0, 0)), 1e-12);
    EXPECT_GE(nodal[i], -1e-12);
  }
}

TEST(Green, OffCentreMatchesImageFormula) {
  const Point p(0.5, 0.0);
  const Mesh mesh = build_mesh({}, single(p, 0.05), 0.05);
  const DirichletSolver solver(mesh, assemble_stiffness(mesh));
  const GreenFunction g = green_function(mesh, solver, p);
  const Vector nodal = g.nodal(mesh);
  double worst = 0.0;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (i == g.pole_vertex) continue;
    worst = std::max(worst, std::abs(nodal[i] - oracle::disk_green(mesh.vertices[i], p)));
    EXPECT_GE(nodal[i], -1e-12);
  }
  EXPECT_LT(worst, 2e-3);
}

TEST(Green, RefinementReducesRegularPartError) {
  const Point p(0.5, 0.0);
  std::vector<double> err;
  for (double h : {0.1, 0.05, 0.025}) {
    const Mesh mesh = build_mesh({}, single(p, 0.05), h);
    const DirichletSolver solver(mesh, assemble_stiffness(mesh));
    err.push_back(l2_error_h(mesh, green_function(mesh, solver, p).regular, p));
  }
  EXPECT_GE(err[0] / err[1], 1.5);
  EXPECT_GE(err[1] / err[2], 1.5);
}

TEST(Green, WeakIdentityAgainstHatFunctions) {
  const Point p(0.3, 0.2);
  const Mesh mesh = build_mesh({}, single(p, 0.5), 0.08);
  const SparseMatrix a = assemble_stiffness(mesh);
  const DirichletSolver solver(mesh, a);
  const GreenFunction g = green_function(mesh, solver, p);
  // ∫∇G·∇φ_i = (A H)_i + Σ_T ∇φ_i · ∮_{∂T} S n ds, S the singular part.
  Vector lhs = a * g.regular;
  for (const auto& tri : mesh.triangles) {
    const Point& x0 = mesh.vertices[tri[0]];
    const Point& x1 = mesh.vertices[tri[1]];
    const Point& x2 = mesh.vertices[tri[2]];
    const auto grads = hat_gradients(x0, x1, x2);
    Point flux = Point::Zero();
    const std::array<Point, 3> v = {x0, x1, x2};
    for (int k = 0; k < 3; ++k) {
      const Point& s = v[k];
      const Point& t = v[(k + 1) % 3];
      const Point n = Point(t.y() - s.y(), s.x() - t.x()).normalized();
      flux += n * (-segment_log_integral(s, t, p) / (2.0 * oracle::pi));
    }
    for (int k = 0; k < 3; ++k) lhs[tri[k]] += grads.row(k).dot(flux);
  }
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (mesh.on_boundary[i]) continue;
    EXPECT_NEAR(lhs[i], i == g.pole_vertex ? 1.0 : 0.0, 1e-9) << "vertex " << i;
  }
}

TEST(Green, PoleMustBeInteriorVertex) {
  const Mesh mesh = build_mesh({}, {}, 0.1);
  const DirichletSolver solver(mesh, assemble_stiffness(mesh));
  EXPECT_THROW(green_function(mesh, solver, mesh.boundary_loop[0]), InvalidSingularity);
  EXPECT_THROW(green_function(mesh, solver, Point(0.123456, 0.0)), InvalidSingularity);
}

TEST(Weight, CentredSingularityIsPowerOfRadius) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const Mesh mesh = build_mesh({}, single(Point(0, 0), alpha), 0.1);
    const DirichletSolver solver(mesh, assemble_stiffness(mesh));
    const WeightField w = build_weight(mesh, single(Point(0, 0), alpha), solver);
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      EXPECT_NEAR(w.values[i], std::pow(mesh.vertices[i].norm(), 2.0 * alpha), 1e-12);
    }
    EXPECT_EQ(w.values[mesh.singular_vertex[0]], 0.0);
    EXPECT_DOUBLE_EQ(w.exponents[0], 2.0 * alpha);
    EXPECT_NEAR(w.local_coefficient[0], 1.0, 1e-12);
  }
}

TEST(Weight, OffCentreMatchesExactGreenExponential) {
  const Point p(0.5, 0.0);
  const double alpha = 0.7;
  const Mesh mesh = build_mesh({}, single(p, alpha), 0.05);
  const DirichletSolver solver(mesh, assemble_stiffness(mesh));
  const WeightField w = build_weight(mesh, single(p, alpha), solver);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (i == mesh.singular_vertex[0]) continue;
    const double exact = std::exp(-4.0 * oracle::pi * alpha * oracle::disk_green(mesh.vertices[i], p));
    EXPECT_NEAR(w.values[i], exact, 5e-3 * std::max(exact, 1e-3));
    EXPECT_GT(w.values[i], 0.0);
  }
  // h ≈ c|x - p|^{2α} with c = exp(-4πα H_p(p)) = (|p| |p - p*|)^{-2α}.
  EXPECT_NEAR(w.local_coefficient[0], std::pow(0.75, -2.0 * alpha), 2e-3);
}

TEST(Weight, NoSingularitiesGivesUnitWeight) {
  const Mesh mesh = build_mesh({}, {}, 0.1);
  const DirichletSolver solver(mesh, assemble_stiffness(mesh));
  const WeightField w = build_weight(mesh, {}, solver);
  EXPECT_FALSE(w.is_singular());
  for (int i = 0; i < mesh.num_vertices(); ++i) EXPECT_EQ(w.values[i], 1.0);
}

TEST(Weight, ApproximantAddsUniformFloor) {
  const Mesh mesh = build_mesh({}, single(Point(0, 0), 1.0), 0.1);
  const DirichletSolver solver(mesh, assemble_stiffness(mesh));
  const WeightField w = build_weight(mesh, single(Point(0, 0), 1.0), solver);
  const WeightField w100 = w.approximant(100.0);
  EXPECT_NEAR(w100.values.minCoeff(), 0.01, 1e-15);
  EXPECT_LT((w100.values - w.values - Vector::Constant(w.values.size(), 0.01)).cwiseAbs().maxCoeff(), 1e-15);
  // h_n → h uniformly.
  double prev = 1.0;
  for (double n : {10.0, 100.0, 1000.0}) {
    const double gap = (w.approximant(n).values - w.values).cwiseAbs().maxCoeff();
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_THROW(w.approximant(0.0), InvalidWeight);
}

TEST(Weight, LogWeightIsDiscretelyHarmonicAwayFromPole) {
  const Point p(0.4, -0.1);
  std::vector<double> res;
  for (double h : {0.1, 0.05, 0.025}) {
    const Mesh mesh = build_mesh({}, single(p, 1.0), h);
    const SparseMatrix a = assemble_stiffness(mesh);
    const DirichletSolver solver(mesh, a);
    const WeightField w = build_weight(mesh, single(p, 1.0), solver);
    Vector logh(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) logh[i] = i == mesh.singular_vertex[0] ? 0.0 : std::log(w.values[i]);
    Vector r = a * logh;
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      if (mesh.on_boundary[i] || (mesh.vertices[i] - p).norm() < 0.3) r[i] = 0.0;
    }
    // Dual norm of the residual.
    const Vector z = solver.solve(r);
    res.push_back(std::sqrt(r.dot(z)));
  }
  EXPECT_GE(res[0] / res[1], 1.5);
  EXPECT_GE(res[1] / res[2], 1.5);
}
