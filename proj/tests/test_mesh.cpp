#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "rfm/core/error.hpp"
#include "rfm/core/rng.hpp"
#include "rfm/mesh/maze.hpp"
#include "rfm/mesh/mesh.hpp"

using namespace rfm;
using namespace rfm::mesh;
using Eigen::Vector3d;

namespace {
const double kPi = std::acos(-1.0);

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Vector3d random_bary(Rng& rng) {
  double a = rng.uniform(), b = rng.uniform();
  if (a + b > 1.0) {
    a = 1.0 - a;
    b = 1.0 - b;
  }
  return {1.0 - a - b, a, b};
}
}  // namespace

TEST_SUITE_BEGIN("mesh");

TEST_CASE("grid square structure") {
  TriangleMesh g = make_grid_square(8, 8);
  CHECK(g.num_vertices() == 81);
  CHECK(g.num_faces() == 128);
  CHECK(g.ambient_dim == 2);
  CHECK(g.total_area == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.vertices.col(0).minCoeff() == doctest::Approx(-0.5));
  CHECK(g.vertices.col(0).maxCoeff() == doctest::Approx(0.5));
  /* boundary of the square: 4 sides x 8 segments */
  CHECK(g.boundary_edges.size() == 32);
  CHECK(is_edge_connected(g));
}

TEST_CASE("icosphere structure") {
  /* V - E + F = 2 with F = 20*4^s, V = 2 + F/2 */
  TriangleMesh s0 = make_icosphere(0);
  CHECK(s0.num_vertices() == 12);
  CHECK(s0.num_faces() == 20);
  TriangleMesh s2 = make_icosphere(2);
  CHECK(s2.num_vertices() == 162);
  CHECK(s2.num_faces() == 320);
  CHECK(s2.boundary_edges.empty());
  double radius = 1.0 - 1e-9;
  for (int i = 0; i < s2.num_vertices(); ++i)
    CHECK(s2.vertices.row(i).norm() == doctest::Approx(radius).epsilon(1e-12));
  /* total area within the piecewise-linear deficit of the round sphere
     (inscribed polyhedron: ~1.9% short at this resolution) */
  CHECK(s2.total_area == doctest::Approx(4.0 * kPi).epsilon(0.03));
  CHECK(s2.total_area < 4.0 * kPi);
}

TEST_CASE("midpoint subdivision nests children under parents") {
  TriangleMesh base = make_icosphere(0);
  TriangleMesh fine = subdivide_midpoint(base);
  CHECK(fine.num_faces() == 4 * base.num_faces());
  CHECK(fine.num_vertices() == base.num_vertices() + 30); /* one per edge */
  /* geometry is untouched: children tile the parent triangle */
  for (int f = 0; f < base.num_faces(); ++f) {
    double child_area = 0.0;
    for (int c = 4 * f; c < 4 * f + 4; ++c) child_area += fine.face_areas(c);
    CHECK(child_area == doctest::Approx(base.face_areas(f)).epsilon(1e-12));
    /* child centroids lie in the parent plane patch */
    for (int c = 4 * f; c < 4 * f + 4; ++c) {
      Vector3d centroid = (fine.vertices.row(fine.faces(c, 0)) +
                           fine.vertices.row(fine.faces(c, 1)) +
                           fine.vertices.row(fine.faces(c, 2))) /
                          3.0;
      Vector3d a = base.vertices.row(base.faces(f, 0));
      Vector3d n = base.face_normals.row(f);
      CHECK(std::abs(n.dot(centroid - a)) <= 1e-12);
    }
  }
}

TEST_CASE("finalize rejects broken meshes") {
  TriangleMesh m;
  m.vertices.resize(3, 3);
  m.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  m.faces.resize(1, 3);
  m.faces << 0, 1, 5; /* out of range */
  CHECK_THROWS_AS(m.finalize(), ParseError);

  TriangleMesh deg;
  deg.vertices.resize(3, 3);
  deg.vertices << 0, 0, 0, 1, 0, 0, 2, 0, 0; /* collinear */
  deg.faces.resize(1, 3);
  deg.faces << 0, 1, 2;
  CHECK_THROWS_AS(deg.finalize(), ParseError);

  /* three faces sharing one edge: non-manifold */
  TriangleMesh nm;
  nm.vertices.resize(5, 3);
  nm.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, -1, 0;
  nm.faces.resize(3, 3);
  nm.faces << 0, 1, 2, 0, 1, 3, 0, 1, 4;
  CHECK_THROWS_AS(nm.finalize(), ParseError);
}

TEST_CASE("off save/load round trip") {
  TriangleMesh g = make_icosphere(1);
  std::string path = temp_path("rfm_test_sphere.off");
  save_off(g, path);
  TriangleMesh back = load_mesh(path);
  REQUIRE(back.num_vertices() == g.num_vertices());
  REQUIRE(back.num_faces() == g.num_faces());
  CHECK((back.vertices - g.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.faces - g.faces).cwiseAbs().maxCoeff() == 0);
  CHECK(back.content_hash == g.content_hash);
  std::filesystem::remove(path);
}

TEST_CASE("obj load with normalization") {
  std::string path = temp_path("rfm_test_tri.obj");
  {
    FILE* f = std::fopen(path.c_str(), "w");
    REQUIRE(f);
    /* coordinates outside the unit box trigger recenter+rescale */
    std::fputs("v 0 0 0\nv 40 0 0\nv 0 40 0\nv 40 40 0\n", f);
    std::fputs("f 1 2 4\nf 1//1 4//1 3//1\n", f);
    std::fclose(f);
  }
  TriangleMesh m = load_mesh(path);
  CHECK(m.num_vertices() == 4);
  CHECK(m.num_faces() == 2);
  CHECK(m.vertices.cwiseAbs().maxCoeff() < 1.0);
  CHECK(m.vertices.cwiseAbs().maxCoeff() == doctest::Approx(1.0 - 1e-6).epsilon(1e-9));
  CHECK(m.ambient_dim == 2); /* all z = 0 */
  std::filesystem::remove(path);

  /* in-range coordinates stay untouched */
  std::string path2 = temp_path("rfm_test_small.obj");
  {
    FILE* f = std::fopen(path2.c_str(), "w");
    REQUIRE(f);
    std::fputs("v 0.1 0.1 0\nv 0.9 0.1 0\nv 0.5 0.8 0\nf 1 2 3\n", f);
    std::fclose(f);
  }
  TriangleMesh m2 = load_mesh(path2);
  CHECK(m2.vertices(1, 0) == 0.9);
  std::filesystem::remove(path2);
}

TEST_CASE("closest point on triangle covers all regions") {
  Vector3d a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  Vector3d bary;
  /* interior */
  Vector3d p = closest_point_on_triangle({0.2, 0.2, 1.0}, a, b, c, &bary);
  CHECK((p - Vector3d(0.2, 0.2, 0)).norm() <= 1e-15);
  /* vertex region */
  p = closest_point_on_triangle({-1, -1, 0}, a, b, c, &bary);
  CHECK((p - a).norm() <= 1e-15);
  CHECK(bary(0) == doctest::Approx(1.0));
  /* edge region */
  p = closest_point_on_triangle({0.5, -2, 0}, a, b, c, &bary);
  CHECK((p - Vector3d(0.5, 0, 0)).norm() <= 1e-15);
  /* hypotenuse */
  p = closest_point_on_triangle({1, 1, 0}, a, b, c, &bary);
  CHECK((p - Vector3d(0.5, 0.5, 0)).norm() <= 1e-12);
}

TEST_CASE("bvh closest point agrees with brute force") {
  TriangleMesh s = make_icosphere(2);
  Rng rng = Rng::derive(8101);
  for (int trial = 0; trial < 200; ++trial) {
    Vector3d q(rng.normal(), rng.normal(), rng.normal());
    q *= std::pow(rng.uniform(), 0.5) * 1.5;
    double d2 = 0.0;
    MeshPoint mp = closest_point(s, q, &d2);
    REQUIRE(mp.face >= 0);
    REQUIRE(mp.face < s.num_faces());
    CHECK(mp.bary.minCoeff() >= -1e-12);
    CHECK(mp.bary.sum() == doctest::Approx(1.0).epsilon(1e-12));
    /* brute force over all faces */
    double best = 1e300;
    for (int f = 0; f < s.num_faces(); ++f) {
      Vector3d pf = closest_point_on_triangle(q, s.vertices.row(s.faces(f, 0)),
                                              s.vertices.row(s.faces(f, 1)),
                                              s.vertices.row(s.faces(f, 2)));
      best = std::min(best, (pf - q).squaredNorm());
    }
    CHECK(d2 == doctest::Approx(best).epsilon(1e-10));
    CHECK((s.embed(mp) - q).squaredNorm() == doctest::Approx(d2).epsilon(1e-10));
  }
}

TEST_CASE("local closest point matches global for nearby queries") {
  TriangleMesh s = make_icosphere(3);
  Rng rng = Rng::derive(8102);
  for (int trial = 0; trial < 100; ++trial) {
    int f = static_cast<int>(rng.uniform_int(s.num_faces()));
    MeshPoint start{f, random_bary(rng)};
    Vector3d x = s.embed(start);
    /* small off-surface step, as taken by projected integration */
    Vector3d q = x + 0.02 * Vector3d(rng.normal(), rng.normal(), rng.normal());
    MeshPoint local = closest_point_local(s, q, f);
    MeshPoint global = closest_point(s, q);
    CHECK((s.embed(local) - s.embed(global)).norm() <= 1e-12);
  }
  /* invalid hint falls back to the global search */
  Vector3d q(0.3, 0.2, 1.4);
  MeshPoint fb = closest_point_local(s, q, -1);
  CHECK((s.embed(fb) - s.embed(closest_point(s, q))).norm() <= 1e-12);
}

TEST_CASE("face gradient reproduces linear functions") {
  TriangleMesh g = make_grid_square(4, 4);
  /* vals = 3x - 2y + 1 -> gradient (3, -2, 0) on every face */
  Eigen::VectorXd vals(g.num_vertices());
  for (int i = 0; i < g.num_vertices(); ++i)
    vals(i) = 3.0 * g.vertices(i, 0) - 2.0 * g.vertices(i, 1) + 1.0;
  for (int f = 0; f < g.num_faces(); ++f) {
    Vector3d vf(vals(g.faces(f, 0)), vals(g.faces(f, 1)), vals(g.faces(f, 2)));
    Vector3d grad = face_gradient(g, f, vf);
    CHECK((grad - Vector3d(3.0, -2.0, 0.0)).norm() <= 1e-10);
  }
  /* interpolation is exact for vertex-linear data */
  Rng rng = Rng::derive(8103);
  for (int trial = 0; trial < 50; ++trial) {
    MeshPoint p{static_cast<int>(rng.uniform_int(g.num_faces())), random_bary(rng)};
    Vector3d q = g.embed(p);
    CHECK(interpolate(g, vals, p) ==
          doctest::Approx(3.0 * q(0) - 2.0 * q(1) + 1.0).epsilon(1e-12));
  }
}

TEST_CASE("maze generation") {
  Maze maze = generate_maze(1, 2, 17);
  CHECK(maze.mesh.num_faces() == 288);
  CHECK(maze.mesh.ambient_dim == 2);
  CHECK(maze.passages.size() == 1);
  CHECK(is_edge_connected(maze.mesh));
  /* strictly inside the open unit square */
  CHECK(maze.mesh.vertices.col(0).minCoeff() > 0.0);
  CHECK(maze.mesh.vertices.col(1).minCoeff() > 0.0);
  CHECK(maze.mesh.vertices.col(0).maxCoeff() < 1.0);
  CHECK(maze.mesh.vertices.col(1).maxCoeff() < 1.0);
  CHECK(maze.mesh.vertices.col(2).cwiseAbs().maxCoeff() == 0.0);

  Maze big = generate_maze(4, 4, 3);
  /* spanning tree over 16 cells has 15 passages */
  CHECK(big.passages.size() == 15);
  CHECK(is_edge_connected(big.mesh));
  CHECK(big.target_centers.size() == 4);
  /* source and targets land strictly inside the mesh */
  for (const auto& t : big.target_centers) {
    double d2 = 0.0;
    closest_point(big.mesh, {t(0), t(1), 0.0}, &d2);
    CHECK(d2 <= 1e-20);
  }

  /* determinism: same seed, same mesh; different seed, different tree */
  Maze again = generate_maze(4, 4, 3);
  CHECK(again.mesh.content_hash == big.mesh.content_hash);
  CHECK(maze_sidecar_text(again) == maze_sidecar_text(big));
  bool any_diff = false;
  for (std::uint64_t s = 4; s < 10 && !any_diff; ++s)
    any_diff = generate_maze(4, 4, s).mesh.content_hash != big.mesh.content_hash;
  CHECK(any_diff);
}

TEST_CASE("maze cells are reachable only through passages") {
  /* with no passage between two diagonal cells, euclidean straight line
     crosses the gap but the mesh keeps them apart: check the gap squares are
     absent by sampling the wall band between non-adjacent cells */
  Maze maze = generate_maze(2, 2, 11);
  CHECK(maze.passages.size() == 3);
  std::set<std::pair<int, int>> have;
  for (auto [a, b] : maze.passages) have.insert({std::min(a, b), std::max(a, b)});
  /* find an adjacent cell pair with no passage; 2x2 grid has 4 adjacent pairs */
  const std::pair<int, int> adjacent[4] = {{0, 1}, {2, 3}, {0, 2}, {1, 3}};
  int missing = -1;
  for (int i = 0; i < 4; ++i)
    if (!have.count(adjacent[i])) missing = i;
  REQUIRE(missing >= 0);
  auto [ca, cb] = adjacent[missing];
  /* midpoint of the wall band between the two cells must be off-mesh */
  auto center_of = [&](int cell) {
    int r = cell / maze.cols, c = cell % maze.cols;
    double pitch10 = maze.cell_width * 10.0 / 8.0;
    return Eigen::Vector2d(maze.target_centers[0](0) + c * pitch10,
                           maze.target_centers[0](1) + r * pitch10);
  };
  Eigen::Vector2d wall_mid = 0.5 * (center_of(ca) + center_of(cb));
  double d2 = 0.0;
  closest_point(maze.mesh, {wall_mid(0), wall_mid(1), 0.0}, &d2);
  CHECK(d2 > 1e-8); /* strictly off the mesh: the wall is real */
}

TEST_CASE("membership residual and embedding") {
  TriangleMesh s = make_icosphere(1);
  Rng rng = Rng::derive(8104);
  for (int trial = 0; trial < 50; ++trial) {
    MeshPoint p{static_cast<int>(rng.uniform_int(s.num_faces())), random_bary(rng)};
    Vector3d x = s.embed(p);
    CHECK(s.membership_residual(x, p) <= 1e-12);
    CHECK(s.membership_residual(x + Vector3d(0, 0, 0.5), p) >= 0.4);
  }
  /* flat mesh: embed_ambient drops z, lift restores it */
  TriangleMesh g = make_grid_square(2, 2);
  MeshPoint p{0, Vector3d(0.3, 0.3, 0.4)};
  Eigen::VectorXd amb = g.embed_ambient(p);
  CHECK(amb.size() == 2);
  Vector3d lifted = g.lift(amb);
  CHECK(lifted(2) == 0.0);
  CHECK((lifted - g.embed(p)).norm() <= 1e-15);
}

TEST_SUITE_END();
