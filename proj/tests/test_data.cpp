#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"
#include "rfm/core/rng.hpp"
#include "rfm/data/dataset.hpp"
#include "rfm/data/targets.hpp"
#include "rfm/mesh/maze.hpp"
#include "rfm/mesh/mesh.hpp"
#include "rfm/mesh/spectral.hpp"
#include "rfm/prob/distributions.hpp"

using namespace rfm;

namespace {

constexpr double kPi = std::numbers::pi;

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

/// Distance between two angles on the circle.
double circle_gap(double a, double b) {
  double d = std::abs(a - b);
  return std::min(d, 2.0 * kPi - d);
}

std::string write_fixture(const char* name, const std::string& contents) {
  std::string path = temp_path(name);
  atomic_write(path, contents);
  return path;
}

/// Independent face-mass oracle: centroid rule on a GxG barycentric grid of
/// micro-triangles (exact for linear integrands away from the clip line).
double grid_positive_mass(const Eigen::Vector3d& u, double area, int grid) {
  double acc = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid - i; ++j) {
      double s = (3.0 * i + 1.0) / (3.0 * grid), t = (3.0 * j + 1.0) / (3.0 * grid);
      acc += std::max(u[0] + s * (u[1] - u[0]) + t * (u[2] - u[0]), 0.0);
      if (i + j <= grid - 2) {
        s = (3.0 * i + 2.0) / (3.0 * grid);
        t = (3.0 * j + 2.0) / (3.0 * grid);
        acc += std::max(u[0] + s * (u[1] - u[0]) + t * (u[2] - u[0]), 0.0);
      }
    }
  }
  return acc * area / (grid * static_cast<double>(grid));
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("lat/lon ingestion maps poles and axes to the pinned directions") {
  std::string path = write_fixture("rfm_test_latlon.csv",
                                   "lat,lon\n"
                                   "90,123\n"
                                   "0,0\n"
                                   "0,90\n"
                                   "-90,45\n"
                                   "10.5,-120\n"
                                   "10.5,-120\n");
  data::Dataset ds = data::ingest_latlon_csv(path);
  REQUIRE(ds.size() == 6); /* duplicates retained */
  CHECK(ds.manifold.kind == ManifoldKind::Sphere);
  CHECK((ds.points.row(0).transpose() - Eigen::Vector3d(0, 0, 1)).norm() <= 1e-12);
  CHECK((ds.points.row(1).transpose() - Eigen::Vector3d(1, 0, 0)).norm() <= 1e-12);
  CHECK((ds.points.row(2).transpose() - Eigen::Vector3d(0, 1, 0)).norm() <= 1e-12);
  CHECK((ds.points.row(3).transpose() - Eigen::Vector3d(0, 0, -1)).norm() <= 1e-12);
  double phi = 10.5 * kPi / 180.0, lam = -120.0 * kPi / 180.0;
  Eigen::Vector3d expect(std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam),
                         std::sin(phi));
  CHECK((ds.points.row(4).transpose() - expect).norm() <= 1e-12);
  CHECK(ds.points.row(4) == ds.points.row(5));
  CHECK(ds.provenance.find(path) != std::string::npos);
  data::validate_dataset(ds);

  /* headerless files parse from the first line */
  std::string bare = write_fixture("rfm_test_latlon_bare.csv", "45,45\n-30,100\n");
  CHECK(data::ingest_latlon_csv(bare).size() == 2);
}

TEST_CASE("lat/lon ingestion reports bad rows with their line number") {
  std::string path = write_fixture("rfm_test_latlon_bad.csv", "lat,lon\n10,20\n91,0\n");
  CHECK_THROWS_WITH_AS(data::ingest_latlon_csv(path), doctest::Contains(":3:"), ParseError);
  std::string garbled = write_fixture("rfm_test_latlon_text.csv", "lat,lon\n10,20\nxx,0\n");
  CHECK_THROWS_WITH_AS(data::ingest_latlon_csv(garbled), doctest::Contains(":3:"), ParseError);
  std::string narrow = write_fixture("rfm_test_latlon_narrow.csv", "lat,lon\n10\n");
  CHECK_THROWS_AS(data::ingest_latlon_csv(narrow), ParseError);
  std::string empty = write_fixture("rfm_test_latlon_empty.csv", "lat,lon\n");
  CHECK_THROWS_AS(data::ingest_latlon_csv(empty), ParseError);
}

TEST_CASE("angle ingestion wraps degrees and radians into [0, 2pi)") {
  std::string path = write_fixture("rfm_test_angles.csv",
                                   "phi,psi\n"
                                   "-180,180\n"
                                   "0,360\n"
                                   "-60,-45\n");
  data::Dataset ds = data::ingest_angles_csv(path, 2);
  REQUIRE(ds.size() == 3);
  CHECK(ds.manifold.kind == ManifoldKind::FlatTorus);
  /* -180 and +180 degrees are the same torus point */
  CHECK(circle_gap(ds.points(0, 0), ds.points(0, 1)) <= 1e-12);
  CHECK(std::abs(ds.points(0, 0) - kPi) <= 1e-12);
  CHECK(std::abs(ds.points(0, 1) - kPi) <= 1e-12);
  CHECK(ds.points(1, 0) == 0.0);
  CHECK(circle_gap(ds.points(1, 1), 0.0) <= 1e-12); /* 360 wraps to 0 */
  CHECK(std::abs(ds.points(2, 0) - (2.0 * kPi - kPi / 3.0)) <= 1e-12);
  CHECK(std::abs(ds.points(2, 1) - (2.0 * kPi - kPi / 4.0)) <= 1e-12);
  data::validate_dataset(ds);

  std::string rad = write_fixture("rfm_test_angles_rad.csv", "1.5,-0.5\n");
  data::Dataset dr = data::ingest_angles_csv(rad, 2, /*radians=*/true);
  CHECK(dr.points(0, 0) == 1.5);
  CHECK(std::abs(dr.points(0, 1) - (2.0 * kPi - 0.5)) <= 1e-12);

  std::string wide = write_fixture("rfm_test_angles_wide.csv", "1,2,3\n");
  CHECK_THROWS_WITH_AS(data::ingest_angles_csv(wide, 2), doctest::Contains("exactly 2"),
                       ParseError);
}

TEST_CASE("synthetic torus data matches the wrapped-normal circular variance") {
  const double sigma = 0.2;
  data::Dataset ds = data::synth_wrapped_gaussian_tori(2, 100000, 42, sigma);
  data::validate_dataset(ds);
  double target = 1.0 - std::exp(-sigma * sigma / 2.0);
  for (int d = 0; d < 2; ++d) {
    double c = 0.0, s = 0.0;
    for (int i = 0; i < ds.size(); ++i) {
      c += std::cos(ds.points(i, d));
      s += std::sin(ds.points(i, d));
    }
    double resultant = std::hypot(c, s) / ds.size();
    double cv = 1.0 - resultant;
    CHECK(std::abs(cv - target) <= 0.02 * target);
  }

  data::Dataset again = data::synth_wrapped_gaussian_tori(2, 100000, 42, sigma);
  CHECK(ds.points == again.points); /* same seed, same dataset */
  CHECK(ds.provenance == again.provenance);
  data::Dataset other = data::synth_wrapped_gaussian_tori(2, 100, 43, sigma);
  CHECK(other.points.row(0) != ds.points.row(0));

  data::Dataset frozen = data::synth_wrapped_gaussian_tori(3, 50, 7, 0.0);
  for (int i = 1; i < frozen.size(); ++i) CHECK(frozen.points.row(i) == frozen.points.row(0));
}

TEST_CASE("synthetic SPD data is valid, deterministic, and centered when frozen") {
  data::Dataset ds = data::synth_wrapped_gaussian_spd(2, 200, 9, 0.2);
  data::validate_dataset(ds);
  data::Dataset again = data::synth_wrapped_gaussian_spd(2, 200, 9, 0.2);
  CHECK(ds.points == again.points);
  data::Dataset frozen = data::synth_wrapped_gaussian_spd(3, 5, 9, 0.0);
  data::validate_dataset(frozen);
  for (int i = 1; i < frozen.size(); ++i) CHECK(frozen.points.row(i) == frozen.points.row(0));
}

TEST_CASE("splits are 80/10/10, disjoint, and reproducible") {
  data::SplitIndices s = data::split_dataset(10, 1);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);

  data::SplitIndices big = data::split_dataset(1000, 5);
  CHECK(big.train.size() == 800);
  CHECK(big.val.size() == 100);
  CHECK(big.test.size() == 100);
  std::vector<int> all;
  all.insert(all.end(), big.train.begin(), big.train.end());
  all.insert(all.end(), big.val.begin(), big.val.end());
  all.insert(all.end(), big.test.begin(), big.test.end());
  std::sort(all.begin(), all.end());
  bool covers = all.size() == 1000;
  for (int i = 0; i < 1000 && covers; ++i) covers = all[static_cast<std::size_t>(i)] == i;
  CHECK(covers);

  data::SplitIndices rerun = data::split_dataset(1000, 5);
  CHECK(big.train == rerun.train);
  CHECK(big.val == rerun.val);
  CHECK(big.test == rerun.test);
  data::SplitIndices reseeded = data::split_dataset(1000, 6);
  CHECK(big.train != reseeded.train);
  CHECK_THROWS_AS(data::split_dataset(0, 1), ContractViolation);
}

TEST_CASE("dataset caches roundtrip exactly and refuse foreign or stale files") {
  data::Dataset ds = data::synth_wrapped_gaussian_tori(2, 64, 13);
  std::string path = temp_path("rfm_test_dataset.bin");
  data::save_dataset(ds, path);
  data::Dataset back = data::load_dataset(path);
  CHECK(back.manifold == ds.manifold);
  CHECK(back.provenance == ds.provenance);
  CHECK(back.points == ds.points);

  data::save_dataset(ds, path); /* rewriting is byte-stable */
  std::string bytes1 = read_file(path);
  data::save_dataset(ds, path);
  CHECK(read_file(path) == bytes1);

  std::string junk = write_fixture("rfm_test_dataset_junk.bin", "not a cache");
  CHECK_THROWS_WITH_AS(data::load_dataset(junk), doctest::Contains("not a dataset cache"),
                       ParseError);

  auto mesh = std::make_shared<mesh::TriangleMesh>(mesh::make_icosphere(1));
  prob::UniformMesh uniform(mesh);
  Rng rng(3);
  data::MeshDataset md;
  md.mesh_hash = mesh->content_hash;
  for (int i = 0; i < 32; ++i) md.points.push_back(uniform.sample_point(rng));
  md.provenance = "test";
  std::string mpath = temp_path("rfm_test_meshset.bin");
  data::save_mesh_dataset(md, mpath);
  data::MeshDataset mback = data::load_mesh_dataset(mpath, *mesh);
  REQUIRE(mback.size() == md.size());
  for (int i = 0; i < md.size(); ++i) {
    CHECK(mback.points[i].face == md.points[i].face);
    CHECK(mback.points[i].bary == md.points[i].bary);
  }
  mesh::TriangleMesh other = mesh::make_icosphere(2);
  CHECK_THROWS_WITH_AS(data::load_mesh_dataset(mpath, other), doctest::Contains("stale"),
                       CheckpointError);
  CHECK_THROWS_AS(data::load_dataset(mpath), ParseError); /* magic keeps formats apart */
}

TEST_CASE("thresholded face masses integrate the clipped interpolant exactly") {
  mesh::TriangleMesh ico = mesh::make_icosphere(1);
  Eigen::VectorXd values(ico.num_vertices());
  for (int v = 0; v < ico.num_vertices(); ++v)
    values[v] = ico.vertices(v, 0) + 0.3 * ico.vertices(v, 1) - 0.05;
  const double threshold = 0.02;
  Eigen::VectorXd mass = data::thresholded_face_masses(ico, values, threshold);

  double max_u = (values.array() - threshold).abs().maxCoeff();
  for (int f = 0; f < ico.num_faces(); ++f) {
    Eigen::Vector3d u(values[ico.faces(f, 0)] - threshold, values[ico.faces(f, 1)] - threshold,
                      values[ico.faces(f, 2)] - threshold);
    double oracle = grid_positive_mass(u, ico.face_areas[f], 256);
    CHECK(std::abs(mass[f] - oracle) <= 1e-2 * ico.face_areas[f] * max_u / 256.0 * 8.0 + 1e-14);
    if (u.minCoeff() >= 0.0) CHECK(mass[f] == ico.face_areas[f] * u.sum() / 3.0);
    if (u.maxCoeff() <= 0.0) CHECK(mass[f] == 0.0);
  }

  /* positive part minus negative part telescopes back to the plain integral */
  Eigen::VectorXd neg = data::thresholded_face_masses(ico, -values, -threshold);
  for (int f = 0; f < ico.num_faces(); ++f) {
    double linear = ico.face_areas[f] *
                    (values[ico.faces(f, 0)] + values[ico.faces(f, 1)] + values[ico.faces(f, 2)] -
                     3.0 * threshold) /
                    3.0;
    CHECK(std::abs(mass[f] - neg[f] - linear) <= 1e-13);
  }
}

TEST_CASE("eigenfunction-thresholded sampling tracks the exact face masses") {
  mesh::TriangleMesh work = mesh::make_icosphere(1);
  data::MeshTargetSpec spec;
  spec.k_target = 4;
  spec.upsample = 2;
  mesh::TriangleMesh fine = mesh::subdivide_midpoint(mesh::subdivide_midpoint(work));
  mesh::SpectralBasis basis = mesh::compute_spectral_basis(fine, 8);

  const int n = 100000;
  data::MeshDataset ds = data::mesh_target_sampler(work, basis, spec, n, 2024);
  data::validate_mesh_dataset(ds, work);
  CHECK(ds.provenance.find("k_target=4") != std::string::npos);

  /* same seed reproduces the dataset */
  data::MeshDataset again = data::mesh_target_sampler(work, basis, spec, 500, 2024);
  for (int i = 0; i < 500; ++i) {
    CHECK(again.points[i].face == ds.points[i].face);
    CHECK(again.points[i].bary == ds.points[i].bary);
  }

  /* support: every sample sits where the fine eigenfunction is positive */
  Eigen::VectorXd values = basis.eigenfunctions.col(spec.k_target);
  int bad_support = 0;
  for (int i = 0; i < n; ++i) {
    mesh::MeshPoint fmp = mesh::closest_point(fine, work.embed(ds.points[i]));
    Eigen::Vector3d u(values[fine.faces(fmp.face, 0)], values[fine.faces(fmp.face, 1)],
                      values[fine.faces(fmp.face, 2)]);
    if (fmp.bary.dot(u) <= 0.0) ++bad_support;
  }
  CHECK(bad_support == 0);

  /* empirical mass per working face vs an independently integrated target */
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(work.num_faces());
  for (int f = 0; f < fine.num_faces(); ++f) {
    Eigen::Vector3d u(values[fine.faces(f, 0)], values[fine.faces(f, 1)],
                      values[fine.faces(f, 2)]);
    oracle[f >> (2 * spec.upsample)] += grid_positive_mass(u, fine.face_areas[f], 256);
  }
  oracle /= oracle.sum();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(work.num_faces());
  for (int i = 0; i < n; ++i) counts[ds.points[i].face] += 1.0;
  counts /= n;
  double tv = 0.5 * (counts - oracle).cwiseAbs().sum();
  CHECK(tv <= 0.02);

  /* degenerate or mismatched requests are refused */
  data::MeshTargetSpec constant = spec;
  constant.k_target = 0;
  CHECK_THROWS_WITH_AS(data::mesh_target_sampler(work, basis, constant, 10, 1),
                       doctest::Contains("constant"), ContractViolation);
  data::MeshTargetSpec overflow = spec;
  overflow.k_target = basis.k;
  CHECK_THROWS_AS(data::mesh_target_sampler(work, basis, overflow, 10, 1), ContractViolation);
  data::MeshTargetSpec wrong_rounds = spec;
  wrong_rounds.upsample = 1;
  CHECK_THROWS_WITH_AS(data::mesh_target_sampler(work, basis, wrong_rounds, 10, 1),
                       doctest::Contains("hash"), ContractViolation);
}

TEST_CASE("mesh Gaussian normalizes against the area measure") {
  mesh::Maze maze = mesh::generate_maze(3, 3, 5);
  auto meshptr = std::make_shared<const mesh::TriangleMesh>(maze.mesh);
  Eigen::Vector3d center(maze.source_center.x(), maze.source_center.y(), 0.0);
  double sigma = 0.3 * maze.cell_width;
  data::MeshGaussian g(meshptr, center, sigma);

  CHECK(g.normalizer() > 0.3);  /* a fair share of the blob lies on open cells */
  CHECK(g.normalizer() < 1.0 + 1e-9);

  /* quadrature depth is converged */
  data::MeshGaussian finer(meshptr, center, sigma, 4);
  CHECK(std::abs(g.normalizer() - finer.normalizer()) <= 1e-5 * finer.normalizer());

  /* Monte Carlo normalization against the uniform measure */
  prob::UniformMesh uniform(meshptr);
  Rng rng(17);
  const int n = 200000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += std::exp(g.log_density_point(uniform.sample_point(rng)));
  double integral = acc / n * meshptr->total_area;
  CHECK(std::abs(integral - 1.0) <= 0.025);

  /* sampler face frequencies follow the quadrature masses */
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(meshptr->num_faces());
  const int ns = 100000;
  for (int i = 0; i < ns; ++i) counts[g.sample_point(rng).face] += 1.0;
  counts /= ns;
  Eigen::VectorXd target = g.face_masses() / g.normalizer();
  CHECK(0.5 * (counts - target).cwiseAbs().sum() <= 0.04);

  /* off-mesh density queries are refused */
  Eigen::VectorXd outside(2);
  outside << -0.2, 0.5;
  CHECK_THROWS_WITH_AS(g.log_density(outside), doctest::Contains("not on the mesh"),
                       ContractViolation);
  /* a blob with no mass anywhere near the mesh is refused outright */
  CHECK_THROWS_WITH_AS(data::MeshGaussian(meshptr, Eigen::Vector3d(50, 50, 0), 0.05),
                       doctest::Contains("no mass"), ContractViolation);
}

TEST_CASE("maze task blobs stay near their cells and split evenly across corners") {
  mesh::Maze maze = mesh::generate_maze(4, 4, 11);
  const int n = 10000;
  data::MazeTask task = data::maze_task(maze, n, 3);
  REQUIRE(task.corner_blobs.size() == maze.target_centers.size());
  CHECK(task.sigma == 0.3 * maze.cell_width);
  data::validate_mesh_dataset(task.target, *task.mesh);
  CHECK(task.target.provenance.find("maze-task") != std::string::npos);

  /* base truncation: samples stay inside the center cell box inflated by 3 sigma */
  Rng rng(1);
  double reach = 0.5 * maze.cell_width + 3.0 * task.sigma;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d x = task.mesh->embed(task.base->sample_point(rng));
    CHECK(std::abs(x.x() - maze.source_center.x()) <= reach);
    CHECK(std::abs(x.y() - maze.source_center.y()) <= reach);
  }

  /* corner mixture is balanced within binomial 3 sigma */
  std::vector<int> counts(task.corner_blobs.size(), 0);
  for (const mesh::MeshPoint& mp : task.target.points) {
    Eigen::Vector3d x = task.mesh->embed(mp);
    int best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < maze.target_centers.size(); ++c) {
      double d = (x.head<2>() - maze.target_centers[c]).norm();
      if (d < bestd) {
        bestd = d;
        best = static_cast<int>(c);
      }
    }
    counts[static_cast<std::size_t>(best)]++;
  }
  double p = 1.0 / static_cast<double>(counts.size());
  double band = 3.0 * std::sqrt(n * p * (1.0 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) <= band);

  /* every emitted point is on the mesh */
  for (const mesh::MeshPoint& mp : task.target.points)
    CHECK(task.mesh->membership_residual(task.mesh->embed(mp), mp) <= 1e-9);

  /* rerun determinism */
  data::MazeTask rerun = data::maze_task(maze, n, 3);
  for (int i = 0; i < n; ++i) {
    CHECK(rerun.target.points[i].face == task.target.points[i].face);
    CHECK(rerun.target.points[i].bary == task.target.points[i].bary);
  }
}

} /* TEST_SUITE("data") */
