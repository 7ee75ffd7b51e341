#include "rfm/data/targets.hpp"

#include <cmath>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"
#include "rfm/core/rng.hpp"

namespace rfm::data {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxRejectionTries = 1000000;

/// Degree-5 symmetric 7-point triangle quadrature (weights sum to 1, applied
/// to the face area), refined by `depth` rounds of uniform 1-to-4 splitting.
template <typename F>
double triangle_quadrature(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Eigen::Vector3d& c, int depth, const F& f) {
  if (depth > 0) {
    Eigen::Vector3d ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    return triangle_quadrature(a, ab, ca, depth - 1, f) +
           triangle_quadrature(ab, b, bc, depth - 1, f) +
           triangle_quadrature(ca, bc, c, depth - 1, f) +
           triangle_quadrature(ab, bc, ca, depth - 1, f);
  }
  static const double s15 = std::sqrt(15.0);
  static const double wc = 9.0 / 40.0;
  static const double wa = (155.0 - s15) / 1200.0, pa = (6.0 - s15) / 21.0;
  static const double wb = (155.0 + s15) / 1200.0, pb = (6.0 + s15) / 21.0;
  double area = 0.5 * (b - a).cross(c - a).norm();
  auto at = [&](double u, double v) { return f(Eigen::Vector3d(a + u * (b - a) + v * (c - a))); };
  double acc = wc * at(1.0 / 3.0, 1.0 / 3.0);
  acc += wa * (at(pa, pa) + at(1.0 - 2.0 * pa, pa) + at(pa, 1.0 - 2.0 * pa));
  acc += wb * (at(pb, pb) + at(1.0 - 2.0 * pb, pb) + at(pb, 1.0 - 2.0 * pb));
  return area * acc;
}

/// Connected component id per face (faces sharing a vertex are adjacent).
std::vector<int> face_components(const mesh::TriangleMesh& mesh) {
  std::vector<int> comp(mesh.num_faces(), -1);
  int next = 0;
  for (int f0 = 0; f0 < mesh.num_faces(); ++f0) {
    if (comp[f0] >= 0) continue;
    std::queue<int> frontier;
    frontier.push(f0);
    comp[f0] = next;
    while (!frontier.empty()) {
      int f = frontier.front();
      frontier.pop();
      for (int k = 0; k < 3; ++k)
        for (int g : mesh.vertex_faces[mesh.faces(f, k)])
          if (comp[g] < 0) {
            comp[g] = next;
            frontier.push(g);
          }
    }
    ++next;
  }
  return comp;
}

}  // namespace

Eigen::VectorXd thresholded_face_masses(const mesh::TriangleMesh& mesh,
                                        const Eigen::VectorXd& vertex_values,
                                        double threshold) {
  RFM_REQUIRE(vertex_values.size() == mesh.num_vertices(), ContractViolation,
              "vertex value count does not match the mesh");
  Eigen::VectorXd mass(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    Eigen::Vector3d u(vertex_values[mesh.faces(f, 0)] - threshold,
                      vertex_values[mesh.faces(f, 1)] - threshold,
                      vertex_values[mesh.faces(f, 2)] - threshold);
    double area = mesh.face_areas[f];
    if (u.maxCoeff() <= 0.0) {
      mass[f] = 0.0;
      continue;
    }
    if (u.minCoeff() >= 0.0) {
      mass[f] = area * u.sum() / 3.0;
      continue;
    }
    int npos = (u[0] > 0.0) + (u[1] > 0.0) + (u[2] > 0.0);
    if (npos == 1) {
      /* positive corner triangle, cut where the interpolant crosses zero */
      int i = u[0] > 0.0 ? 0 : (u[1] > 0.0 ? 1 : 2);
      int j = (i + 1) % 3, k = (i + 2) % 3;
      double tj = u[i] / (u[i] - u[j]), tk = u[i] / (u[i] - u[k]);
      mass[f] = area * tj * tk * u[i] / 3.0;
    } else {
      /* subtract the negative corner triangle from the full linear integral */
      int i = u[0] <= 0.0 ? 0 : (u[1] <= 0.0 ? 1 : 2);
      int j = (i + 1) % 3, k = (i + 2) % 3;
      double tj = u[i] / (u[i] - u[j]), tk = u[i] / (u[i] - u[k]);
      mass[f] = area * (u.sum() - tj * tk * u[i]) / 3.0;
    }
  }
  return mass;
}

MeshDataset mesh_target_sampler(const mesh::TriangleMesh& mesh,
                                const mesh::SpectralBasis& basis_fine,
                                const MeshTargetSpec& spec, int n, std::uint64_t seed) {
  RFM_REQUIRE(spec.k_target != 0, ContractViolation,
              "thresholding the constant mode is degenerate");
  RFM_REQUIRE(spec.k_target > 0 && spec.k_target < basis_fine.k, ContractViolation,
              "eigenfunction index out of range");
  RFM_REQUIRE(spec.upsample >= 0, ContractViolation, "upsample rounds must be non-negative");
  RFM_REQUIRE(n >= 1, ContractViolation, "need at least one sample");

  mesh::TriangleMesh fine = mesh;
  for (int r = 0; r < spec.upsample; ++r) fine = mesh::subdivide_midpoint(fine);
  RFM_REQUIRE(basis_fine.mesh_hash == fine.content_hash, ContractViolation,
              "eigenbasis was not computed on the upsampled mesh (content hash mismatch)");

  Eigen::VectorXd values = basis_fine.eigenfunctions.col(spec.k_target);
  Eigen::VectorXd mass = thresholded_face_masses(fine, values, spec.threshold);
  double total = mass.sum();
  RFM_REQUIRE(total > 0.0, NumericError, "thresholded eigenfunction has no positive mass");
  Eigen::VectorXd cdf(mass.size());
  double acc = 0.0;
  for (int f = 0; f < mass.size(); ++f) {
    acc += mass[f];
    cdf[f] = acc;
  }
  cdf /= acc;

  Rng rng(seed);
  int shift = 2 * spec.upsample;
  MeshDataset ds;
  ds.mesh_hash = mesh.content_hash;
  ds.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    double ur = rng.uniform();
    int lo = 0, hi = static_cast<int>(cdf.size()) - 1;
    while (lo < hi) {
      int mid = (lo + hi) / 2;
      if (cdf[mid] < ur)
        lo = mid + 1;
      else
        hi = mid;
    }
    Eigen::Vector3d u(values[fine.faces(lo, 0)] - spec.threshold,
                      values[fine.faces(lo, 1)] - spec.threshold,
                      values[fine.faces(lo, 2)] - spec.threshold);
    double bound = u.maxCoeff();
    mesh::MeshPoint mp;
    int tries = 0;
    for (;;) {
      RFM_REQUIRE(++tries <= kMaxRejectionTries, NumericError,
                  "rejection sampling stalled on face " + std::to_string(lo));
      mp = prob::uniform_face_point(fine, lo, rng);
      double w = mp.bary.dot(u);
      if (rng.uniform() * bound < w) break;
    }
    double dist2 = 0.0;
    mesh::MeshPoint coarse =
        mesh::closest_point_local(mesh, fine.embed(mp), lo >> shift, 2, &dist2);
    RFM_REQUIRE(dist2 <= 1e-18, NumericError,
                "fine-mesh sample does not lie on the working mesh");
    ds.points.push_back(coarse);
  }
  ds.provenance = "mesh-target k_target=" + std::to_string(spec.k_target) +
                  " upsample=" + std::to_string(spec.upsample) +
                  " threshold=" + format_double(spec.threshold) + " n=" + std::to_string(n) +
                  " seed=" + std::to_string(seed);
  return ds;
}

/* ------------------------------------------------------- mesh Gaussian -- */

MeshGaussian::MeshGaussian(std::shared_ptr<const mesh::TriangleMesh> mesh,
                           const Eigen::Vector3d& center, double sigma, int quadrature_depth)
    : mesh_(std::move(mesh)), center_(center), sigma_(sigma) {
  RFM_REQUIRE(mesh_ != nullptr, ContractViolation, "null mesh");
  RFM_REQUIRE(sigma_ > 0.0, ContractViolation, "mesh Gaussian needs sigma > 0");
  RFM_REQUIRE(quadrature_depth >= 0 && quadrature_depth <= 8, ContractViolation,
              "quadrature depth out of range");
  const double inv2s2 = 1.0 / (2.0 * sigma_ * sigma_);
  const double norm = 1.0 / (2.0 * kPi * sigma_ * sigma_);
  auto pdf = [&](const Eigen::Vector3d& x) {
    return norm * std::exp(-(x - center_).squaredNorm() * inv2s2);
  };
  int nf = mesh_->num_faces();
  face_mass_.resize(nf);
  face_peak_.resize(nf);
  face_cdf_.resize(nf);
  double acc = 0.0;
  for (int f = 0; f < nf; ++f) {
    Eigen::Vector3d a = mesh_->vertices.row(mesh_->faces(f, 0)),
                    b = mesh_->vertices.row(mesh_->faces(f, 1)),
                    c = mesh_->vertices.row(mesh_->faces(f, 2));
    face_mass_[f] = triangle_quadrature(a, b, c, quadrature_depth, pdf);
    face_peak_[f] = pdf(mesh::closest_point_on_triangle(center_, a, b, c));
    acc += face_mass_[f];
    face_cdf_[f] = acc;
  }
  z_ = acc;
  RFM_REQUIRE(z_ > 0.0, ContractViolation, "density has no mass on the mesh");
  face_cdf_ /= acc;
}

int MeshGaussian::ambient_dim() const { return mesh_->ambient_dim; }

double MeshGaussian::log_density_point(const mesh::MeshPoint& mp) const {
  double d2 = (mesh_->embed(mp) - center_).squaredNorm();
  return -d2 / (2.0 * sigma_ * sigma_) - std::log(2.0 * kPi * sigma_ * sigma_) - std::log(z_);
}

double MeshGaussian::log_density(const Eigen::VectorXd& x) const {
  double dist2 = 0.0;
  mesh::MeshPoint mp = mesh::closest_point(*mesh_, mesh_->lift(x), &dist2);
  RFM_REQUIRE(dist2 <= 1e-12, ContractViolation, "point is not on the mesh");
  return log_density_point(mp);
}

mesh::MeshPoint MeshGaussian::sample_point(Rng& rng) const {
  double u = rng.uniform();
  int lo = 0, hi = static_cast<int>(face_cdf_.size()) - 1;
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (face_cdf_[mid] < u)
      lo = mid + 1;
    else
      hi = mid;
  }
  const double inv2s2 = 1.0 / (2.0 * sigma_ * sigma_);
  const double norm = 1.0 / (2.0 * kPi * sigma_ * sigma_);
  int tries = 0;
  for (;;) {
    RFM_REQUIRE(++tries <= kMaxRejectionTries, NumericError,
                "rejection sampling stalled on face " + std::to_string(lo));
    mesh::MeshPoint mp = prob::uniform_face_point(*mesh_, lo, rng);
    double p = norm * std::exp(-(mesh_->embed(mp) - center_).squaredNorm() * inv2s2);
    if (rng.uniform() * face_peak_[lo] < p) return mp;
  }
}

Eigen::VectorXd MeshGaussian::sample(Rng& rng) const {
  return mesh_->embed_ambient(sample_point(rng));
}

/* ------------------------------------------------------------ maze task -- */

MazeTask maze_task(const mesh::Maze& maze, int n_target, std::uint64_t seed,
                   double sigma_factor) {
  RFM_REQUIRE(n_target >= 1, ContractViolation, "need at least one target sample");
  RFM_REQUIRE(sigma_factor > 0.0, ContractViolation, "sigma factor must be positive");
  auto meshptr = std::make_shared<const mesh::TriangleMesh>(maze.mesh);

  MazeTask task;
  task.mesh = meshptr;
  task.sigma = sigma_factor * maze.cell_width;

  /* every blob center must sit in the same connected piece of the maze */
  std::vector<int> comp = face_components(*meshptr);
  Eigen::Vector3d source(maze.source_center.x(), maze.source_center.y(), 0.0);
  int source_comp = comp[mesh::closest_point(*meshptr, source).face];
  for (std::size_t i = 0; i < maze.target_centers.size(); ++i) {
    Eigen::Vector3d corner(maze.target_centers[i].x(), maze.target_centers[i].y(), 0.0);
    RFM_REQUIRE(comp[mesh::closest_point(*meshptr, corner).face] == source_comp,
                ContractViolation,
                "corner cell " + std::to_string(i) + " is not connected to the center");
  }

  task.base = std::make_shared<MeshGaussian>(meshptr, source, task.sigma);
  for (const Eigen::Vector2d& c : maze.target_centers)
    task.corner_blobs.push_back(
        std::make_shared<MeshGaussian>(meshptr, Eigen::Vector3d(c.x(), c.y(), 0.0),
                                       task.sigma));
  RFM_REQUIRE(!task.corner_blobs.empty(), ContractViolation, "maze has no corner cells");

  Rng rng(seed);
  task.target.mesh_hash = meshptr->content_hash;
  task.target.points.reserve(n_target);
  for (int i = 0; i < n_target; ++i) {
    int c = static_cast<int>(rng.uniform_int(task.corner_blobs.size()));
    task.target.points.push_back(task.corner_blobs[c]->sample_point(rng));
  }
  task.target.provenance = "maze-task rows=" + std::to_string(maze.rows) +
                           " cols=" + std::to_string(maze.cols) +
                           " maze_seed=" + std::to_string(maze.seed) +
                           " n=" + std::to_string(n_target) +
                           " seed=" + std::to_string(seed) +
                           " sigma=" + format_double(task.sigma);
  return task;
}

}  // namespace rfm::data
