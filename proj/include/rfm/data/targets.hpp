#pragma once

#include <cstdint>
#include <memory>

#include <Eigen/Core>

#include "rfm/data/dataset.hpp"
#include "rfm/mesh/maze.hpp"
#include "rfm/mesh/mesh.hpp"
#include "rfm/mesh/spectral.hpp"
#include "rfm/prob/distributions.hpp"

namespace rfm::data {

/// Sampling target built from one Laplacian eigenfunction, thresholded at
/// zero, on an upsampled copy of the working mesh.
struct MeshTargetSpec {
  int k_target = 0;   /* 0-based eigenfunction column; 0 is the constant mode
                         and is rejected (its thresholding is degenerate) */
  int upsample = 3;   /* midpoint-subdivision rounds producing the fine mesh */
  double threshold = 0.0;
};

/// Exact per-face integrals of max(f - threshold, 0) for the vertex-linear
/// interpolant f.  Mixed-sign faces are clipped analytically (the positive
/// region of a linear function on a triangle is a triangle or a
/// quadrilateral, both integrable in closed form).
Eigen::VectorXd thresholded_face_masses(const mesh::TriangleMesh& mesh,
                                        const Eigen::VectorXd& vertex_values,
                                        double threshold = 0.0);

/// Draw n points with density proportional to max(phi_k - threshold, 0) on
/// the `spec.upsample`-times subdivided mesh, then map each back to the
/// working mesh (the subdivision leaves the surface unchanged, so the map is
/// a closest-point lookup seeded at the subdivision ancestor face).
/// `basis_fine` must have been computed on exactly that fine mesh; a content
/// hash mismatch is refused.
MeshDataset mesh_target_sampler(const mesh::TriangleMesh& mesh,
                                const mesh::SpectralBasis& basis_fine,
                                const MeshTargetSpec& spec, int n, std::uint64_t seed);

/// Isotropic Gaussian restricted to a mesh surface and renormalized against
/// the area measure:
///   p(x) = exp(-|x - c|^2 / (2 sigma^2)) / (2 pi sigma^2 Z),
///   Z the quadrature integral of the unnormalized density over all faces.
/// Sampling is exact: face chosen by integral mass, position by rejection
/// under the face's density maximum (attained at the point closest to c).
class MeshGaussian final : public prob::MeshBaseDistribution {
 public:
  /// `quadrature_depth` controls the per-face refinement of the degree-5
  /// rule used for the normalizer (each level splits every triangle in 4).
  MeshGaussian(std::shared_ptr<const mesh::TriangleMesh> mesh, const Eigen::Vector3d& center,
               double sigma, int quadrature_depth = 2);

  int ambient_dim() const override;
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample(Rng& rng) const override;
  mesh::MeshPoint sample_point(Rng& rng) const override;
  double log_density_point(const mesh::MeshPoint& mp) const override;

  const std::shared_ptr<const mesh::TriangleMesh>& mesh() const { return mesh_; }
  const Eigen::Vector3d& center() const { return center_; }
  double sigma() const { return sigma_; }
  /// Fraction of the (planar) Gaussian mass captured by the mesh.
  double normalizer() const { return z_; }
  const Eigen::VectorXd& face_masses() const { return face_mass_; }

 private:
  std::shared_ptr<const mesh::TriangleMesh> mesh_;
  Eigen::Vector3d center_;
  double sigma_ = 0.0;
  Eigen::VectorXd face_mass_; /* unnormalized integral per face */
  Eigen::VectorXd face_cdf_;
  Eigen::VectorXd face_peak_; /* per-face density maximum, rejection bound */
  double z_ = 0.0;
};

/// Maze navigation task: base density is a Gaussian blob in the middle cell
/// truncated to the maze surface; the target dataset is an equal-weight
/// mixture of the same blobs at the four corner cells.
struct MazeTask {
  std::shared_ptr<const mesh::TriangleMesh> mesh;
  std::shared_ptr<MeshGaussian> base;
  std::vector<std::shared_ptr<MeshGaussian>> corner_blobs;
  MeshDataset target;
  double sigma = 0.0;
};

/// sigma defaults to 0.3 x cell width.  Corner cells carrying no density
/// mass (an unreachable corner) are refused.
MazeTask maze_task(const mesh::Maze& maze, int n_target, std::uint64_t seed,
                   double sigma_factor = 0.3);

}  // namespace rfm::data
