#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>

#include "rfm/mesh/mesh.hpp"

namespace rfm::mesh {

/// Cotangent FEM stiffness matrix (PSD, rows sum to zero) and lumped
/// (one-third triangle area) mass vector.  Cotangent weights are clamped to
/// [-1e6, 1e6].  Boundaries get the natural (Neumann) condition: no rows are
/// modified.
struct Laplacian {
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd mass; /* lumped, positive */
};
Laplacian cotangent_laplacian(const TriangleMesh& mesh);

/// First k generalized eigenpairs S phi = lambda M phi, ascending, mass-
/// orthonormal, sign-fixed so each eigenfunction's first non-negligible
/// vertex value is positive.
struct SpectralBasis {
  int k = 0;
  Eigen::VectorXd eigenvalues;     /* k, ascending */
  Eigen::MatrixXd eigenfunctions;  /* nverts x k */
  Eigen::VectorXd mass;            /* lumped mass used for orthonormality */
  std::uint64_t mesh_hash = 0;
};

/// Shift-invert Lanczos with full reorthogonalization on the symmetrized
/// operator M^{-1/2} S M^{-1/2}.  Residual tolerance is relative to a
/// Gershgorin estimate of the operator norm.  Throws SolverError if the
/// iteration cap (10 * k * sqrt(nverts)) is exhausted.
SpectralBasis compute_spectral_basis(const TriangleMesh& mesh, int k, double tol = 1e-10);

/// Versioned binary cache keyed by the mesh content hash.  Loading a cache
/// whose hash does not match the mesh fails (stale caches are refused).
void save_spectral_basis(const SpectralBasis& basis, const std::string& path);
SpectralBasis load_spectral_basis(const std::string& path, const TriangleMesh& mesh);
SpectralBasis load_spectral_basis_unchecked(const std::string& path);

/// Spectral weight profiles from the premetric family:
///   Diffusion:  w(lambda) = exp(-2 * tau * lambda)
///   Biharmonic: w(lambda) = lambda^{-2}, modes with lambda < 1e-6 skipped
struct SpectralWeights {
  enum class Kind { Diffusion, Biharmonic } kind = Kind::Biharmonic;
  double tau = 0.25;

  Eigen::VectorXd evaluate(const Eigen::VectorXd& eigenvalues) const;
  std::string name() const;
};

/// Values of all k eigenfunctions at a mesh point (barycentric-linear).
Eigen::VectorXd eigenfunctions_at(const TriangleMesh& mesh, const SpectralBasis& basis,
                                  const MeshPoint& p);

/// Per-face constant gradients of eigenfunction i (3-vector in the face plane).
Eigen::Vector3d eigenfunction_gradient(const TriangleMesh& mesh, const SpectralBasis& basis,
                                       int face, int i);

/// d_w(x, y)^2 = sum_i w(lambda_i) (phi_i(x) - phi_i(y))^2 and its square root.
double spectral_distance(const TriangleMesh& mesh, const SpectralBasis& basis,
                         const SpectralWeights& weights, const MeshPoint& x, const MeshPoint& y);

/// Gradient of d_w(., y) at x; lies in the plane of x's face.  Throws
/// NumericError when d_w(x,y) < 1e-12 (direction undefined).
Eigen::Vector3d spectral_distance_gradient(const TriangleMesh& mesh, const SpectralBasis& basis,
                                           const SpectralWeights& weights, const MeshPoint& x,
                                           const MeshPoint& y);

}  // namespace rfm::mesh
