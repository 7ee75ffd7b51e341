#pragma once

#include <Eigen/Core>
#include <memory>

#include "rfm/core/rng.hpp"
#include "rfm/geometry/manifold.hpp"
#include "rfm/mesh/mesh.hpp"

namespace rfm::prob {

/// A sampleable distribution with a log density taken with respect to the
/// Riemannian volume of its manifold.
class BaseDistribution {
 public:
  virtual ~BaseDistribution() = default;
  virtual int ambient_dim() const = 0;
  virtual double log_density(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd sample(Rng& rng) const = 0;
};

/// Uniform on the unit N-sphere embedded in R^{N+1}.
class UniformSphere final : public BaseDistribution {
 public:
  explicit UniformSphere(int n);
  int ambient_dim() const override { return n_ + 1; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample(Rng& rng) const override;

 private:
  int n_;
  double log_area_;
};

/// Uniform on [0, 2*pi)^N.
class UniformTorus final : public BaseDistribution {
 public:
  explicit UniformTorus(int n) : n_(n) {}
  int ambient_dim() const override { return n_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample(Rng& rng) const override;

 private:
  int n_;
};

/// Gaussian in the tangent space at a center, pushed through the exponential
/// map.  The flat torus uses an explicit winding-image series (|w| <= 3 per
/// dimension); curved manifolds use normal coordinates with the closed-form
/// volume distortion of exp (sphere: (sin r / r)^{N-1}; hyperbolic ball:
/// (sinh r / r)^{N-1}; SPD: product of sinh(gap/2)/(gap/2) over eigenvalue
/// gaps of the normalized tangent).  Densities are w.r.t. Riemannian volume.
class WrappedGaussian final : public BaseDistribution {
 public:
  WrappedGaussian(Point center, double sigma);
  int ambient_dim() const override { return center_.manifold.ambient_dim(); }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample(Rng& rng) const override;

  const Point& center() const { return center_; }
  double sigma() const { return sigma_; }

 private:
  Point center_;
  double sigma_;
  Eigen::MatrixXd basis_; /* g-orthonormal tangent basis at the center */
};

/// Extends the sampling interface with located mesh points.
class MeshBaseDistribution : public BaseDistribution {
 public:
  virtual mesh::MeshPoint sample_point(Rng& rng) const = 0;
  virtual double log_density_point(const mesh::MeshPoint& mp) const = 0;
};

/// Area-weighted uniform distribution over a triangle mesh.
class UniformMesh final : public MeshBaseDistribution {
 public:
  explicit UniformMesh(std::shared_ptr<const mesh::TriangleMesh> mesh);
  int ambient_dim() const override;
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample(Rng& rng) const override;
  mesh::MeshPoint sample_point(Rng& rng) const override;
  double log_density_point(const mesh::MeshPoint& mp) const override;

  const mesh::TriangleMesh& mesh() const { return *mesh_; }

 private:
  std::shared_ptr<const mesh::TriangleMesh> mesh_;
  Eigen::VectorXd face_cdf_;
  double log_area_;
};

/// Uniform barycentric sample on face `f` (shared by mesh distributions).
mesh::MeshPoint uniform_face_point(const mesh::TriangleMesh& mesh, int f, Rng& rng);

}  // namespace rfm::prob
