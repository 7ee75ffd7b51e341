#pragma once

#include <Eigen/Core>
#include <memory>

#include "rfm/core/rng.hpp"
#include "rfm/geometry/manifold.hpp"
#include "rfm/mesh/mesh.hpp"
#include "rfm/mesh/spectral.hpp"

namespace rfm::flow {

/// Conditional paths run on [0, 1 - kTimeCutoff]; the field magnitude stays
/// bounded there because the premetric shrinks like kappa(t).
inline constexpr double kTimeCutoff = 1e-5;

/// Point as seen by a premetric: ambient coordinates, plus face/barycentric
/// bookkeeping when the premetric lives on a mesh (face == -1 otherwise).
struct PremetricPoint {
  Eigen::VectorXd x;
  mesh::MeshPoint mesh_point{};
};

/// d(x, y) with a gradient: non-negative, zero exactly on the diagonal, with
/// non-vanishing gradient off the diagonal.  Distances without the triangle
/// inequality are allowed (spectral truncations are the main client).
class Premetric {
 public:
  enum class Backing { Geodesic, Spectral, Euclidean };
  virtual ~Premetric() = default;

  virtual Backing backing() const = 0;
  virtual int ambient_dim() const = 0;
  virtual double value(const PremetricPoint& x, const PremetricPoint& y) const = 0;
  /// Gradient in x of value(x, y); ambient vector, tangent at x.
  virtual Eigen::VectorXd gradient(const PremetricPoint& x, const PremetricPoint& y) const = 0;
  /// Riemannian inner product at x.
  virtual double metric_inner(const PremetricPoint& x, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& v) const = 0;
  double metric_norm2(const PremetricPoint& x, const Eigen::VectorXd& u) const {
    return metric_inner(x, u, u);
  }
  /// Map raw ambient coordinates to a valid point; `prev` warm-starts mesh
  /// closest-point searches with the face the trajectory came from.
  virtual PremetricPoint locate(const Eigen::VectorXd& raw,
                                const PremetricPoint* prev = nullptr) const = 0;
  /// How far locate() actually moved `raw`, ignoring coordinate identifications
  /// (a periodic wrap relocates the representative without moving the point).
  virtual double displacement(const Eigen::VectorXd& raw, const PremetricPoint& located) const {
    return (located.x - raw).norm();
  }
  virtual PremetricPoint random_point(Rng& rng) const = 0;
};

class GeodesicPremetric final : public Premetric {
 public:
  explicit GeodesicPremetric(const ManifoldDescriptor& m) : m_(m) {}
  Backing backing() const override { return Backing::Geodesic; }
  int ambient_dim() const override { return m_.ambient_dim(); }
  double value(const PremetricPoint& x, const PremetricPoint& y) const override;
  Eigen::VectorXd gradient(const PremetricPoint& x, const PremetricPoint& y) const override;
  double metric_inner(const PremetricPoint& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& v) const override;
  PremetricPoint locate(const Eigen::VectorXd& raw,
                        const PremetricPoint* prev = nullptr) const override;
  double displacement(const Eigen::VectorXd& raw, const PremetricPoint& located) const override;
  PremetricPoint random_point(Rng& rng) const override;

  const ManifoldDescriptor& manifold() const { return m_; }
  Point to_point(const PremetricPoint& p) const { return Point{m_, p.x}; }

 private:
  ManifoldDescriptor m_;
};

class SpectralPremetric final : public Premetric {
 public:
  SpectralPremetric(std::shared_ptr<const mesh::TriangleMesh> mesh, mesh::SpectralBasis basis,
                    mesh::SpectralWeights weights);
  Backing backing() const override { return Backing::Spectral; }
  int ambient_dim() const override { return mesh_->ambient_dim; }
  double value(const PremetricPoint& x, const PremetricPoint& y) const override;
  Eigen::VectorXd gradient(const PremetricPoint& x, const PremetricPoint& y) const override;
  double metric_inner(const PremetricPoint& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& v) const override;
  PremetricPoint locate(const Eigen::VectorXd& raw,
                        const PremetricPoint* prev = nullptr) const override;
  PremetricPoint random_point(Rng& rng) const override;

  const mesh::TriangleMesh& mesh() const { return *mesh_; }
  const mesh::SpectralBasis& basis() const { return basis_; }
  const mesh::SpectralWeights& weights() const { return weights_; }
  PremetricPoint at(const mesh::MeshPoint& mp) const;

 private:
  std::shared_ptr<const mesh::TriangleMesh> mesh_;
  mesh::SpectralBasis basis_;
  mesh::SpectralWeights weights_;
  Eigen::VectorXd face_area_cdf_;
};

class EuclideanPremetric final : public Premetric {
 public:
  explicit EuclideanPremetric(int dim) : dim_(dim) {}
  Backing backing() const override { return Backing::Euclidean; }
  int ambient_dim() const override { return dim_; }
  double value(const PremetricPoint& x, const PremetricPoint& y) const override;
  Eigen::VectorXd gradient(const PremetricPoint& x, const PremetricPoint& y) const override;
  double metric_inner(const PremetricPoint& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& v) const override;
  PremetricPoint locate(const Eigen::VectorXd& raw,
                        const PremetricPoint* prev = nullptr) const override;
  PremetricPoint random_point(Rng& rng) const override;

 private:
  int dim_;
};

/// kappa(t) = 1 - t: kappa(0) = 1, kappa(1) = 0, strictly decreasing.
struct Scheduler {
  enum class Kind { Linear } kind = Kind::Linear;
  double kappa(double t) const { return 1.0 - t; }
  double dlog_kappa(double t) const { return -1.0 / (1.0 - t); }
};

/// The conditional field u_t(x | x1) = dlogkappa/dt * d(x,x1) * grad d /
/// ||grad d||_g^2 -- the minimal-g-norm field transporting the premetric's
/// value to zero at the scheduled rate.  Throws NumericError when x == x1
/// (field undefined) or the gradient degenerates while d > 0.
Eigen::VectorXd conditional_vector_field(const Premetric& pm, const Scheduler& sched,
                                         const PremetricPoint& x, const PremetricPoint& x1,
                                         double t);

struct ClosedFormFlow {
  Point x_t;
  TangentVector u_t;
};

/// Geodesic conditional flow x_t = exp_{x1}(kappa(t) log_{x1}(x0)) with the
/// exact velocity log_{x_t}(x1) / (1 - t); defined for t in [0, 1-kTimeCutoff].
ClosedFormFlow conditional_flow_closed_form(const Point& x0, const Point& x1, double t,
                                            const Scheduler& sched = {});

struct SimulatedFlow {
  PremetricPoint x_t;
  Eigen::VectorXd u_t;          /* field at x_t */
  double max_projection = 0.0;  /* largest per-step projection correction */
};

/// Euler-with-projection integration of the conditional field over [0, t].
/// Each step is projected back to the manifold via locate(); a projection
/// correction exceeding the step length aborts (wall crossing / divergence),
/// and a degenerate gradient mid-path raises a flow-stall SolverError naming
/// the failure time.
SimulatedFlow conditional_flow_simulated(const Premetric& pm, const Scheduler& sched,
                                         const PremetricPoint& x0, const PremetricPoint& x1,
                                         double t, int steps);

/// Property audit over seeded random pairs: non-negativity, positivity
/// (d = 0 iff x = y), gradient non-degeneracy, and -- for premetrics backed
/// by a mesh with boundary -- the boundary-normal property at boundary-edge
/// midpoints.  Failures are recorded, never thrown.
struct PremetricAuditReport {
  int pairs = 0;
  int excluded = 0; /* cut-locus-adjacent pairs skipped (counted, not judged) */
  double max_self_value = 0.0;
  double min_value = 0.0;         /* over distinct pairs */
  double most_negative = 0.0;     /* min over all sampled values */
  double min_gradient_norm = 0.0; /* g-norm, over distinct pairs */
  Eigen::VectorXd argmin_gradient_x, argmin_gradient_y;
  int boundary_midpoints = 0;
  double min_boundary_inward = 0.0; /* min inward-normal component of grad d */
  double max_boundary_inward = 0.0;
  bool pass_nonnegative = false;
  bool pass_positive = false;
  bool pass_nondegenerate = false;
  bool pass_boundary = false; /* vacuously true without a boundary */

  bool all_pass() const {
    return pass_nonnegative && pass_positive && pass_nondegenerate && pass_boundary;
  }
};

PremetricAuditReport premetric_audit(const Premetric& pm, int sample_pairs, std::uint64_t seed);

}  // namespace rfm::flow
