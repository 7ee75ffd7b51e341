#pragma once

#include <Eigen/Core>
#include <string>

namespace rfm {

enum class ManifoldKind { Sphere, FlatTorus, PoincareBall, SPD };

/// Descriptor of a simple manifold with closed-form geodesics.
///  - Sphere:       unit N-sphere embedded in R^{N+1}
///  - FlatTorus:    N angles, each in [0, 2*pi)
///  - PoincareBall: open unit ball in R^N with the conformal hyperbolic metric
///  - SPD:          NxN symmetric positive definite matrices (affine-invariant
///                  metric), points flattened row-major to R^{N^2}
struct ManifoldDescriptor {
  ManifoldKind kind;
  int n; /* dimension parameter N as above */

  int ambient_dim() const {
    switch (kind) {
      case ManifoldKind::Sphere: return n + 1;
      case ManifoldKind::FlatTorus: return n;
      case ManifoldKind::PoincareBall: return n;
      case ManifoldKind::SPD: return n * n;
    }
    return 0;
  }

  int intrinsic_dim() const {
    switch (kind) {
      case ManifoldKind::Sphere: return n;
      case ManifoldKind::FlatTorus: return n;
      case ManifoldKind::PoincareBall: return n;
      case ManifoldKind::SPD: return n * (n + 1) / 2;
    }
    return 0;
  }

  std::string name() const;
  bool operator==(const ManifoldDescriptor& o) const = default;
};

ManifoldDescriptor parse_manifold(const std::string& text); /* e.g. "sphere:2" */

/// Ambient-coordinate point tagged with its manifold.
struct Point {
  ManifoldDescriptor manifold;
  Eigen::VectorXd x;
};

/// Tangent vector at a base point, in ambient coordinates.
struct TangentVector {
  Point base;
  Eigen::VectorXd v;
};

namespace geo {

inline constexpr double kOnManifoldTol = 1e-9;
inline constexpr double kBallMaxRadius = 1.0 - 1e-7;
inline constexpr double kSpdMinEig = 1e-8;
inline constexpr double kSphereCutLocusTol = 1e-12;

/// Throws ContractViolation if x does not satisfy its manifold's membership
/// residual (tolerance kOnManifoldTol; SPD additionally requires eigenvalues
/// >= kSpdMinEig).
void validate_point(const Point& p);

/// Throws ContractViolation if v is not tangent at its base point.
void validate_tangent(const TangentVector& t);

Point exp_map(const Point& x, const TangentVector& u);
TangentVector log_map(const Point& x, const Point& y);

/// Riemannian inner product of two tangent vectors at x.
double inner(const Point& x, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double g_norm(const Point& x, const Eigen::VectorXd& u);

/// Geodesic distance d_g(x, y) = ||log_x(y)||_g.
double geodesic_distance(const Point& x, const Point& y);

/// exp_{x1}((1-t) * log_{x1}(x0)); equals x0 at t=0 and x1 at t=1.
Point geodesic_interpolate(const Point& x0, const Point& x1, double t);

/// Map an arbitrary ambient vector to a valid point (sphere: normalize;
/// torus: wrap; ball: radial clamp to kBallMaxRadius; SPD: symmetrize and
/// clamp eigenvalues to kSpdMinEig).
Point project_to_manifold(const ManifoldDescriptor& m, const Eigen::VectorXd& raw);

/// Orthogonal (w.r.t. the metric) projection of an ambient vector onto the
/// tangent space at x.
TangentVector project_to_tangent(const Point& x, const Eigen::VectorXd& raw);

/// log-determinant of the metric tensor as tabulated for the reference
/// experiments (sphere/torus: 0; ball: N*log(2/(1-|x|^2));
/// SPD: N(N-1)/2*log2 + (N+1)*log det X).
double metric_log_det(const Point& x);

/// Ambient x ambient matrix G(x) such that <u,v>_g = u^T G v (SPD: over the
/// full N^2 flattening).
Eigen::MatrixXd metric_matrix(const Point& x);

/// Columns form a g-orthonormal basis of the tangent space at x
/// (ambient_dim x intrinsic_dim).
Eigen::MatrixXd tangent_basis(const Point& x);

/// Mobius addition on the Poincare ball.
Eigen::VectorXd mobius_add(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Wrap an angle vector componentwise into [0, 2*pi).
Eigen::VectorXd wrap_angles(const Eigen::VectorXd& a);
/// Wrap componentwise into [-pi, pi).
Eigen::VectorXd wrap_symmetric(const Eigen::VectorXd& a);

/// --- symmetric-matrix helpers shared by SPD ops and the vector-field code ---
Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int n);
Eigen::VectorXd flatten(const Eigen::MatrixXd& m);
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& x);
Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& x);
Eigen::MatrixXd sym_exp(const Eigen::MatrixXd& s);  /* matrix exp of symmetric */
Eigen::MatrixXd spd_log(const Eigen::MatrixXd& x);  /* matrix log, eigenvalues clamped check */

}  // namespace geo
}  // namespace rfm
