#pragma once

#include <Eigen/Core>

#include "rfm/geometry/manifold.hpp"
#include "rfm/mesh/mesh.hpp"
#include "rfm/nn/vectorfield.hpp"
#include "rfm/prob/distributions.hpp"

namespace rfm::prob {

/// Riemannian divergence of the parameterized field at (t, x): the coordinate
/// divergence of the chart plus the volume-gradient correction of the metric.
/// For the sphere this reduces to the trace of the ambient Jacobian of the
/// (radially constant) tangent extension; the torus chart is flat; the ball
/// adds the conformal-factor gradient; SPD works in upper-triangle
/// coordinates with the affine-invariant volume term.
double riemannian_divergence(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                             const ManifoldDescriptor& m, double t, const Point& x);

/// Mesh divergence: the in-face trace of the projected Jacobian (faces are
/// flat, so no volume correction appears).
double mesh_divergence(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                       const mesh::TriangleMesh& mesh, double t, const mesh::MeshPoint& mp);

/// Deviation of a raw ambient vector from the manifold's defining constraints
/// (0 on the manifold): |1 - ||x||| for spheres, overflow past the unit ball,
/// asymmetry plus negative-eigenvalue slack for SPD, 0 for the periodic
/// torus chart.
double membership_residual(const ManifoldDescriptor& m, const Eigen::VectorXd& raw);

/// Integrator choice for the likelihood ODE.
struct SolverSpec {
  enum class Method { FixedEuler, Adaptive };
  Method method = Method::Adaptive;
  int euler_steps = 1000;    /* FixedEuler only */
  double rtol = 1e-7;        /* Adaptive only */
  double atol = 1e-7;

  static SolverSpec euler(int steps);
  static SolverSpec adaptive(double rtol, double atol);
  /// Defaults used by evaluation: 1e-7 tolerances on the sphere and ball,
  /// 1e-5 on the torus and SPD.
  static SolverSpec for_manifold(const ManifoldDescriptor& m);
};

/// One exact-likelihood evaluation.
struct NllRecord {
  double nll = 0.0;        /* -log p1(x1), nats */
  double log_base = 0.0;   /* log p0 at the pulled-back point */
  double correction = 0.0; /* integral of the divergence along the flow */
  int evaluations = 0;     /* joint-field evaluations spent */
  Eigen::VectorXd x0;      /* backward-flow endpoint at t = 0 (on-manifold) */
  double residual = 0.0;   /* membership residual of the raw endpoint */
};

/// Exact change-of-variables likelihood: integrates the joint system
///   dx/dt = v_theta(t, x),   df/dt = -div_g v_theta(t, x)
/// backward from (x1, 0) at t = 1 to t = 0, giving
///   -log p1(x1) = -log p0(x(0)) + f(0).
/// Adaptive solves run free in the ambient space (the field evaluates at the
/// projected point) and require the endpoint residual to stay below 1e-6;
/// fixed Euler reprojects after every step.
NllRecord nll(const nn::MLPVectorField& net, const nn::ParameterSet& p,
              const ManifoldDescriptor& m, const BaseDistribution& base,
              const Eigen::VectorXd& x1, const SolverSpec& spec);

/// Mesh variant: fixed-count backward Euler in the ambient space with
/// closest-point reprojection after each step (the flow crosses faces).
NllRecord mesh_nll(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                   const mesh::TriangleMesh& mesh, const MeshBaseDistribution& base,
                   const mesh::MeshPoint& x1, int steps = 1000);

/// Generation flow: `steps` projected Euler steps of dx/dt = v from t = 0 at
/// x0 (a base sample) to t = 1.
Point sample_flow(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                  const ManifoldDescriptor& m, const Eigen::VectorXd& x0, int steps);

mesh::MeshPoint mesh_sample_flow(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                                 const mesh::TriangleMesh& mesh, const mesh::MeshPoint& x0,
                                 int steps);

/// Adaptive forward push of x0 to t = 1 without projection, for roundtrip
/// checks against the backward solve.
Eigen::VectorXd push_forward(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                             const ManifoldDescriptor& m, const Eigen::VectorXd& x0,
                             const SolverSpec& spec);

}  // namespace rfm::prob
