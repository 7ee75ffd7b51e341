#include "rfm/prob/likelihood.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"
#include "rfm/ode/integrators.hpp"

namespace rfm::prob {

namespace {
constexpr double kMembershipTol = 1e-6; /* allowed endpoint drift for free-space solves */
}

/* ---------------------------------------------------------------- */
/* divergence                                                        */
/* ---------------------------------------------------------------- */

double riemannian_divergence(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                             const ManifoldDescriptor& m, double t, const Point& x) {
  Point xp = geo::project_to_manifold(m, x.x);
  Eigen::MatrixXd jac = nn::input_jacobian(net, p, m, t, xp);
  switch (m.kind) {
    case ManifoldKind::Sphere:
    case ManifoldKind::FlatTorus:
      /* embedded tangent extension (sphere) / flat chart (torus):
         the ambient trace is already the intrinsic divergence */
      return jac.trace();
    case ManifoldKind::PoincareBall: {
      /* conformal chart, g = lambda^2 I with lambda = 2/(1-r^2):
         div_g v = div_E v + N <v, grad log lambda>, grad log lambda = 2x/(1-r^2) */
      Eigen::VectorXd v = nn::parameterized_field(net, p, m, t, xp).v;
      double r2 = xp.x.squaredNorm();
      return jac.trace() + 2.0 * m.n * xp.x.dot(v) / (1.0 - r2);
    }
    case ManifoldKind::SPD: {
      /* upper-triangle coordinates: coordinate divergence sums the symmetric
         directional derivatives; the affine-invariant Gram determinant is
         2^{n(n-1)/2} det(X)^{-(n+1)}, so the volume term contributes
         -(n+1)/2 tr(X^{-1} V) */
      int n = m.n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += jac(i * n + i, i * n + i);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          acc += jac(i * n + j, i * n + j) + jac(i * n + j, j * n + i);
      Eigen::MatrixXd xm = geo::unflatten(xp.x, n);
      Eigen::MatrixXd vm = geo::unflatten(nn::parameterized_field(net, p, m, t, xp).v, n);
      acc -= 0.5 * (n + 1) * xm.llt().solve(vm).trace();
      return acc;
    }
  }
  return 0.0;
}

double mesh_divergence(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                       const mesh::TriangleMesh& mesh, double t, const mesh::MeshPoint& mp) {
  /* faces are flat, so the projected trace is the full story */
  return nn::mesh_input_jacobian(net, p, mesh, t, mp).trace();
}

double membership_residual(const ManifoldDescriptor& m, const Eigen::VectorXd& raw) {
  RFM_REQUIRE(raw.size() == m.ambient_dim(), ContractViolation,
              "residual query has wrong ambient dimension");
  switch (m.kind) {
    case ManifoldKind::Sphere:
      return std::abs(raw.norm() - 1.0);
    case ManifoldKind::FlatTorus:
      return 0.0; /* every angle tuple wraps onto the torus */
    case ManifoldKind::PoincareBall:
      return std::max(0.0, raw.norm() - 1.0);
    case ManifoldKind::SPD: {
      Eigen::MatrixXd xm = geo::unflatten(raw, m.n);
      double asym = (xm - xm.transpose()).cwiseAbs().maxCoeff();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          (0.5 * (xm + xm.transpose())).eval());
      return asym + std::max(0.0, -es.eigenvalues().minCoeff());
    }
  }
  return 0.0;
}

/* ---------------------------------------------------------------- */
/* solver spec                                                       */
/* ---------------------------------------------------------------- */

SolverSpec SolverSpec::euler(int steps) {
  RFM_REQUIRE(steps >= 1, ContractViolation, "Euler solver needs at least one step");
  SolverSpec s;
  s.method = Method::FixedEuler;
  s.euler_steps = steps;
  return s;
}

SolverSpec SolverSpec::adaptive(double rtol, double atol) {
  RFM_REQUIRE(rtol > 0.0 && atol > 0.0, ContractViolation, "tolerances must be positive");
  SolverSpec s;
  s.method = Method::Adaptive;
  s.rtol = rtol;
  s.atol = atol;
  return s;
}

SolverSpec SolverSpec::for_manifold(const ManifoldDescriptor& m) {
  switch (m.kind) {
    case ManifoldKind::Sphere:
    case ManifoldKind::PoincareBall:
      return adaptive(1e-7, 1e-7);
    default:
      return adaptive(1e-5, 1e-5);
  }
}

/* ---------------------------------------------------------------- */
/* likelihood ODE                                                    */
/* ---------------------------------------------------------------- */

NllRecord nll(const nn::MLPVectorField& net, const nn::ParameterSet& p,
              const ManifoldDescriptor& m, const BaseDistribution& base,
              const Eigen::VectorXd& x1, const SolverSpec& spec) {
  const int ad = m.ambient_dim();
  RFM_REQUIRE(base.ambient_dim() == ad, ContractViolation,
              "base distribution lives on a different space");
  geo::validate_point({m, x1});

  ode::Field rhs = [&](double t, const Eigen::VectorXd& y) {
    Point xp = geo::project_to_manifold(m, y.head(ad));
    Eigen::VectorXd out(ad + 1);
    out.head(ad) = nn::parameterized_field(net, p, m, t, xp).v;
    out[ad] = -riemannian_divergence(net, p, m, t, xp);
    return out;
  };

  Eigen::VectorXd y1(ad + 1);
  y1.head(ad) = geo::project_to_manifold(m, x1).x;
  y1[ad] = 0.0;

  NllRecord rec;
  Eigen::VectorXd y0;
  if (spec.method == SolverSpec::Method::Adaptive) {
    ode::DopriOptions opts;
    opts.rtol = spec.rtol;
    opts.atol = spec.atol;
    ode::DopriResult res = ode::integrate_dopri5(rhs, 1.0, 0.0, y1, opts);
    y0 = res.y;
    rec.evaluations = res.evaluations;
  } else {
    ode::PostStep reproject = [&](double, Eigen::VectorXd& y) {
      y.head(ad) = geo::project_to_manifold(m, y.head(ad)).x;
    };
    y0 = ode::integrate_euler(rhs, 1.0, 0.0, y1, spec.euler_steps, reproject);
    rec.evaluations = spec.euler_steps;
  }

  rec.residual = membership_residual(m, y0.head(ad));
  RFM_REQUIRE(rec.residual <= kMembershipTol, SolverError,
              "backward likelihood flow drifted off the manifold (residual " +
                  format_double(rec.residual) + ")");
  rec.x0 = geo::project_to_manifold(m, y0.head(ad)).x;
  rec.correction = y0[ad]; /* f(0) = integral of the divergence over [0,1] */
  rec.log_base = base.log_density(rec.x0);
  rec.nll = rec.correction - rec.log_base;
  return rec;
}

NllRecord mesh_nll(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                   const mesh::TriangleMesh& mesh, const MeshBaseDistribution& base,
                   const mesh::MeshPoint& x1, int steps) {
  RFM_REQUIRE(steps >= 1, ContractViolation, "mesh likelihood needs at least one step");
  RFM_REQUIRE(x1.face >= 0 && x1.face < mesh.num_faces(), ContractViolation,
              "mesh point has an out-of-range face");
  const double h = 1.0 / steps;
  mesh::MeshPoint mp = x1;
  double f = 0.0;
  for (int k = steps; k >= 1; --k) {
    double t = k * h;
    Eigen::VectorXd v = nn::mesh_field(net, p, mesh, t, mp);
    f += h * mesh_divergence(net, p, mesh, t, mp);
    Eigen::VectorXd moved = mesh.embed_ambient(mp) - h * v;
    mp = mesh::closest_point_local(mesh, mesh.lift(moved), mp.face);
  }
  NllRecord rec;
  rec.evaluations = steps;
  rec.correction = f;
  rec.x0 = mesh.embed_ambient(mp);
  rec.residual = 0.0; /* reprojected after every step */
  rec.log_base = base.log_density_point(mp);
  rec.nll = rec.correction - rec.log_base;
  return rec;
}

/* ---------------------------------------------------------------- */
/* sampling flows                                                    */
/* ---------------------------------------------------------------- */

Point sample_flow(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                  const ManifoldDescriptor& m, const Eigen::VectorXd& x0, int steps) {
  RFM_REQUIRE(steps >= 1, ContractViolation, "sampling flow needs at least one step");
  Point x = geo::project_to_manifold(m, x0);
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    double t = k * h;
    Eigen::VectorXd v = nn::parameterized_field(net, p, m, t, x).v;
    x = geo::project_to_manifold(m, x.x + h * v);
  }
  return x;
}

mesh::MeshPoint mesh_sample_flow(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                                 const mesh::TriangleMesh& mesh, const mesh::MeshPoint& x0,
                                 int steps) {
  RFM_REQUIRE(steps >= 1, ContractViolation, "sampling flow needs at least one step");
  mesh::MeshPoint mp = x0;
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    double t = k * h;
    Eigen::VectorXd v = nn::mesh_field(net, p, mesh, t, mp);
    Eigen::VectorXd moved = mesh.embed_ambient(mp) + h * v;
    mp = mesh::closest_point_local(mesh, mesh.lift(moved), mp.face);
  }
  return mp;
}

Eigen::VectorXd push_forward(const nn::MLPVectorField& net, const nn::ParameterSet& p,
                             const ManifoldDescriptor& m, const Eigen::VectorXd& x0,
                             const SolverSpec& spec) {
  const int ad = m.ambient_dim();
  RFM_REQUIRE(x0.size() == ad, ContractViolation, "start point has wrong ambient dimension");
  ode::Field rhs = [&](double t, const Eigen::VectorXd& y) {
    Point xp = geo::project_to_manifold(m, y);
    return nn::parameterized_field(net, p, m, t, xp).v;
  };
  if (spec.method == SolverSpec::Method::Adaptive) {
    ode::DopriOptions opts;
    opts.rtol = spec.rtol;
    opts.atol = spec.atol;
    return ode::integrate_dopri5(rhs, 0.0, 1.0, x0, opts).y;
  }
  ode::PostStep reproject = [&](double, Eigen::VectorXd& y) {
    y = geo::project_to_manifold(m, y).x;
  };
  return ode::integrate_euler(rhs, 0.0, 1.0, x0, spec.euler_steps, reproject);
}

}  // namespace rfm::prob
