#include "rfm/flow/premetric.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "rfm/core/error.hpp"

namespace rfm::flow {

/* ---------------------------------------------------------------- geodesic */

double GeodesicPremetric::value(const PremetricPoint& x, const PremetricPoint& y) const {
  return geo::geodesic_distance(Point{m_, x.x}, Point{m_, y.x});
}

Eigen::VectorXd GeodesicPremetric::gradient(const PremetricPoint& x,
                                            const PremetricPoint& y) const {
  Point px{m_, x.x}, py{m_, y.x};
  TangentVector lg = geo::log_map(px, py);
  double d = geo::g_norm(px, lg.v);
  RFM_REQUIRE(d > 1e-14, NumericError, "geodesic premetric gradient undefined at x == y");
  return -lg.v / d;
}

double GeodesicPremetric::metric_inner(const PremetricPoint& x, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& v) const {
  return geo::inner(Point{m_, x.x}, u, v);
}

PremetricPoint GeodesicPremetric::locate(const Eigen::VectorXd& raw,
                                         const PremetricPoint* /*prev*/) const {
  return PremetricPoint{geo::project_to_manifold(m_, raw).x, {}};
}

double GeodesicPremetric::displacement(const Eigen::VectorXd& raw,
                                       const PremetricPoint& located) const {
  if (m_.kind == ManifoldKind::FlatTorus) {
    /* the wrap moves the representative by multiples of 2*pi, not the point */
    const double two_pi = 2.0 * std::acos(-1.0);
    Eigen::VectorXd delta = located.x - raw;
    for (int i = 0; i < delta.size(); ++i) {
      delta[i] = std::remainder(delta[i], two_pi);
    }
    return delta.norm();
  }
  return (located.x - raw).norm();
}

PremetricPoint GeodesicPremetric::random_point(Rng& rng) const {
  switch (m_.kind) {
    case ManifoldKind::Sphere: {
      Eigen::VectorXd v = rng.normal_vector(m_.ambient_dim());
      return {v / v.norm(), {}};
    }
    case ManifoldKind::FlatTorus: {
      const double two_pi = 2.0 * std::acos(-1.0);
      return {rng.uniform_vector(m_.n, 0.0, two_pi), {}};
    }
    case ManifoldKind::PoincareBall: {
      Eigen::VectorXd v = rng.normal_vector(m_.n);
      double r = 0.95 * std::pow(rng.uniform(), 1.0 / m_.n);
      return {r * v / v.norm(), {}};
    }
    case ManifoldKind::SPD: {
      Eigen::MatrixXd a(m_.n, m_.n);
      for (int i = 0; i < m_.n; ++i)
        for (int j = 0; j < m_.n; ++j) a(i, j) = 0.5 * rng.normal();
      Eigen::MatrixXd s = 0.5 * (a + a.transpose());
      return {geo::flatten(geo::sym_exp(s)), {}};
    }
  }
  throw Error(ErrorCode::Numeric, "unknown manifold kind");
}

/* ---------------------------------------------------------------- spectral */

SpectralPremetric::SpectralPremetric(std::shared_ptr<const mesh::TriangleMesh> mesh,
                                     mesh::SpectralBasis basis, mesh::SpectralWeights weights)
    : mesh_(std::move(mesh)), basis_(std::move(basis)), weights_(weights) {
  RFM_REQUIRE(mesh_ != nullptr, ContractViolation, "spectral premetric needs a mesh");
  RFM_REQUIRE(basis_.mesh_hash == mesh_->content_hash, CheckpointError,
              "spectral basis does not belong to this mesh (stale cache?)");
  face_area_cdf_.resize(mesh_->num_faces());
  double acc = 0.0;
  for (int f = 0; f < mesh_->num_faces(); ++f) {
    acc += mesh_->face_areas(f);
    face_area_cdf_(f) = acc;
  }
  face_area_cdf_ /= acc;
}

PremetricPoint SpectralPremetric::at(const mesh::MeshPoint& mp) const {
  return PremetricPoint{mesh_->embed_ambient(mp), mp};
}

double SpectralPremetric::value(const PremetricPoint& x, const PremetricPoint& y) const {
  return mesh::spectral_distance(*mesh_, basis_, weights_, x.mesh_point, y.mesh_point);
}

Eigen::VectorXd SpectralPremetric::gradient(const PremetricPoint& x,
                                            const PremetricPoint& y) const {
  Eigen::Vector3d g =
      mesh::spectral_distance_gradient(*mesh_, basis_, weights_, x.mesh_point, y.mesh_point);
  return g.head(mesh_->ambient_dim);
}

double SpectralPremetric::metric_inner(const PremetricPoint& /*x*/, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& v) const {
  return u.dot(v); /* embedded mesh metric */
}

PremetricPoint SpectralPremetric::locate(const Eigen::VectorXd& raw,
                                         const PremetricPoint* prev) const {
  Eigen::Vector3d q = mesh_->lift(raw);
  mesh::MeshPoint mp = (prev != nullptr && prev->mesh_point.face >= 0)
                           ? mesh::closest_point_local(*mesh_, q, prev->mesh_point.face)
                           : mesh::closest_point(*mesh_, q);
  return at(mp);
}

PremetricPoint SpectralPremetric::random_point(Rng& rng) const {
  double u = rng.uniform();
  const double* begin = face_area_cdf_.data();
  const double* end = begin + face_area_cdf_.size();
  int f = static_cast<int>(std::lower_bound(begin, end, u) - begin);
  f = std::min(f, mesh_->num_faces() - 1);
  double a = rng.uniform(), b = rng.uniform();
  if (a + b > 1.0) {
    a = 1.0 - a;
    b = 1.0 - b;
  }
  return at(mesh::MeshPoint{f, {1.0 - a - b, a, b}});
}

/* --------------------------------------------------------------- euclidean */

double EuclideanPremetric::value(const PremetricPoint& x, const PremetricPoint& y) const {
  return (x.x - y.x).norm();
}

Eigen::VectorXd EuclideanPremetric::gradient(const PremetricPoint& x,
                                             const PremetricPoint& y) const {
  double d = (x.x - y.x).norm();
  RFM_REQUIRE(d > 1e-14, NumericError, "euclidean premetric gradient undefined at x == y");
  return (x.x - y.x) / d;
}

double EuclideanPremetric::metric_inner(const PremetricPoint& /*x*/, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& v) const {
  return u.dot(v);
}

PremetricPoint EuclideanPremetric::locate(const Eigen::VectorXd& raw,
                                          const PremetricPoint* /*prev*/) const {
  return PremetricPoint{raw, {}};
}

PremetricPoint EuclideanPremetric::random_point(Rng& rng) const {
  return PremetricPoint{rng.normal_vector(dim_), {}};
}

/* ------------------------------------------------------------------ fields */

Eigen::VectorXd conditional_vector_field(const Premetric& pm, const Scheduler& sched,
                                         const PremetricPoint& x, const PremetricPoint& x1,
                                         double t) {
  RFM_REQUIRE(t >= 0.0 && t <= 1.0 - kTimeCutoff + 1e-15, ContractViolation,
              "conditional field time outside [0, 1 - cutoff]");
  double d = pm.value(x, x1);
  RFM_REQUIRE(d > 1e-12, NumericError, "conditional field undefined at x == x1");
  Eigen::VectorXd grad = pm.gradient(x, x1);
  double n2 = pm.metric_norm2(x, grad);
  RFM_REQUIRE(n2 > 1e-20, NumericError,
              "premetric gradient degenerate away from the diagonal (non-degeneracy violated)");
  return (sched.dlog_kappa(t) * d / n2) * grad;
}

ClosedFormFlow conditional_flow_closed_form(const Point& x0, const Point& x1, double t,
                                            const Scheduler& sched) {
  RFM_REQUIRE(t >= 0.0 && t <= 1.0 - kTimeCutoff + 1e-15, ContractViolation,
              "conditional flow time outside [0, 1 - cutoff]");
  TangentVector back = geo::log_map(x1, x0);
  Point x_t = geo::exp_map(x1, TangentVector{x1, sched.kappa(t) * back.v});
  /* exact velocity of exp_{x1}(kappa log_{x1}(x0)): the geodesic toward x1
     traversed at rate -kappa'; equals Eq.-12's field for the geodesic
     premetric (cross-checked in the test suite) */
  Eigen::VectorXd u = -sched.dlog_kappa(t) * geo::log_map(x_t, x1).v;
  return ClosedFormFlow{x_t, TangentVector{x_t, u}};
}

SimulatedFlow conditional_flow_simulated(const Premetric& pm, const Scheduler& sched,
                                         const PremetricPoint& x0, const PremetricPoint& x1,
                                         double t, int steps) {
  RFM_REQUIRE(steps >= 1, ContractViolation, "conditional flow needs at least one step");
  RFM_REQUIRE(t >= 0.0 && t <= 1.0 - kTimeCutoff + 1e-15, ContractViolation,
              "conditional flow time outside [0, 1 - cutoff]");
  SimulatedFlow out;
  out.x_t = x0;
  if (t == 0.0) {
    out.u_t = conditional_vector_field(pm, sched, out.x_t, x1, 0.0);
    return out;
  }
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    double s = i * h;
    Eigen::VectorXd u;
    try {
      u = conditional_vector_field(pm, sched, out.x_t, x1, s);
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "conditional flow stalled at t = " << s << " (" << e.what() << "); x = [";
      for (int j = 0; j < out.x_t.x.size(); ++j)
        msg << (j ? ", " : "") << out.x_t.x(j);
      msg << "]";
      throw SolverError(msg.str());
    }
    Eigen::VectorXd raw = out.x_t.x + h * u;
    PremetricPoint next = pm.locate(raw, &out.x_t);
    double step_len = h * std::sqrt(u.squaredNorm());
    double correction = pm.displacement(raw, next);
    RFM_REQUIRE(correction <= step_len + 1e-12 * (1.0 + step_len), SolverError,
                "projection correction exceeds the Euler step (leaving the manifold)");
    out.max_projection = std::max(out.max_projection, correction);
    out.x_t = next;
  }
  try {
    out.u_t = conditional_vector_field(pm, sched, out.x_t, x1, t);
  } catch (const NumericError&) {
    /* trajectory numerically reached x1 early; the exact field would be 0 */
    out.u_t = Eigen::VectorXd::Zero(pm.ambient_dim());
  }
  return out;
}

/* ------------------------------------------------------------------- audit */

PremetricAuditReport premetric_audit(const Premetric& pm, int sample_pairs,
                                     std::uint64_t seed) {
  PremetricAuditReport rep;
  rep.min_value = std::numeric_limits<double>::infinity();
  rep.min_gradient_norm = std::numeric_limits<double>::infinity();
  rep.min_boundary_inward = std::numeric_limits<double>::infinity();
  rep.max_boundary_inward = -std::numeric_limits<double>::infinity();
  Rng rng = Rng::derive(seed, 0x41554449ull);

  const bool geodesic = pm.backing() == Premetric::Backing::Geodesic;
  for (int i = 0; i < sample_pairs; ++i) {
    PremetricPoint x = pm.random_point(rng);
    PremetricPoint y = pm.random_point(rng);
    double self = pm.value(x, x);
    rep.max_self_value = std::max(rep.max_self_value, self);
    double v;
    try {
      v = pm.value(x, y);
    } catch (const NumericError&) {
      ++rep.excluded; /* cut-locus pair: premetric undefined there */
      continue;
    }
    rep.most_negative = std::min(rep.most_negative, v);
    rep.min_value = std::min(rep.min_value, v);
    double gn;
    try {
      Eigen::VectorXd g = pm.gradient(x, y);
      gn = std::sqrt(std::max(pm.metric_norm2(x, g), 0.0));
    } catch (const NumericError&) {
      if (geodesic && v > 1e-9) {
        ++rep.excluded; /* cut locus (e.g. antipodal): gradient undefined */
        continue;
      }
      gn = 0.0; /* zero distance off the diagonal: genuine violation */
    }
    if (gn < rep.min_gradient_norm) {
      rep.min_gradient_norm = gn;
      rep.argmin_gradient_x = x.x;
      rep.argmin_gradient_y = y.x;
    }
    ++rep.pairs;
  }

  /* boundary property on mesh-backed premetrics */
  if (const auto* sp = dynamic_cast<const SpectralPremetric*>(&pm)) {
    const mesh::TriangleMesh& m = sp->mesh();
    rep.boundary_midpoints = static_cast<int>(m.boundary_edges.size());
    int n_targets = std::min(sample_pairs, 100);
    std::vector<PremetricPoint> targets;
    targets.reserve(n_targets);
    for (int i = 0; i < n_targets; ++i) targets.push_back(pm.random_point(rng));
    for (const auto& be : m.boundary_edges) {
      Eigen::Vector3d a = m.vertices.row(be[0]), b = m.vertices.row(be[1]);
      Eigen::Vector3d mid = 0.5 * (a + b);
      Eigen::Vector3d n = m.face_normals.row(be[2]);
      Eigen::Vector3d inward = n.cross(Eigen::Vector3d((b - a).normalized()));
      Eigen::Vector3d centroid = (m.vertices.row(m.faces(be[2], 0)) +
                                  m.vertices.row(m.faces(be[2], 1)) +
                                  m.vertices.row(m.faces(be[2], 2))) /
                                 3.0;
      if (inward.dot(centroid - mid) < 0.0) inward = -inward;
      Eigen::Vector3d bary;
      mesh::closest_point_on_triangle(mid, m.vertices.row(m.faces(be[2], 0)),
                                      m.vertices.row(m.faces(be[2], 1)),
                                      m.vertices.row(m.faces(be[2], 2)), &bary);
      PremetricPoint xb = sp->at(mesh::MeshPoint{be[2], bary});
      for (const auto& tgt : targets) {
        if (pm.value(xb, tgt) < 1e-9) continue;
        Eigen::Vector3d g = m.lift(pm.gradient(xb, tgt));
        double comp = g.dot(inward);
        rep.min_boundary_inward = std::min(rep.min_boundary_inward, comp);
        rep.max_boundary_inward = std::max(rep.max_boundary_inward, comp);
      }
    }
  }

  rep.pass_nonnegative = rep.most_negative >= 0.0;
  /* self tolerance covers SPD matrix-log eigensolver noise (~1e-8) */
  rep.pass_positive = rep.max_self_value <= 1e-7 && rep.min_value > 1e-6;
  rep.pass_nondegenerate = rep.min_gradient_norm > 1e-6;
  rep.pass_boundary =
      rep.boundary_midpoints == 0 || rep.min_boundary_inward >= -1e-6;
  return rep;
}

}  // namespace rfm::flow
