#include "rfm/geometry/manifold.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "rfm/core/error.hpp"

namespace rfm {

std::string ManifoldDescriptor::name() const {
  switch (kind) {
    case ManifoldKind::Sphere: return "sphere:" + std::to_string(n);
    case ManifoldKind::FlatTorus: return "torus:" + std::to_string(n);
    case ManifoldKind::PoincareBall: return "ball:" + std::to_string(n);
    case ManifoldKind::SPD: return "spd:" + std::to_string(n);
  }
  return "?";
}

ManifoldDescriptor parse_manifold(const std::string& text) {
  auto colon = text.find(':');
  RFM_REQUIRE(colon != std::string::npos, ParseError, "manifold spec needs kind:N, got " + text);
  std::string kind = text.substr(0, colon);
  int n = 0;
  try {
    n = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ParseError("bad manifold dimension in " + text);
  }
  RFM_REQUIRE(n >= 1, ParseError, "manifold dimension must be >= 1: " + text);
  if (kind == "sphere") return {ManifoldKind::Sphere, n};
  if (kind == "torus") return {ManifoldKind::FlatTorus, n};
  if (kind == "ball") return {ManifoldKind::PoincareBall, n};
  if (kind == "spd") return {ManifoldKind::SPD, n};
  throw ParseError("unknown manifold kind: " + kind);
}

namespace geo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_one(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0; /* guard against fmod rounding to 2*pi */
  return w;
}

double wrap_sym_one(double a) {
  /* arctan2(sin a, cos a) lands in [-pi, pi]; fold +pi to -pi for a half-open range */
  double w = std::atan2(std::sin(a), std::cos(a));
  if (w == kPi) w = -kPi;
  return w;
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym_eig(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  RFM_REQUIRE(es.info() == Eigen::Success, NumericError, "symmetric eigendecomposition failed");
  return es;
}

}  // namespace

Eigen::VectorXd wrap_angles(const Eigen::VectorXd& a) {
  Eigen::VectorXd w(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) w(i) = wrap_one(a(i));
  return w;
}

Eigen::VectorXd wrap_symmetric(const Eigen::VectorXd& a) {
  Eigen::VectorXd w(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) w(i) = wrap_sym_one(a(i));
  return w;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int n) {
  RFM_REQUIRE(v.size() == Eigen::Index(n) * n, ContractViolation, "flattened SPD size mismatch");
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = v(i * n + j);
  return m;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.rows() * m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& x) {
  auto es = sym_eig(x);
  RFM_REQUIRE(es.eigenvalues().minCoeff() >= kSpdMinEig, NumericError,
              "matrix square root: eigenvalue below positivity tolerance");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& x) {
  auto es = sym_eig(x);
  RFM_REQUIRE(es.eigenvalues().minCoeff() >= kSpdMinEig, NumericError,
              "inverse square root: eigenvalue below positivity tolerance");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd sym_exp(const Eigen::MatrixXd& s) {
  auto es = sym_eig(s);
  Eigen::ArrayXd lam = es.eigenvalues().array().exp();
  return es.eigenvectors() * lam.matrix().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd spd_log(const Eigen::MatrixXd& x) {
  auto es = sym_eig(x);
  RFM_REQUIRE(es.eigenvalues().minCoeff() >= kSpdMinEig, NumericError,
              "matrix log: eigenvalue below positivity tolerance");
  Eigen::ArrayXd lam = es.eigenvalues().array().log();
  return es.eigenvectors() * lam.matrix().asDiagonal() * es.eigenvectors().transpose();
}

void validate_point(const Point& p) {
  const auto& m = p.manifold;
  RFM_REQUIRE(p.x.size() == m.ambient_dim(), ContractViolation,
              "point has wrong ambient dimension for " + m.name());
  RFM_REQUIRE(p.x.allFinite(), ContractViolation, "point has non-finite coordinates");
  switch (m.kind) {
    case ManifoldKind::Sphere:
      RFM_REQUIRE(std::abs(p.x.norm() - 1.0) <= kOnManifoldTol, ContractViolation,
                  "sphere point off the unit sphere");
      break;
    case ManifoldKind::FlatTorus:
      for (Eigen::Index i = 0; i < p.x.size(); ++i)
        RFM_REQUIRE(p.x(i) >= 0.0 && p.x(i) < kTwoPi, ContractViolation,
                    "torus angle outside [0, 2*pi)");
      break;
    case ManifoldKind::PoincareBall:
      RFM_REQUIRE(p.x.norm() < 1.0, ContractViolation, "ball point outside the open unit ball");
      break;
    case ManifoldKind::SPD: {
      Eigen::MatrixXd X = unflatten(p.x, m.n);
      RFM_REQUIRE((X - X.transpose()).cwiseAbs().maxCoeff() <= kOnManifoldTol, ContractViolation,
                  "SPD point not symmetric");
      auto es = sym_eig(0.5 * (X + X.transpose()));
      RFM_REQUIRE(es.eigenvalues().minCoeff() >= kSpdMinEig * (1.0 - 1e-12), ContractViolation,
                  "SPD point has eigenvalue below positivity tolerance");
      break;
    }
  }
}

void validate_tangent(const TangentVector& t) {
  validate_point(t.base);
  RFM_REQUIRE(t.v.size() == t.base.x.size(), ContractViolation, "tangent dimension mismatch");
  RFM_REQUIRE(t.v.allFinite(), ContractViolation, "tangent has non-finite entries");
  double scale = std::max(1.0, t.v.norm());
  switch (t.base.manifold.kind) {
    case ManifoldKind::Sphere:
      RFM_REQUIRE(std::abs(t.base.x.dot(t.v)) <= 1e-8 * scale, ContractViolation,
                  "sphere tangent not orthogonal to base point");
      break;
    case ManifoldKind::SPD: {
      Eigen::MatrixXd V = unflatten(t.v, t.base.manifold.n);
      RFM_REQUIRE((V - V.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale, ContractViolation,
                  "SPD tangent not symmetric");
      break;
    }
    default: break; /* torus/ball tangent space is all of R^N */
  }
}

Point exp_map(const Point& x, const TangentVector& u) {
  validate_tangent(u);
  const auto& m = x.manifold;
  Point out{m, Eigen::VectorXd()};
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      double nu = u.v.norm();
      if (nu < 1e-300) {
        out.x = x.x;
      } else {
        out.x = std::cos(nu) * x.x + (std::sin(nu) / nu) * u.v;
        out.x.normalize(); /* absorb rounding so the membership residual stays tiny */
      }
      break;
    }
    case ManifoldKind::FlatTorus:
      out.x = wrap_angles(x.x + u.v);
      break;
    case ManifoldKind::PoincareBall: {
      double nu = u.v.norm();
      if (nu < 1e-300) {
        out.x = x.x;
      } else {
        double denom = 1.0 - x.x.squaredNorm();
        Eigen::VectorXd step = std::tanh(nu / denom) * (u.v / nu);
        out.x = mobius_add(x.x, step);
        double r = out.x.norm();
        if (r >= kBallMaxRadius) out.x *= kBallMaxRadius / r;
      }
      break;
    }
    case ManifoldKind::SPD: {
      Eigen::MatrixXd X = unflatten(x.x, m.n);
      Eigen::MatrixXd U = unflatten(u.v, m.n);
      U = 0.5 * (U + U.transpose()).eval();
      Eigen::MatrixXd S = spd_sqrt(X), Si = spd_inv_sqrt(X);
      Eigen::MatrixXd Y = S * sym_exp(Si * U * Si) * S;
      out.x = flatten(0.5 * (Y + Y.transpose()));
      break;
    }
  }
  validate_point(out);
  return out;
}

TangentVector log_map(const Point& x, const Point& y) {
  validate_point(x);
  validate_point(y);
  const auto& m = x.manifold;
  RFM_REQUIRE(m == y.manifold, ContractViolation, "log_map across different manifolds");
  TangentVector out{x, Eigen::VectorXd::Zero(m.ambient_dim())};
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      double c = x.x.dot(y.x);
      RFM_REQUIRE(c > -1.0 + kSphereCutLocusTol, NumericError,
                  "log_map at the sphere cut locus (antipodal points)");
      c = std::min(c, 1.0);
      Eigen::VectorXd perp = y.x - c * x.x; /* projection of y-x onto T_x */
      double np = perp.norm();
      /* atan2 keeps the angle well conditioned near c = 1, where acos loses
         half the significant digits; theta/sin(theta) -> 1 smoothly */
      double theta = std::atan2(np, c);
      if (np < 1e-300) {
        out.v.setZero();
      } else {
        out.v = (theta / np) * perp;
      }
      break;
    }
    case ManifoldKind::FlatTorus:
      out.v = wrap_symmetric(y.x - x.x);
      break;
    case ManifoldKind::PoincareBall: {
      Eigen::VectorXd w = mobius_add(-x.x, y.x);
      double nw = w.norm();
      if (nw < 1e-300) {
        out.v.setZero();
      } else {
        out.v = (1.0 - x.x.squaredNorm()) * std::atanh(std::min(nw, 1.0 - 1e-16)) * (w / nw);
      }
      break;
    }
    case ManifoldKind::SPD: {
      Eigen::MatrixXd X = unflatten(x.x, m.n), Y = unflatten(y.x, m.n);
      Eigen::MatrixXd S = spd_sqrt(X), Si = spd_inv_sqrt(X);
      Eigen::MatrixXd inner = Si * Y * Si;
      Eigen::MatrixXd L = spd_log(0.5 * (inner + inner.transpose()));
      Eigen::MatrixXd U = S * L * S;
      out.v = flatten(0.5 * (U + U.transpose()));
      break;
    }
  }
  return out;
}

double inner(const Point& x, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Sphere:
    case ManifoldKind::FlatTorus:
      return u.dot(v);
    case ManifoldKind::PoincareBall: {
      double lam = 2.0 / (1.0 - x.x.squaredNorm());
      return lam * lam * u.dot(v);
    }
    case ManifoldKind::SPD: {
      Eigen::MatrixXd X = unflatten(x.x, m.n);
      Eigen::MatrixXd U = unflatten(u, m.n), V = unflatten(v, m.n);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(X);
      RFM_REQUIRE(ldlt.info() == Eigen::Success, NumericError, "SPD inner: factorization failed");
      Eigen::MatrixXd P = ldlt.solve(U), Q = ldlt.solve(V);
      return (P * Q).trace();
    }
  }
  return 0.0;
}

double g_norm(const Point& x, const Eigen::VectorXd& u) {
  return std::sqrt(std::max(0.0, inner(x, u, u)));
}

double geodesic_distance(const Point& x, const Point& y) {
  TangentVector l = log_map(x, y);
  return g_norm(x, l.v);
}

Point geodesic_interpolate(const Point& x0, const Point& x1, double t) {
  RFM_REQUIRE(t >= 0.0 && t <= 1.0, ContractViolation, "interpolation time outside [0,1]");
  TangentVector l = log_map(x1, x0);
  l.v *= (1.0 - t);
  return exp_map(x1, l);
}

Point project_to_manifold(const ManifoldDescriptor& m, const Eigen::VectorXd& raw) {
  RFM_REQUIRE(raw.size() == m.ambient_dim(), ContractViolation, "projection input dimension");
  RFM_REQUIRE(raw.allFinite(), NumericError, "projection input has non-finite entries");
  Point out{m, raw};
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      double r = raw.norm();
      RFM_REQUIRE(r > 1e-300, NumericError, "cannot project the origin to the sphere");
      out.x = raw / r;
      break;
    }
    case ManifoldKind::FlatTorus:
      out.x = wrap_angles(raw);
      break;
    case ManifoldKind::PoincareBall: {
      double r = raw.norm();
      if (r >= kBallMaxRadius) out.x = raw * (kBallMaxRadius / r);
      break;
    }
    case ManifoldKind::SPD: {
      Eigen::MatrixXd X = unflatten(raw, m.n);
      X = 0.5 * (X + X.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
      RFM_REQUIRE(es.info() == Eigen::Success, NumericError, "SPD projection eig failed");
      Eigen::VectorXd lam = es.eigenvalues().cwiseMax(kSpdMinEig);
      out.x = flatten(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
      /* re-symmetrize exactly */
      Eigen::MatrixXd Y = unflatten(out.x, m.n);
      out.x = flatten(0.5 * (Y + Y.transpose()));
      break;
    }
  }
  validate_point(out);
  return out;
}

TangentVector project_to_tangent(const Point& x, const Eigen::VectorXd& raw) {
  validate_point(x);
  RFM_REQUIRE(raw.size() == x.x.size(), ContractViolation, "tangent projection input dimension");
  TangentVector out{x, raw};
  switch (x.manifold.kind) {
    case ManifoldKind::Sphere:
      out.v = raw - x.x.dot(raw) * x.x;
      break;
    case ManifoldKind::FlatTorus:
    case ManifoldKind::PoincareBall:
      break; /* tangent space is all of R^N */
    case ManifoldKind::SPD: {
      Eigen::MatrixXd V = unflatten(raw, x.manifold.n);
      out.v = flatten(0.5 * (V + V.transpose()));
      break;
    }
  }
  return out;
}

double metric_log_det(const Point& x) {
  const auto& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Sphere:
    case ManifoldKind::FlatTorus:
      return 0.0;
    case ManifoldKind::PoincareBall:
      return m.n * std::log(2.0 / (1.0 - x.x.squaredNorm()));
    case ManifoldKind::SPD: {
      Eigen::MatrixXd X = unflatten(x.x, m.n);
      Eigen::MatrixXd S = 0.5 * (X + X.transpose());
      double ld = std::log(S.determinant());
      return 0.5 * m.n * (m.n - 1) * std::log(2.0) + (m.n + 1) * ld;
    }
  }
  return 0.0;
}

Eigen::MatrixXd metric_matrix(const Point& x) {
  const auto& m = x.manifold;
  int d = m.ambient_dim();
  switch (m.kind) {
    case ManifoldKind::Sphere:
    case ManifoldKind::FlatTorus:
      return Eigen::MatrixXd::Identity(d, d);
    case ManifoldKind::PoincareBall: {
      double lam = 2.0 / (1.0 - x.x.squaredNorm());
      return lam * lam * Eigen::MatrixXd::Identity(d, d);
    }
    case ManifoldKind::SPD: {
      /* <U,V>_X = vec(U)^T (Xinv kron Xinv) vec(V) over the row-major flattening */
      Eigen::MatrixXd X = unflatten(x.x, m.n);
      Eigen::MatrixXd Xi = X.inverse();
      Eigen::MatrixXd G(d, d);
      int n = m.n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) G(i * n + j, k * n + l) = Xi(j, k) * Xi(l, i);
      return 0.5 * (G + G.transpose());
    }
  }
  return Eigen::MatrixXd::Identity(d, d);
}

Eigen::MatrixXd tangent_basis(const Point& x) {
  const auto& m = x.manifold;
  int d = m.ambient_dim(), k = m.intrinsic_dim();
  Eigen::MatrixXd B(d, k);
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      /* complete x to an orthonormal frame via Householder QR of [x | I] */
      Eigen::MatrixXd A(d, d);
      A.col(0) = x.x;
      A.rightCols(d - 1) = Eigen::MatrixXd::Identity(d, d).leftCols(d - 1);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
      Eigen::MatrixXd Q = qr.householderQ();
      B = Q.rightCols(k);
      break;
    }
    case ManifoldKind::FlatTorus:
      B = Eigen::MatrixXd::Identity(d, k);
      break;
    case ManifoldKind::PoincareBall: {
      double inv_lam = (1.0 - x.x.squaredNorm()) / 2.0;
      B = inv_lam * Eigen::MatrixXd::Identity(d, k);
      break;
    }
    case ManifoldKind::SPD: {
      /* X^{1/2} B_k X^{1/2} with {B_k} orthonormal for tr(AB) */
      int n = m.n;
      Eigen::MatrixXd S = spd_sqrt(unflatten(x.x, n));
      int col = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
          Eigen::MatrixXd Bk = Eigen::MatrixXd::Zero(n, n);
          if (i == j) {
            Bk(i, i) = 1.0;
          } else {
            Bk(i, j) = Bk(j, i) = 1.0 / std::numbers::sqrt2;
          }
          B.col(col++) = flatten(S * Bk * S);
        }
      }
      break;
    }
  }
  return B;
}

Eigen::VectorXd mobius_add(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double xy = x.dot(y), x2 = x.squaredNorm(), y2 = y.squaredNorm();
  double denom = 1.0 + 2.0 * xy + x2 * y2;
  RFM_REQUIRE(std::abs(denom) > 1e-300, NumericError, "Mobius addition denominator underflow");
  return ((1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y) / denom;
}

}  // namespace geo
}  // namespace rfm
