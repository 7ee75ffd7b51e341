#include "rfm/nn/vectorfield.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"

namespace rfm::nn {

/* ---------------------------------------------------------------- */
/* ParameterSet                                                      */
/* ---------------------------------------------------------------- */

int ParameterSet::add(const std::string& name, int rows, int cols) {
  RFM_REQUIRE(!finalized_, ContractViolation, "parameter set already finalized");
  RFM_REQUIRE(rows > 0 && cols > 0, ContractViolation, "parameter segment must be non-empty");
  int offset = segments_.empty() ? 0 : segments_.back().offset + segments_.back().size();
  segments_.push_back({name, offset, rows, cols});
  return static_cast<int>(segments_.size()) - 1;
}

void ParameterSet::finalize() {
  RFM_REQUIRE(!finalized_, ContractViolation, "parameter set already finalized");
  int total = segments_.empty() ? 0 : segments_.back().offset + segments_.back().size();
  flat_ = Eigen::VectorXd::Zero(total);
  finalized_ = true;
}

Eigen::Map<Eigen::MatrixXd> ParameterSet::matrix(int seg) {
  const ParameterSegment& s = segments_.at(static_cast<std::size_t>(seg));
  return {flat_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParameterSet::matrix(int seg) const {
  const ParameterSegment& s = segments_.at(static_cast<std::size_t>(seg));
  return {flat_.data() + s.offset, s.rows, s.cols};
}

double& ParameterSet::scalar(int seg) {
  const ParameterSegment& s = segments_.at(static_cast<std::size_t>(seg));
  RFM_REQUIRE(s.size() == 1, ContractViolation, "segment is not a scalar");
  return flat_[s.offset];
}

double ParameterSet::scalar(int seg) const {
  const ParameterSegment& s = segments_.at(static_cast<std::size_t>(seg));
  RFM_REQUIRE(s.size() == 1, ContractViolation, "segment is not a scalar");
  return flat_[s.offset];
}

int ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < segments_.size(); ++i)
    if (segments_[i].name == name) return static_cast<int>(i);
  return -1;
}

void ema_update(ParameterSet& ema, const ParameterSet& live, double decay) {
  RFM_REQUIRE(ema.size() == live.size(), ContractViolation,
              "ema/live parameter layouts do not match");
  ema.flat() = decay * ema.flat() + (1.0 - decay) * live.flat();
}

/* ---------------------------------------------------------------- */
/* MLPVectorField                                                    */
/* ---------------------------------------------------------------- */

namespace {

double sigmoid(double w) { return 1.0 / (1.0 + std::exp(-w)); }

/* swish value/derivatives with scalar shape b: s(z) = z * sigmoid(b z) */
double swish(double z, double b) { return z * sigmoid(b * z); }
double swish_dz(double z, double b) {
  double s = sigmoid(b * z);
  return s + b * z * s * (1.0 - s);
}
double swish_db(double z, double b) {
  double s = sigmoid(b * z);
  return z * z * s * (1.0 - s);
}

}  // namespace

MLPVectorField::MLPVectorField(MLPConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  RFM_REQUIRE(cfg_.ambient_dim > 0, ContractViolation, "network needs a positive ambient dim");
  for (int h : cfg_.hidden)
    RFM_REQUIRE(h > 0, ContractViolation, "hidden widths must be positive");

  int in = cfg_.ambient_dim + 1; /* time concatenated */
  std::vector<int> widths;
  widths.push_back(in);
  for (int h : cfg_.hidden) widths.push_back(h);
  widths.push_back(cfg_.ambient_dim);

  int layers = static_cast<int>(widths.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    w_seg_.push_back(params_.add("w" + std::to_string(l), widths[l + 1], widths[l]));
    b_seg_.push_back(params_.add("b" + std::to_string(l), widths[l + 1], 1));
    if (l < layers - 1) s_seg_.push_back(params_.add("shape" + std::to_string(l), 1, 1));
  }
  params_.finalize();

  Rng rng = Rng::derive(seed, 0x6d6c70ull /* "mlp" */);
  for (int l = 0; l < layers; ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    double damp = (l == layers - 1) ? 1e-2 : 1.0; /* near-zero initial field */
    auto w = params_.matrix(w_seg_[l]);
    for (int j = 0; j < w.cols(); ++j)
      for (int i = 0; i < w.rows(); ++i) w(i, j) = damp * rng.uniform(-bound, bound);
    auto b = params_.matrix(b_seg_[l]);
    for (int i = 0; i < b.rows(); ++i) b(i, 0) = damp * rng.uniform(-bound, bound);
    if (l < layers - 1) params_.scalar(s_seg_[l]) = 1.0;
  }

  ema_ = params_; /* same layout, same initial values */
}

Eigen::MatrixXd MLPVectorField::forward_batch(const Eigen::MatrixXd& inputs,
                                              const ParameterSet& p, Tape* tape) const {
  RFM_REQUIRE(inputs.rows() == cfg_.ambient_dim + 1, ContractViolation,
              "input rows must be ambient_dim + 1");
  RFM_REQUIRE(inputs.allFinite(), NumericError, "non-finite network input");

  int nh = num_hidden();
  if (tape) {
    tape->input = inputs;
    tape->pre.assign(static_cast<std::size_t>(nh), {});
    tape->post.assign(static_cast<std::size_t>(nh), {});
  }
  Eigen::MatrixXd a = inputs;
  for (int l = 0; l < nh; ++l) {
    Eigen::MatrixXd z =
        (p.matrix(w_seg_[l]) * a).colwise() + p.matrix(b_seg_[l]).col(0);
    double shape = p.scalar(s_seg_[l]);
    Eigen::MatrixXd act = z.unaryExpr([shape](double v) { return swish(v, shape); });
    if (tape) {
      tape->pre[static_cast<std::size_t>(l)] = z;
      tape->post[static_cast<std::size_t>(l)] = act;
    }
    a = std::move(act);
  }
  Eigen::MatrixXd out =
      (p.matrix(w_seg_[nh]) * a).colwise() + p.matrix(b_seg_[nh]).col(0);
  if (tape) tape->output = out;
  return out;
}

Eigen::VectorXd MLPVectorField::forward_raw(double t, const Eigen::VectorXd& x,
                                            const ParameterSet& p) const {
  RFM_REQUIRE(std::isfinite(t), NumericError, "non-finite time input");
  Eigen::MatrixXd in(cfg_.ambient_dim + 1, 1);
  in.col(0).head(cfg_.ambient_dim) = x;
  in(cfg_.ambient_dim, 0) = t;
  return forward_batch(in, p).col(0);
}

void MLPVectorField::backward(const Tape& tape, const ParameterSet& p,
                              const Eigen::MatrixXd& dout, Eigen::VectorXd& grad,
                              Eigen::MatrixXd* dinput) const {
  int nh = num_hidden();
  RFM_REQUIRE(dout.rows() == cfg_.ambient_dim && dout.cols() == tape.input.cols(),
              ContractViolation, "dout shape does not match the tape");
  if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());

  auto seg_matrix = [&](int seg) {
    const ParameterSegment& s = params_.segments().at(static_cast<std::size_t>(seg));
    return Eigen::Map<Eigen::MatrixXd>(grad.data() + s.offset, s.rows, s.cols);
  };

  Eigen::MatrixXd da = dout;
  for (int l = nh; l >= 0; --l) {
    const Eigen::MatrixXd& below =
        (l == 0) ? tape.input : tape.post[static_cast<std::size_t>(l - 1)];
    Eigen::MatrixXd dz;
    if (l == nh) {
      dz = std::move(da); /* linear head */
    } else {
      const Eigen::MatrixXd& z = tape.pre[static_cast<std::size_t>(l)];
      double shape = p.scalar(s_seg_[l]);
      dz = da.cwiseProduct(z.unaryExpr([shape](double v) { return swish_dz(v, shape); }));
      double dshape =
          da.cwiseProduct(z.unaryExpr([shape](double v) { return swish_db(v, shape); })).sum();
      grad[params_.segments().at(static_cast<std::size_t>(s_seg_[l])).offset] += dshape;
    }
    seg_matrix(w_seg_[l]) += dz * below.transpose();
    seg_matrix(b_seg_[l]).col(0) += dz.rowwise().sum();
    if (l > 0 || dinput) da = p.matrix(w_seg_[l]).transpose() * dz;
  }
  if (dinput) *dinput = std::move(da);
}

Eigen::MatrixXd MLPVectorField::raw_input_jacobian(double t, const Eigen::VectorXd& x,
                                                   const ParameterSet& p) const {
  RFM_REQUIRE(std::isfinite(t) && x.allFinite(), NumericError, "non-finite network input");
  int n = cfg_.ambient_dim;
  Eigen::VectorXd a(n + 1);
  a.head(n) = x;
  a(n) = t;
  /* forward-mode: J starts as d[input]/dx = [I; 0] and is pushed layerwise */
  Eigen::MatrixXd j(n + 1, n);
  j.setZero();
  j.topRows(n).setIdentity();

  Eigen::MatrixXd jcur = j;
  Eigen::VectorXd acur = a;
  int nh = num_hidden();
  for (int l = 0; l < nh; ++l) {
    Eigen::VectorXd z = p.matrix(w_seg_[l]) * acur + p.matrix(b_seg_[l]).col(0);
    Eigen::MatrixXd jz = p.matrix(w_seg_[l]) * jcur;
    double shape = p.scalar(s_seg_[l]);
    acur = z.unaryExpr([shape](double v) { return swish(v, shape); });
    jcur = z.unaryExpr([shape](double v) { return swish_dz(v, shape); }).asDiagonal() * jz;
  }
  return p.matrix(w_seg_[nh]) * jcur;
}

double loss_and_gradient(const MLPVectorField& net, const ParameterSet& p,
                         const ProjectedResidualBatch& batch, Eigen::VectorXd& grad) {
  int b = static_cast<int>(batch.inputs.cols());
  RFM_REQUIRE(b > 0, ContractViolation, "empty loss batch");
  RFM_REQUIRE(batch.targets.cols() == b, ContractViolation, "targets/inputs count mismatch");
  RFM_REQUIRE(batch.projectors.empty() || static_cast<int>(batch.projectors.size()) == b,
              ContractViolation, "projector count mismatch");

  Tape tape;
  Eigen::MatrixXd out = net.forward_batch(batch.inputs, p, &tape);
  Eigen::MatrixXd resid(out.rows(), b);
  if (batch.projectors.empty()) {
    resid = out - batch.targets;
  } else {
    for (int i = 0; i < b; ++i)
      resid.col(i) = batch.projectors[static_cast<std::size_t>(i)] * out.col(i) -
                     batch.targets.col(i);
  }
  double loss = resid.squaredNorm() / b;

  Eigen::MatrixXd dout(out.rows(), b);
  if (batch.projectors.empty()) {
    dout = (2.0 / b) * resid;
  } else {
    for (int i = 0; i < b; ++i)
      dout.col(i) =
          (2.0 / b) * batch.projectors[static_cast<std::size_t>(i)].transpose() * resid.col(i);
  }
  grad = Eigen::VectorXd::Zero(p.size());
  net.backward(tape, p, dout, grad);
  return loss;
}

/* ---------------------------------------------------------------- */
/* manifold parameterization                                         */
/* ---------------------------------------------------------------- */

TangentVector parameterized_field(const MLPVectorField& net, const ParameterSet& p,
                                  const ManifoldDescriptor& m, double t, const Point& x) {
  Point xp = geo::project_to_manifold(m, x.x);
  Eigen::VectorXd raw = net.forward_raw(t, xp.x, p);
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      Eigen::VectorXd v = raw - xp.x.dot(raw) * xp.x;
      return {xp, v};
    }
    case ManifoldKind::FlatTorus:
      return {xp, raw};
    case ManifoldKind::PoincareBall: {
      double s = (1.0 - xp.x.squaredNorm()) / 2.0; /* conformal inverse sqrt metric */
      return {xp, s * raw};
    }
    case ManifoldKind::SPD: {
      Eigen::MatrixXd xm = geo::unflatten(xp.x, m.n);
      Eigen::MatrixXd sym = geo::unflatten(raw, m.n);
      sym = 0.5 * (sym + sym.transpose()).eval();
      Eigen::MatrixXd sq = geo::spd_sqrt(xm);
      return {xp, geo::flatten(sq * sym * sq)};
    }
  }
  throw ContractViolation("unknown manifold kind");
}

Eigen::MatrixXd input_jacobian(const MLPVectorField& net, const ParameterSet& p,
                               const ManifoldDescriptor& m, double t, const Point& x) {
  Point xp = geo::project_to_manifold(m, x.x);
  Eigen::MatrixXd jraw = net.raw_input_jacobian(t, xp.x, p);
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      /* v(z) = P_{z/|z|} raw(z/|z|); at |x| = 1 the differential is
         P J P - <x, raw> P - x (P raw)^T */
      Eigen::VectorXd raw = net.forward_raw(t, xp.x, p);
      int n = m.ambient_dim();
      Eigen::MatrixXd proj =
          Eigen::MatrixXd::Identity(n, n) - xp.x * xp.x.transpose();
      return proj * jraw * proj - xp.x.dot(raw) * proj -
             xp.x * (proj * raw).transpose();
    }
    case ManifoldKind::FlatTorus:
      return jraw;
    case ManifoldKind::PoincareBall: {
      Eigen::VectorXd raw = net.forward_raw(t, xp.x, p);
      double s = (1.0 - xp.x.squaredNorm()) / 2.0;
      return s * jraw - raw * xp.x.transpose();
    }
    case ManifoldKind::SPD: {
      /* v(Z) = vec(X^1/2 S X^1/2), X = sym(Z), S = sym(raw(vec X));
         dX^1/2 solves the Sylvester equation in the eigenbasis of X */
      int n = m.n;
      Eigen::MatrixXd xm = geo::unflatten(xp.x, n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xm);
      Eigen::MatrixXd q = es.eigenvectors();
      Eigen::VectorXd lam = es.eigenvalues();
      Eigen::VectorXd sqlam = lam.array().max(0.0).sqrt();
      Eigen::MatrixXd sq = q * sqlam.asDiagonal() * q.transpose();

      Eigen::VectorXd raw = net.forward_raw(t, xp.x, p);
      Eigen::MatrixXd sym = geo::unflatten(raw, n);
      sym = 0.5 * (sym + sym.transpose()).eval();

      Eigen::MatrixXd jfull(n * n, n * n);
      for (int jj = 0; jj < n; ++jj) {
        for (int ii = 0; ii < n; ++ii) {
          /* perturb Z by e_{ii,jj}; X moves by the symmetric part */
          Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, n);
          dx(ii, jj) += 0.5;
          dx(jj, ii) += 0.5;

          Eigen::MatrixXd dxt = q.transpose() * dx * q;
          for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c) dxt(a, c) /= sqlam(a) + sqlam(c);
          Eigen::MatrixXd dsq = q * dxt * q.transpose();

          Eigen::VectorXd draw = jraw * geo::flatten(dx);
          Eigen::MatrixXd dsym = geo::unflatten(draw, n);
          dsym = 0.5 * (dsym + dsym.transpose()).eval();

          Eigen::MatrixXd dv = dsq * sym * sq + sq * dsym * sq + sq * sym * dsq;
          jfull.col(ii * n + jj) = geo::flatten(dv); /* row-major flatten order */
        }
      }
      return jfull;
    }
  }
  throw ContractViolation("unknown manifold kind");
}

Eigen::VectorXd mesh_field(const MLPVectorField& net, const ParameterSet& p,
                           const mesh::TriangleMesh& mesh, double t,
                           const mesh::MeshPoint& mp) {
  Eigen::VectorXd x = mesh.embed_ambient(mp);
  Eigen::VectorXd raw = net.forward_raw(t, x, p);
  if (mesh.ambient_dim == 2) return raw; /* planar: tangent projection is identity */
  Eigen::Vector3d nrm = mesh.face_normals.row(mp.face).transpose();
  Eigen::Vector3d v = raw.head<3>();
  return (v - nrm.dot(v) * nrm).eval();
}

Eigen::MatrixXd mesh_input_jacobian(const MLPVectorField& net, const ParameterSet& p,
                                    const mesh::TriangleMesh& mesh, double t,
                                    const mesh::MeshPoint& mp) {
  Eigen::VectorXd x = mesh.embed_ambient(mp);
  Eigen::MatrixXd jraw = net.raw_input_jacobian(t, x, p);
  if (mesh.ambient_dim == 2) return jraw;
  Eigen::Vector3d nrm = mesh.face_normals.row(mp.face).transpose();
  Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - nrm * nrm.transpose();
  return proj * jraw * proj;
}

/* ---------------------------------------------------------------- */
/* checkpoint io                                                     */
/* ---------------------------------------------------------------- */

namespace {
constexpr std::uint32_t kCheckpointMagic = 0x52464d43u; /* "RFMC" */
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  BinaryWriter w;
  w.u32(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(c.manifold_tag);
  w.u32(static_cast<std::uint32_t>(c.net_config.ambient_dim));
  w.u32(static_cast<std::uint32_t>(c.net_config.hidden.size()));
  for (int h : c.net_config.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.vec(c.live);
  w.vec(c.ema);
  w.vec(c.optim.m1);
  w.vec(c.optim.m2);
  w.u64(static_cast<std::uint64_t>(c.optim.steps));
  w.u64(static_cast<std::uint64_t>(c.iteration));
  w.u64(c.rng_seed);
  atomic_write(path, w.buffer());
}

Checkpoint load_checkpoint(const std::string& path) {
  BinaryReader r = BinaryReader::from_file(path);
  RFM_REQUIRE(r.u32() == kCheckpointMagic, CheckpointError,
              "not a checkpoint file: " + path);
  RFM_REQUIRE(r.u32() == kCheckpointVersion, CheckpointError,
              "unsupported checkpoint version in " + path);
  Checkpoint c;
  c.manifold_tag = r.str();
  c.net_config.ambient_dim = static_cast<int>(r.u32());
  int nh = static_cast<int>(r.u32());
  c.net_config.hidden.clear();
  for (int i = 0; i < nh; ++i) c.net_config.hidden.push_back(static_cast<int>(r.u32()));
  c.live = r.vec();
  c.ema = r.vec();
  c.optim.m1 = r.vec();
  c.optim.m2 = r.vec();
  c.optim.steps = static_cast<std::int64_t>(r.u64());
  c.iteration = static_cast<std::int64_t>(r.u64());
  c.rng_seed = r.u64();
  RFM_REQUIRE(r.exhausted(), CheckpointError, "trailing bytes in checkpoint " + path);
  return c;
}

}  // namespace rfm::nn
