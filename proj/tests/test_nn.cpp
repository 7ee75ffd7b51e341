#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <memory>

#include "doctest.h"
#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"
#include "rfm/core/rng.hpp"
#include "rfm/geometry/manifold.hpp"
#include "rfm/mesh/maze.hpp"
#include "rfm/mesh/mesh.hpp"
#include "rfm/nn/vectorfield.hpp"

using namespace rfm;
using namespace rfm::nn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Point random_manifold_point(const ManifoldDescriptor& m, Rng& rng) {
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      VectorXd v = rng.normal_vector(m.ambient_dim());
      return {m, v / v.norm()};
    }
    case ManifoldKind::FlatTorus:
      return {m, rng.uniform_vector(m.n, 0.0, 2.0 * std::acos(-1.0))};
    case ManifoldKind::PoincareBall: {
      VectorXd v = rng.normal_vector(m.n);
      double r = 0.9 * std::pow(rng.uniform(), 1.0 / m.n);
      return {m, r * v / v.norm()};
    }
    case ManifoldKind::SPD: {
      MatrixXd a(m.n, m.n);
      for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) a(i, j) = 0.5 * rng.normal();
      return {m, geo::flatten(geo::sym_exp(0.5 * (a + a.transpose())))};
    }
  }
  throw ContractViolation("unreachable");
}

/* central finite differences of a scalar function of the flat parameters */
VectorXd fd_param_gradient(const std::function<double(const VectorXd&)>& f,
                           const VectorXd& theta) {
  VectorXd g(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    double h = 1e-5 * (1.0 + std::abs(theta[i]));
    VectorXd tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    g[i] = (f(tp) - f(tm)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("parameter segments partition the flat vector exactly") {
  MLPVectorField net({3, {8, 6}}, 42);
  const ParameterSet& p = net.params();
  int expect = 0;
  for (const auto& s : p.segments()) {
    CHECK(s.offset == expect);
    expect += s.size();
  }
  CHECK(expect == p.size());
  /* w0: 8x4 (x,y,z,t), b0: 8, shape0, w1: 6x8, b1: 6, shape1, w2: 3x6, b2: 3 */
  CHECK(p.size() == 8 * 4 + 8 + 1 + 6 * 8 + 6 + 1 + 3 * 6 + 3);
  CHECK(p.find("w0") == net.weight_segment(0));
  CHECK(p.find("shape1") == net.shape_segment(1));
  CHECK(p.find("nope") == -1);
}

TEST_CASE("initialization is deterministic and the head is damped") {
  MLPVectorField a({2, {16, 16}}, 7);
  MLPVectorField b({2, {16, 16}}, 7);
  MLPVectorField c({2, {16, 16}}, 8);
  CHECK(a.params().flat() == b.params().flat());
  CHECK(a.params().flat() != c.params().flat());
  CHECK(a.ema().flat() == a.params().flat());
  /* head weights two orders smaller than first-layer weights */
  double head = a.params().matrix(a.weight_segment(2)).cwiseAbs().maxCoeff();
  double first = a.params().matrix(a.weight_segment(0)).cwiseAbs().maxCoeff();
  CHECK(head < 0.05 * first);
  CHECK(a.params().scalar(a.shape_segment(0)) == 1.0);
}

TEST_CASE("all-zero parameters give the zero field") {
  MLPVectorField net({3, {8, 8}}, 1);
  net.params().flat().setZero();
  VectorXd out = net.forward_raw(0.3, VectorXd::Random(3));
  CHECK(out.norm() == 0.0);
}

TEST_CASE("swish at shape 50 approximates relu away from the kink") {
  /* single-unit network wired to pass x through one swish */
  MLPVectorField net({1, {1}}, 3);
  ParameterSet& p = net.params();
  p.flat().setZero();
  p.matrix(net.weight_segment(0))(0, 0) = 1.0; /* reads x, ignores t */
  p.scalar(net.shape_segment(0)) = 50.0;
  p.matrix(net.weight_segment(1))(0, 0) = 1.0;
  for (double z = -2.0; z <= 2.0; z += 0.05) {
    if (std::abs(z) <= 0.2) continue;
    double relu = z > 0.0 ? z : 0.0;
    VectorXd x(1);
    x << z;
    CHECK(std::abs(net.forward_raw(0.0, x)[0] - relu) <= 1e-3);
  }
}

TEST_CASE("batched forward equals per-sample forward") {
  MLPVectorField net({4, {12, 12}}, 11);
  Rng rng = Rng::derive(12001);
  int b = 7;
  MatrixXd in(5, b);
  for (int i = 0; i < b; ++i) {
    in.col(i).head(4) = rng.normal_vector(4);
    in(4, i) = rng.uniform();
  }
  MatrixXd out = net.forward_batch(in, net.params());
  for (int i = 0; i < b; ++i) {
    VectorXd single = net.forward_raw(in(4, i), in.col(i).head(4));
    CHECK((out.col(i) - single).norm() <= 1e-15);
  }
}

TEST_CASE("non-finite input is rejected") {
  MLPVectorField net({2, {4}}, 5);
  VectorXd bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)net.forward_raw(0.5, bad), NumericError);
  CHECK_THROWS_AS((void)net.forward_raw(std::numeric_limits<double>::infinity(),
                                        VectorXd::Zero(2)),
                  NumericError);
}

TEST_CASE("loss gradient matches central finite differences") {
  /* the module's acceptance gate: random small nets, width <= 16 */
  Rng rng = Rng::derive(12002);
  for (int trial = 0; trial < 3; ++trial) {
    MLPVectorField net({3, {10, 16}}, 100 + static_cast<std::uint64_t>(trial));
    /* spread the parameters so no path is degenerate */
    ParameterSet& p = net.params();
    p.flat() += 0.3 * rng.normal_vector(p.size());

    int b = 5;
    ProjectedResidualBatch batch;
    batch.inputs.resize(4, b);
    batch.targets.resize(3, b);
    for (int i = 0; i < b; ++i) {
      batch.inputs.col(i).head(3) = rng.normal_vector(3);
      batch.inputs(3, i) = rng.uniform();
      batch.targets.col(i) = rng.normal_vector(3);
    }
    if (trial == 2) {
      /* sample-fixed tangent projectors (sphere style) */
      for (int i = 0; i < b; ++i) {
        VectorXd n = rng.normal_vector(3).normalized();
        batch.projectors.push_back(MatrixXd::Identity(3, 3) - n * n.transpose());
      }
    }

    VectorXd grad;
    double loss = loss_and_gradient(net, p, batch, grad);
    CHECK(std::isfinite(loss));

    VectorXd fd = fd_param_gradient(
        [&](const VectorXd& theta) {
          ParameterSet q = p;
          q.flat() = theta;
          VectorXd unused;
          Tape tape;
          MatrixXd out = net.forward_batch(batch.inputs, q, &tape);
          double acc = 0.0;
          for (int i = 0; i < b; ++i) {
            VectorXd r = batch.projectors.empty()
                             ? VectorXd(out.col(i) - batch.targets.col(i))
                             : VectorXd(batch.projectors[static_cast<std::size_t>(i)] *
                                            out.col(i) -
                                        batch.targets.col(i));
            acc += r.squaredNorm();
          }
          return acc / b;
        },
        p.flat());
    INFO("trial ", trial);
    CHECK((grad - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("gradient is exactly zero for parameters the loss cannot see") {
  /* projector that kills output row 0: the head row feeding it gets no signal */
  MLPVectorField net({2, {6}}, 21);
  net.params().flat() += 0.2 * Rng::derive(12003).normal_vector(net.params().size());
  ProjectedResidualBatch batch;
  batch.inputs = MatrixXd::Random(3, 4);
  batch.targets = MatrixXd::Random(2, 4);
  batch.targets.row(0).setZero();
  MatrixXd kill = MatrixXd::Identity(2, 2);
  kill(0, 0) = 0.0;
  for (int i = 0; i < 4; ++i) batch.projectors.push_back(kill);

  VectorXd grad;
  loss_and_gradient(net, net.params(), batch, grad);
  const ParameterSegment& shead = net.params().segments()[static_cast<std::size_t>(
      net.weight_segment(1))];
  /* head weight row 0 occupies the first of every column pair (column-major) */
  Eigen::Map<const MatrixXd> whead(grad.data() + shead.offset, shead.rows, shead.cols);
  CHECK(whead.row(0).cwiseAbs().maxCoeff() == 0.0);
  const ParameterSegment& sbias = net.params().segments()[static_cast<std::size_t>(
      net.bias_segment(1))];
  CHECK(grad[sbias.offset] == 0.0);
}

TEST_CASE("batch gradients are linear in the samples") {
  MLPVectorField net({2, {8}}, 31);
  net.params().flat() += 0.2 * Rng::derive(12004).normal_vector(net.params().size());
  Rng rng = Rng::derive(12005);

  ProjectedResidualBatch one;
  one.inputs.resize(3, 1);
  one.inputs.col(0).head(2) = rng.normal_vector(2);
  one.inputs(2, 0) = 0.4;
  one.targets = rng.normal_vector(2);

  ProjectedResidualBatch dup;
  dup.inputs.resize(3, 2);
  dup.inputs.col(0) = one.inputs.col(0);
  dup.inputs.col(1) = one.inputs.col(0);
  dup.targets.resize(2, 2);
  dup.targets.col(0) = one.targets.col(0);
  dup.targets.col(1) = one.targets.col(0);

  VectorXd g1, g2;
  double l1 = loss_and_gradient(net, net.params(), one, g1);
  double l2 = loss_and_gradient(net, net.params(), dup, g2);
  /* mean convention: duplication leaves mean loss/gradient unchanged; the
     batch-summed gradient therefore doubles exactly */
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-15));
  CHECK((g1 - g2).norm() <= 1e-15);
  CHECK((2.0 * 1 * g1 - 2 * g2).norm() <= 1e-15); /* sum-gradient doubles */

  /* and a two-point batch averages the two single gradients */
  ProjectedResidualBatch other;
  other.inputs.resize(3, 1);
  other.inputs.col(0).head(2) = rng.normal_vector(2);
  other.inputs(2, 0) = 0.7;
  other.targets = rng.normal_vector(2);
  VectorXd g3;
  loss_and_gradient(net, net.params(), other, g3);

  ProjectedResidualBatch both;
  both.inputs.resize(3, 2);
  both.inputs.col(0) = one.inputs.col(0);
  both.inputs.col(1) = other.inputs.col(0);
  both.targets.resize(2, 2);
  both.targets.col(0) = one.targets.col(0);
  both.targets.col(1) = other.targets.col(0);
  VectorXd gb;
  loss_and_gradient(net, net.params(), both, gb);
  CHECK((gb - 0.5 * (g1 + g3)).norm() <= 1e-14);
}

TEST_CASE("raw input jacobian matches finite differences") {
  MLPVectorField net({3, {10, 8}}, 41);
  net.params().flat() += 0.3 * Rng::derive(12006).normal_vector(net.params().size());
  Rng rng = Rng::derive(12007);
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd x = rng.normal_vector(3);
    double t = rng.uniform();
    MatrixXd j = net.raw_input_jacobian(t, x, net.params());
    MatrixXd fd(3, 3);
    for (int i = 0; i < 3; ++i) {
      VectorXd xp = x, xm = x;
      xp[i] += 1e-6;
      xm[i] -= 1e-6;
      fd.col(i) = (net.forward_raw(t, xp) - net.forward_raw(t, xm)) / 2e-6;
    }
    CHECK((j - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("zero net has zero jacobian; linear net recovers its matrix") {
  MLPVectorField zero({3, {6}}, 51);
  zero.params().flat().setZero();
  ManifoldDescriptor torus{ManifoldKind::FlatTorus, 3};
  Point x{torus, VectorXd::Constant(3, 1.0)};
  CHECK(input_jacobian(zero, zero.params(), torus, 0.5, x).norm() == 0.0);

  /* no hidden layers: v = W [x; t] + b is affine */
  MLPVectorField lin({2, {}}, 52);
  lin.params().flat().setZero();
  MatrixXd a(2, 2);
  a << 1.5, -0.25, 0.75, 2.0;
  lin.params().matrix(lin.weight_segment(0)).leftCols(2) = a;
  ManifoldDescriptor t2{ManifoldKind::FlatTorus, 2};
  Point y{t2, VectorXd::Constant(2, 2.0)};
  MatrixXd j = input_jacobian(lin, lin.params(), t2, 0.3, y);
  CHECK((j - a).norm() <= 1e-14);

  /* v(x) = x on the flat 2-torus has divergence 2 */
  lin.params().matrix(lin.weight_segment(0)).leftCols(2) = MatrixXd::Identity(2, 2);
  MatrixXd jid = input_jacobian(lin, lin.params(), t2, 0.3, y);
  CHECK(jid.trace() == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("parameterized field is tangent on every manifold") {
  Rng rng = Rng::derive(12008);
  for (auto m : {ManifoldDescriptor{ManifoldKind::Sphere, 2},
                 ManifoldDescriptor{ManifoldKind::Sphere, 3},
                 ManifoldDescriptor{ManifoldKind::FlatTorus, 2},
                 ManifoldDescriptor{ManifoldKind::PoincareBall, 2},
                 ManifoldDescriptor{ManifoldKind::SPD, 2},
                 ManifoldDescriptor{ManifoldKind::SPD, 3}}) {
    MLPVectorField net({m.ambient_dim(), {16, 16}}, 60);
    net.params().flat() += 0.3 * rng.normal_vector(net.params().size());
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      Point x = random_manifold_point(m, rng);
      TangentVector v = parameterized_field(net, net.params(), m, rng.uniform(), x);
      double resid = 0.0;
      if (m.kind == ManifoldKind::Sphere) {
        resid = std::abs(x.x.dot(v.v));
      } else if (m.kind == ManifoldKind::SPD) {
        MatrixXd vm = geo::unflatten(v.v, m.n);
        resid = (vm - vm.transpose()).norm();
      }
      worst = std::max(worst, resid);
    }
    INFO(m.name());
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("metric normalization: g-norm of the field equals the projected 2-norm") {
  Rng rng = Rng::derive(12009);
  for (auto m : {ManifoldDescriptor{ManifoldKind::PoincareBall, 2},
                 ManifoldDescriptor{ManifoldKind::PoincareBall, 3},
                 ManifoldDescriptor{ManifoldKind::SPD, 2},
                 ManifoldDescriptor{ManifoldKind::SPD, 3}}) {
    MLPVectorField net({m.ambient_dim(), {12}}, 61);
    net.params().flat() += 0.3 * rng.normal_vector(net.params().size());
    for (int trial = 0; trial < 50; ++trial) {
      Point x = random_manifold_point(m, rng);
      double t = rng.uniform();
      TangentVector v = parameterized_field(net, net.params(), m, t, x);
      VectorXd raw = net.forward_raw(t, x.x);
      double projected;
      if (m.kind == ManifoldKind::SPD) {
        MatrixXd s = geo::unflatten(raw, m.n);
        projected = (0.5 * (s + s.transpose())).norm();
      } else {
        projected = raw.norm();
      }
      INFO(m.name());
      CHECK(geo::g_norm(x, v.v) == doctest::Approx(projected).epsilon(1e-9));
    }
  }
}

TEST_CASE("ball field scales the raw output by the conformal factor") {
  ManifoldDescriptor ball{ManifoldKind::PoincareBall, 2};
  MLPVectorField net({2, {8}}, 62);
  net.params().flat() += 0.3 * Rng::derive(12010).normal_vector(net.params().size());
  VectorXd x(2);
  x << 0.6, 0.0;
  double t = 0.4;
  VectorXd raw = net.forward_raw(t, x);
  TangentVector v = parameterized_field(net, net.params(), ball, t, Point{ball, x});
  CHECK((v.v - 0.32 * raw).norm() <= 1e-15);
}

TEST_CASE("full-field jacobian matches finite differences on all manifolds") {
  Rng rng = Rng::derive(12011);
  for (auto m : {ManifoldDescriptor{ManifoldKind::Sphere, 2},
                 ManifoldDescriptor{ManifoldKind::FlatTorus, 2},
                 ManifoldDescriptor{ManifoldKind::PoincareBall, 2},
                 ManifoldDescriptor{ManifoldKind::SPD, 2}}) {
    MLPVectorField net({m.ambient_dim(), {10, 10}}, 63);
    net.params().flat() += 0.3 * rng.normal_vector(net.params().size());
    for (int trial = 0; trial < 5; ++trial) {
      Point x = random_manifold_point(m, rng);
      double t = rng.uniform();
      MatrixXd j = input_jacobian(net, net.params(), m, t, x);
      int n = m.ambient_dim();
      MatrixXd fd(n, n);
      for (int i = 0; i < n; ++i) {
        VectorXd xp = x.x, xm = x.x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        /* the composition applies the defensive projection itself */
        VectorXd vp = parameterized_field(net, net.params(), m, t, Point{m, xp}).v;
        VectorXd vm = parameterized_field(net, net.params(), m, t, Point{m, xm}).v;
        fd.col(i) = (vp - vm) / 2e-6;
      }
      INFO(m.name(), " trial ", trial);
      CHECK((j - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("mesh field is tangent to the face and jacobian matches in-plane differences") {
  auto m = std::make_shared<mesh::TriangleMesh>(mesh::make_icosphere(2));
  MLPVectorField net({3, {10}}, 71);
  net.params().flat() += 0.3 * Rng::derive(12012).normal_vector(net.params().size());
  Rng rng = Rng::derive(12013);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd dir = rng.normal_vector(3).normalized();
    mesh::MeshPoint mp = mesh::closest_point(*m, dir);
    double t = rng.uniform();
    VectorXd v = mesh_field(net, net.params(), *m, t, mp);
    Eigen::Vector3d nrm = m->face_normals.row(mp.face).transpose();
    CHECK(std::abs(nrm.dot(v.head<3>())) <= 1e-12);

    MatrixXd j = mesh_input_jacobian(net, net.params(), *m, t, mp);
    /* directional check along an in-plane direction */
    Eigen::Vector3d x = m->embed(mp);
    Eigen::Vector3d e = nrm.cross(Eigen::Vector3d(0.3, -0.8, 0.52)).normalized();
    double h = 1e-6;
    mesh::MeshPoint mp2 = mesh::closest_point_local(*m, x + h * e, mp.face);
    mesh::MeshPoint mm2 = mesh::closest_point_local(*m, x - h * e, mp.face);
    if (mp2.face != mp.face || mm2.face != mp.face) continue; /* crossed an edge */
    VectorXd vp = mesh_field(net, net.params(), *m, t, mp2);
    VectorXd vm = mesh_field(net, net.params(), *m, t, mm2);
    VectorXd fd = (vp - vm) / (2.0 * h);
    CHECK((j * e - fd).norm() <= 2e-4 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("planar mesh field needs no projection") {
  mesh::Maze maze = mesh::generate_maze(2, 2, 5);
  auto m = std::make_shared<mesh::TriangleMesh>(maze.mesh);
  REQUIRE(m->ambient_dim == 2);
  MLPVectorField net({2, {6}}, 72);
  net.params().flat() += 0.3 * Rng::derive(12014).normal_vector(net.params().size());
  mesh::MeshPoint mp = mesh::closest_point(*m, m->lift(maze.source_center));
  VectorXd x = m->embed_ambient(mp);
  CHECK((mesh_field(net, net.params(), *m, 0.3, mp) - net.forward_raw(0.3, x)).norm() == 0.0);
}

TEST_CASE("ema update follows the decay arithmetic") {
  MLPVectorField net({2, {4}}, 81);
  ParameterSet live = net.params();
  live.flat().setOnes();
  ParameterSet ema = net.params();
  ema.flat().setZero();

  ParameterSet e0 = ema;
  ema_update(e0, live, 0.0);
  CHECK(e0.flat() == live.flat());

  ParameterSet e1 = ema;
  ema_update(e1, live, 1.0);
  CHECK(e1.flat().cwiseAbs().maxCoeff() == 0.0);

  ParameterSet e2 = ema;
  ema_update(e2, live, 0.999);
  CHECK(e2.flat()[0] == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip preserves every field") {
  MLPVectorField net({3, {8, 8}}, 91);
  Checkpoint c;
  c.manifold_tag = "sphere:2";
  c.net_config = net.config();
  c.live = net.params().flat();
  c.ema = 0.5 * net.params().flat();
  c.optim.m1 = VectorXd::Constant(net.params().size(), 0.25);
  c.optim.m2 = VectorXd::Constant(net.params().size(), 0.0625);
  c.optim.steps = 321;
  c.iteration = 4567;
  c.rng_seed = 99;

  std::string path = "/tmp/rfm_test_checkpoint.bin";
  save_checkpoint(path, c);
  Checkpoint r = load_checkpoint(path);
  CHECK(r.manifold_tag == c.manifold_tag);
  CHECK(r.net_config == c.net_config);
  CHECK(r.live == c.live);
  CHECK(r.ema == c.ema);
  CHECK(r.optim.m1 == c.optim.m1);
  CHECK(r.optim.m2 == c.optim.m2);
  CHECK(r.optim.steps == c.optim.steps);
  CHECK(r.iteration == c.iteration);
  CHECK(r.rng_seed == c.rng_seed);

  /* corrupted magic is rejected */
  std::string junk = read_file(path);
  junk[0] = 'X';
  atomic_write(path, junk);
  CHECK_THROWS_AS((void)load_checkpoint(path), CheckpointError);
  std::remove(path.c_str());
}

TEST_SUITE_END();
