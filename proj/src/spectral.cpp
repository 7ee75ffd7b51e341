#include "rfm/mesh/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"
#include "rfm/core/rng.hpp"

namespace rfm::mesh {

Laplacian cotangent_laplacian(const TriangleMesh& mesh) {
  const int nv = mesh.num_vertices();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.num_faces() * 12);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(nv);
  constexpr double kCotClamp = 1e6;

  for (int f = 0; f < mesh.num_faces(); ++f) {
    int vid[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    Eigen::Vector3d p[3] = {mesh.vertices.row(vid[0]), mesh.vertices.row(vid[1]),
                            mesh.vertices.row(vid[2])};
    for (int c = 0; c < 3; ++c) mass(vid[c]) += mesh.face_areas(f) / 3.0;
    for (int c = 0; c < 3; ++c) {
      /* edge (c+1, c+2) is opposite vertex c */
      int i = vid[(c + 1) % 3], j = vid[(c + 2) % 3];
      Eigen::Vector3d e1 = p[(c + 1) % 3] - p[c];
      Eigen::Vector3d e2 = p[(c + 2) % 3] - p[c];
      double cross = e1.cross(e2).norm();
      double cot = cross > 0 ? e1.dot(e2) / cross : kCotClamp;
      cot = std::clamp(cot, -kCotClamp, kCotClamp);
      double w = 0.5 * cot;
      trip.emplace_back(i, j, -w);
      trip.emplace_back(j, i, -w);
      trip.emplace_back(i, i, w);
      trip.emplace_back(j, j, w);
    }
  }
  Laplacian out;
  out.stiffness.resize(nv, nv);
  out.stiffness.setFromTriplets(trip.begin(), trip.end());
  out.mass = mass;
  RFM_REQUIRE(mass.minCoeff() > 0, SolverError, "lumped mass has a non-positive entry");
  return out;
}

/* ---------------------------------------------------- Lanczos eigensolver -- */

namespace {

struct SymmetrizedOperator {
  Eigen::SparseMatrix<double> C;          /* M^{-1/2} S M^{-1/2} */
  Eigen::VectorXd inv_sqrt_mass;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver; /* of C + sigma I */
  double sigma = 0.0;
  double norm_estimate = 1.0; /* Gershgorin bound */
};

void factorize(SymmetrizedOperator& op, const Laplacian& lap) {
  const int n = static_cast<int>(lap.mass.size());
  op.inv_sqrt_mass = lap.mass.cwiseSqrt().cwiseInverse();
  Eigen::SparseMatrix<double> D(n, n);
  std::vector<Eigen::Triplet<double>> dt;
  dt.reserve(n);
  for (int i = 0; i < n; ++i) dt.emplace_back(i, i, op.inv_sqrt_mass(i));
  D.setFromTriplets(dt.begin(), dt.end());
  op.C = D * lap.stiffness * D;
  op.C.makeCompressed();

  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += op.C.coeff(i, i);
  op.sigma = std::max(1e-12, 1e-6 * trace / n);

  /* Gershgorin estimate of the largest eigenvalue */
  Eigen::VectorXd row_abs = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < op.C.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.C, k); it; ++it)
      row_abs(it.row()) += std::abs(it.value());
  op.norm_estimate = std::max(1.0, row_abs.maxCoeff());

  Eigen::SparseMatrix<double> A = op.C;
  for (int i = 0; i < n; ++i) A.coeffRef(i, i) += op.sigma;
  op.solver.compute(A);
  RFM_REQUIRE(op.solver.info() == Eigen::Success, SolverError,
              "shift-invert factorization failed");
}

}  // namespace

SpectralBasis compute_spectral_basis(const TriangleMesh& mesh, int k, double tol) {
  const int n = mesh.num_vertices();
  RFM_REQUIRE(k >= 1 && k < n, SolverError,
              "eigenfunction count must satisfy 1 <= k < vertex count");

  Laplacian lap = cotangent_laplacian(mesh);
  SymmetrizedOperator op;
  factorize(op, lap);

  const long max_ops = static_cast<long>(10.0 * k * std::sqrt(static_cast<double>(n)));
  long ops_used = 0;

  /* Lanczos over B = (C + sigma I)^{-1} with full reorthogonalization; the
     largest Ritz values of B are the smallest eigenvalues of C. */
  int m = std::min(n, std::max(2 * k + 30, 60));
  Eigen::MatrixXd V;         /* n x (m+1) basis */
  std::vector<double> alpha, beta;
  Rng rng = Rng::derive(0x53504543ull, mesh.content_hash, static_cast<std::uint64_t>(k));
  Eigen::VectorXd v = rng.normal_vector(n);
  v.normalize();

  Eigen::MatrixXd eigvecs; /* final n x k in C-space */
  Eigen::VectorXd eigvals;

  while (true) {
    RFM_REQUIRE(m <= n, SolverError, "Lanczos basis exhausted without convergence");
    V.resize(n, m + 1);
    V.col(0) = v;
    alpha.assign(m, 0.0);
    beta.assign(m, 0.0);
    int built = 0;
    for (int j = 0; j < m; ++j) {
      RFM_REQUIRE(ops_used++ < max_ops, SolverError,
                  "eigensolver exceeded its iteration budget");
      Eigen::VectorXd w = op.solver.solve(V.col(j));
      if (j > 0) w -= beta[j - 1] * V.col(j - 1);
      alpha[j] = V.col(j).dot(w);
      w -= alpha[j] * V.col(j);
      /* full reorthogonalization, twice for stability */
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      beta[j] = w.norm();
      built = j + 1;
      if (beta[j] < 1e-14) {
        /* invariant subspace: restart with a fresh orthogonal direction */
        Eigen::VectorXd fresh = rng.normal_vector(n);
        fresh -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * fresh);
        double nf = fresh.norm();
        if (nf < 1e-12) { m = j + 1; break; }
        w = fresh / nf;
        beta[j] = 0.0;
      } else {
        w /= beta[j];
      }
      V.col(j + 1) = w;
    }
    int mm = built;

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(mm, mm);
    for (int i = 0; i < mm; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < mm && beta[i] != 0.0) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    RFM_REQUIRE(es.info() == Eigen::Success, SolverError, "tridiagonal eigensolve failed");

    if (mm < k) { m = std::min(n, 2 * m); v = V.col(0); continue; }

    /* take the k largest Ritz values of B (smallest of C) */
    Eigen::MatrixXd Z = es.eigenvectors().rightCols(k).rowwise().reverse();
    Eigen::VectorXd theta = es.eigenvalues().tail(k).reverse();
    Eigen::MatrixXd Y = V.leftCols(mm) * Z; /* candidate eigenvectors, ascending lambda */
    eigvals.resize(k);
    bool converged = true;
    for (int i = 0; i < k; ++i) {
      eigvals(i) = 1.0 / theta(i) - op.sigma;
      Eigen::VectorXd r = op.C * Y.col(i) - eigvals(i) * Y.col(i);
      if (r.norm() > tol * op.norm_estimate) { converged = false; break; }
    }
    if (converged) { eigvecs = Y; break; }
    m = std::min(n, m + std::max(k, m / 2));
    v = V.col(0);
  }

  SpectralBasis basis;
  basis.k = k;
  basis.mass = lap.mass;
  basis.mesh_hash = mesh.content_hash;
  basis.eigenvalues = eigvals.cwiseMax(0.0); /* clamp roundoff on the constant mode */
  basis.eigenfunctions.resize(n, k);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd phi = op.inv_sqrt_mass.asDiagonal() * eigvecs.col(i);
    /* normalize in the M inner product (Y was unit in C-space already) */
    double norm_m = std::sqrt(phi.dot(lap.mass.asDiagonal() * phi));
    phi /= norm_m;
    /* sign convention: first non-negligible vertex value positive */
    double peak = phi.cwiseAbs().maxCoeff();
    for (int vtx = 0; vtx < n; ++vtx) {
      if (std::abs(phi(vtx)) > 1e-8 * peak) {
        if (phi(vtx) < 0) phi = -phi;
        break;
      }
    }
    basis.eigenfunctions.col(i) = phi;
  }
  return basis;
}

/* --------------------------------------------------------------- caching -- */

namespace {
constexpr std::uint64_t kSpecMagic = 0x314345505346524full; /* "RFSPEC1" little-endian-ish */
constexpr std::uint32_t kSpecVersion = 1;
}  // namespace

void save_spectral_basis(const SpectralBasis& basis, const std::string& path) {
  BinaryWriter w;
  w.u64(kSpecMagic);
  w.u32(kSpecVersion);
  w.u32(static_cast<std::uint32_t>(basis.k));
  w.u64(basis.mesh_hash);
  w.vec(basis.eigenvalues);
  w.mat(basis.eigenfunctions);
  w.vec(basis.mass);
  atomic_write(path, w.buffer());
}

SpectralBasis load_spectral_basis_unchecked(const std::string& path) {
  BinaryReader r = BinaryReader::from_file(path);
  RFM_REQUIRE(r.u64() == kSpecMagic, ParseError, path + ": not a spectral-basis cache");
  std::uint32_t ver = r.u32();
  RFM_REQUIRE(ver == kSpecVersion, ParseError,
              path + ": unsupported cache version " + std::to_string(ver));
  SpectralBasis b;
  b.k = static_cast<int>(r.u32());
  b.mesh_hash = r.u64();
  b.eigenvalues = r.vec();
  b.eigenfunctions = r.mat();
  b.mass = r.vec();
  RFM_REQUIRE(b.eigenvalues.size() == b.k && b.eigenfunctions.cols() == b.k, ParseError,
              path + ": inconsistent cache payload");
  return b;
}

SpectralBasis load_spectral_basis(const std::string& path, const TriangleMesh& mesh) {
  SpectralBasis b = load_spectral_basis_unchecked(path);
  RFM_REQUIRE(b.mesh_hash == mesh.content_hash, CheckpointError,
              path + ": cache is stale (mesh content hash mismatch)");
  RFM_REQUIRE(b.eigenfunctions.rows() == mesh.num_vertices(), CheckpointError,
              path + ": cache vertex count mismatch");
  return b;
}

/* ---------------------------------------------------- spectral distances -- */

Eigen::VectorXd SpectralWeights::evaluate(const Eigen::VectorXd& eigenvalues) const {
  Eigen::VectorXd w(eigenvalues.size());
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    double lam = eigenvalues(i);
    if (kind == Kind::Diffusion) {
      w(i) = std::exp(-2.0 * tau * lam);
    } else {
      w(i) = lam < 1e-6 ? 0.0 : 1.0 / (lam * lam); /* skip near-constant modes */
    }
  }
  return w;
}

std::string SpectralWeights::name() const {
  return kind == Kind::Diffusion ? "diffusion" : "biharmonic";
}

Eigen::VectorXd eigenfunctions_at(const TriangleMesh& mesh, const SpectralBasis& basis,
                                  const MeshPoint& p) {
  RFM_REQUIRE(p.face >= 0 && p.face < mesh.num_faces(), ContractViolation,
              "eigenfunction evaluation off-mesh");
  Eigen::VectorXd vals = Eigen::VectorXd::Zero(basis.k);
  for (int c = 0; c < 3; ++c)
    vals += p.bary(c) * basis.eigenfunctions.row(mesh.faces(p.face, c)).transpose();
  return vals;
}

Eigen::Vector3d eigenfunction_gradient(const TriangleMesh& mesh, const SpectralBasis& basis,
                                       int face, int i) {
  Eigen::Vector3d vals(basis.eigenfunctions(mesh.faces(face, 0), i),
                       basis.eigenfunctions(mesh.faces(face, 1), i),
                       basis.eigenfunctions(mesh.faces(face, 2), i));
  return face_gradient(mesh, face, vals);
}

double spectral_distance(const TriangleMesh& mesh, const SpectralBasis& basis,
                         const SpectralWeights& weights, const MeshPoint& x, const MeshPoint& y) {
  Eigen::VectorXd w = weights.evaluate(basis.eigenvalues);
  Eigen::VectorXd diff = eigenfunctions_at(mesh, basis, x) - eigenfunctions_at(mesh, basis, y);
  return std::sqrt(std::max(0.0, diff.cwiseAbs2().dot(w)));
}

Eigen::Vector3d spectral_distance_gradient(const TriangleMesh& mesh, const SpectralBasis& basis,
                                           const SpectralWeights& weights, const MeshPoint& x,
                                           const MeshPoint& y) {
  Eigen::VectorXd w = weights.evaluate(basis.eigenvalues);
  Eigen::VectorXd diff = eigenfunctions_at(mesh, basis, x) - eigenfunctions_at(mesh, basis, y);
  double d = std::sqrt(std::max(0.0, diff.cwiseAbs2().dot(w)));
  RFM_REQUIRE(d >= 1e-12, NumericError, "spectral distance gradient at coincident points");
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (int i = 0; i < basis.k; ++i) {
    if (w(i) == 0.0) continue;
    g += w(i) * diff(i) * eigenfunction_gradient(mesh, basis, x.face, i);
  }
  return g / d;
}

}  // namespace rfm::mesh
