#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfm/geometry/manifold.hpp"
#include "rfm/mesh/mesh.hpp"

namespace rfm::data {

/// A set of manifold samples (one ambient row per sample) plus where they
/// came from.  Provenance is a free-form tag: the source file for ingested
/// data, or generator name + parameters + seed for synthetic data, so a
/// cached dataset can always be traced back.
struct Dataset {
  ManifoldDescriptor manifold{ManifoldKind::Sphere, 2};
  Eigen::MatrixXd points; /* n x ambient_dim */
  std::string provenance;

  int size() const { return static_cast<int>(points.rows()); }
  Point point(int i) const { return Point{manifold, points.row(i).transpose()}; }
};

/// Mesh counterpart: located points tied to a specific mesh by content hash.
struct MeshDataset {
  std::uint64_t mesh_hash = 0;
  std::vector<mesh::MeshPoint> points;
  std::string provenance;

  int size() const { return static_cast<int>(points.size()); }
};

/// Full invariant sweep: non-empty, and every row passes its manifold's
/// membership check.  Throws ContractViolation naming the first bad row.
void validate_dataset(const Dataset& ds);
void validate_mesh_dataset(const MeshDataset& ds, const mesh::TriangleMesh& mesh);

/// Deterministic 80/10/10 split: a seeded Fisher-Yates permutation of
/// 0..n-1 cut at floor(0.8 n) and floor(0.9 n).  Same (n, seed) gives the
/// same result on every platform.
struct SplitIndices {
  std::vector<int> train, val, test;
};
SplitIndices split_dataset(int n, std::uint64_t seed);

/// CSV with latitude,longitude columns in degrees (header auto-detected,
/// extra columns ignored, duplicates retained) -> unit-sphere points
///   x = (cos lat cos lon, cos lat sin lon, sin lat).
/// Out-of-range rows (|lat| > 90, |lon| > 360) are reported with their line
/// number.
Dataset ingest_latlon_csv(const std::string& path);

/// CSV with exactly `dims` angle columns -> flat-torus points wrapped into
/// [0, 2pi).  Values are degrees unless `radians` is set.
Dataset ingest_angles_csv(const std::string& path, int dims, bool radians = false);

/// Wrapped Gaussian on the `dim`-torus: one mean drawn uniformly from
/// [0, 2pi)^dim, then n i.i.d. wrapped samples at scale `sigma`.
/// sigma == 0 degenerates to n copies of the mean.
Dataset synth_wrapped_gaussian_tori(int dim, int n, std::uint64_t seed, double sigma = 0.2);

/// Wrapped Gaussian on SPD(dim): a random center (exponential of a scaled
/// symmetric Gaussian at the identity), then n tangent-space samples pushed
/// through the exponential map.
Dataset synth_wrapped_gaussian_spd(int dim, int n, std::uint64_t seed, double sigma = 0.2);

/// Versioned binary cache: manifold tag, provenance, flat coordinates.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Mesh datasets are cached with the mesh content hash; loading against a
/// different mesh is refused.
void save_mesh_dataset(const MeshDataset& ds, const std::string& path);
MeshDataset load_mesh_dataset(const std::string& path, const mesh::TriangleMesh& mesh);

}  // namespace rfm::data
