#include "rfm/data/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>
#include <vector>

#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"
#include "rfm/core/rng.hpp"
#include "rfm/prob/distributions.hpp"

namespace rfm::data {

namespace {

constexpr std::uint64_t kDatasetMagic = 0x3154455341544144ull;  /* "DATASET1" */
constexpr std::uint64_t kMeshSetMagic = 0x315445534853454dull;  /* "MESHSET1" */
constexpr std::uint32_t kCacheVersion = 1;
constexpr double kPi = std::numbers::pi;

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == text.size()) break;
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    std::string f = line.substr(start, end == std::string::npos ? end : end - start);
    std::size_t a = f.find_first_not_of(" \t");
    std::size_t b = f.find_last_not_of(" \t");
    fields.push_back(a == std::string::npos ? std::string() : f.substr(a, b - a + 1));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return fields;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + s.size() && std::isfinite(out);
}

/// Rows of parsed numbers; the first line is skipped when any of its fields
/// fails to parse (a header).  `min_cols` < 0 demands an exact column count
/// of -min_cols.
std::vector<std::vector<double>> parse_csv(const std::string& path, int min_cols,
                                           std::vector<int>* line_numbers) {
  std::vector<std::string> lines = split_lines(read_file(path));
  RFM_REQUIRE(!lines.empty(), ParseError, path + ": empty file");
  std::vector<std::vector<double>> rows;
  bool first_content = true;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::vector<std::string> fields = split_fields(lines[li]);
    std::vector<double> row(fields.size());
    bool ok = true;
    for (std::size_t i = 0; i < fields.size(); ++i) ok = ok && parse_number(fields[i], row[i]);
    if (!ok) {
      RFM_REQUIRE(first_content, ParseError,
                  path + ":" + std::to_string(li + 1) + ": unparseable numeric field");
      first_content = false; /* header line */
      continue;
    }
    first_content = false;
    int need = min_cols < 0 ? -min_cols : min_cols;
    bool exact = min_cols < 0;
    RFM_REQUIRE(exact ? static_cast<int>(row.size()) == need
                      : static_cast<int>(row.size()) >= need,
                ParseError,
                path + ":" + std::to_string(li + 1) + ": expected " +
                    (exact ? "exactly " : "at least ") + std::to_string(need) +
                    " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
    if (line_numbers) line_numbers->push_back(static_cast<int>(li + 1));
  }
  RFM_REQUIRE(!rows.empty(), ParseError, path + ": no data rows");
  return rows;
}

}  // namespace

void validate_dataset(const Dataset& ds) {
  RFM_REQUIRE(ds.size() > 0, ContractViolation, "dataset is empty");
  RFM_REQUIRE(ds.points.cols() == ds.manifold.ambient_dim(), ContractViolation,
              "dataset width does not match " + ds.manifold.name());
  for (int i = 0; i < ds.size(); ++i) {
    try {
      geo::validate_point(ds.point(i));
    } catch (const Error& e) {
      throw ContractViolation("dataset row " + std::to_string(i) + ": " + e.what());
    }
  }
}

void validate_mesh_dataset(const MeshDataset& ds, const mesh::TriangleMesh& mesh) {
  RFM_REQUIRE(ds.size() > 0, ContractViolation, "dataset is empty");
  RFM_REQUIRE(ds.mesh_hash == mesh.content_hash, ContractViolation,
              "dataset was built for a different mesh (content hash mismatch)");
  for (int i = 0; i < ds.size(); ++i) {
    const mesh::MeshPoint& mp = ds.points[i];
    bool ok = mp.face >= 0 && mp.face < mesh.num_faces() && mp.bary.minCoeff() >= -1e-12 &&
              std::abs(mp.bary.sum() - 1.0) <= 1e-9;
    RFM_REQUIRE(ok, ContractViolation,
                "dataset row " + std::to_string(i) + ": invalid mesh point");
  }
}

SplitIndices split_dataset(int n, std::uint64_t seed) {
  RFM_REQUIRE(n > 0, ContractViolation, "cannot split an empty dataset");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng rng = Rng::derive(seed, /*a=*/0x74696c7073ull); /* dedicated stream for splits */
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  int n_train = static_cast<int>(0.8 * n);
  int n_val = static_cast<int>(0.1 * n);
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  return s;
}

Dataset ingest_latlon_csv(const std::string& path) {
  std::vector<int> line_numbers;
  std::vector<std::vector<double>> rows = parse_csv(path, /*min_cols=*/2, &line_numbers);
  Dataset ds;
  ds.manifold = ManifoldDescriptor{ManifoldKind::Sphere, 2};
  ds.points.resize(static_cast<int>(rows.size()), 3);
  constexpr double kDeg = kPi / 180.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double lat = rows[i][0], lon = rows[i][1];
    RFM_REQUIRE(std::abs(lat) <= 90.0 && std::abs(lon) <= 360.0, ParseError,
                path + ":" + std::to_string(line_numbers[i]) + ": lat/lon out of range (" +
                    format_double(lat) + ", " + format_double(lon) + ")");
    double phi = lat * kDeg, lam = lon * kDeg;
    Eigen::Vector3d x(std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam),
                      std::sin(phi));
    ds.points.row(i) = (x / x.norm()).transpose();
  }
  ds.provenance = "ingest-latlon " + path;
  return ds;
}

Dataset ingest_angles_csv(const std::string& path, int dims, bool radians) {
  RFM_REQUIRE(dims >= 1, ContractViolation, "torus dimension must be positive");
  std::vector<std::vector<double>> rows = parse_csv(path, /*min_cols=*/-dims, nullptr);
  Dataset ds;
  ds.manifold = ManifoldDescriptor{ManifoldKind::FlatTorus, dims};
  ds.points.resize(static_cast<int>(rows.size()), dims);
  constexpr double kDeg = kPi / 180.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::VectorXd a(dims);
    for (int d = 0; d < dims; ++d) a[d] = radians ? rows[i][d] : rows[i][d] * kDeg;
    ds.points.row(i) = geo::wrap_angles(a).transpose();
  }
  ds.provenance = "ingest-angles " + path + (radians ? " radians" : " degrees") +
                  " dims=" + std::to_string(dims);
  return ds;
}

Dataset synth_wrapped_gaussian_tori(int dim, int n, std::uint64_t seed, double sigma) {
  RFM_REQUIRE(dim >= 1, ContractViolation, "torus dimension must be positive");
  RFM_REQUIRE(n >= 1, ContractViolation, "need at least one sample");
  RFM_REQUIRE(sigma >= 0.0, ContractViolation, "scale must be non-negative");
  ManifoldDescriptor m{ManifoldKind::FlatTorus, dim};
  Rng rng(seed);
  Eigen::VectorXd mean(dim);
  for (int d = 0; d < dim; ++d) mean[d] = 2.0 * kPi * rng.uniform();
  Dataset ds;
  ds.manifold = m;
  ds.points.resize(n, dim);
  if (sigma == 0.0) {
    ds.points.rowwise() = mean.transpose();
  } else {
    prob::WrappedGaussian wg(Point{m, mean}, sigma);
    for (int i = 0; i < n; ++i) ds.points.row(i) = wg.sample(rng).transpose();
  }
  ds.provenance = "synth-wrapped-gaussian-tori dim=" + std::to_string(dim) +
                  " n=" + std::to_string(n) + " seed=" + std::to_string(seed) +
                  " sigma=" + format_double(sigma);
  return ds;
}

Dataset synth_wrapped_gaussian_spd(int dim, int n, std::uint64_t seed, double sigma) {
  RFM_REQUIRE(dim >= 2, ContractViolation, "SPD dimension must be at least 2");
  RFM_REQUIRE(n >= 1, ContractViolation, "need at least one sample");
  RFM_REQUIRE(sigma >= 0.0, ContractViolation, "scale must be non-negative");
  ManifoldDescriptor m{ManifoldKind::SPD, dim};
  Rng rng(seed);
  Eigen::MatrixXd t(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) t(i, j) = 0.5 * rng.normal();
  t = (0.5 * (t + t.transpose())).eval();
  Eigen::VectorXd id = Eigen::MatrixXd::Identity(dim, dim).reshaped();
  Point center = geo::exp_map(Point{m, id}, TangentVector{Point{m, id}, t.reshaped()});
  Dataset ds;
  ds.manifold = m;
  ds.points.resize(n, dim * dim);
  if (sigma == 0.0) {
    ds.points.rowwise() = center.x.transpose();
  } else {
    prob::WrappedGaussian wg(center, sigma);
    for (int i = 0; i < n; ++i) ds.points.row(i) = wg.sample(rng).transpose();
  }
  ds.provenance = "synth-wrapped-gaussian-spd dim=" + std::to_string(dim) +
                  " n=" + std::to_string(n) + " seed=" + std::to_string(seed) +
                  " sigma=" + format_double(sigma);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  BinaryWriter w;
  w.u64(kDatasetMagic);
  w.u32(kCacheVersion);
  w.str(ds.manifold.name());
  w.str(ds.provenance);
  w.mat(ds.points);
  atomic_write(path, w.buffer());
}

Dataset load_dataset(const std::string& path) {
  BinaryReader r = BinaryReader::from_file(path);
  RFM_REQUIRE(r.u64() == kDatasetMagic, ParseError, path + ": not a dataset cache");
  std::uint32_t ver = r.u32();
  RFM_REQUIRE(ver == kCacheVersion, ParseError,
              path + ": unsupported cache version " + std::to_string(ver));
  Dataset ds;
  ds.manifold = parse_manifold(r.str());
  ds.provenance = r.str();
  ds.points = r.mat();
  RFM_REQUIRE(ds.points.cols() == ds.manifold.ambient_dim() && ds.points.rows() > 0, ParseError,
              path + ": inconsistent cache payload");
  return ds;
}

void save_mesh_dataset(const MeshDataset& ds, const std::string& path) {
  BinaryWriter w;
  w.u64(kMeshSetMagic);
  w.u32(kCacheVersion);
  w.u64(ds.mesh_hash);
  w.str(ds.provenance);
  w.u64(static_cast<std::uint64_t>(ds.points.size()));
  for (const mesh::MeshPoint& mp : ds.points) {
    w.u32(static_cast<std::uint32_t>(mp.face));
    for (int k = 0; k < 3; ++k) w.f64(mp.bary[k]);
  }
  atomic_write(path, w.buffer());
}

MeshDataset load_mesh_dataset(const std::string& path, const mesh::TriangleMesh& mesh) {
  BinaryReader r = BinaryReader::from_file(path);
  RFM_REQUIRE(r.u64() == kMeshSetMagic, ParseError, path + ": not a mesh-dataset cache");
  std::uint32_t ver = r.u32();
  RFM_REQUIRE(ver == kCacheVersion, ParseError,
              path + ": unsupported cache version " + std::to_string(ver));
  MeshDataset ds;
  ds.mesh_hash = r.u64();
  RFM_REQUIRE(ds.mesh_hash == mesh.content_hash, CheckpointError,
              path + ": cache is stale (mesh content hash mismatch)");
  ds.provenance = r.str();
  std::uint64_t count = r.u64();
  ds.points.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    ds.points[i].face = static_cast<int>(r.u32());
    for (int k = 0; k < 3; ++k) ds.points[i].bary[k] = r.f64();
  }
  validate_mesh_dataset(ds, mesh);
  return ds;
}

}  // namespace rfm::data
