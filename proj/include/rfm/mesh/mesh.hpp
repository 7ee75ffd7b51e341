#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace rfm::mesh {

/// Point on a triangle mesh: face index + barycentric coordinates.
struct MeshPoint {
  int face = -1;
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
};

struct BVH; /* axis-aligned bounding-box tree over faces */

/// Triangle mesh with derived quantities used throughout the premetric /
/// flow code.  Vertices are stored in 3-D; flat 2-D domains (mazes) carry
/// ambient_dim == 2 and z == 0.
struct TriangleMesh {
  Eigen::MatrixXd vertices;  /* nv x 3 */
  Eigen::MatrixXi faces;     /* nf x 3 */
  int ambient_dim = 3;

  /* derived (filled by finalize()) */
  Eigen::VectorXd face_areas;
  Eigen::MatrixXd face_normals;                  /* nf x 3, unit */
  std::vector<std::vector<int>> vertex_faces;    /* incidence lists */
  std::vector<std::array<int, 3>> boundary_edges; /* (v0, v1, face) */
  double total_area = 0.0;
  std::uint64_t content_hash = 0;
  std::shared_ptr<const BVH> bvh;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }

  /// Validate connectivity/geometry and build derived data.  Throws
  /// ParseError on out-of-range indices, degenerate faces (area < 1e-14,
  /// reported with face index) or non-manifold edges.
  void finalize();

  Eigen::Vector3d embed(const MeshPoint& p) const;
  /// Ambient coordinates truncated to ambient_dim (drops z for flat meshes).
  Eigen::VectorXd embed_ambient(const MeshPoint& p) const;
  Eigen::Vector3d lift(const Eigen::VectorXd& ambient) const; /* pad z=0 if 2-D */

  /// Residual distance from q to the face plane patch of p (0 when p embeds q).
  double membership_residual(const Eigen::Vector3d& q, const MeshPoint& p) const;
};

/// Load OFF or OBJ (by extension).  When normalize is set and any coordinate
/// has |c| >= 1, the mesh is recentered on its bounding-box center and
/// uniformly scaled so coordinates lie strictly inside (-1, 1); meshes
/// already inside are left untouched so constructed domains (mazes, unit
/// squares) keep their coordinates.
TriangleMesh load_mesh(const std::string& path, bool normalize = true);
void save_off(const TriangleMesh& mesh, const std::string& path);

/// Exact closest point on the mesh (minimizes Euclidean distance over all
/// faces, BVH-accelerated).  Also returns the squared distance.
MeshPoint closest_point(const TriangleMesh& mesh, const Eigen::Vector3d& q,
                        double* dist2_out = nullptr);

/// Closest point restricted to faces within `rings` vertex-adjacency rings of
/// `hint_face`; used by flow integration where steps are local.  Falls back
/// to the global query if the hint is invalid.
MeshPoint closest_point_local(const TriangleMesh& mesh, const Eigen::Vector3d& q, int hint_face,
                              int rings = 2, double* dist2_out = nullptr);

/// Closest point on one triangle (Ericson-style case analysis).
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                          Eigen::Vector3d* bary_out = nullptr);

/// One round of 1-to-4 midpoint (Loop-connectivity) subdivision without any
/// smoothing: geometry stays piecewise linear on the input faces, children of
/// face f are emitted as faces 4f..4f+3.
TriangleMesh subdivide_midpoint(const TriangleMesh& mesh);

/// Icosphere: subdivided icosahedron re-projected to radius `radius`.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0 - 1e-9);

/// Axis-aligned unit-square grid [-0.5, 0.5]^2 with nx*ny*2 right triangles
/// (2-D ambient).
TriangleMesh make_grid_square(int nx, int ny);

/// Per-face gradient of the piecewise-linear interpolant of vertex values.
Eigen::Vector3d face_gradient(const TriangleMesh& mesh, int face, const Eigen::Vector3d& vals);

/// Interpolate per-vertex values at a mesh point.
double interpolate(const TriangleMesh& mesh, const Eigen::VectorXd& vertex_values,
                   const MeshPoint& p);

bool is_edge_connected(const TriangleMesh& mesh);

}  // namespace rfm::mesh
