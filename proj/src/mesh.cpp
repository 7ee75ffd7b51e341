#include "rfm/mesh/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <sstream>

#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"

namespace rfm::mesh {

/* ------------------------------------------------------------------ BVH -- */

struct BVH {
  struct Node {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1; /* children; leaf when left < 0 */
    int begin = 0, end = 0;    /* face-id range for leaves */
  };
  std::vector<Node> nodes;
  std::vector<int> face_ids;

  static double box_dist2(const Eigen::Vector3d& q, const Eigen::Vector3d& lo,
                          const Eigen::Vector3d& hi) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      double d = std::max({lo(k) - q(k), 0.0, q(k) - hi(k)});
      d2 += d * d;
    }
    return d2;
  }

  int build(const TriangleMesh& mesh, std::vector<int>::iterator begin,
            std::vector<int>::iterator end, const std::vector<Eigen::Vector3d>& centroids) {
    Node node;
    node.lo.setConstant(std::numeric_limits<double>::infinity());
    node.hi.setConstant(-std::numeric_limits<double>::infinity());
    for (auto it = begin; it != end; ++it) {
      for (int c = 0; c < 3; ++c) {
        Eigen::Vector3d v = mesh.vertices.row(mesh.faces(*it, c));
        node.lo = node.lo.cwiseMin(v);
        node.hi = node.hi.cwiseMax(v);
      }
    }
    int count = static_cast<int>(end - begin);
    int idx = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (count <= 8) {
      nodes[idx].begin = static_cast<int>(begin - face_ids.begin());
      nodes[idx].end = nodes[idx].begin + count;
      return idx;
    }
    Eigen::Vector3d extent = node.hi - node.lo;
    int axis = 0;
    extent.maxCoeff(&axis);
    auto mid = begin + count / 2;
    std::nth_element(begin, mid, end, [&](int a, int b) {
      return centroids[a](axis) < centroids[b](axis);
    });
    int l = build(mesh, begin, mid, centroids);
    int r = build(mesh, mid, end, centroids);
    nodes[idx].left = l;
    nodes[idx].right = r;
    return idx;
  }
};

static std::shared_ptr<const BVH> build_bvh(const TriangleMesh& mesh) {
  auto bvh = std::make_shared<BVH>();
  bvh->face_ids.resize(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) bvh->face_ids[f] = f;
  std::vector<Eigen::Vector3d> centroids(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    centroids[f] = (mesh.vertices.row(mesh.faces(f, 0)) + mesh.vertices.row(mesh.faces(f, 1)) +
                    mesh.vertices.row(mesh.faces(f, 2))) /
                   3.0;
  }
  bvh->build(mesh, bvh->face_ids.begin(), bvh->face_ids.end(), centroids);
  return bvh;
}

/* --------------------------------------------------------- mesh basics -- */

void TriangleMesh::finalize() {
  const int nv = num_vertices(), nf = num_faces();
  RFM_REQUIRE(nv >= 3 && nf >= 1, ParseError, "mesh needs at least one triangle");
  RFM_REQUIRE(vertices.allFinite(), ParseError, "mesh has non-finite vertex coordinates");

  face_areas.resize(nf);
  face_normals.resize(nf, 3);
  vertex_faces.assign(nv, {});
  boundary_edges.clear();
  total_area = 0.0;

  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < nf; ++f) {
    for (int c = 0; c < 3; ++c) {
      int v = faces(f, c);
      RFM_REQUIRE(v >= 0 && v < nv, ParseError,
                  "face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                      " out of range");
    }
    Eigen::Vector3d a = vertices.row(faces(f, 0)), b = vertices.row(faces(f, 1)),
                    c3 = vertices.row(faces(f, 2));
    Eigen::Vector3d n = (b - a).cross(c3 - a);
    double area2 = n.norm();
    RFM_REQUIRE(area2 * 0.5 >= 1e-14, ParseError,
                "degenerate triangle at face " + std::to_string(f));
    face_areas(f) = 0.5 * area2;
    face_normals.row(f) = n / area2;
    total_area += face_areas(f);
    for (int c = 0; c < 3; ++c) {
      vertex_faces[faces(f, c)].push_back(f);
      int u = faces(f, c), v = faces(f, (c + 1) % 3);
      edge_faces[{std::min(u, v), std::max(u, v)}].push_back(f);
    }
  }
  for (const auto& [edge, fs] : edge_faces) {
    RFM_REQUIRE(fs.size() <= 2, ParseError,
                "non-manifold edge (" + std::to_string(edge.first) + "," +
                    std::to_string(edge.second) + ") shared by " + std::to_string(fs.size()) +
                    " faces");
    if (fs.size() == 1) boundary_edges.push_back({edge.first, edge.second, fs[0]});
  }

  std::vector<char> blob;
  blob.resize(sizeof(double) * vertices.size() + sizeof(int) * faces.size());
  std::memcpy(blob.data(), vertices.data(), sizeof(double) * vertices.size());
  std::memcpy(blob.data() + sizeof(double) * vertices.size(), faces.data(),
              sizeof(int) * faces.size());
  content_hash = fnv1a(blob.data(), blob.size());

  bvh = build_bvh(*this);
}

Eigen::Vector3d TriangleMesh::embed(const MeshPoint& p) const {
  RFM_REQUIRE(p.face >= 0 && p.face < num_faces(), ContractViolation, "mesh point face index");
  Eigen::Vector3d a = vertices.row(faces(p.face, 0)), b = vertices.row(faces(p.face, 1)),
                  c = vertices.row(faces(p.face, 2));
  return p.bary(0) * a + p.bary(1) * b + p.bary(2) * c;
}

Eigen::VectorXd TriangleMesh::embed_ambient(const MeshPoint& p) const {
  Eigen::Vector3d q = embed(p);
  return q.head(ambient_dim);
}

Eigen::Vector3d TriangleMesh::lift(const Eigen::VectorXd& ambient) const {
  RFM_REQUIRE(ambient.size() == ambient_dim, ContractViolation, "ambient dimension mismatch");
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  q.head(ambient.size()) = ambient;
  return q;
}

double TriangleMesh::membership_residual(const Eigen::Vector3d& q, const MeshPoint& p) const {
  return (q - embed(p)).norm();
}

/* -------------------------------------------------------------- loaders -- */

namespace {

void normalize_coords(TriangleMesh& m) {
  Eigen::Vector3d lo = m.vertices.colwise().minCoeff();
  Eigen::Vector3d hi = m.vertices.colwise().maxCoeff();
  double max_abs = std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff());
  if (max_abs < 1.0) return; /* already strictly inside (-1,1) */
  Eigen::RowVector3d center = 0.5 * (lo + hi).transpose();
  m.vertices.rowwise() -= center;
  double extent = m.vertices.cwiseAbs().maxCoeff();
  if (extent > 0) m.vertices *= (1.0 - 1e-6) / extent;
}

bool mesh_is_flat(const TriangleMesh& m) {
  return m.vertices.col(2).cwiseAbs().maxCoeff() == 0.0;
}

TriangleMesh parse_off(std::istream& in, const std::string& path) {
  std::string tok;
  in >> tok;
  RFM_REQUIRE(tok == "OFF", ParseError, path + ": missing OFF header");
  long nv = 0, nf = 0, ne = 0;
  in >> nv >> nf >> ne;
  RFM_REQUIRE(in.good() && nv > 0 && nf > 0, ParseError, path + ": bad OFF counts");
  TriangleMesh m;
  m.vertices.resize(nv, 3);
  for (long i = 0; i < nv; ++i) {
    in >> m.vertices(i, 0) >> m.vertices(i, 1) >> m.vertices(i, 2);
  }
  m.faces.resize(nf, 3);
  for (long f = 0; f < nf; ++f) {
    int deg = 0;
    in >> deg;
    RFM_REQUIRE(deg == 3, ParseError, path + ": only triangle faces supported (face " +
                                          std::to_string(f) + " has degree " +
                                          std::to_string(deg) + ")");
    in >> m.faces(f, 0) >> m.faces(f, 1) >> m.faces(f, 2);
  }
  RFM_REQUIRE(!in.fail(), ParseError, path + ": truncated OFF payload");
  return m;
}

TriangleMesh parse_obj(std::istream& in, const std::string& path) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Eigen::Vector3d v;
      ls >> v(0) >> v(1) >> v(2);
      RFM_REQUIRE(!ls.fail(), ParseError, path + ": bad vertex at line " + std::to_string(lineno));
      verts.push_back(v);
    } else if (tag == "f") {
      std::vector<int> ids;
      std::string vtok;
      while (ls >> vtok) {
        /* accept v, v/vt, v//vn, v/vt/vn */
        int id = 0;
        try {
          id = std::stoi(vtok.substr(0, vtok.find('/')));
        } catch (const std::exception&) {
          throw ParseError(path + ": bad face token at line " + std::to_string(lineno));
        }
        if (id < 0) id = static_cast<int>(verts.size()) + id + 1;
        ids.push_back(id - 1);
      }
      RFM_REQUIRE(ids.size() == 3, ParseError,
                  path + ": only triangle faces supported (line " + std::to_string(lineno) + ")");
      faces.push_back({ids[0], ids[1], ids[2]});
    }
  }
  RFM_REQUIRE(!verts.empty() && !faces.empty(), ParseError, path + ": no geometry found");
  TriangleMesh m;
  m.vertices.resize(static_cast<long>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) m.vertices.row(i) = verts[i];
  m.faces.resize(static_cast<long>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int c = 0; c < 3; ++c) m.faces(f, c) = faces[f][c];
  return m;
}

}  // namespace

TriangleMesh load_mesh(const std::string& path, bool normalize) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  TriangleMesh m;
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
  if (ext == "off") {
    m = parse_off(in, path);
  } else if (ext == "obj") {
    m = parse_obj(in, path);
  } else {
    throw ParseError("unsupported mesh format: " + path);
  }
  if (normalize) normalize_coords(m);
  m.ambient_dim = mesh_is_flat(m) ? 2 : 3;
  m.finalize();
  return m;
}

void save_off(const TriangleMesh& mesh, const std::string& path) {
  std::ostringstream out;
  out << "OFF\n" << mesh.num_vertices() << " " << mesh.num_faces() << " 0\n";
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << format_double(mesh.vertices(i, 0)) << " " << format_double(mesh.vertices(i, 1)) << " "
        << format_double(mesh.vertices(i, 2)) << "\n";
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    out << "3 " << mesh.faces(f, 0) << " " << mesh.faces(f, 1) << " " << mesh.faces(f, 2) << "\n";
  }
  atomic_write(path, out.str());
}

/* -------------------------------------------------------- closest point -- */

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                          Eigen::Vector3d* bary_out) {
  auto finish = [&](const Eigen::Vector3d& q, double u, double v, double w) {
    if (bary_out) *bary_out = Eigen::Vector3d(u, v, w);
    return q;
  };
  Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return finish(a, 1, 0, 0);

  Eigen::Vector3d bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return finish(b, 0, 1, 0);

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double v = d1 / (d1 - d3);
    return finish(a + v * ab, 1 - v, v, 0);
  }

  Eigen::Vector3d cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return finish(c, 0, 0, 1);

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double w = d2 / (d2 - d6);
    return finish(a + w * ac, 1 - w, 0, w);
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(b + w * (c - b), 0, 1 - w, w);
  }

  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return finish(a + ab * v + ac * w, 1 - v - w, v, w);
}

static void consider_face(const TriangleMesh& mesh, int f, const Eigen::Vector3d& q, double& best2,
                          MeshPoint& best) {
  Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0)), b = mesh.vertices.row(mesh.faces(f, 1)),
                  c = mesh.vertices.row(mesh.faces(f, 2));
  Eigen::Vector3d bary;
  Eigen::Vector3d cp = closest_point_on_triangle(q, a, b, c, &bary);
  double d2 = (cp - q).squaredNorm();
  if (d2 < best2) {
    best2 = d2;
    best.face = f;
    best.bary = bary;
  }
}

MeshPoint closest_point(const TriangleMesh& mesh, const Eigen::Vector3d& q, double* dist2_out) {
  RFM_REQUIRE(mesh.bvh != nullptr, ContractViolation, "mesh not finalized");
  const BVH& bvh = *mesh.bvh;
  double best2 = std::numeric_limits<double>::infinity();
  MeshPoint best;
  /* depth-first branch and bound */
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int ni = stack.back();
    stack.pop_back();
    const BVH::Node& node = bvh.nodes[ni];
    if (BVH::box_dist2(q, node.lo, node.hi) >= best2) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) consider_face(mesh, bvh.face_ids[i], q, best2, best);
    } else {
      double dl = BVH::box_dist2(q, bvh.nodes[node.left].lo, bvh.nodes[node.left].hi);
      double dr = BVH::box_dist2(q, bvh.nodes[node.right].lo, bvh.nodes[node.right].hi);
      /* visit the nearer child first */
      if (dl <= dr) {
        stack.push_back(node.right);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }
  if (dist2_out) *dist2_out = best2;
  return best;
}

MeshPoint closest_point_local(const TriangleMesh& mesh, const Eigen::Vector3d& q, int hint_face,
                              int rings, double* dist2_out) {
  if (hint_face < 0 || hint_face >= mesh.num_faces()) return closest_point(mesh, q, dist2_out);
  /* collect faces within `rings` rings of the hint by alternating
     face -> vertices -> faces expansion */
  std::vector<int> frontier{hint_face};
  std::vector<int> all{hint_face};
  std::vector<char> seen(mesh.num_faces(), 0);
  seen[hint_face] = 1;
  for (int r = 0; r < rings; ++r) {
    std::vector<int> next;
    for (int f : frontier) {
      for (int c = 0; c < 3; ++c) {
        for (int g : mesh.vertex_faces[mesh.faces(f, c)]) {
          if (!seen[g]) {
            seen[g] = 1;
            next.push_back(g);
            all.push_back(g);
          }
        }
      }
    }
    frontier = std::move(next);
  }
  double best2 = std::numeric_limits<double>::infinity();
  MeshPoint best;
  for (int f : all) consider_face(mesh, f, q, best2, best);
  if (dist2_out) *dist2_out = best2;
  return best;
}

/* ------------------------------------------------------------ primitives -- */

TriangleMesh subdivide_midpoint(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> midpoint_of;
  std::vector<Eigen::Vector3d> verts;
  verts.reserve(mesh.num_vertices() * 4);
  for (int i = 0; i < mesh.num_vertices(); ++i) verts.push_back(mesh.vertices.row(i));
  auto midpoint = [&](int u, int v) {
    auto key = std::make_pair(std::min(u, v), std::max(u, v));
    auto it = midpoint_of.find(key);
    if (it != midpoint_of.end()) return it->second;
    int id = static_cast<int>(verts.size());
    verts.push_back(0.5 * (verts[u] + verts[v]));
    midpoint_of[key] = id;
    return id;
  };
  TriangleMesh out;
  out.ambient_dim = mesh.ambient_dim;
  out.faces.resize(mesh.num_faces() * 4, 3);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    /* children of f occupy rows 4f..4f+3 (corner a, corner b, corner c, center) */
    out.faces.row(4 * f + 0) << a, ab, ca;
    out.faces.row(4 * f + 1) << ab, b, bc;
    out.faces.row(4 * f + 2) << ca, bc, c;
    out.faces.row(4 * f + 3) << ab, bc, ca;
  }
  out.vertices.resize(static_cast<long>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) out.vertices.row(i) = verts[i];
  out.finalize();
  return out;
}

TriangleMesh make_icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  const int F[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  TriangleMesh m;
  m.vertices.resize(12, 3);
  for (int i = 0; i < 12; ++i) m.vertices.row(i) = verts[i].normalized();
  m.faces.resize(20, 3);
  for (int f = 0; f < 20; ++f) m.faces.row(f) << F[f][0], F[f][1], F[f][2];
  m.finalize();
  for (int s = 0; s < subdivisions; ++s) {
    m = subdivide_midpoint(m);
    for (int i = 0; i < m.num_vertices(); ++i) m.vertices.row(i).normalize();
    m.finalize();
  }
  m.vertices *= radius;
  m.finalize();
  return m;
}

TriangleMesh make_grid_square(int nx, int ny) {
  RFM_REQUIRE(nx >= 1 && ny >= 1, ContractViolation, "grid square needs nx, ny >= 1");
  TriangleMesh m;
  m.ambient_dim = 2;
  m.vertices.resize((nx + 1) * (ny + 1), 3);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.vertices.row(j * (nx + 1) + i) << static_cast<double>(i) / nx - 0.5,
          static_cast<double>(j) / ny - 0.5, 0.0;
    }
  }
  m.faces.resize(2 * nx * ny, 3);
  int f = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int ll = j * (nx + 1) + i, lr = ll + 1, ul = ll + (nx + 1), ur = ul + 1;
      m.faces.row(f++) << ll, lr, ur;
      m.faces.row(f++) << ll, ur, ul;
    }
  }
  m.finalize();
  return m;
}

/* ------------------------------------------------------------- utilities -- */

Eigen::Vector3d face_gradient(const TriangleMesh& mesh, int face, const Eigen::Vector3d& vals) {
  Eigen::Vector3d a = mesh.vertices.row(mesh.faces(face, 0)),
                  b = mesh.vertices.row(mesh.faces(face, 1)),
                  c = mesh.vertices.row(mesh.faces(face, 2));
  Eigen::Vector3d n = mesh.face_normals.row(face);
  double inv2A = 1.0 / (2.0 * mesh.face_areas(face));
  Eigen::Vector3d ga = n.cross(c - b) * inv2A;
  Eigen::Vector3d gb = n.cross(a - c) * inv2A;
  Eigen::Vector3d gc = n.cross(b - a) * inv2A;
  return vals(0) * ga + vals(1) * gb + vals(2) * gc;
}

double interpolate(const TriangleMesh& mesh, const Eigen::VectorXd& vertex_values,
                   const MeshPoint& p) {
  RFM_REQUIRE(vertex_values.size() == mesh.num_vertices(), ContractViolation,
              "vertex value vector size mismatch");
  double v = 0.0;
  for (int c = 0; c < 3; ++c) v += p.bary(c) * vertex_values(mesh.faces(p.face, c));
  return v;
}

bool is_edge_connected(const TriangleMesh& mesh) {
  if (mesh.num_faces() == 0) return false;
  /* BFS over faces through shared vertices */
  std::vector<char> seen(mesh.num_faces(), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int f = q.front();
    q.pop();
    for (int c = 0; c < 3; ++c) {
      for (int g : mesh.vertex_faces[mesh.faces(f, c)]) {
        if (!seen[g]) {
          seen[g] = 1;
          ++count;
          q.push(g);
        }
      }
    }
  }
  return count == mesh.num_faces();
}

}  // namespace rfm::mesh
