#include "rfm/mesh/maze.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>

#include "rfm/core/error.hpp"
#include "rfm/core/io.hpp"
#include "rfm/core/rng.hpp"

namespace rfm::mesh {

namespace {
constexpr int kCell = 8; /* cell side in unit squares */
constexpr int kWall = 2; /* wall / passage thickness in unit squares */
constexpr int kPitch = kCell + kWall;
}  // namespace

Maze generate_maze(int rows, int cols, std::uint64_t seed) {
  RFM_REQUIRE(rows >= 1 && cols >= 1 && rows * cols >= 2, ParseError,
              "maze needs at least two cells");
  Maze maze;
  maze.rows = rows;
  maze.cols = cols;
  maze.seed = seed;

  /* BFS spanning tree over the cell grid with seeded neighbor shuffling */
  Rng rng = Rng::derive(seed, 0x6d617a65ull /* 'maze' */);
  int ncells = rows * cols;
  std::vector<char> visited(ncells, 0);
  std::queue<int> frontier;
  int start = static_cast<int>(rng.uniform_int(ncells));
  visited[start] = 1;
  frontier.push(start);
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  while (!frontier.empty()) {
    int cell = frontier.front();
    frontier.pop();
    int r = cell / cols, c = cell % cols;
    int order[4] = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    for (int i = 0; i < 4; ++i) {
      int rr = r + dr[order[i]], cc = c + dc[order[i]];
      if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
      int next = rr * cols + cc;
      if (visited[next]) continue;
      visited[next] = 1;
      maze.passages.emplace_back(cell, next);
      frontier.push(next);
    }
  }

  /* rasterize occupied unit squares: cells are 8x8 blocks at pitch 10,
     passages fill the 2-thick gap between adjacent cells */
  std::map<std::pair<int, int>, char> occupied;
  auto fill_rect = [&](int x0, int y0, int w, int h) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) occupied[{x, y}] = 1;
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) fill_rect(c * kPitch, r * kPitch, kCell, kCell);
  for (auto [a, b] : maze.passages) {
    int ra = a / cols, ca = a % cols, rb = b / cols, cb = b % cols;
    if (ra == rb) { /* horizontal neighbors: 2 wide x 8 tall connector */
      int c_left = std::min(ca, cb);
      fill_rect(c_left * kPitch + kCell, ra * kPitch, kWall, kCell);
    } else { /* vertical neighbors: 8 wide x 2 tall connector */
      int r_low = std::min(ra, rb);
      fill_rect(ca * kPitch, r_low * kPitch + kCell, kCell, kWall);
    }
  }

  /* triangulate: two right triangles per occupied unit square, vertices
     deduplicated on the integer grid */
  int extent_x = cols * kPitch - kWall, extent_y = rows * kPitch - kWall;
  double extent = std::max(extent_x, extent_y);
  const double margin = 1e-3;
  const double scale = (1.0 - 2.0 * margin) / extent;
  std::map<std::pair<int, int>, int> vertex_id;
  std::vector<Eigen::Vector2d> verts;
  auto vid = [&](int x, int y) {
    auto it = vertex_id.find({x, y});
    if (it != vertex_id.end()) return it->second;
    int id = static_cast<int>(verts.size());
    verts.emplace_back(margin + x * scale, margin + y * scale);
    vertex_id[{x, y}] = id;
    return id;
  };
  std::vector<std::array<int, 3>> tris;
  for (const auto& [sq, flag] : occupied) {
    (void)flag;
    int x = sq.first, y = sq.second;
    int ll = vid(x, y), lr = vid(x + 1, y), ul = vid(x, y + 1), ur = vid(x + 1, y + 1);
    tris.push_back({ll, lr, ur});
    tris.push_back({ll, ur, ul});
  }

  maze.mesh.ambient_dim = 2;
  maze.mesh.vertices.resize(static_cast<long>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i)
    maze.mesh.vertices.row(i) << verts[i](0), verts[i](1), 0.0;
  maze.mesh.faces.resize(static_cast<long>(tris.size()), 3);
  for (std::size_t f = 0; f < tris.size(); ++f)
    maze.mesh.faces.row(f) << tris[f][0], tris[f][1], tris[f][2];
  maze.mesh.finalize();
  RFM_REQUIRE(is_edge_connected(maze.mesh), SolverError,
              "maze mesh is not connected (spanning tree construction broken)");

  maze.cell_width = kCell * scale;
  auto cell_center = [&](int r, int c) {
    return Eigen::Vector2d(margin + (c * kPitch + kCell / 2.0) * scale,
                           margin + (r * kPitch + kCell / 2.0) * scale);
  };
  maze.source_center = cell_center(rows / 2, cols / 2);
  maze.target_centers = {cell_center(0, 0), cell_center(0, cols - 1), cell_center(rows - 1, 0),
                         cell_center(rows - 1, cols - 1)};
  return maze;
}

std::string maze_sidecar_text(const Maze& maze) {
  std::ostringstream out;
  out << "maze " << maze.rows << " " << maze.cols << " seed " << maze.seed << "\n";
  out << "cell_width " << format_double(maze.cell_width) << "\n";
  out << "source " << maze.rows / 2 << " " << maze.cols / 2 << " "
      << format_double(maze.source_center(0)) << " " << format_double(maze.source_center(1))
      << "\n";
  const int corners[4][2] = {{0, 0}, {0, maze.cols - 1}, {maze.rows - 1, 0},
                             {maze.rows - 1, maze.cols - 1}};
  for (int i = 0; i < 4; ++i) {
    out << "target " << corners[i][0] << " " << corners[i][1] << " "
        << format_double(maze.target_centers[i](0)) << " "
        << format_double(maze.target_centers[i](1)) << "\n";
  }
  return out.str();
}

}  // namespace rfm::mesh
