#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfm/mesh/mesh.hpp"

namespace rfm::mesh {

/// Randomly generated maze domain: rows x cols cells of 8x8 unit squares,
/// open passages of 2x8 (or 8x2) squares where the BFS spanning tree over the
/// cell grid has an edge, every unit square split into two congruent right
/// triangles.  Coordinates are normalized to lie strictly inside (0, 1)^2.
struct Maze {
  TriangleMesh mesh;
  int rows = 0, cols = 0;
  std::uint64_t seed = 0;
  double cell_width = 0.0;                     /* side of the 8x8 cell, normalized */
  Eigen::Vector2d source_center;               /* middle cell */
  std::vector<Eigen::Vector2d> target_centers; /* the 4 corner cells */
  std::vector<std::pair<int, int>> passages;   /* spanning-tree edges (cell index pairs) */

  int cell_index(int r, int c) const { return r * cols + c; }
};

Maze generate_maze(int rows, int cols, std::uint64_t seed);

/// Sidecar text (source/target cell coordinates etc.) written next to the OFF.
std::string maze_sidecar_text(const Maze& maze);

}  // namespace rfm::mesh
