#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bscch {

struct MeshQuality {
  double min_area = 0.0;
  double max_edge = 0.0;
  double min_edge = 0.0;
  /// Smallest interior angle over all triangles, radians.
  double min_angle = 0.0;
};

/// Triangulated disk with its boundary polyline. Surface node i sits on bulk node
/// surface_nodes[i]; the cycle runs counter-clockwise.
class BulkSurfaceMesh {
 public:
  BulkSurfaceMesh(std::vector<Eigen::Vector2d> nodes, std::vector<std::array<int, 3>> triangles,
                  std::vector<int> surface_nodes);

  int num_bulk() const { return static_cast<int>(nodes_.size()); }
  int num_surface() const { return static_cast<int>(surface_nodes_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  const std::vector<Eigen::Vector2d>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<int>& surface_nodes() const { return surface_nodes_; }
  /// Bulk node -> surface index, -1 for interior nodes.
  const std::vector<int>& trace_map() const { return trace_map_; }
  /// Bulk nodes that are not on the boundary, in increasing order.
  const std::vector<int>& interior_nodes() const { return interior_nodes_; }

  double signed_area(int tri) const;
  double boundary_length() const;
  double polygon_area() const;
  MeshQuality quality() const;
  /// Mesh scale: longest edge.
  double h() const { return quality().max_edge; }

  /// Checks orientation, non-degeneracy, the single closed boundary cycle and the trace bijection.
  /// Throws Error(Assembly) naming the offending entity.
  void validate() const;

  /// FNV-1a over coordinates and connectivity; used for the run manifest.
  std::uint64_t hash() const;

 private:
  std::vector<Eigen::Vector2d> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<int> surface_nodes_;
  std::vector<int> trace_map_;
  std::vector<int> interior_nodes_;
};

/// Disk of the given radius: 24-triangle base mesh, `level` uniform red refinements, boundary
/// midpoints projected onto the circle. Levels above 8 are rejected with Error(Resource).
BulkSurfaceMesh build_disk_mesh(double radius, int level);

/// Legacy VTK unstructured grid: triangles plus the boundary cycle as line cells.
/// Optional point data columns are written when their length matches the node count.
void write_vtk(const BulkSurfaceMesh& mesh, std::ostream& os,
               const std::vector<std::pair<std::string, Eigen::VectorXd>>& point_data = {});

}  // namespace bscch
