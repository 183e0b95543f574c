#include "bscch/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "bscch/errors.hpp"

namespace bscch {

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

template <typename T>
void fnv_mix(std::uint64_t& h, const T& v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
}

}  // namespace

BulkSurfaceMesh::BulkSurfaceMesh(std::vector<Eigen::Vector2d> nodes,
                                 std::vector<std::array<int, 3>> triangles,
                                 std::vector<int> surface_nodes)
    : nodes_(std::move(nodes)), triangles_(std::move(triangles)), surface_nodes_(std::move(surface_nodes)) {
  trace_map_.assign(nodes_.size(), -1);
  for (int i = 0; i < num_surface(); ++i) {
    const int b = surface_nodes_[i];
    if (b < 0 || b >= num_bulk()) throw Error(ErrorKind::Assembly, "surface node outside bulk node range");
    if (trace_map_[b] != -1) throw Error(ErrorKind::Assembly, "bulk node listed twice on the boundary");
    trace_map_[b] = i;
  }
  for (int b = 0; b < num_bulk(); ++b)
    if (trace_map_[b] < 0) interior_nodes_.push_back(b);
}

double BulkSurfaceMesh::signed_area(int tri) const {
  const auto& t = triangles_[tri];
  return 0.5 * cross(nodes_[t[1]] - nodes_[t[0]], nodes_[t[2]] - nodes_[t[0]]);
}

double BulkSurfaceMesh::boundary_length() const {
  double len = 0.0;
  for (int i = 0; i < num_surface(); ++i) {
    const int a = surface_nodes_[i], b = surface_nodes_[(i + 1) % num_surface()];
    len += (nodes_[b] - nodes_[a]).norm();
  }
  return len;
}

double BulkSurfaceMesh::polygon_area() const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t) a += signed_area(t);
  return a;
}

MeshQuality BulkSurfaceMesh::quality() const {
  MeshQuality q;
  q.min_area = std::numeric_limits<double>::infinity();
  q.min_edge = std::numeric_limits<double>::infinity();
  q.min_angle = std::numbers::pi;
  for (int t = 0; t < num_triangles(); ++t) {
    const auto& tri = triangles_[t];
    q.min_area = std::min(q.min_area, signed_area(t));
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d e1 = nodes_[tri[(k + 1) % 3]] - nodes_[tri[k]];
      const Eigen::Vector2d e2 = nodes_[tri[(k + 2) % 3]] - nodes_[tri[k]];
      q.max_edge = std::max(q.max_edge, e1.norm());
      q.min_edge = std::min(q.min_edge, e1.norm());
      const double ang = std::acos(std::clamp(e1.dot(e2) / (e1.norm() * e2.norm()), -1.0, 1.0));
      q.min_angle = std::min(q.min_angle, ang);
    }
  }
  return q;
}

void BulkSurfaceMesh::validate() const {
  if (num_triangles() == 0) throw Error(ErrorKind::Assembly, "mesh has no triangles");
  double scale = 0.0;
  for (const auto& p : nodes_) scale = std::max(scale, p.norm());
  for (int t = 0; t < num_triangles(); ++t) {
    for (int v : triangles_[t])
      if (v < 0 || v >= num_bulk())
        throw Error(ErrorKind::Assembly, "triangle " + std::to_string(t) + " has an invalid vertex");
    if (!(signed_area(t) > 1e-14 * scale * scale))
      throw Error(ErrorKind::Assembly,
                  "triangle " + std::to_string(t) + " is degenerate or negatively oriented");
  }
  // Boundary edges are edges owned by exactly one triangle; they must form the surface cycle.
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : triangles_)
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  std::size_t boundary_edges = 0;
  for (const auto& [e, c] : edge_count) {
    if (c > 2) throw Error(ErrorKind::Assembly, "non-manifold edge in mesh");
    if (c == 1) {
      ++boundary_edges;
      if (trace_map_[e.first] < 0 || trace_map_[e.second] < 0)
        throw Error(ErrorKind::Assembly, "boundary edge with a node missing from the surface cycle");
    }
  }
  if (boundary_edges != surface_nodes_.size())
    throw Error(ErrorKind::Assembly, "boundary does not form a single closed cycle");
  for (int i = 0; i < num_surface(); ++i) {
    int a = surface_nodes_[i], b = surface_nodes_[(i + 1) % num_surface()];
    auto it = edge_count.find({std::min(a, b), std::max(a, b)});
    if (it == edge_count.end() || it->second != 1)
      throw Error(ErrorKind::Assembly, "surface cycle step " + std::to_string(i) + " is not a boundary edge");
  }
}

std::uint64_t BulkSurfaceMesh::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : nodes_) {
    fnv_mix(h, p.x());
    fnv_mix(h, p.y());
  }
  for (const auto& t : triangles_)
    for (int v : t) fnv_mix(h, v);
  for (int s : surface_nodes_) fnv_mix(h, s);
  return h;
}

BulkSurfaceMesh build_disk_mesh(double radius, int level) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw Error(ErrorKind::InvalidParameter, "disk radius must be positive");
  if (level < 0) throw Error(ErrorKind::InvalidParameter, "refinement level must be >= 0");
  if (level > 8) throw Error(ErrorKind::Resource, "refinement level above 8 exceeds the resource limit");

  constexpr double pi = std::numbers::pi;
  std::vector<Eigen::Vector2d> nodes;
  nodes.emplace_back(0.0, 0.0);
  for (int k = 0; k < 6; ++k)
    nodes.emplace_back(0.5 * radius * std::cos(k * pi / 3), 0.5 * radius * std::sin(k * pi / 3));
  for (int j = 0; j < 12; ++j)
    nodes.emplace_back(radius * std::cos(j * pi / 6), radius * std::sin(j * pi / 6));
  auto inner = [](int k) { return 1 + (k % 6); };
  auto outer = [](int j) { return 7 + (j % 12); };

  std::vector<std::array<int, 3>> tris;
  for (int k = 0; k < 6; ++k) {
    tris.push_back({0, inner(k), inner(k + 1)});
    tris.push_back({inner(k), outer(2 * k), outer(2 * k + 1)});
    tris.push_back({inner(k), outer(2 * k + 1), inner(k + 1)});
    tris.push_back({inner(k + 1), outer(2 * k + 1), outer(2 * k + 2)});
  }
  std::vector<bool> on_circle(nodes.size(), false);
  for (int j = 0; j < 12; ++j) on_circle[outer(j)] = true;

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    std::map<std::pair<int, int>, int> owners;
    for (const auto& t : tris)
      for (int k = 0; k < 3; ++k) {
        int a = t[k], b = t[(k + 1) % 3];
        ++owners[{std::min(a, b), std::max(a, b)}];
      }
    auto mid = [&](int a, int b) {
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Eigen::Vector2d p = 0.5 * (nodes[a] + nodes[b]);
      const bool boundary = owners[key] == 1;
      if (boundary) p *= radius / p.norm();
      const int id = static_cast<int>(nodes.size());
      nodes.push_back(p);
      on_circle.push_back(boundary);
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const int m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
      next.push_back({t[0], m01, m20});
      next.push_back({m01, t[1], m12});
      next.push_back({m20, m12, t[2]});
      next.push_back({m01, m12, m20});
    }
    tris = std::move(next);
  }
  for (auto& t : tris) {
    const double a = cross(nodes[t[1]] - nodes[t[0]], nodes[t[2]] - nodes[t[0]]);
    if (a < 0) std::swap(t[1], t[2]);
  }

  std::vector<int> boundary;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (on_circle[i]) boundary.push_back(i);
  auto angle = [&](int i) {
    double a = std::atan2(nodes[i].y(), nodes[i].x());
    return a < 0 ? a + 2 * pi : a;
  };
  std::sort(boundary.begin(), boundary.end(), [&](int a, int b) { return angle(a) < angle(b); });

  BulkSurfaceMesh mesh(std::move(nodes), std::move(tris), std::move(boundary));
  mesh.validate();
  return mesh;
}

void write_vtk(const BulkSurfaceMesh& mesh, std::ostream& os,
               const std::vector<std::pair<std::string, Eigen::VectorXd>>& point_data) {
  os << "# vtk DataFile Version 3.0\n";
  os << "bulk-surface disk mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os.precision(17);
  os << "POINTS " << mesh.num_bulk() << " double\n";
  for (const auto& p : mesh.nodes()) os << p.x() << ' ' << p.y() << " 0\n";
  const int nt = mesh.num_triangles(), ns = mesh.num_surface();
  os << "CELLS " << nt + ns << ' ' << 4 * nt + 3 * ns << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (int i = 0; i < ns; ++i)
    os << "2 " << mesh.surface_nodes()[i] << ' ' << mesh.surface_nodes()[(i + 1) % ns] << '\n';
  os << "CELL_TYPES " << nt + ns << '\n';
  for (int i = 0; i < nt; ++i) os << "5\n";
  for (int i = 0; i < ns; ++i) os << "3\n";
  bool header = false;
  for (const auto& [name, values] : point_data) {
    if (values.size() != mesh.num_bulk()) continue;
    if (!header) {
      os << "POINT_DATA " << mesh.num_bulk() << '\n';
      header = true;
    }
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < values.size(); ++i) os << values[i] << '\n';
  }
}

}  // namespace bscch
