#include "icoseg/icosphere.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "icoseg/container.hpp"

namespace icoseg {

std::size_t IcosphereMesh::expected_vertices(int rank) {
  return 10u * (std::size_t{1} << (2 * rank)) + 2u;
}
std::size_t IcosphereMesh::expected_faces(int rank) {
  return 20u * (std::size_t{1} << (2 * rank));
}
std::size_t IcosphereMesh::expected_edges(int rank) {
  return 30u * (std::size_t{1} << (2 * rank));
}

std::size_t IcosphereMesh::edge_count() const {
  std::set<std::pair<std::int32_t, std::int32_t>> edges;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      std::int32_t a = f[e], b = f[(e + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  }
  return edges.size();
}

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double triple = std::abs(dot(a, cross(b, c)));
  const double denom = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
  if (triple <= 0.0 && denom <= 0.0)
    throw DataError("spherical_triangle_area: degenerate triangle");
  const double area = 2.0 * std::atan2(triple, denom);
  if (!(area > 0.0))
    throw DataError("spherical_triangle_area: degenerate triangle");
  return area;
}

namespace {

// Pole-aligned regular icosahedron; see the header for why this orientation.
void base_icosahedron(std::vector<Vec3>& verts,
                      std::vector<std::array<std::int32_t, 3>>& faces) {
  const double lat = std::atan(0.5);
  const double cz = std::sin(lat);
  const double cr = std::cos(lat);
  verts.clear();
  verts.push_back({0.0, 0.0, 1.0});
  for (int k = 0; k < 5; ++k) {
    const double lon = 2.0 * kPi * k / 5.0;
    verts.push_back({cr * std::cos(lon), cr * std::sin(lon), cz});
  }
  for (int k = 0; k < 5; ++k) {
    const double lon = 2.0 * kPi * k / 5.0 + kPi / 5.0;
    verts.push_back({cr * std::cos(lon), cr * std::sin(lon), -cz});
  }
  verts.push_back({0.0, 0.0, -1.0});

  faces.clear();
  auto u = [](int k) { return static_cast<std::int32_t>(1 + k % 5); };
  auto l = [](int k) { return static_cast<std::int32_t>(6 + k % 5); };
  for (int k = 0; k < 5; ++k) faces.push_back({0, u(k), u(k + 1)});
  for (int k = 0; k < 5; ++k) faces.push_back({u(k), l(k), u(k + 1)});
  for (int k = 0; k < 5; ++k) faces.push_back({u(k + 1), l(k), l(k + 1)});
  for (int k = 0; k < 5; ++k) faces.push_back({11, l(k + 1), l(k)});

  // Enforce outward (counterclockwise from outside) orientation.
  for (auto& f : faces) {
    const Vec3& a = verts[f[0]];
    const Vec3& b = verts[f[1]];
    const Vec3& c = verts[f[2]];
    const Vec3 centroid = scale(add(add(a, b), c), 1.0 / 3.0);
    if (dot(cross(sub(b, a), sub(c, a)), centroid) < 0.0) std::swap(f[1], f[2]);
  }
}

}  // namespace

IcosphereMesh build_icosphere(int rank, int max_rank) {
  if (rank < 0) throw ConfigError("icosphere rank must be non-negative");
  if (max_rank < 0 || rank > max_rank)
    throw ConfigError("icosphere rank " + std::to_string(rank) +
                      " exceeds maximum " + std::to_string(max_rank));

  IcosphereMesh mesh;
  mesh.rank = rank;
  base_icosahedron(mesh.vertices, mesh.faces);

  for (int r = 0; r < rank; ++r) {
    std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> midpoint;
    std::vector<std::array<std::int32_t, 3>> next_faces;
    next_faces.reserve(mesh.faces.size() * 4);

    auto mid = [&](std::int32_t a, std::int32_t b) -> std::int32_t {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 m = normalized(add(mesh.vertices[a], mesh.vertices[b]));
      const auto idx = static_cast<std::int32_t>(mesh.vertices.size());
      mesh.vertices.push_back(m);
      midpoint.emplace(key, idx);
      return idx;
    };

    for (const auto& f : mesh.faces) {
      const std::int32_t m01 = mid(f[0], f[1]);
      const std::int32_t m12 = mid(f[1], f[2]);
      const std::int32_t m20 = mid(f[2], f[0]);
      next_faces.push_back({f[0], m01, m20});
      next_faces.push_back({f[1], m12, m01});
      next_faces.push_back({f[2], m20, m12});
      next_faces.push_back({m01, m12, m20});
    }
    mesh.faces = std::move(next_faces);
  }

  // Adjacency from faces; kept sorted for deterministic downstream layouts.
  mesh.neighbors.assign(mesh.vertices.size(), {});
  {
    std::vector<std::set<std::int32_t>> adj(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
      for (int e = 0; e < 3; ++e) {
        const std::int32_t a = f[e], b = f[(e + 1) % 3];
        adj[a].insert(b);
        adj[b].insert(a);
      }
    }
    for (std::size_t i = 0; i < adj.size(); ++i)
      mesh.neighbors[i].assign(adj[i].begin(), adj[i].end());
  }

  mesh.area_weights = compute_area_weights(mesh, &mesh.raw_area_sum);
  return mesh;
}

std::vector<double> compute_area_weights(const IcosphereMesh& mesh,
                                         double* raw_sum_out) {
  std::vector<double> w(mesh.vertex_count(), 0.0);
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const double area = spherical_triangle_area(
        mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    total += area;
    const double share = area / 3.0;
    w[f[0]] += share;
    w[f[1]] += share;
    w[f[2]] += share;
  }
  if (raw_sum_out) *raw_sum_out = total;

  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  if (!(mean > 0.0)) throw DataError("area weights have non-positive mean");
  for (double& v : w) v /= mean;
  return w;
}

NeighborTable build_neighbor_table(const IcosphereMesh& mesh) {
  NeighborTable t;
  t.nodes = mesh.vertex_count();
  t.width = kNeighborWidth;
  t.indices.assign(t.nodes * t.width, 0);
  t.valid.assign(t.nodes * t.width, 0);
  for (std::size_t i = 0; i < t.nodes; ++i) {
    const auto& ring = mesh.neighbors[i];
    if (static_cast<int>(ring.size()) + 1 > t.width)
      throw DataError("vertex degree exceeds neighbor table width");
    t.indices[i * t.width] = static_cast<std::int32_t>(i);
    t.valid[i * t.width] = 1;
    for (std::size_t k = 0; k < ring.size(); ++k) {
      t.indices[i * t.width + 1 + k] = ring[k];
      t.valid[i * t.width + 1 + k] = 1;
    }
  }
  return t;
}

void write_mesh(const std::string& path, const IcosphereMesh& mesh) {
  Container c;
  c.kind = "mesh";
  c.meta["rank"] = std::to_string(mesh.rank);
  c.meta["raw_area_sum"] = f64_to_string(mesh.raw_area_sum);

  std::vector<double> verts(mesh.vertex_count() * 3);
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
    for (int d = 0; d < 3; ++d) verts[i * 3 + d] = mesh.vertices[i][d];
  c.add_f64("vertices", {mesh.vertex_count(), 3}, verts.data());

  std::vector<std::int32_t> faces(mesh.face_count() * 3);
  for (std::size_t i = 0; i < mesh.face_count(); ++i)
    for (int d = 0; d < 3; ++d) faces[i * 3 + d] = mesh.faces[i][d];
  c.add_i32("faces", {mesh.face_count(), 3}, faces.data());

  c.add_f64("area_weights", {mesh.vertex_count()}, mesh.area_weights.data());
  write_container(path, c);
}

IcosphereMesh read_mesh(const std::string& path) {
  const Container c = read_container(path, "mesh");
  IcosphereMesh mesh;
  mesh.rank = static_cast<int>(c.meta_i64("rank"));
  mesh.raw_area_sum = c.meta_f64("raw_area_sum");

  const auto verts = c.get_f64("vertices");
  if (verts.size() % 3 != 0) throw DataError("mesh vertices not 3-wide");
  mesh.vertices.resize(verts.size() / 3);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    mesh.vertices[i] = {verts[i * 3], verts[i * 3 + 1], verts[i * 3 + 2]};

  const auto faces = c.get_i32("faces");
  if (faces.size() % 3 != 0) throw DataError("mesh faces not 3-wide");
  mesh.faces.resize(faces.size() / 3);
  for (std::size_t i = 0; i < mesh.faces.size(); ++i)
    mesh.faces[i] = {faces[i * 3], faces[i * 3 + 1], faces[i * 3 + 2]};

  mesh.area_weights = c.get_f64("area_weights");
  if (mesh.area_weights.size() != mesh.vertices.size())
    throw DataError("mesh area weight count mismatch");

  mesh.neighbors.assign(mesh.vertices.size(), {});
  std::vector<std::set<std::int32_t>> adj(mesh.vertices.size());
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      adj[f[e]].insert(f[(e + 1) % 3]);
      adj[f[(e + 1) % 3]].insert(f[e]);
    }
  for (std::size_t i = 0; i < adj.size(); ++i)
    mesh.neighbors[i].assign(adj[i].begin(), adj[i].end());
  return mesh;
}

}  // namespace icoseg
