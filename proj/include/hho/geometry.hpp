// Conforming 2D triangulations with newest-vertex bisection, facet
// orientation, vertex patches and trace weights.

#ifndef HHO_GEOMETRY_HPP
#define HHO_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace hho {

using Eigen::Vector2d;

enum class Domain { square, slit, lshape };

inline std::string to_string(Domain d) {
  switch (d) {
    case Domain::square: return "square";
    case Domain::slit: return "slit";
    case Domain::lshape: return "lshape";
  }
  throw std::logic_error("unknown domain");
}

inline Domain domain_from_string(const std::string& s) {
  if (s == "square") return Domain::square;
  if (s == "slit") return Domain::slit;
  if (s == "lshape") return Domain::lshape;
  throw std::invalid_argument("unknown domain id: " + s);
}

/// Conforming triangulation.  Immutable after construction; bisect()
/// produces a new mesh.
class Mesh {
 public:
  struct Triangle {
    std::array<int, 3> v;  // counterclockwise
    int refedge;           // local index: refinement edge is opposite v[refedge]
  };
  struct Edge {
    int a, b;         // vertex indices, a < b unless the pair is slit-twinned
    int tplus;        // first adjacent triangle (normal is its outward normal)
    int tminus;       // second adjacent triangle, -1 on the boundary
    Vector2d normal;  // unit, = outward normal of tplus
    bool boundary;
  };

  std::vector<Vector2d> vertices;
  std::vector<Triangle> triangles;
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> tri_edges;  // local edge i is opposite v[i]
  Domain domain_id = Domain::square;
  int level = 0;
  std::vector<int> parent;       // triangle -> index in the coarser mesh, -1 initially
  std::vector<bool> vertex_bdry; // vertex lies on some boundary edge
  std::vector<int> vertex_twin;  // geometrically coincident vertex (slit), else -1

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  std::array<int, 2> edge_vertices(int t, int le) const {
    const auto& v = triangles[t].v;
    return {v[(le + 1) % 3], v[(le + 2) % 3]};
  }

  double area(int t) const {
    const auto& v = triangles[t].v;
    Vector2d e1 = vertices[v[1]] - vertices[v[0]];
    Vector2d e2 = vertices[v[2]] - vertices[v[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  double diameter(int t) const {
    const auto& v = triangles[t].v;
    double h = 0.0;
    for (int i = 0; i < 3; ++i)
      h = std::max(h, (vertices[v[i]] - vertices[v[(i + 1) % 3]]).norm());
    return h;
  }

  double edge_length(int e) const {
    return (vertices[edges[e].b] - vertices[edges[e].a]).norm();
  }

  Vector2d centroid(int t) const {
    const auto& v = triangles[t].v;
    return (vertices[v[0]] + vertices[v[1]] + vertices[v[2]]) / 3.0;
  }

  /// Outward normal of triangle t on its local edge le.
  Vector2d outward_normal(int t, int le) const {
    auto [a, b] = edge_vertices(t, le);
    Vector2d tang = vertices[b] - vertices[a];
    Vector2d n(tang.y(), -tang.x());  // right-hand normal of CCW boundary
    return n / n.norm();
  }

  /// Builds the edge table and audits mesh invariants.
  static Mesh from_raw(std::vector<Vector2d> vertices, std::vector<Triangle> triangles,
                       Domain domain_id, int level, std::vector<int> parent = {});
};

namespace detail {

inline std::int64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace detail

inline Mesh Mesh::from_raw(std::vector<Vector2d> vertices, std::vector<Triangle> triangles,
                           Domain domain_id, int level, std::vector<int> parent) {
  Mesh m;
  m.vertices = std::move(vertices);
  m.triangles = std::move(triangles);
  m.domain_id = domain_id;
  m.level = level;
  m.parent = std::move(parent);
  if (m.parent.empty()) m.parent.assign(m.triangles.size(), -1);

  for (int t = 0; t < m.n_triangles(); ++t) {
    if (m.area(t) <= 0.0)
      throw std::logic_error("triangle " + std::to_string(t) + " is degenerate or clockwise");
    if (m.triangles[t].refedge < 0 || m.triangles[t].refedge > 2)
      throw std::logic_error("invalid refinement edge tag");
  }

  // Deterministic edge numbering: lexicographic by (min vertex, max vertex).
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> incidence;
  for (int t = 0; t < m.n_triangles(); ++t) {
    for (int le = 0; le < 3; ++le) {
      auto [a, b] = m.edge_vertices(t, le);
      incidence[{std::min(a, b), std::max(a, b)}].push_back({t, le});
    }
  }
  m.tri_edges.assign(m.triangles.size(), {-1, -1, -1});
  m.edges.reserve(incidence.size());
  for (const auto& [key, adj] : incidence) {
    if (adj.size() > 2) throw std::logic_error("edge shared by more than two triangles");
    Edge e;
    e.a = key.first;
    e.b = key.second;
    e.tplus = adj[0].first;
    e.tminus = adj.size() == 2 ? adj[1].first : -1;
    if (adj.size() == 2 && adj[1].first < adj[0].first) std::swap(e.tplus, e.tminus);
    e.boundary = adj.size() == 1;
    int le_plus = -1;
    for (const auto& [t, le] : adj) {
      m.tri_edges[t][le] = static_cast<int>(m.edges.size());
      if (t == e.tplus) le_plus = le;
    }
    e.normal = m.outward_normal(e.tplus, le_plus);
    m.edges.push_back(e);
  }

  m.vertex_bdry.assign(m.vertices.size(), false);
  for (const auto& e : m.edges)
    if (e.boundary) m.vertex_bdry[e.a] = m.vertex_bdry[e.b] = true;

  // Geometric coincidence map for slit twins (exact duplicates only).
  m.vertex_twin.assign(m.vertices.size(), -1);
  if (domain_id == Domain::slit) {
    std::map<std::pair<double, double>, std::vector<int>> by_coord;
    for (int i = 0; i < m.n_vertices(); ++i)
      by_coord[{m.vertices[i].x(), m.vertices[i].y()}].push_back(i);
    for (const auto& [c, group] : by_coord) {
      if (group.size() == 2) {
        m.vertex_twin[group[0]] = group[1];
        m.vertex_twin[group[1]] = group[0];
      } else if (group.size() > 2) {
        throw std::logic_error("more than two coincident vertices");
      }
    }
  }
  return m;
}

namespace detail {

// Level-0 meshes are unions of unit squares, each split along one diagonal.
// diag_main = true: bottom-left to top-right diagonal.
struct SquareCell {
  double x0, y0;
  bool diag_main;
};

inline Mesh initial_mesh(Domain dom, const std::vector<SquareCell>& cells) {
  std::vector<Vector2d> vertices;
  std::vector<Mesh::Triangle> tris;
  auto vertex_id = [&](double x, double y) {
    for (int i = 0; i < static_cast<int>(vertices.size()); ++i)
      if (vertices[i].x() == x && vertices[i].y() == y) return i;
    vertices.push_back(Vector2d(x, y));
    return static_cast<int>(vertices.size()) - 1;
  };
  for (const auto& c : cells) {
    int bl = vertex_id(c.x0, c.y0);
    int br = vertex_id(c.x0 + 1, c.y0);
    int tr = vertex_id(c.x0 + 1, c.y0 + 1);
    int tl = vertex_id(c.x0, c.y0 + 1);
    if (c.diag_main) {
      // hypotenuse bl-tr
      tris.push_back({{bl, br, tr}, 1});
      tris.push_back({{bl, tr, tl}, 2});
    } else {
      // hypotenuse tl-br
      tris.push_back({{bl, br, tl}, 0});
      tris.push_back({{br, tr, tl}, 1});
    }
  }
  return Mesh::from_raw(std::move(vertices), std::move(tris), dom, 0);
}

// Disconnect the two sides of the slit [0,1) x {0}: vertices with y = 0 and
// 0 < x <= 1 get a twin used by the triangles below the slit.  The slit tip
// (0,0) stays single so that its patch spans the full angle 2*pi.
inline Mesh cut_slit(const Mesh& in) {
  std::vector<Vector2d> vertices = in.vertices;
  std::vector<Mesh::Triangle> tris = in.triangles;
  std::unordered_map<int, int> twin;
  for (int i = 0; i < in.n_vertices(); ++i) {
    const Vector2d& p = in.vertices[i];
    if (p.y() == 0.0 && p.x() > 0.0 && p.x() <= 1.0) {
      vertices.push_back(p);
      twin[i] = static_cast<int>(vertices.size()) - 1;
    }
  }
  for (auto& t : tris) {
    bool below = false;
    for (int i = 0; i < 3; ++i) below = below || vertices[t.v[i]].y() < 0.0;
    if (!below) continue;
    for (int i = 0; i < 3; ++i) {
      auto it = twin.find(t.v[i]);
      if (it != twin.end()) t.v[i] = it->second;
    }
  }
  return Mesh::from_raw(std::move(vertices), std::move(tris), Domain::slit, 0);
}

}  // namespace detail

/// Bisects every marked triangle at least once and completes the closure to
/// the smallest conforming NVB refinement.
inline Mesh bisect(const Mesh& mesh, const std::vector<int>& marked) {
  if (marked.empty()) {
    Mesh copy = mesh;
    for (int t = 0; t < copy.n_triangles(); ++t) copy.parent[t] = t;
    return copy;
  }
  struct Work {
    std::array<int, 3> v;
    int refedge;
    int origin;
  };
  std::vector<Vector2d> vertices = mesh.vertices;
  std::vector<Work> work;
  work.reserve(2 * mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t)
    work.push_back({mesh.triangles[t].v, mesh.triangles[t].refedge, t});

  std::unordered_map<std::int64_t, int> midpoint;
  std::vector<char> need(work.size(), 0);
  for (int t : marked) {
    if (t < 0 || t >= mesh.n_triangles()) throw std::out_of_range("marked triangle out of range");
    need[t] = 1;
  }

  const int max_rounds = 10 * mesh.n_triangles();
  for (int round = 0;; ++round) {
    if (round > max_rounds) throw std::logic_error("NVB closure did not terminate");
    bool any = false;
    for (char c : need)
      if (c) { any = true; break; }
    if (!any) {
      // hanging-node scan
      for (std::size_t t = 0; t < work.size(); ++t) {
        for (int le = 0; le < 3; ++le) {
          int a = work[t].v[(le + 1) % 3], b = work[t].v[(le + 2) % 3];
          if (midpoint.count(detail::edge_key(a, b))) {
            need[t] = 1;
            any = true;
            break;
          }
        }
      }
    }
    if (!any) break;

    std::vector<Work> next;
    next.reserve(work.size() * 2);
    for (std::size_t t = 0; t < work.size(); ++t) {
      if (!need[t]) {
        next.push_back(work[t]);
        continue;
      }
      const Work& w = work[t];
      int c = w.v[w.refedge];
      int a = w.v[(w.refedge + 1) % 3];
      int b = w.v[(w.refedge + 2) % 3];
      auto key = detail::edge_key(a, b);
      auto it = midpoint.find(key);
      int m;
      if (it != midpoint.end()) {
        m = it->second;
      } else {
        vertices.push_back(0.5 * (vertices[a] + vertices[b]));
        m = static_cast<int>(vertices.size()) - 1;
        midpoint[key] = m;
      }
      next.push_back({{m, c, a}, 0, w.origin});
      next.push_back({{m, b, c}, 0, w.origin});
    }
    work = std::move(next);
    need.assign(work.size(), 0);
  }

  std::vector<Mesh::Triangle> tris;
  std::vector<int> parent;
  tris.reserve(work.size());
  parent.reserve(work.size());
  for (const auto& w : work) {
    tris.push_back({w.v, w.refedge});
    parent.push_back(w.origin);
  }
  return Mesh::from_raw(std::move(vertices), std::move(tris), mesh.domain_id, mesh.level + 1,
                        std::move(parent));
}

/// Coarsest right-isosceles mesh of the requested domain, uniformly
/// bisection-refined `refinement_level` times (one all-triangle sweep per
/// level; the mesh size h shrinks by sqrt(2) per sweep).
inline Mesh build_domain(Domain dom, int refinement_level) {
  Mesh m;
  switch (dom) {
    case Domain::square:
      m = detail::initial_mesh(dom, {{0, 0, true}});
      break;
    case Domain::lshape:
      // diagonals meet at the re-entrant corner (0,0)
      m = detail::initial_mesh(dom, {{-1, -1, true}, {0, -1, false}, {-1, 0, false}});
      break;
    case Domain::slit:
      // diagonals meet at the slit tip (0,0)
      m = detail::cut_slit(detail::initial_mesh(
          dom, {{0, 0, true}, {-1, 0, false}, {-1, -1, true}, {0, -1, false}}));
      break;
  }
  for (int l = 0; l < refinement_level; ++l) {
    std::vector<int> all(m.n_triangles());
    for (int t = 0; t < m.n_triangles(); ++t) all[t] = t;
    m = bisect(m, all);
    m.level = l + 1;
  }
  return m;
}

/// Piecewise constant trace-inequality weight per edge (n = 2).
inline double trace_weight(const Mesh& mesh, int e) {
  const auto& E = mesh.edges[e];
  const double len = mesh.edge_length(e);
  if (E.boundary) {
    int t = E.tplus;
    double h = mesh.diameter(t);
    return 3.0 * h * h * len / mesh.area(t);
  }
  double hp = mesh.diameter(E.tplus), hm = mesh.diameter(E.tminus);
  double denom = mesh.area(E.tplus) / (hp * hp) + mesh.area(E.tminus) / (hm * hm);
  return 3.0 * len / denom;
}

/// Vertex patch: triangles T_1..T_N ordered counterclockwise so that
/// consecutive ones share the spider edge E_a = T_a cap T_{a+1}.
struct Patch {
  int center = -1;
  bool interior = false;
  std::vector<int> tris;           // T_1..T_N
  std::vector<int> spider_edges;   // E_0..E_N (global edge indices, E_0 == E_N iff interior)
};

inline Patch vertex_patch(const Mesh& mesh, int z) {
  struct Star {
    int tri;
    int in_edge;   // global edge (z, v_{i+1}) — clockwise side of the triangle at z
    int out_edge;  // global edge (z, v_{i+2})
  };
  std::vector<Star> star;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& v = mesh.triangles[t].v;
    for (int i = 0; i < 3; ++i) {
      if (v[i] != z) continue;
      // edge (z, v_{i+1}) is local edge i+2, edge (z, v_{i+2}) is local edge i+1
      star.push_back({t, mesh.tri_edges[t][(i + 2) % 3], mesh.tri_edges[t][(i + 1) % 3]});
    }
  }
  if (star.empty()) throw std::invalid_argument("vertex has no adjacent triangle");

  std::unordered_map<int, int> by_in_edge;
  int n_bdry_in = 0;
  int start = -1;
  for (int i = 0; i < static_cast<int>(star.size()); ++i) {
    by_in_edge[star[i].in_edge] = i;
    if (mesh.edges[star[i].in_edge].boundary) {
      ++n_bdry_in;
      start = i;
    }
  }
  Patch p;
  p.center = z;
  p.interior = n_bdry_in == 0;
  if (!p.interior && n_bdry_in != 1)
    throw std::logic_error("non-manifold vertex star at vertex " + std::to_string(z));
  if (p.interior) {
    // deterministic start: smallest spider-edge index as E_0
    int best = 1 << 30;
    for (int i = 0; i < static_cast<int>(star.size()); ++i)
      if (star[i].in_edge < best) { best = star[i].in_edge; start = i; }
  }
  int cur = start;
  p.spider_edges.push_back(star[start].in_edge);
  for (std::size_t count = 0; count < star.size(); ++count) {
    p.tris.push_back(star[cur].tri);
    p.spider_edges.push_back(star[cur].out_edge);
    auto it = by_in_edge.find(star[cur].out_edge);
    if (it == by_in_edge.end()) {
      if (count + 1 != star.size() || p.interior)
        throw std::logic_error("non-manifold vertex star at vertex " + std::to_string(z));
      break;
    }
    cur = it->second;
  }
  if (p.tris.size() != star.size())
    throw std::logic_error("non-manifold vertex star at vertex " + std::to_string(z));
  if (p.interior && p.spider_edges.front() != p.spider_edges.back())
    throw std::logic_error("interior patch chain did not close");
  return p;
}

// ---------------------------------------------------------------------------
// Mesh export/import: plain-text "hho-mesh v1" format with exact decimal
// round-trip (17 significant digits).

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_mesh(std::ostream& os, const Mesh& m) {
  os << "hho-mesh v1 " << m.n_vertices() << ' ' << m.n_triangles() << ' ' << m.n_edges() << '\n';
  for (const auto& p : m.vertices)
    os << format_double(p.x()) << ' ' << format_double(p.y()) << '\n';
  for (const auto& t : m.triangles)
    os << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.refedge << '\n';
  for (const auto& e : m.edges)
    os << e.a << ' ' << e.b << ' ' << e.tplus << ' ' << e.tminus << ' ' << (e.boundary ? 1 : 0)
       << '\n';
}

inline Mesh read_mesh(std::istream& is, Domain dom = Domain::square, int level = 0) {
  std::string magic, version;
  int nv, nt, ne;
  if (!(is >> magic >> version >> nv >> nt >> ne) || magic != "hho-mesh" || version != "v1")
    throw std::runtime_error("not an hho-mesh v1 file");
  std::vector<Vector2d> vertices(nv);
  for (auto& p : vertices) is >> p.x() >> p.y();
  std::vector<Mesh::Triangle> tris(nt);
  for (auto& t : tris) is >> t.v[0] >> t.v[1] >> t.v[2] >> t.refedge;
  for (int i = 0; i < ne; ++i) {
    int a, b, tp, tm, bd;
    is >> a >> b >> tp >> tm >> bd;
  }
  if (!is) throw std::runtime_error("truncated hho-mesh file");
  return Mesh::from_raw(std::move(vertices), std::move(tris), dom, level);
}

}  // namespace hho

#endif
