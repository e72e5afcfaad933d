// Shared helpers for the test suites: conforming P1 fields by vertex values
// and quadrature-based energy norms.

#ifndef HHO_TEST_UTIL_HPP
#define HHO_TEST_UTIL_HPP

#include <random>

#include "hho/basis.hpp"
#include "hho/geometry.hpp"
#include "hho/hho.hpp"
#include "hho/quadrature.hpp"

namespace hho_test {

using namespace hho;

/// Continuous piecewise affine field given by one value per mesh vertex.
struct P1Field {
  const Mesh* mesh = nullptr;
  VectorXd vals;

  double value(int t, const Vector2d& x) const {
    const auto& v = mesh->triangles[t].v;
    const Vector2d a = mesh->vertices[v[0]], b = mesh->vertices[v[1]], c = mesh->vertices[v[2]];
    double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    double l1 = ((x - a).x() * (c - a).y() - (x - a).y() * (c - a).x()) / det;
    double l2 = ((b - a).x() * (x - a).y() - (b - a).y() * (x - a).x()) / det;
    return vals[v[0]] * (1.0 - l1 - l2) + vals[v[1]] * l1 + vals[v[2]] * l2;
  }

  Vector2d grad(int t) const {
    const auto& v = mesh->triangles[t].v;
    const Vector2d a = mesh->vertices[v[0]], b = mesh->vertices[v[1]], c = mesh->vertices[v[2]];
    double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    Vector2d gl1((c - a).y() / det, -(c - a).x() / det);
    Vector2d gl2(-(b - a).y() / det, (b - a).x() / det);
    return vals[v[1]] * gl1 + vals[v[2]] * gl2 +
           vals[v[0]] * (-gl1 - gl2);
  }
};

inline P1Field random_p1_zero_bdry(const Mesh& mesh, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  P1Field w;
  w.mesh = &mesh;
  w.vals = VectorXd::Zero(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v)
    if (!mesh.vertex_bdry[v]) w.vals[v] = U(rng);
  return w;
}

/// Hat function of vertex z (1 at z, 0 elsewhere).
inline P1Field hat(const Mesh& mesh, int z) {
  P1Field w;
  w.mesh = &mesh;
  w.vals = VectorXd::Zero(mesh.n_vertices());
  w.vals[z] = 1.0;
  return w;
}

inline HhoVector interpolate_p1(const HhoSpace& space, const P1Field& w) {
  const Mesh& m = space.mesh();
  auto cellfn = [&](int t, const Vector2d& x) { return w.value(t, x); };
  auto edgefn = [&](int e, const Vector2d& x) {
    double s = space.edge_basis(e).param(x);
    return w.vals[m.edges[e].a] * (1.0 - s) + w.vals[m.edges[e].b] * s;
  };
  return space.interpolate_piecewise(cellfn, edgefn);
}

inline HhoVector random_hho_vector(const HhoSpace& space, std::mt19937& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  HhoVector v = space.zero_vector();
  for (int i = 0; i < v.cell.size(); ++i) v.cell[i] = N(rng);
  for (int i = 0; i < v.facet.size(); ++i) v.facet[i] = N(rng);
  return v;
}

/// sqrt(sum_T int_T |grad u - grad p|^2) for an exact gradient.
inline double energy_error(const Mesh& mesh, const PiecewisePoly& p,
                           const std::function<Vector2d(const Vector2d&)>& grad_u, int qorder) {
  RuleTri ref = triangle_rule(qorder);
  double e2 = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, mesh, t);
    for (int q = 0; q < qr.w.size(); ++q) {
      Vector2d d = grad_u(qr.x.col(q)) - p.grad(t, qr.x.col(q));
      e2 += qr.w[q] * d.squaredNorm();
    }
  }
  return std::sqrt(e2);
}

inline double broken_h1_norm(const Mesh& mesh, const PiecewisePoly& p, int qorder) {
  return energy_error(mesh, p, [](const Vector2d&) { return Vector2d::Zero().eval(); }, qorder);
}

}  // namespace hho_test

#endif
