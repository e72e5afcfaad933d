// A posteriori machinery: explicit constants, data oscillation, nodal
// averaging, and the three global error estimators with their refinement
// indicators.

#ifndef HHO_ESTIMATORS_HPP
#define HHO_ESTIMATORS_HPP

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "basis.hpp"
#include "geometry.hpp"
#include "hho.hpp"
#include "quadrature.hpp"

namespace hho {

/// Explicit constants for right-isosceles triangulations, parametrized by the
/// maximal interior angle of the domain.
struct Constants {
  double omega_max;
  double M_bd;
  double c_apx;
  double C_st;
  double C_1;
  double C_2;
  double C_H;
  double C_P;
  double C_tr;
  double C_dT;
  double j11;  // first positive root of the Bessel function J_1
};

namespace detail {

inline double bessel_j1_root() {
  double lo = 3.8, hi = 3.9;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (std::cyl_bessel_j(1, lo) * std::cyl_bessel_j(1, mid) <= 0.0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo < 1e-15) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline Constants constants(double omega_max) {
  const double pi = std::acos(-1.0);
  Constants c;
  c.omega_max = omega_max;
  c.M_bd = 4.0 * std::max(pi, omega_max) / pi;
  c.c_apx = std::sqrt(3.0) / (2.0 - 2.0 * std::cos(pi / std::max(4.0, c.M_bd)));
  c.C_st = 1.0 + std::sqrt(72.0) * c.c_apx;
  c.j11 = detail::bessel_j1_root();
  c.C_1 = std::sqrt(1.0 / 48.0 + 1.0 / (c.j11 * c.j11) + c.c_apx * c.c_apx);
  c.C_tr = std::sqrt(5.0) / (3.0 * std::sqrt(2.0));
  c.C_2 = std::sqrt(c.C_1 * (c.C_1 + c.C_tr * c.C_st));
  c.C_H = 1.0;
  c.C_P = 1.0 / (std::sqrt(2.0) * pi);
  c.C_dT = 12.0 * c.C_P * (c.C_P + c.C_tr);
  return c;
}

/// Data oscillation osc_q(f): per-triangle h_T ||(1-Pi_q) f||_{L2(T)} and the
/// global root of the squared sum.  q = -1 means Pi = 0.
struct OscResult {
  double total;
  VectorXd local;
};

inline OscResult osc(const ScalarFn& f, const Mesh& mesh, int q, int qorder = 8) {
  OscResult r;
  r.local.resize(mesh.n_triangles());
  RuleTri ref = triangle_rule(std::max(qorder, q + 2));
  double sum2 = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, mesh, t);
    double res2 = 0.0;
    if (q < 0) {
      for (int i = 0; i < qr.w.size(); ++i) {
        double v = f(qr.x.col(i));
        res2 += qr.w[i] * v * v;
      }
    } else {
      CellBasis b(mesh, t, q);
      VectorXd c = l2_project(f, b, qr);
      for (int i = 0; i < qr.w.size(); ++i) {
        double d = f(qr.x.col(i)) - c.dot(b.eval(qr.x.col(i)));
        res2 += qr.w[i] * d * d;
      }
    }
    double hT = mesh.diameter(t);
    r.local[t] = hT * std::sqrt(std::max(0.0, res2));
    sum2 += r.local[t] * r.local[t];
  }
  r.total = std::sqrt(sum2);
  return r;
}

/// Conforming approximation by arithmetic averaging at the Lagrange nodes of
/// the principal lattice; boundary nodes are set to zero.  Shared nodes are
/// identified combinatorially (vertex id, or edge id + lattice position), so
/// the result is exactly single-valued, including across slit twins.
inline PiecewisePoly nodal_average(const PiecewisePoly& v, const Mesh& mesh) {
  const int d = v.degree();
  struct NodeKey {
    int kind;  // 0 vertex, 1 edge, 2 interior
    long id;
  };
  struct Acc {
    double sum = 0.0;
    int count = 0;
    bool bdry = false;
  };
  std::map<std::pair<int, long>, Acc> acc;

  std::vector<std::array<int, 3>> lattice;
  for (int i0 = d; i0 >= 0; --i0)
    for (int i1 = d - i0; i1 >= 0; --i1) lattice.push_back({i0, i1, d - i0 - i1});

  auto classify = [&](int t, const std::array<int, 3>& I) -> NodeKey {
    int zeros = (I[0] == 0) + (I[1] == 0) + (I[2] == 0);
    const auto& tv = mesh.triangles[t].v;
    if (zeros == 2) {
      int a = I[0] == d ? 0 : (I[1] == d ? 1 : 2);
      return {0, tv[a]};
    }
    if (zeros == 1) {
      int a = I[0] == 0 ? 0 : (I[1] == 0 ? 1 : 2);  // node on edge opposite a
      int e = mesh.tri_edges[t][a];
      int b = (a + 1) % 3, c = (a + 2) % 3;
      int pos = mesh.edges[e].a == tv[b] ? I[c] : I[b];
      return {1, static_cast<long>(e) * (d + 1) + pos};
    }
    return {2, static_cast<long>(t) * static_cast<long>(lattice.size())};
  };
  auto node_coord = [&](int t, const std::array<int, 3>& I) {
    const auto& tv = mesh.triangles[t].v;
    return ((I[0] * mesh.vertices[tv[0]] + I[1] * mesh.vertices[tv[1]] +
             I[2] * mesh.vertices[tv[2]]) /
            static_cast<double>(d))
        .eval();
  };

  for (int t = 0; t < mesh.n_triangles(); ++t) {
    for (std::size_t n = 0; n < lattice.size(); ++n) {
      NodeKey key = classify(t, lattice[n]);
      if (key.kind == 2) continue;
      Acc& a = acc[{key.kind, key.id}];
      a.sum += v.value(t, node_coord(t, lattice[n]));
      a.count += 1;
      if (key.kind == 0) a.bdry = mesh.vertex_bdry[key.id];
      if (key.kind == 1) a.bdry = mesh.edges[key.id / (d + 1)].boundary;
    }
  }

  PiecewisePoly out;
  out.bases = v.bases;
  out.coef.resize(mesh.n_triangles());
  const int nb = static_cast<int>(lattice.size());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    VectorXd vals(nb);
    MatrixXd V(nb, nb);
    for (int n = 0; n < nb; ++n) {
      Vector2d x = node_coord(t, lattice[n]);
      V.row(n) = (*v.bases)[t].eval(x);
      NodeKey key = classify(t, lattice[n]);
      if (key.kind == 2) {
        vals[n] = v.value(t, x);
      } else {
        const Acc& a = acc.at({key.kind, key.id});
        vals[n] = a.bdry ? 0.0 : a.sum / a.count;
      }
    }
    out.coef[t] = V.partialPivLu().solve(vals);
  }
  return out;
}

/// Squared broken-H1 distance of v to its nodal average, per triangle.
struct Defect {
  double total2;
  VectorXd local2;
};

inline Defect conformity_defect(const PiecewisePoly& v, const Mesh& mesh) {
  PiecewisePoly av = nodal_average(v, mesh);
  Defect d;
  d.local2 = VectorXd::Zero(mesh.n_triangles());
  RuleTri ref = triangle_rule(v.degree() + 1);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, mesh, t);
    VectorXd diff = v.coef[t] - av.coef[t];
    for (int q = 0; q < qr.w.size(); ++q) {
      Vector2d g = (*v.bases)[t].eval_grad(qr.x.col(q)).transpose() * diff;
      d.local2[t] += qr.w[q] * g.squaredNorm();
    }
  }
  d.total2 = d.local2.sum();
  return d;
}

struct EstimatorBreakdown {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  VectorXd local;  // squared refinement indicators

  double term(const std::string& name) const {
    for (const auto& [n, v] : terms)
      if (n == name) return v;
    throw std::out_of_range("no estimator term named " + name);
  }
};

namespace detail {

/// Jump of grad v across edge e ([.] = one-sided trace on the boundary).
inline Vector2d grad_jump(const Mesh& mesh, const PiecewisePoly& v, int e, const Vector2d& x) {
  const auto& E = mesh.edges[e];
  Vector2d g = v.grad(E.tplus, x);
  if (!E.boundary) g -= v.grad(E.tminus, x);
  return g;
}

inline double cross2(const Vector2d& a, const Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace detail

/// Refinement indicators |T| ||f + lap Ru||^2 + |T|^(1/2) sum_F ||[grad Ru]||^2
/// (tangential component only on boundary edges).
inline VectorXd eta_res_local(const HhoSpace& sp, const PiecewisePoly& Ru, const ScalarFn& f,
                              int qorder = -1) {
  const Mesh& mesh = sp.mesh();
  const int k = sp.k();
  const int m = qorder > 0 ? qorder : k + 6;
  VectorXd local = VectorXd::Zero(mesh.n_triangles());
  RuleTri ref = triangle_rule(m);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, mesh, t);
    double r2 = 0.0;
    for (int q = 0; q < qr.w.size(); ++q) {
      double r = f(qr.x.col(q)) + Ru.laplacian(t, qr.x.col(q));
      r2 += qr.w[q] * r * r;
    }
    local[t] += mesh.area(t) * r2;
  }
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const auto& E = mesh.edges[e];
    MappedRule qr = edge_rule(k + 2, mesh, e);
    double j2 = 0.0;
    for (int q = 0; q < qr.w.size(); ++q) {
      Vector2d g = detail::grad_jump(mesh, Ru, e, qr.x.col(q));
      double v2 = E.boundary ? std::pow(detail::cross2(g, E.normal), 2) : g.squaredNorm();
      j2 += qr.w[q] * v2;
    }
    local[E.tplus] += std::sqrt(mesh.area(E.tplus)) * j2;
    if (!E.boundary) local[E.tminus] += std::sqrt(mesh.area(E.tminus)) * j2;
  }
  return local;
}

/// Residual-based guaranteed upper bound.
inline EstimatorBreakdown eta_res(const HhoSpace& sp, const PiecewisePoly& Ru, const ScalarFn& f,
                                  const Constants& C, int qorder = -1) {
  const Mesh& mesh = sp.mesh();
  const int k = sp.k();
  const int m = qorder > 0 ? qorder : k + 6;
  RuleTri ref = triangle_rule(m);

  double eta1_2 = 0.0, eta2 = 0.0;
  if (k >= 1) {
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      MappedRule qr = map_to_triangle(ref, mesh, t);
      double r2 = 0.0;
      for (int q = 0; q < qr.w.size(); ++q) {
        double r = f(qr.x.col(q)) + Ru.laplacian(t, qr.x.col(q));
        r2 += qr.w[q] * r * r;
      }
      double hT = mesh.diameter(t);
      eta1_2 += hT * hT * r2;
    }
  } else {
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      MappedRule qr = map_to_triangle(ref, mesh, t);
      double fint = 0.0;
      for (int q = 0; q < qr.w.size(); ++q) fint += qr.w[q] * f(qr.x.col(q));
      double hT = mesh.diameter(t);
      eta1_2 += hT * hT * fint * fint / mesh.area(t);
    }
    eta2 = osc(f, mesh, 0, m).total;
  }

  double eta3_2 = 0.0, eta4_2 = 0.0;
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const auto& E = mesh.edges[e];
    double lw = trace_weight(mesh, e);
    MappedRule qr = edge_rule(k + 2, mesh, e);
    double jn2 = 0.0, jt2 = 0.0;
    for (int q = 0; q < qr.w.size(); ++q) {
      Vector2d g = detail::grad_jump(mesh, Ru, e, qr.x.col(q));
      if (!E.boundary) jn2 += qr.w[q] * std::pow(g.dot(E.normal), 2);
      jt2 += qr.w[q] * std::pow(detail::cross2(g, E.normal), 2);
    }
    eta3_2 += lw * jn2;
    eta4_2 += lw * jt2;
  }

  EstimatorBreakdown b;
  double eta1 = std::sqrt(eta1_2), eta3 = std::sqrt(eta3_2), eta4 = std::sqrt(eta4_2);
  double first = C.C_1 * eta1 + C.C_P * eta2 + C.C_2 * eta3;
  b.total = std::sqrt(first * first + C.C_H * C.C_H * C.C_2 * C.C_2 * eta4_2);
  b.terms = {{"eta1", eta1}, {"eta2", eta2}, {"eta3", eta3}, {"eta4", eta4}};
  b.local = eta_res_local(sp, Ru, f, qorder);
  return b;
}

/// Textbook residual estimator built on the HHO stabilization operator.
inline EstimatorBreakdown eta_hho(const HhoSpace& sp, const HhoVector& u,
                                  const PiecewisePoly& Ru, const ScalarFn& f, const Constants& C,
                                  int qorder = -1, const Defect* defect = nullptr) {
  const Mesh& mesh = sp.mesh();
  const int k = sp.k();
  const int m = qorder > 0 ? qorder : k + 6;
  RuleTri ref = triangle_rule(m);
  Defect own;
  if (!defect) {
    own = conformity_defect(Ru, mesh);
    defect = &own;
  }

  double vol2 = 0.0, res_gub2 = 0.0, stab_gub2 = 0.0;
  VectorXd local = VectorXd::Zero(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, mesh, t);
    double mean = 0.0;
    for (int q = 0; q < qr.w.size(); ++q)
      mean += qr.w[q] * (f(qr.x.col(q)) + Ru.laplacian(t, qr.x.col(q)));
    mean /= mesh.area(t);
    double r2 = 0.0;
    for (int q = 0; q < qr.w.size(); ++q) {
      double r = f(qr.x.col(q)) + Ru.laplacian(t, qr.x.col(q)) - mean;
      r2 += qr.w[q] * r * r;
    }
    double hT = mesh.diameter(t);
    VectorXd loc = sp.gather(u, t);
    double s2 = 0.0, sF2 = 0.0;
    for (int le = 0; le < 3; ++le) {
      double n2 = (sp.local(t).S[le] * loc).squaredNorm();
      s2 += C.C_dT * hT * n2;
      sF2 += n2;
    }
    double a = C.C_P * hT * std::sqrt(r2);
    vol2 += (a + std::sqrt(s2)) * (a + std::sqrt(s2));
    res_gub2 += a * a;
    stab_gub2 += s2;
    local[t] = mesh.area(t) * r2 + defect->local2[t] + std::sqrt(mesh.area(t)) * sF2;
  }

  EstimatorBreakdown b;
  b.total = std::sqrt(vol2 + defect->total2);
  b.terms = {{"volume", std::sqrt(res_gub2)},
             {"stabilization", std::sqrt(stab_gub2)},
             {"averaging", std::sqrt(defect->total2)}};
  b.local = local;
  return b;
}

/// Equilibration-based guaranteed upper bound; the flux contribution
/// ||Q_p - grad Ru|| arrives precomputed from the equilibration module
/// (global value and per-triangle squares).
inline EstimatorBreakdown eta_eq(const HhoSpace& sp, const ScalarFn& f, int p,
                                 double qdelta_norm, const VectorXd& qdelta_local2,
                                 const Constants& C, int qorder = -1,
                                 const Defect* defect = nullptr, const PiecewisePoly* Ru = nullptr) {
  const Mesh& mesh = sp.mesh();
  const int k = sp.k();
  const int m = qorder > 0 ? qorder : k + 6;
  Defect own;
  if (!defect) {
    if (!Ru) throw std::invalid_argument("eta_eq needs either a defect or Ru");
    own = conformity_defect(*Ru, mesh);
    defect = &own;
  }
  const int r = k == 0 ? 0 : k + p;
  OscResult osc_r = osc(f, mesh, r, m);
  OscResult osc_k = r == k ? osc_r : osc(f, mesh, k, m);

  EstimatorBreakdown b;
  double first = C.C_P * osc_r.total + qdelta_norm;
  b.total = std::sqrt(first * first + defect->total2);
  b.terms = {{"osc", osc_r.total}, {"flux", qdelta_norm}, {"averaging", std::sqrt(defect->total2)}};
  b.local = VectorXd::Zero(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t)
    b.local[t] = osc_k.local[t] * osc_k.local[t] + qdelta_local2[t] + defect->local2[t];
  return b;
}

}  // namespace hho

#endif
