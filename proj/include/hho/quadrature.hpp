// Gauss-Jacobi rules on [-1,1] and collapsed-coordinate product rules on the
// reference triangle {x,y >= 0, x+y <= 1}.

#ifndef HHO_QUADRATURE_HPP
#define HHO_QUADRATURE_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "geometry.hpp"

namespace hho {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Nodes/weights on [-1,1] for the weight (1-x)^alpha, alpha in {0,1}.
/// Exact for polynomials of degree 2m-1.  Nodes ascending.
struct Rule1d {
  VectorXd x, w;
};

inline Rule1d gauss_jacobi(int m, int alpha) {
  if (m < 1) throw std::invalid_argument("quadrature order must be positive");
  if (alpha != 0 && alpha != 1) throw std::invalid_argument("alpha must be 0 or 1");
  // Golub-Welsch on the symmetrized Jacobi recurrence.  The textbook Jacobi
  // weight is (1-x)^a (1+x)^b; here b = 0 and the sign convention puts the
  // singular factor at x = +1, so run the recurrence for (a,b) = (alpha,0).
  const double a = alpha, b = 0.0;
  MatrixXd J = MatrixXd::Zero(m, m);
  for (int n = 0; n < m; ++n) {
    double diag;
    if (n == 0)
      diag = (b - a) / (a + b + 2.0);
    else {
      double s = 2.0 * n + a + b;
      diag = (b * b - a * a) / (s * (s + 2.0));
    }
    J(n, n) = diag;
    if (n + 1 < m) {
      double nn = n + 1.0;
      double s = 2.0 * nn + a + b;
      double bn = 4.0 * nn * (nn + a) * (nn + b) * (nn + a + b) / (s * s * (s + 1.0) * (s - 1.0));
      J(n, n + 1) = J(n + 1, n) = std::sqrt(bn);
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  const double mu0 = 2.0;  // integral of (1-x)^alpha over [-1,1] for alpha in {0,1}
  Rule1d r;
  r.x = es.eigenvalues();
  r.w.resize(m);
  for (int i = 0; i < m; ++i) {
    double v = es.eigenvectors()(0, i);
    r.w[i] = mu0 * v * v;
  }
  return r;
}

/// m^2-point rule on the reference triangle, exact for total degree 2m-1.
struct RuleTri {
  Eigen::Matrix2Xd x;
  VectorXd w;
};

inline RuleTri triangle_rule(int m) {
  Rule1d gx = gauss_jacobi(m, 0);
  Rule1d gy = gauss_jacobi(m, 1);
  RuleTri r;
  r.x.resize(2, m * m);
  r.w.resize(m * m);
  int q = 0;
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k, ++q) {
      double X = gx.x[j], Y = gy.x[k];
      r.x(0, q) = (1.0 + X) * (1.0 - Y) / 4.0;
      r.x(1, q) = (1.0 + Y) / 2.0;
      r.w[q] = gx.w[j] * gy.w[k] / 8.0;
    }
  }
  return r;
}

/// Quadrature points/weights mapped to a physical entity.
struct MappedRule {
  Eigen::Matrix2Xd x;
  VectorXd w;
};

inline MappedRule map_to_triangle(const RuleTri& ref, const Mesh& mesh, int t) {
  const auto& v = mesh.triangles[t].v;
  const Vector2d p0 = mesh.vertices[v[0]];
  const Vector2d e1 = mesh.vertices[v[1]] - p0;
  const Vector2d e2 = mesh.vertices[v[2]] - p0;
  MappedRule r;
  const int n = static_cast<int>(ref.w.size());
  r.x.resize(2, n);
  for (int q = 0; q < n; ++q)
    r.x.col(q) = p0 + ref.x(0, q) * e1 + ref.x(1, q) * e2;
  r.w = 2.0 * mesh.area(t) * ref.w;
  return r;
}

/// Gauss-Legendre rule on the segment [p0, p1].
inline MappedRule segment_rule(int m, const Vector2d& p0, const Vector2d& p1) {
  Rule1d g = gauss_jacobi(m, 0);
  MappedRule r;
  r.x.resize(2, m);
  r.w.resize(m);
  const double len = (p1 - p0).norm();
  for (int q = 0; q < m; ++q) {
    double s = 0.5 * (1.0 + g.x[q]);
    r.x.col(q) = p0 + s * (p1 - p0);
    r.w[q] = 0.5 * len * g.w[q];
  }
  return r;
}

inline MappedRule edge_rule(int m, const Mesh& mesh, int e) {
  return segment_rule(m, mesh.vertices[mesh.edges[e].a], mesh.vertices[mesh.edges[e].b]);
}

}  // namespace hho

#endif
