// Scaled monomials, L2-orthonormal cell/edge bases and broken polynomial
// fields with pointwise evaluation of values, gradients and Laplacians.

#ifndef HHO_BASIS_HPP
#define HHO_BASIS_HPP

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "geometry.hpp"
#include "quadrature.hpp"

namespace hho {

inline int n_poly_2d(int d) { return (d + 1) * (d + 2) / 2; }

/// Bivariate monomial exponents up to total degree d, graded, within each
/// degree the x-exponent descends.
inline std::vector<std::array<int, 2>> monomial_powers(int d) {
  std::vector<std::array<int, 2>> p;
  p.reserve(n_poly_2d(d));
  for (int deg = 0; deg <= d; ++deg)
    for (int i = deg; i >= 0; --i) p.push_back({i, deg - i});
  return p;
}

namespace detail {

inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace detail

/// L2(T)-orthonormal polynomial basis expressed in monomials of
/// (x - center)/h.  The first function is the constant |T|^{-1/2}.
class CellBasis {
 public:
  CellBasis() = default;

  CellBasis(const Mesh& mesh, int t, int degree)
      : degree_(degree), powers_(monomial_powers(degree)) {
    center_ = mesh.centroid(t);
    h_ = mesh.diameter(t);
    const int n = size();
    MappedRule qr = map_to_triangle(triangle_rule(degree + 1), mesh, t);
    MatrixXd V(qr.w.size(), n);
    for (int q = 0; q < qr.w.size(); ++q) V.row(q) = mono_eval(qr.x.col(q));
    MatrixXd M = V.transpose() * qr.w.asDiagonal() * V;
    Eigen::LLT<MatrixXd> llt(M);
    coeff_ = llt.matrixL()
                 .solve(MatrixXd::Identity(n, n));  // rows: orthonormal functions
  }

  int degree() const { return degree_; }
  int size() const { return n_poly_2d(degree_); }
  const Vector2d& center() const { return center_; }
  double scale() const { return h_; }
  const MatrixXd& coeff() const { return coeff_; }
  const std::vector<std::array<int, 2>>& powers() const { return powers_; }

  /// Scaled monomial values at a physical point.
  VectorXd mono_eval(const Vector2d& x) const {
    Vector2d s = (x - center_) / h_;
    VectorXd v(size());
    for (int i = 0; i < size(); ++i)
      v[i] = detail::ipow(s.x(), powers_[i][0]) * detail::ipow(s.y(), powers_[i][1]);
    return v;
  }

  VectorXd eval(const Vector2d& x) const { return coeff_ * mono_eval(x); }

  /// Gradients of all basis functions, one row per function.
  MatrixXd eval_grad(const Vector2d& x) const {
    Vector2d s = (x - center_) / h_;
    MatrixXd g(size(), 2);
    for (int i = 0; i < size(); ++i) {
      int a = powers_[i][0], b = powers_[i][1];
      g(i, 0) = a == 0 ? 0.0 : a / h_ * detail::ipow(s.x(), a - 1) * detail::ipow(s.y(), b);
      g(i, 1) = b == 0 ? 0.0 : b / h_ * detail::ipow(s.x(), a) * detail::ipow(s.y(), b - 1);
    }
    return coeff_ * g;
  }

  VectorXd eval_laplacian(const Vector2d& x) const {
    Vector2d s = (x - center_) / h_;
    VectorXd l = VectorXd::Zero(size());
    for (int i = 0; i < size(); ++i) {
      int a = powers_[i][0], b = powers_[i][1];
      double v = 0.0;
      if (a >= 2) v += a * (a - 1) * detail::ipow(s.x(), a - 2) * detail::ipow(s.y(), b);
      if (b >= 2) v += b * (b - 1) * detail::ipow(s.x(), a) * detail::ipow(s.y(), b - 2);
      l[i] = v / (h_ * h_);
    }
    return coeff_ * l;
  }

 private:
  int degree_ = 0;
  Vector2d center_ = Vector2d::Zero();
  double h_ = 1.0;
  std::vector<std::array<int, 2>> powers_;
  MatrixXd coeff_;
};

/// L2(E)-orthonormal basis on an edge, expressed in monomials of the
/// normalized arclength s in [0,1] measured from the first edge vertex.
class EdgeBasis {
 public:
  EdgeBasis() = default;

  EdgeBasis(const Mesh& mesh, int e, int degree) : degree_(degree) {
    p0_ = mesh.vertices[mesh.edges[e].a];
    p1_ = mesh.vertices[mesh.edges[e].b];
    len_ = (p1_ - p0_).norm();
    const int n = degree + 1;
    MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = len_ / (i + j + 1.0);
    Eigen::LLT<MatrixXd> llt(M);
    coeff_ = llt.matrixL().solve(MatrixXd::Identity(n, n));
  }

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }
  double length() const { return len_; }

  double param(const Vector2d& x) const {
    return (x - p0_).dot(p1_ - p0_) / (len_ * len_);
  }

  VectorXd eval_param(double s) const {
    VectorXd m(size());
    for (int i = 0; i < size(); ++i) m[i] = detail::ipow(s, i);
    return coeff_ * m;
  }

  VectorXd eval(const Vector2d& x) const { return eval_param(param(x)); }

 private:
  int degree_ = 0;
  Vector2d p0_ = Vector2d::Zero(), p1_ = Vector2d::Zero();
  double len_ = 1.0;
  MatrixXd coeff_;
};

/// Discontinuous piecewise polynomial given by orthonormal coordinates per
/// triangle; shares the basis array with the space that produced it.
struct PiecewisePoly {
  std::shared_ptr<const std::vector<CellBasis>> bases;
  std::vector<VectorXd> coef;

  int degree() const { return (*bases)[0].degree(); }
  double value(int t, const Vector2d& x) const { return coef[t].dot((*bases)[t].eval(x)); }
  Vector2d grad(int t, const Vector2d& x) const {
    return ((*bases)[t].eval_grad(x).transpose() * coef[t]);
  }
  double laplacian(int t, const Vector2d& x) const {
    return coef[t].dot((*bases)[t].eval_laplacian(x));
  }
};

/// L2(T)-projection of a scalar function onto an orthonormal cell basis.
inline VectorXd l2_project(const std::function<double(const Vector2d&)>& f, const CellBasis& b,
                           const MappedRule& qr) {
  VectorXd c = VectorXd::Zero(b.size());
  for (int q = 0; q < qr.w.size(); ++q) c += qr.w[q] * f(qr.x.col(q)) * b.eval(qr.x.col(q));
  return c;
}

inline VectorXd l2_project_edge(const std::function<double(const Vector2d&)>& f,
                                const EdgeBasis& b, const MappedRule& qr) {
  VectorXd c = VectorXd::Zero(b.size());
  for (int q = 0; q < qr.w.size(); ++q) c += qr.w[q] * f(qr.x.col(q)) * b.eval(qr.x.col(q));
  return c;
}

}  // namespace hho

#endif
