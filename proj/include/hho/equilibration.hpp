// Patchwise flux equilibration: reconstructs an H(div)-conforming
// Raviart-Thomas flux Q from a broken polynomial gradient field G and the
// load f.  For every mesh vertex z, a particular solution of a small
// moment-constrained problem on the vertex patch is corrected by an
// unconstrained least-squares minimization over the divergence-free patch
// fields; the per-vertex minimizers sum to the quantity of interest Q - G.

#ifndef HHO_EQUILIBRATION_HPP
#define HHO_EQUILIBRATION_HPP

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hho/basis.hpp"
#include "hho/geometry.hpp"
#include "hho/hho.hpp"
#include "hho/quadrature.hpp"

namespace hho {

namespace detail {

/// Piecewise linear hat function of vertex z evaluated inside triangle t.
inline double hat_value(const Mesh& mesh, int t, int z, const Vector2d& x) {
  const auto& v = mesh.triangles[t].v;
  int i = -1;
  for (int j = 0; j < 3; ++j)
    if (v[j] == z) i = j;
  if (i < 0) throw std::invalid_argument("triangle does not touch vertex");
  const Vector2d a = mesh.vertices[v[i]];
  const Vector2d b = mesh.vertices[v[(i + 1) % 3]];
  const Vector2d c = mesh.vertices[v[(i + 2) % 3]];
  const double den = (a - b).x() * (c - b).y() - (a - b).y() * (c - b).x();
  return ((x - b).x() * (c - b).y() - (x - b).y() * (c - b).x()) / den;
}

/// Arclength parameter in [0,1] along edge e, measured from endpoint a.
inline double edge_param(const Mesh& mesh, int e, const Vector2d& x) {
  const Vector2d pa = mesh.vertices[mesh.edges[e].a];
  const Vector2d pb = mesh.vertices[mesh.edges[e].b];
  return (x - pa).dot(pb - pa) / (pb - pa).squaredNorm();
}

/// Local index of global edge e within triangle t.
inline int local_edge(const Mesh& mesh, int t, int e) {
  for (int le = 0; le < 3; ++le)
    if (mesh.tri_edges[t][le] == e) return le;
  throw std::invalid_argument("edge does not belong to triangle");
}

}  // namespace detail

/// Raviart-Thomas basis of degree q on one triangle, dual to the functional
/// set {edge moments, divergence moments, remainder volume moments}:
///   lambda_E^j(s)     = int_E s.nu_T r^j           (0 <= j <= q, r the shared
///                                                   global edge parameter),
///   lambda_div^{l,m}  = int_T div s  xh^l yh^m     (1 <= l+m <= q),
///   lambda_rem^{l,m}  = int_T s.e2   xh^l yh^m     (1 <= l <= q-1,
///                                                   0 <= m <= q-1-l),
/// where (xh, yh) = (x - mid(T))/h_T are scaled coordinates.  The spanning
/// set consists of the coordinate monomial fields of degree <= q plus the
/// radial fields xh * (homogeneous degree-q monomials).
class RTBasis {
 public:
  RTBasis(const Mesh& mesh, int t, int q) : mesh_(&mesh), t_(t), q_(q) {
    center_ = mesh.centroid(t);
    h_ = mesh.diameter(t);

    const auto mono = monomial_powers(q);
    for (const auto& pw : mono) span_.push_back({0, pw[0], pw[1]});
    for (const auto& pw : mono) span_.push_back({1, pw[0], pw[1]});
    for (int a = q; a >= 0; --a) span_.push_back({2, a, q - a});

    for (std::size_t i = 1; i < mono.size(); ++i) div_pows_.push_back(mono[i]);
    for (int l = 1; l <= q - 1; ++l)
      for (int m = 0; m <= q - 1 - l; ++m) rem_pows_.push_back({l, m});

    const int D = dim();
    if (static_cast<int>(span_.size()) != D ||
        3 * (q + 1) + n_div() + n_rem() != D)
      throw std::logic_error("Raviart-Thomas dimension bookkeeping failed");

    MatrixXd M = MatrixXd::Zero(D, D);
    // edge-moment rows
    for (int le = 0; le < 3; ++le) {
      const int e = mesh.tri_edges[t][le];
      MappedRule er =
          segment_rule(q + 2, mesh.vertices[mesh.edges[e].a], mesh.vertices[mesh.edges[e].b]);
      const Vector2d nu = mesh.outward_normal(t, le);
      for (int p = 0; p < er.w.size(); ++p) {
        const Vector2d x = er.x.col(p);
        const double s = detail::edge_param(mesh, e, x);
        double sj = 1.0;
        for (int j = 0; j <= q; ++j) {
          for (int c = 0; c < D; ++c)
            M(idx_edge(le, j), c) += er.w[p] * sj * span_value(c, x).dot(nu);
          sj *= s;
        }
      }
    }
    // divergence and remainder rows
    MappedRule qr = map_to_triangle(triangle_rule(q + 2), mesh, t);
    for (int p = 0; p < qr.w.size(); ++p) {
      const Vector2d x = qr.x.col(p);
      const Vector2d sc = (x - center_) / h_;
      for (int c = 0; c < D; ++c) {
        const double dv = span_div(c, x);
        const double y2 = span_value(c, x).y();
        for (int i = 0; i < n_div(); ++i)
          M(idx_div(i), c) += qr.w[p] * dv * detail::ipow(sc.x(), div_pows_[i][0]) *
                              detail::ipow(sc.y(), div_pows_[i][1]);
        for (int r = 0; r < n_rem(); ++r)
          M(idx_rem(r), c) += qr.w[p] * y2 * detail::ipow(sc.x(), rem_pows_[r][0]) *
                              detail::ipow(sc.y(), rem_pows_[r][1]);
      }
    }
    Eigen::FullPivLU<MatrixXd> lu(M);
    if (!lu.isInvertible())
      throw std::logic_error("degenerate Raviart-Thomas functional matrix on triangle " +
                             std::to_string(t));
    dual_ = lu.solve(MatrixXd::Identity(D, D));  // column i = span coords of dual function i
  }

  int q() const { return q_; }
  int tri() const { return t_; }
  int dim() const { return (q_ + 1) * (q_ + 3); }
  int n_div() const { return static_cast<int>(div_pows_.size()); }
  int n_rem() const { return static_cast<int>(rem_pows_.size()); }
  int idx_edge(int le, int j) const { return le * (q_ + 1) + j; }
  int idx_div(int i) const { return 3 * (q_ + 1) + i; }
  int idx_rem(int r) const { return 3 * (q_ + 1) + n_div() + r; }
  const std::vector<std::array<int, 2>>& div_powers() const { return div_pows_; }
  const std::vector<std::array<int, 2>>& rem_powers() const { return rem_pows_; }
  const MatrixXd& dual() const { return dual_; }

  Vector2d span_value(int i, const Vector2d& x) const {
    const Fn& f = span_[i];
    const Vector2d s = (x - center_) / h_;
    const double m = detail::ipow(s.x(), f.a) * detail::ipow(s.y(), f.b);
    if (f.type == 0) return {m, 0.0};
    if (f.type == 1) return {0.0, m};
    return s * m;
  }

  double span_div(int i, const Vector2d& x) const {
    const Fn& f = span_[i];
    const Vector2d s = (x - center_) / h_;
    if (f.type == 0)
      return f.a == 0 ? 0.0 : f.a / h_ * detail::ipow(s.x(), f.a - 1) * detail::ipow(s.y(), f.b);
    if (f.type == 1)
      return f.b == 0 ? 0.0 : f.b / h_ * detail::ipow(s.x(), f.a) * detail::ipow(s.y(), f.b - 1);
    return (q_ + 2) / h_ * detail::ipow(s.x(), f.a) * detail::ipow(s.y(), f.b);
  }

  VectorXd to_span(const VectorXd& dual_coef) const { return dual_ * dual_coef; }

  Vector2d eval_span(const VectorXd& span_coef, const Vector2d& x) const {
    Vector2d v = Vector2d::Zero();
    for (int i = 0; i < dim(); ++i) v += span_coef[i] * span_value(i, x);
    return v;
  }
  double div_span(const VectorXd& span_coef, const Vector2d& x) const {
    double v = 0.0;
    for (int i = 0; i < dim(); ++i) v += span_coef[i] * span_div(i, x);
    return v;
  }

  Vector2d eval(const VectorXd& dual_coef, const Vector2d& x) const {
    return eval_span(to_span(dual_coef), x);
  }
  double div(const VectorXd& dual_coef, const Vector2d& x) const {
    return div_span(to_span(dual_coef), x);
  }

  /// Applies functional i to an arbitrary field given by value and divergence
  /// callbacks; quadrature order qorder (used by the audits in the tests).
  double apply_functional(int i, const std::function<Vector2d(const Vector2d&)>& sig,
                          const std::function<double(const Vector2d&)>& div_sig,
                          int qorder) const {
    const Mesh& mesh = *mesh_;
    if (i < 3 * (q_ + 1)) {
      const int le = i / (q_ + 1), j = i % (q_ + 1);
      const int e = mesh.tri_edges[t_][le];
      MappedRule er = segment_rule(qorder, mesh.vertices[mesh.edges[e].a],
                                   mesh.vertices[mesh.edges[e].b]);
      const Vector2d nu = mesh.outward_normal(t_, le);
      double v = 0.0;
      for (int p = 0; p < er.w.size(); ++p) {
        const Vector2d x = er.x.col(p);
        v += er.w[p] * sig(x).dot(nu) * detail::ipow(detail::edge_param(mesh, e, x), j);
      }
      return v;
    }
    MappedRule qr = map_to_triangle(triangle_rule(qorder), mesh, t_);
    const bool is_div = i < 3 * (q_ + 1) + n_div();
    const auto pw = is_div ? div_pows_[i - 3 * (q_ + 1)] : rem_pows_[i - 3 * (q_ + 1) - n_div()];
    double v = 0.0;
    for (int p = 0; p < qr.w.size(); ++p) {
      const Vector2d x = qr.x.col(p);
      const Vector2d s = (x - center_) / h_;
      const double m = detail::ipow(s.x(), pw[0]) * detail::ipow(s.y(), pw[1]);
      v += qr.w[p] * m * (is_div ? div_sig(x) : sig(x).y());
    }
    return v;
  }

 private:
  struct Fn {
    int type;  // 0: e1 * monomial, 1: e2 * monomial, 2: xh * monomial
    int a, b;
  };
  const Mesh* mesh_ = nullptr;
  int t_ = -1;
  int q_ = 0;
  Vector2d center_ = Vector2d::Zero();
  double h_ = 1.0;
  std::vector<Fn> span_;
  std::vector<std::array<int, 2>> div_pows_;
  std::vector<std::array<int, 2>> rem_pows_;
  MatrixXd dual_;
};

inline std::vector<RTBasis> build_rt_bases(const Mesh& mesh, int q) {
  std::vector<RTBasis> out;
  out.reserve(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) out.emplace_back(mesh, t, q);
  return out;
}

/// Broken Raviart-Thomas field on one vertex patch, stored as dual-basis
/// coefficients per patch triangle (same order as Patch::tris).
struct PatchField {
  Patch patch;
  std::vector<VectorXd> coef;
};

/// Piecewise data on the whole mesh, indexed by global triangle.
struct PatchData {
  std::function<double(int, const Vector2d&)> f;
  std::function<Vector2d(int, const Vector2d&)> G;
  std::function<double(int, const Vector2d&)> divG;
};

/// Normal jump of the broken field G across edge e at x, with respect to the
/// stored edge normal; one-sided trace on boundary edges.
inline double normal_jump(const Mesh& mesh, const PatchData& data, int e, const Vector2d& x) {
  const auto& E = mesh.edges[e];
  Vector2d j = data.G(E.tplus, x);
  if (!E.boundary) j -= data.G(E.tminus, x);
  return j.dot(E.normal);
}

/// Particular solution of the patch moment problem at the patch vertex z:
/// the output field satisfies, per patch triangle T and interior spider edge
/// E (phi_z the hat function of z),
///   div sigma            = -Proj_q(phi_z (f + div G))   on T,
///   [sigma . nu_E]_E     = -Proj_q(phi_z [G . nu_E]_E)  on E,
/// and has zero normal trace on the patch edges opposite z.  Spider edges on
/// the domain boundary carry no constraint.
inline PatchField particular_solution(const Mesh& mesh, const std::vector<RTBasis>& rt,
                                      const Patch& patch, const PatchData& data, int qorder) {
  const int N = static_cast<int>(patch.tris.size());
  const int q = rt[patch.tris[0]].q();
  const int z = patch.center;

  // spider-edge moments J(j, b) = int_{E_b} phi_z s^j [G . nu_E]
  const int ns = static_cast<int>(patch.spider_edges.size());
  MatrixXd J = MatrixXd::Zero(q + 1, ns);
  for (int b = 0; b < ns; ++b) {
    const int e = patch.spider_edges[b];
    const int tref = mesh.edges[e].tplus;
    MappedRule er =
        segment_rule(qorder, mesh.vertices[mesh.edges[e].a], mesh.vertices[mesh.edges[e].b]);
    for (int p = 0; p < er.w.size(); ++p) {
      const Vector2d x = er.x.col(p);
      const double base =
          er.w[p] * detail::hat_value(mesh, tref, z, x) * normal_jump(mesh, data, e, x);
      double sj = 1.0;
      for (int j = 0; j <= q; ++j) {
        J(j, b) += base * sj;
        sj *= detail::edge_param(mesh, e, x);
      }
    }
  }

  PatchField out{patch, {}};
  out.coef.resize(N);
  double prev_out0 = 0.0;
  for (int a = 0; a < N; ++a) {
    const int t = patch.tris[a];
    const RTBasis& B = rt[t];
    VectorXd c = VectorXd::Zero(B.dim());

    // volume moments I^{l,m} = int_T phi_z (f + div G) xh^l yh^m
    MappedRule qr = map_to_triangle(triangle_rule(qorder), mesh, t);
    double I00 = 0.0;
    VectorXd Idiv = VectorXd::Zero(B.n_div());
    for (int p = 0; p < qr.w.size(); ++p) {
      const Vector2d x = qr.x.col(p);
      const double base = qr.w[p] * detail::hat_value(mesh, t, z, x) *
                          (data.f(t, x) + data.divG(t, x));
      I00 += base;
      const Vector2d s = (x - mesh.centroid(t)) / mesh.diameter(t);
      for (int i = 0; i < B.n_div(); ++i)
        Idiv[i] += base * detail::ipow(s.x(), B.div_powers()[i][0]) *
                   detail::ipow(s.y(), B.div_powers()[i][1]);
    }

    const int le_in = detail::local_edge(mesh, t, patch.spider_edges[a]);
    const int le_out = detail::local_edge(mesh, t, patch.spider_edges[a + 1]);
    const double c_in0 = (a == 0) ? 0.0 : -J(0, a) - prev_out0;
    const double c_out0 = -I00 - c_in0;
    c[B.idx_edge(le_in, 0)] = c_in0;
    c[B.idx_edge(le_out, 0)] = c_out0;
    for (int j = 1; j <= q; ++j) c[B.idx_edge(le_out, j)] = -J(j, a + 1);
    for (int i = 0; i < B.n_div(); ++i) c[B.idx_div(i)] = -Idiv[i];
    prev_out0 = c_out0;
    out.coef[a] = std::move(c);
  }
  return out;
}

/// Basis of the divergence-free patch space: one lowest-order loop field, one
/// field per spider edge and edge-moment order 1..q, and the per-triangle
/// remainder fields.  Dimension 1 + q*(number of spider edges) + N*q(q-1)/2.
inline std::vector<PatchField> divfree_basis(const Mesh& mesh, const std::vector<RTBasis>& rt,
                                             const Patch& patch) {
  const int N = static_cast<int>(patch.tris.size());
  const int q = rt[patch.tris[0]].q();
  (void)mesh;

  auto zero_field = [&]() {
    PatchField f{patch, {}};
    f.coef.resize(N);
    for (int a = 0; a < N; ++a) f.coef[a] = VectorXd::Zero(rt[patch.tris[a]].dim());
    return f;
  };
  auto le_in = [&](int a) {
    return detail::local_edge(mesh, patch.tris[a], patch.spider_edges[a]);
  };
  auto le_out = [&](int a) {
    return detail::local_edge(mesh, patch.tris[a], patch.spider_edges[a + 1]);
  };

  std::vector<PatchField> out;

  PatchField loop = zero_field();
  for (int a = 0; a < N; ++a) {
    const RTBasis& B = rt[patch.tris[a]];
    loop.coef[a][B.idx_edge(le_in(a), 0)] += 1.0;
    loop.coef[a][B.idx_edge(le_out(a), 0)] -= 1.0;
  }
  out.push_back(std::move(loop));

  // one field per distinct spider edge and moment order l = 1..q; the edge
  // enters its counterclockwise neighbour with +1 and its clockwise
  // neighbour with -1 (one-sided at the two boundary spider edges)
  const int n_distinct = patch.interior ? N : N + 1;
  for (int b = 0; b < n_distinct; ++b) {
    for (int l = 1; l <= q; ++l) {
      PatchField f = zero_field();
      if (b < N) {
        const RTBasis& B = rt[patch.tris[b]];
        f.coef[b][B.idx_edge(le_in(b), l)] += 1.0;
      }
      const int ao = patch.interior ? (b + N - 1) % N : b - 1;
      if (ao >= 0) {
        const RTBasis& B = rt[patch.tris[ao]];
        f.coef[ao][B.idx_edge(le_out(ao), l)] -= 1.0;
      }
      out.push_back(std::move(f));
    }
  }

  for (int a = 0; a < N; ++a) {
    const RTBasis& B = rt[patch.tris[a]];
    for (int r = 0; r < B.n_rem(); ++r) {
      PatchField f = zero_field();
      f.coef[a][B.idx_rem(r)] = 1.0;
      out.push_back(std::move(f));
    }
  }
  return out;
}

/// L2 inner product of two patch fields over the patch.
inline double patch_inner(const Mesh& mesh, const std::vector<RTBasis>& rt, const PatchField& u,
                          const PatchField& v) {
  double s = 0.0;
  for (std::size_t a = 0; a < u.patch.tris.size(); ++a) {
    const int t = u.patch.tris[a];
    const RTBasis& B = rt[t];
    const VectorXd cu = B.to_span(u.coef[a]);
    const VectorXd cv = B.to_span(v.coef[a]);
    MappedRule qr = map_to_triangle(triangle_rule(B.q() + 2), mesh, t);
    for (int p = 0; p < qr.w.size(); ++p)
      s += qr.w[p] * B.eval_span(cu, qr.x.col(p)).dot(B.eval_span(cv, qr.x.col(p)));
  }
  return s;
}

/// Minimizes ||sigma_tilde + v|| over the divergence-free patch space spanned
/// by fields and returns the minimizer sigma_tilde + v*.
inline PatchField patch_minimize(const Mesh& mesh, const std::vector<RTBasis>& rt,
                                 const PatchField& sigma_tilde,
                                 const std::vector<PatchField>& fields) {
  const Patch& patch = sigma_tilde.patch;
  const int N = static_cast<int>(patch.tris.size());
  const int nf = static_cast<int>(fields.size());

  MatrixXd G = MatrixXd::Zero(nf, nf);
  VectorXd b = VectorXd::Zero(nf);
  for (int a = 0; a < N; ++a) {
    const int t = patch.tris[a];
    const RTBasis& B = rt[t];
    const int D = B.dim();
    MatrixXd F(D, nf);
    for (int i = 0; i < nf; ++i) F.col(i) = B.to_span(fields[i].coef[a]);
    const VectorXd s0 = B.to_span(sigma_tilde.coef[a]);
    MappedRule qr = map_to_triangle(triangle_rule(B.q() + 2), mesh, t);
    for (int p = 0; p < qr.w.size(); ++p) {
      MatrixXd S(D, 2);
      for (int i = 0; i < D; ++i) S.row(i) = B.span_value(i, qr.x.col(p)).transpose();
      const MatrixXd V = S.transpose() * F;  // 2 x nf field values
      const Vector2d v0 = S.transpose() * s0;
      G.noalias() += qr.w[p] * V.transpose() * V;
      b.noalias() -= qr.w[p] * V.transpose() * v0;
    }
  }
  Eigen::LDLT<MatrixXd> ldlt(G);
  const VectorXd d = ldlt.solve(b);
  if ((G * d - b).norm() > 1e-8 * (1.0 + b.norm()))
    throw std::logic_error("singular Gram matrix in patch minimization at vertex " +
                           std::to_string(patch.center));

  PatchField out = sigma_tilde;
  for (int a = 0; a < N; ++a)
    for (int i = 0; i < nf; ++i) out.coef[a] += d[i] * fields[i].coef[a];
  return out;
}

/// Globally assembled equilibrated-flux difference Q - G in broken
/// Raviart-Thomas span coordinates per triangle.
struct Equilibrated {
  std::shared_ptr<const std::vector<RTBasis>> rt;
  std::vector<VectorXd> span_coef;
  double norm = 0.0;         // L2 norm of Q - G over the mesh
  VectorXd local2;           // squared L2 norms per triangle
  double sum_patch_norms2 = 0.0;  // sum over vertices of the patch minimizer norms

  Vector2d value(int t, const Vector2d& x) const { return (*rt)[t].eval_span(span_coef[t], x); }
  double div(int t, const Vector2d& x) const { return (*rt)[t].div_span(span_coef[t], x); }
};

/// Runs the two-step equilibration over all vertex patches for the gradient
/// G = grad Ru of the reconstructed solution and the load f, with flux degree
/// q = k + p.  For k = 0 the load is replaced by its elementwise mean.
inline Equilibrated equilibrate(const HhoSpace& sp, const PiecewisePoly& Ru, const ScalarFn& f,
                                int p, int qorder = -1) {
  const Mesh& mesh = sp.mesh();
  const int k = sp.k();
  const int q = k + p;
  if (qorder < 0) qorder = k + 6;

  auto rt = std::make_shared<std::vector<RTBasis>>(build_rt_bases(mesh, q));

  PatchData data;
  if (k == 0) {
    VectorXd fbar(mesh.n_triangles());
    RuleTri ref = triangle_rule(qorder);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      MappedRule qr = map_to_triangle(ref, mesh, t);
      double s = 0.0;
      for (int pq = 0; pq < qr.w.size(); ++pq) s += qr.w[pq] * f(qr.x.col(pq));
      fbar[t] = s / mesh.area(t);
    }
    data.f = [fbar](int t, const Vector2d&) { return fbar[t]; };
  } else {
    data.f = [&f](int, const Vector2d& x) { return f(x); };
  }
  data.G = [&Ru](int t, const Vector2d& x) { return Ru.grad(t, x); };
  data.divG = [&Ru](int t, const Vector2d& x) { return Ru.laplacian(t, x); };

  Equilibrated out;
  out.rt = rt;
  out.span_coef.resize(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t)
    out.span_coef[t] = VectorXd::Zero((*rt)[t].dim());

  for (int z = 0; z < mesh.n_vertices(); ++z) {
    Patch patch = vertex_patch(mesh, z);
    PatchField st = particular_solution(mesh, *rt, patch, data, qorder);
    std::vector<PatchField> V = divfree_basis(mesh, *rt, patch);
    PatchField R = patch_minimize(mesh, *rt, st, V);
    for (std::size_t a = 0; a < patch.tris.size(); ++a) {
      const int t = patch.tris[a];
      out.span_coef[t] += (*rt)[t].to_span(R.coef[a]);
    }
    out.sum_patch_norms2 += patch_inner(mesh, *rt, R, R);
  }

  out.local2 = VectorXd::Zero(mesh.n_triangles());
  RuleTri ref = triangle_rule(q + 2);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, mesh, t);
    double s = 0.0;
    for (int pq = 0; pq < qr.w.size(); ++pq)
      s += qr.w[pq] * out.value(t, qr.x.col(pq)).squaredNorm();
    out.local2[t] = s;
  }
  out.norm = std::sqrt(out.local2.sum());
  return out;
}

}  // namespace hho

#endif
