// Hybrid high-order discretization of the Poisson problem with homogeneous
// Dirichlet data: cell unknowns of degree k, facet unknowns of degree k on
// interior edges, potential reconstruction of degree k+1, facet-wise
// stabilization, static condensation onto the facet unknowns.

#ifndef HHO_HHO_HPP
#define HHO_HHO_HPP

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "basis.hpp"
#include "geometry.hpp"
#include "quadrature.hpp"

namespace hho {

using ScalarFn = std::function<double(const Vector2d&)>;

/// Hybrid coefficient vector: cell block (nT x dim P_k) and facet block
/// (interior edges x (k+1)).  Boundary facet values are identically zero.
struct HhoVector {
  VectorXd cell;
  VectorXd facet;
};

class HhoSpace {
 public:
  HhoSpace(const Mesh& mesh, int k) : mesh_(mesh), k_(k) {
    if (k < 0) throw std::invalid_argument("polynomial degree must be >= 0");
    nk_ = n_poly_2d(k);
    nk1_ = n_poly_2d(k + 1);
    nf_ = k + 1;
    nloc_ = nk_ + 3 * nf_;

    auto cb = std::make_shared<std::vector<CellBasis>>();
    auto rb = std::make_shared<std::vector<CellBasis>>();
    cb->reserve(mesh.n_triangles());
    rb->reserve(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      cb->emplace_back(mesh, t, k);
      rb->emplace_back(mesh, t, k + 1);
    }
    cell_bases_ = std::move(cb);
    recon_bases_ = std::move(rb);

    edge_bases_.reserve(mesh.n_edges());
    facet_of_edge_.assign(mesh.n_edges(), -1);
    n_interior_edges_ = 0;
    for (int e = 0; e < mesh.n_edges(); ++e) {
      edge_bases_.emplace_back(mesh, e, k);
      if (!mesh.edges[e].boundary) facet_of_edge_[e] = n_interior_edges_++;
    }

    build_local_operators();
  }

  const Mesh& mesh() const { return mesh_; }
  int k() const { return k_; }
  int n_cell_dofs() const { return nk_; }
  int n_facet_dofs() const { return nf_; }
  int n_local_dofs() const { return nloc_; }
  int n_interior_edges() const { return n_interior_edges_; }
  int facet_of_edge(int e) const { return facet_of_edge_[e]; }

  /// Number of globally coupled unknowns after condensation.
  long ndof() const { return static_cast<long>(n_interior_edges_) * nf_; }
  long total_dofs() const { return ndof() + static_cast<long>(mesh_.n_triangles()) * nk_; }

  const std::vector<CellBasis>& cell_bases() const { return *cell_bases_; }
  const std::vector<CellBasis>& recon_bases() const { return *recon_bases_; }
  std::shared_ptr<const std::vector<CellBasis>> cell_bases_ptr() const { return cell_bases_; }
  std::shared_ptr<const std::vector<CellBasis>> recon_bases_ptr() const { return recon_bases_; }
  const EdgeBasis& edge_basis(int e) const { return edge_bases_[e]; }

  /// Per-triangle operators; local dof order [cell | edge0 | edge1 | edge2]
  /// with facet coefficients in the global edge bases.
  struct Local {
    MatrixXd K;        // reconstruction-basis stiffness
    MatrixXd R;        // potential reconstruction, P_{k+1} coords from local dofs
    MatrixXd S[3];     // facet difference operators, edge-basis coords from local dofs
    MatrixXd PFrec[3]; // L2(F)-projection of the reconstruction basis
    MatrixXd cellproj; // L2(T)-projection of the reconstruction basis onto P_k
    MatrixXd A;        // local bilinear form
  };
  const Local& local(int t) const { return local_[t]; }

  HhoVector zero_vector() const {
    HhoVector v;
    v.cell = VectorXd::Zero(static_cast<long>(mesh_.n_triangles()) * nk_);
    v.facet = VectorXd::Zero(ndof());
    return v;
  }

  VectorXd gather(const HhoVector& v, int t) const {
    VectorXd loc = VectorXd::Zero(nloc_);
    loc.head(nk_) = v.cell.segment(static_cast<long>(t) * nk_, nk_);
    for (int le = 0; le < 3; ++le) {
      int f = facet_of_edge_[mesh_.tri_edges[t][le]];
      if (f >= 0) loc.segment(nk_ + le * nf_, nf_) = v.facet.segment(static_cast<long>(f) * nf_, nf_);
    }
    return loc;
  }

  /// Componentwise L2 interpolation (Pi_k on cells, Pi_{F,k} on facets).
  HhoVector interpolate(const ScalarFn& v, int qorder = -1) const {
    int m = qorder > 0 ? qorder : k_ + 6;
    HhoVector out = zero_vector();
    RuleTri ref = triangle_rule(m);
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
      MappedRule qr = map_to_triangle(ref, mesh_, t);
      out.cell.segment(static_cast<long>(t) * nk_, nk_) = l2_project(v, (*cell_bases_)[t], qr);
    }
    for (int e = 0; e < mesh_.n_edges(); ++e) {
      int f = facet_of_edge_[e];
      if (f < 0) continue;
      MappedRule qr = edge_rule(m, mesh_, e);
      out.facet.segment(static_cast<long>(f) * nf_, nf_) = l2_project_edge(v, edge_bases_[e], qr);
    }
    return out;
  }

  /// Interpolation of a function given triangle-wise and edge-wise (for data
  /// that is two-valued across a slit, e.g. conforming fields by entity id).
  HhoVector interpolate_piecewise(const std::function<double(int, const Vector2d&)>& cellfn,
                                  const std::function<double(int, const Vector2d&)>& edgefn,
                                  int qorder = -1) const {
    int m = qorder > 0 ? qorder : k_ + 6;
    HhoVector out = zero_vector();
    RuleTri ref = triangle_rule(m);
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
      MappedRule qr = map_to_triangle(ref, mesh_, t);
      auto f = [&](const Vector2d& x) { return cellfn(t, x); };
      out.cell.segment(static_cast<long>(t) * nk_, nk_) = l2_project(f, (*cell_bases_)[t], qr);
    }
    for (int e = 0; e < mesh_.n_edges(); ++e) {
      int fi = facet_of_edge_[e];
      if (fi < 0) continue;
      MappedRule qr = edge_rule(m, mesh_, e);
      auto f = [&](const Vector2d& x) { return edgefn(e, x); };
      out.facet.segment(static_cast<long>(fi) * nf_, nf_) = l2_project_edge(f, edge_bases_[e], qr);
    }
    return out;
  }

  /// Potential reconstruction R v_h, a broken polynomial of degree k+1.
  PiecewisePoly reconstruct(const HhoVector& v) const {
    PiecewisePoly p;
    p.bases = recon_bases_;
    p.coef.resize(mesh_.n_triangles());
    for (int t = 0; t < mesh_.n_triangles(); ++t) p.coef[t] = local_[t].R * gather(v, t);
    return p;
  }

  /// Facet-wise stabilization s_h(u, v).
  double stab_s(const HhoVector& u, const HhoVector& v) const {
    double s = 0.0;
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
      VectorXd lu = gather(u, t), lv = gather(v, t);
      for (int le = 0; le < 3; ++le) {
        double hF = mesh_.edge_length(mesh_.tri_edges[t][le]);
        s += (local_[t].S[le] * lu).dot(local_[t].S[le] * lv) / hF;
      }
    }
    return s;
  }

  /// Reconstruction-difference stabilization s~_h(u, v).
  double stab_s_tilde(const HhoVector& u, const HhoVector& v) const {
    double s = 0.0;
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
      const Local& L = local_[t];
      VectorXd lu = gather(u, t), lv = gather(v, t);
      VectorXd ru = L.R * lu, rv = L.R * lv;
      VectorXd du = lu.head(nk_) - L.cellproj * ru;
      VectorXd dv = lv.head(nk_) - L.cellproj * rv;
      double hT = mesh_.diameter(t);
      s += du.dot(dv) / (hT * hT);
      for (int le = 0; le < 3; ++le) {
        double hF = mesh_.edge_length(mesh_.tri_edges[t][le]);
        VectorXd eu = lu.segment(nk_ + le * nf_, nf_) - L.PFrec[le] * ru;
        VectorXd ev = lv.segment(nk_ + le * nf_, nf_) - L.PFrec[le] * rv;
        s += eu.dot(ev) / hF;
      }
    }
    return s;
  }

  /// Full discrete bilinear form a_h(u, v).
  double energy_product(const HhoVector& u, const HhoVector& v) const {
    double s = 0.0;
    for (int t = 0; t < mesh_.n_triangles(); ++t)
      s += gather(u, t).dot(local_[t].A * gather(v, t));
    return s;
  }

  /// Solves a_h(u_h, v_h) = (f, v_T) by static condensation onto the
  /// interior facet unknowns (sparse LDLT).
  HhoVector solve(const ScalarFn& f, int qorder = -1) const {
    int m = qorder > 0 ? qorder : k_ + 6;
    const int nT = mesh_.n_triangles();
    RuleTri ref = triangle_rule(m);

    std::vector<Eigen::Triplet<double>> trip;
    VectorXd rhs = VectorXd::Zero(ndof());
    std::vector<VectorXd> fT(nT);
    std::vector<Eigen::LDLT<MatrixXd>> Att(nT);
    std::vector<MatrixXd> Atf(nT);

    std::vector<long> fmap(3);
    for (int t = 0; t < nT; ++t) {
      const Local& L = local_[t];
      MappedRule qr = map_to_triangle(ref, mesh_, t);
      fT[t] = l2_project(f, (*cell_bases_)[t], qr);

      Att[t].compute(L.A.topLeftCorner(nk_, nk_));
      Atf[t] = L.A.topRightCorner(nk_, 3 * nf_);
      MatrixXd Aff = L.A.bottomRightCorner(3 * nf_, 3 * nf_);
      MatrixXd Sc = Aff - Atf[t].transpose() * Att[t].solve(Atf[t]);
      VectorXd rc = -Atf[t].transpose() * Att[t].solve(fT[t]);

      for (int le = 0; le < 3; ++le)
        fmap[le] = facet_of_edge_[mesh_.tri_edges[t][le]];
      for (int lei = 0; lei < 3; ++lei) {
        if (fmap[lei] < 0) continue;
        rhs.segment(fmap[lei] * nf_, nf_) += rc.segment(lei * nf_, nf_);
        for (int lej = 0; lej < 3; ++lej) {
          if (fmap[lej] < 0) continue;
          for (int i = 0; i < nf_; ++i)
            for (int j = 0; j < nf_; ++j)
              trip.emplace_back(fmap[lei] * nf_ + i, fmap[lej] * nf_ + j,
                                Sc(lei * nf_ + i, lej * nf_ + j));
        }
      }
    }

    Eigen::SparseMatrix<double> S(ndof(), ndof());
    S.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(S);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("facet system factorization failed");

    HhoVector u = zero_vector();
    if (ndof() > 0) u.facet = ldlt.solve(rhs);

    for (int t = 0; t < nT; ++t) {
      VectorXd uf = VectorXd::Zero(3 * nf_);
      for (int le = 0; le < 3; ++le) {
        int fidx = facet_of_edge_[mesh_.tri_edges[t][le]];
        if (fidx >= 0) uf.segment(le * nf_, nf_) = u.facet.segment(static_cast<long>(fidx) * nf_, nf_);
      }
      u.cell.segment(static_cast<long>(t) * nk_, nk_) = Att[t].solve(fT[t] - Atf[t] * uf);
    }
    return u;
  }

 private:
  void build_local_operators() {
    const int nT = mesh_.n_triangles();
    local_.resize(nT);
    RuleTri ref_vol = triangle_rule(k_ + 2);
    const int medge = k_ + 2;

    for (int t = 0; t < nT; ++t) {
      Local& L = local_[t];
      const CellBasis& cb = (*cell_bases_)[t];
      const CellBasis& rb = (*recon_bases_)[t];
      MappedRule qv = map_to_triangle(ref_vol, mesh_, t);

      L.K = MatrixXd::Zero(nk1_, nk1_);
      MatrixXd Gcr = MatrixXd::Zero(nk1_, nk_);
      L.cellproj = MatrixXd::Zero(nk_, nk1_);
      for (int q = 0; q < qv.w.size(); ++q) {
        MatrixXd gr = rb.eval_grad(qv.x.col(q));
        MatrixXd gc = cb.eval_grad(qv.x.col(q));
        L.K += qv.w[q] * gr * gr.transpose();
        Gcr += qv.w[q] * gr * gc.transpose();
        L.cellproj += qv.w[q] * cb.eval(qv.x.col(q)) * rb.eval(qv.x.col(q)).transpose();
      }

      MatrixXd B = MatrixXd::Zero(nk1_, nloc_);
      B.leftCols(nk_) = Gcr;
      MatrixXd PFcell[3];
      for (int le = 0; le < 3; ++le) {
        int e = mesh_.tri_edges[t][le];
        const EdgeBasis& eb = edge_bases_[e];
        Vector2d nu = mesh_.outward_normal(t, le);
        MappedRule qe = edge_rule(medge, mesh_, e);
        PFcell[le] = MatrixXd::Zero(nf_, nk_);
        L.PFrec[le] = MatrixXd::Zero(nf_, nk1_);
        for (int q = 0; q < qe.w.size(); ++q) {
          Vector2d x = qe.x.col(q);
          VectorXd ve = eb.eval(x);
          VectorXd vc = cb.eval(x);
          VectorXd gn = rb.eval_grad(x) * nu;
          B.leftCols(nk_) -= qe.w[q] * gn * vc.transpose();
          B.middleCols(nk_ + le * nf_, nf_) += qe.w[q] * gn * ve.transpose();
          PFcell[le] += qe.w[q] * ve * vc.transpose();
          L.PFrec[le] += qe.w[q] * ve * rb.eval(x).transpose();
        }
      }

      // Mean constraint: the constant coordinate of R v equals the constant
      // coordinate of v_T (both bases start with |T|^{-1/2}).
      MatrixXd K0 = L.K;
      K0.row(0).setZero();
      K0(0, 0) = 1.0;
      MatrixXd B0 = B;
      B0.row(0).setZero();
      B0(0, 0) = 1.0;
      L.R = K0.partialPivLu().solve(B0);

      L.A = L.R.transpose() * L.K * L.R;
      for (int le = 0; le < 3; ++le) {
        L.S[le] = MatrixXd::Zero(nf_, nloc_);
        L.S[le].leftCols(nk_) = PFcell[le];
        L.S[le] += (L.PFrec[le] - PFcell[le] * L.cellproj) * L.R;
        L.S[le].middleCols(nk_ + le * nf_, nf_) -= MatrixXd::Identity(nf_, nf_);
        double hF = mesh_.edge_length(mesh_.tri_edges[t][le]);
        L.A += L.S[le].transpose() * L.S[le] / hF;
      }
    }
  }

  const Mesh& mesh_;
  int k_, nk_, nk1_, nf_, nloc_;
  std::shared_ptr<std::vector<CellBasis>> cell_bases_;
  std::shared_ptr<std::vector<CellBasis>> recon_bases_;
  std::vector<EdgeBasis> edge_bases_;
  std::vector<int> facet_of_edge_;
  int n_interior_edges_;
  std::vector<Local> local_;
};

}  // namespace hho

#endif
