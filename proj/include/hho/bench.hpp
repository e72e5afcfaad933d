// Benchmark problems and the convergence-history driver: three model Poisson
// problems (smooth oscillatory solution on the unit square, an exact singular
// solution on the slit domain, constant load on the L-shaped domain), energy
// error evaluation, a reference-error procedure for the case without a closed
// form, the level loop with uniform or adaptive refinement, and CSV output.

#ifndef HHO_BENCH_HPP
#define HHO_BENCH_HPP

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "hho/afem.hpp"
#include "hho/equilibration.hpp"
#include "hho/estimators.hpp"
#include "hho/geometry.hpp"
#include "hho/hho.hpp"

namespace hho {

struct BenchmarkCase {
  std::string name;
  Domain domain = Domain::square;
  double omega_max = std::acos(-1.0);
  ScalarFn f;
  bool has_exact = false;
  ScalarFn u;
  std::function<Vector2d(const Vector2d&)> grad_u;
};

namespace detail {

/// Half-argument polar data of z = x + iy with the angle measured in (0, 2pi]
/// from the positive x-axis (branch cut along the positive x-axis).
struct SlitPolar {
  double sr;       // sqrt(r)
  double sh, ch;   // sin(phi/2), cos(phi/2)
};

inline SlitPolar slit_polar(const Vector2d& x) {
  double phi = std::atan2(x.y(), x.x());
  if (phi < 0.0) phi += 2.0 * std::acos(-1.0);
  SlitPolar p;
  p.sr = std::sqrt(x.norm());
  p.sh = std::sin(0.5 * phi);
  p.ch = std::cos(0.5 * phi);
  return p;
}

}  // namespace detail

inline BenchmarkCase make_benchmark(Domain d) {
  const double pi = std::acos(-1.0);
  BenchmarkCase b;
  b.domain = d;
  b.name = to_string(d);
  switch (d) {
    case Domain::square: {
      b.omega_max = pi;
      b.has_exact = true;
      // u = x(x-1) y(y-1) exp(-100((x-1/2)^2 + (y-117/1000)^2))
      auto parts = [](const Vector2d& p, double& X, double& dX, double& Y, double& dY,
                      double& g, double& a, double& bb) {
        const double x = p.x(), y = p.y();
        X = x * x - x;
        dX = 2.0 * x - 1.0;
        Y = y * y - y;
        dY = 2.0 * y - 1.0;
        const double u1 = x - 0.5, u2 = y - 0.117;
        g = std::exp(-100.0 * (u1 * u1 + u2 * u2));
        a = -200.0 * u1;
        bb = -200.0 * u2;
      };
      b.u = [parts](const Vector2d& p) {
        double X, dX, Y, dY, g, a, bb;
        parts(p, X, dX, Y, dY, g, a, bb);
        return X * Y * g;
      };
      b.grad_u = [parts](const Vector2d& p) {
        double X, dX, Y, dY, g, a, bb;
        parts(p, X, dX, Y, dY, g, a, bb);
        return Vector2d((dX * Y + X * Y * a) * g, (X * dY + X * Y * bb) * g);
      };
      b.f = [parts](const Vector2d& p) {
        double X, dX, Y, dY, g, a, bb;
        parts(p, X, dX, Y, dY, g, a, bb);
        const double lap = g * (2.0 * Y + 2.0 * X + 2.0 * a * dX * Y + 2.0 * bb * X * dY +
                                X * Y * (a * a + bb * bb - 400.0));
        return -lap;
      };
      break;
    }
    case Domain::slit: {
      b.omega_max = 2.0 * pi;
      b.has_exact = true;
      // u = sqrt(r) sin(phi/2) (x^2-1)(y^2-1); the first factor is harmonic
      b.u = [](const Vector2d& p) {
        auto s = detail::slit_polar(p);
        return s.sr * s.sh * (p.x() * p.x() - 1.0) * (p.y() * p.y() - 1.0);
      };
      b.grad_u = [](const Vector2d& p) {
        auto s = detail::slit_polar(p);
        const double W = (p.x() * p.x() - 1.0) * (p.y() * p.y() - 1.0);
        const double Wx = 2.0 * p.x() * (p.y() * p.y() - 1.0);
        const double Wy = 2.0 * p.y() * (p.x() * p.x() - 1.0);
        const double S = s.sr * s.sh;
        const double Sx = -s.sh / (2.0 * s.sr);  // Im and Re of 1/(2 sqrt(z))
        const double Sy = s.ch / (2.0 * s.sr);
        return Vector2d(S * Wx + W * Sx, S * Wy + W * Sy);
      };
      b.f = [](const Vector2d& p) {
        auto s = detail::slit_polar(p);
        const double S = s.sr * s.sh;
        const double Sx = -s.sh / (2.0 * s.sr);
        const double Sy = s.ch / (2.0 * s.sr);
        const double Wx = 2.0 * p.x() * (p.y() * p.y() - 1.0);
        const double Wy = 2.0 * p.y() * (p.x() * p.x() - 1.0);
        const double lapW = 2.0 * (p.y() * p.y() - 1.0) + 2.0 * (p.x() * p.x() - 1.0);
        return -(S * lapW + 2.0 * (Sx * Wx + Sy * Wy));
      };
      break;
    }
    case Domain::lshape: {
      b.omega_max = 1.5 * pi;
      b.has_exact = false;
      b.f = [](const Vector2d&) { return 1.0; };
      break;
    }
  }
  return b;
}

/// Broken energy norm of grad u - grad Ru over the mesh.
inline double error_energy(const std::function<Vector2d(const Vector2d&)>& grad_u,
                           const Mesh& mesh, const PiecewisePoly& Ru, int qorder) {
  RuleTri ref = triangle_rule(qorder);
  double e2 = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, mesh, t);
    for (int q = 0; q < qr.w.size(); ++q) {
      const Vector2d x = qr.x.col(q);
      e2 += qr.w[q] * (grad_u(x) - Ru.grad(t, x)).squaredNorm();
    }
  }
  return std::sqrt(e2);
}

/// Reference error for a run without a closed-form solution: the adaptive
/// loop is continued from the given mesh until the triangle count at least
/// doubles, and the energy distance between the reconstruction on the fine
/// mesh and the exactly prolongated coarse reconstruction is returned.
inline double reference_error(const Mesh& start, const PiecewisePoly& Ru, int k,
                              const ScalarFn& f, double theta = 0.5, int qorder = -1) {
  if (qorder < 0) qorder = k + 6;
  Mesh m = start;
  std::vector<int> anc(m.n_triangles());
  std::iota(anc.begin(), anc.end(), 0);
  while (m.n_triangles() < 2 * start.n_triangles()) {
    HhoSpace sp(m, k);
    PiecewisePoly ru = sp.reconstruct(sp.solve(f, qorder));
    std::vector<int> marked = dorfler_mark(eta_res_local(sp, ru, f, qorder), theta);
    if (marked.empty()) break;
    Mesh fine = refine(m, marked);
    std::vector<int> anc_new(fine.n_triangles());
    for (int t = 0; t < fine.n_triangles(); ++t) anc_new[t] = anc[fine.parent[t]];
    m = std::move(fine);
    anc = std::move(anc_new);
  }
  HhoSpace sp(m, k);
  PiecewisePoly ru_hat = sp.reconstruct(sp.solve(f, qorder));
  RuleTri ref = triangle_rule(qorder);
  double e2 = 0.0;
  for (int t = 0; t < m.n_triangles(); ++t) {
    MappedRule qr = map_to_triangle(ref, m, t);
    for (int q = 0; q < qr.w.size(); ++q) {
      const Vector2d x = qr.x.col(q);
      e2 += qr.w[q] * (ru_hat.grad(t, x) - Ru.grad(anc[t], x)).squaredNorm();
    }
  }
  return std::sqrt(e2);
}

struct LevelRecord {
  int level = 0;
  long ndof = 0;
  int ntri = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  double eta_res = std::numeric_limits<double>::quiet_NaN();
  double eta_hho = std::numeric_limits<double>::quiet_NaN();
  double eta_eq0 = std::numeric_limits<double>::quiet_NaN();
  double eta_eq1 = std::numeric_limits<double>::quiet_NaN();
  int marked = -1;  // -1: uniform refinement (no marking)
};

struct RunOptions {
  int k = 1;
  int p = 1;             // compute eta_eq1 iff p >= 1
  bool adaptive = false;
  std::string estimator = "res";  // adaptive driving indicator: res | hho | eq0
  double theta = 0.5;
  int levels = 100;
  long max_ndof = 100000;
  int initial_level = 0;  // uniform refinement of the starting mesh
  bool with_error = true;
};

struct RunResult {
  std::vector<LevelRecord> records;
  Mesh final_mesh;
};

inline RunResult run_benchmark(const BenchmarkCase& bench, const RunOptions& opt) {
  Mesh m = build_domain(bench.domain, opt.initial_level);
  const Constants C = constants(bench.omega_max);
  RunResult out;
  for (int level = 0;; ++level) {
    HhoSpace sp(m, opt.k);
    HhoVector uh = sp.solve(bench.f);
    PiecewisePoly ru = sp.reconstruct(uh);
    Defect defect = conformity_defect(ru, m);

    LevelRecord rec;
    rec.level = level;
    rec.ndof = sp.total_dofs();
    rec.ntri = m.n_triangles();

    EstimatorBreakdown e_res = eta_res(sp, ru, bench.f, C);
    EstimatorBreakdown e_hho = eta_hho(sp, uh, ru, bench.f, C, -1, &defect);
    Equilibrated q0 = equilibrate(sp, ru, bench.f, 0);
    EstimatorBreakdown e_eq0 = eta_eq(sp, bench.f, 0, q0.norm, q0.local2, C, -1, &defect, &ru);
    rec.eta_res = e_res.total;
    rec.eta_hho = e_hho.total;
    rec.eta_eq0 = e_eq0.total;
    if (opt.p >= 1) {
      Equilibrated q1 = equilibrate(sp, ru, bench.f, 1);
      rec.eta_eq1 = eta_eq(sp, bench.f, 1, q1.norm, q1.local2, C, -1, &defect, &ru).total;
    }
    if (opt.with_error) {
      if (bench.has_exact)
        rec.error = error_energy(bench.grad_u, m, ru, opt.k + 6);
      else
        rec.error = reference_error(m, ru, opt.k, bench.f, opt.theta);
    }

    const bool stop = rec.ndof >= opt.max_ndof || level + 1 >= opt.levels;
    if (opt.adaptive && !stop) {
      const VectorXd* local2 = nullptr;
      if (opt.estimator == "res")
        local2 = &e_res.local;
      else if (opt.estimator == "hho")
        local2 = &e_hho.local;
      else if (opt.estimator == "eq0")
        local2 = &e_eq0.local;
      else
        throw std::invalid_argument("unknown driving estimator: " + opt.estimator);
      std::vector<int> marked = dorfler_mark(*local2, opt.theta);
      rec.marked = static_cast<int>(marked.size());
      out.records.push_back(rec);
      if (marked.empty()) break;
      m = refine(m, marked);
    } else if (!stop) {
      out.records.push_back(rec);
      m = uniform_refine(m);
    } else {
      out.records.push_back(rec);  // final row: no marking took place
      break;
    }
  }
  out.final_mesh = std::move(m);
  return out;
}

inline void write_csv(std::ostream& os, const std::vector<LevelRecord>& records) {
  auto field = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  os << "level,ndof,ntri,error,eta_res,eta_hho,eta_eq0,eta_eq1,"
        "ef_res,ef_hho,ef_eq0,ef_eq1,marked\n";
  for (const auto& r : records) {
    const bool ef_ok = !std::isnan(r.error) && r.error > 0.0;
    os << r.level << ',' << r.ndof << ',' << r.ntri << ',' << field(r.error) << ','
       << field(r.eta_res) << ',' << field(r.eta_hho) << ',' << field(r.eta_eq0) << ','
       << field(r.eta_eq1) << ',';
    os << (ef_ok ? field(r.eta_res / r.error) : std::string()) << ','
       << (ef_ok ? field(r.eta_hho / r.error) : std::string()) << ','
       << (ef_ok ? field(r.eta_eq0 / r.error) : std::string()) << ','
       << (ef_ok ? field(r.eta_eq1 / r.error) : std::string()) << ',';
    if (r.marked >= 0) os << r.marked;
    os << '\n';
  }
}

/// Least-squares slope of log10(y) against log10(ndof) over the last n rows.
inline double history_slope(const std::vector<LevelRecord>& records,
                            const std::function<double(const LevelRecord&)>& y, int n) {
  const int m = static_cast<int>(records.size());
  const int start = std::max(0, m - n);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int i = start; i < m; ++i) {
    const double xv = std::log10(static_cast<double>(records[i].ndof));
    const double yv = std::log10(y(records[i]));
    sx += xv;
    sy += yv;
    sxx += xv * xv;
    sxy += xv * yv;
    ++cnt;
  }
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

}  // namespace hho

#endif
