// Bulk marking and the adaptive refinement helpers.

#include <random>
#include <sstream>

#include "catch2/catch_amalgamated.hpp"
#include "hho/afem.hpp"
#include "hho/estimators.hpp"
#include "test_util.hpp"

using namespace hho;

namespace {

/// Exhaustive minimal-cardinality bulk set size for small inputs.
int brute_force_min_size(const VectorXd& eta2, double theta) {
  const int n = static_cast<int>(eta2.size());
  const double total = eta2.sum();
  int best = n + 1;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double s = 0.0;
    int card = 0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        s += eta2[i];
        ++card;
      }
    if (s >= theta * total) best = std::min(best, card);
  }
  return best;
}

}  // namespace

TEST_CASE("bulk marking: worked examples") {
  {
    VectorXd e(5);
    e << 4, 1, 1, 1, 1;
    CHECK(dorfler_mark(e, 0.5) == std::vector<int>{0});
  }
  {
    VectorXd e(4);
    e << 1, 1, 1, 1;
    CHECK(dorfler_mark(e, 0.5) == std::vector<int>{0, 1});
  }
  {
    VectorXd e(4);
    e << 0, 2, 0, 3;
    CHECK(dorfler_mark(e, 1.0) == std::vector<int>{1, 3});  // all positive entries
  }
  {
    VectorXd e = VectorXd::Zero(3);
    CHECK(dorfler_mark(e, 0.5).empty());
  }
  {
    VectorXd e(3);
    e << 1, 5, 2;
    CHECK(dorfler_mark(e, 0.5) == std::vector<int>{1});
    CHECK(dorfler_mark(e, 0.8) == std::vector<int>{1, 2});
  }
}

TEST_CASE("bulk marking: exhaustive minimality oracle") {
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> L(1, 12);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = L(rng);
    VectorXd e(n);
    for (int i = 0; i < n; ++i) {
      double v = U(rng);
      e[i] = (U(rng) < 0.15) ? 0.0 : v * v;  // include zero indicators
    }
    const double theta = U(rng);
    std::vector<int> marked = dorfler_mark(e, theta);
    double s = 0.0;
    for (int i : marked) s += e[i];
    if (e.sum() > 0.0) {
      CHECK(s >= theta * e.sum() * (1.0 - 1e-14));
      CHECK(static_cast<int>(marked.size()) == brute_force_min_size(e, theta));
    } else {
      CHECK(marked.empty());
    }
  }
}

TEST_CASE("refinement: marked triangles disappear") {
  Mesh m = build_domain(Domain::lshape, 2);
  std::vector<int> marked = {0, 5, 11};
  Mesh f = refine(m, marked);
  REQUIRE(f.level == m.level + 1);
  for (int t : marked) {
    int children = 0;
    double area = 0.0;
    for (int c = 0; c < f.n_triangles(); ++c)
      if (f.parent[c] == t) {
        ++children;
        area += f.area(c);
      }
    CHECK(children >= 2);
    CHECK(area == Catch::Approx(m.area(t)).epsilon(1e-13));
  }
}

TEST_CASE("uniform level equals two full bisection sweeps") {
  for (Domain d : {Domain::square, Domain::slit}) {
    Mesh m = build_domain(d, 2);
    Mesh u = uniform_refine(m);

    std::vector<int> all(m.n_triangles());
    std::iota(all.begin(), all.end(), 0);
    Mesh s1 = refine(m, all);
    std::vector<int> all1(s1.n_triangles());
    std::iota(all1.begin(), all1.end(), 0);
    Mesh s2 = refine(s1, all1);

    std::ostringstream a, b;
    write_mesh(a, u);
    write_mesh(b, s2);
    CHECK(a.str() == b.str());

    // parent composition covers areas exactly
    for (int t = 0; t < m.n_triangles(); ++t) {
      double area = 0.0;
      for (int c = 0; c < u.n_triangles(); ++c)
        if (u.parent[c] == t) area += u.area(c);
      CHECK(area == Catch::Approx(m.area(t)).epsilon(1e-13));
    }
  }
}

TEST_CASE("adaptive loop concentrates refinement at the re-entrant corner") {
  Mesh m = build_domain(Domain::lshape, 1);
  const int k = 2;
  auto f = [](const Vector2d&) { return 1.0; };
  for (int level = 0; level < 9; ++level) {
    HhoSpace sp(m, k);
    PiecewisePoly ru = sp.reconstruct(sp.solve(f));
    VectorXd local2 = eta_res_local(sp, ru, f);
    std::vector<int> marked = dorfler_mark(local2, 0.5);
    REQUIRE(!marked.empty());
    m = refine(m, marked);
  }
  // smallest triangles cluster at the corner singularity (origin)
  double hmin_near = 1e9, hmin_far = 1e9;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const double d = m.centroid(t).norm();
    if (d < 0.1)
      hmin_near = std::min(hmin_near, m.diameter(t));
    else if (d > 0.5)
      hmin_far = std::min(hmin_far, m.diameter(t));
  }
  CHECK(hmin_near < 0.25 * hmin_far);
  // and the globally smallest triangle touches the corner region
  int tmin = 0;
  for (int t = 0; t < m.n_triangles(); ++t)
    if (m.diameter(t) < m.diameter(tmin)) tmin = t;
  CHECK(m.centroid(tmin).norm() < 0.1);
}
