// Adaptive refinement driver pieces: bulk (Dörfler) marking with a minimal
// greedy set, and the refinement helpers used by the benchmark loop.

#ifndef HHO_AFEM_HPP
#define HHO_AFEM_HPP

#include <algorithm>
#include <numeric>
#include <vector>

#include "hho/geometry.hpp"
#include "hho/quadrature.hpp"

namespace hho {

/// Minimal triangle set carrying the fraction theta of the total squared
/// indicator: greedy selection by descending value, ties by ascending index.
/// Returns indices in ascending order; an all-zero input yields the empty set.
inline std::vector<int> dorfler_mark(const VectorXd& eta2, double theta) {
  const double total = eta2.sum();
  std::vector<int> out;
  if (total <= 0.0) return out;
  std::vector<int> idx(eta2.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (eta2[a] != eta2[b]) return eta2[a] > eta2[b];
    return a < b;
  });
  double acc = 0.0;
  for (int i : idx) {
    if (acc >= theta * total) break;
    if (eta2[i] <= 0.0) break;
    out.push_back(i);
    acc += eta2[i];
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Bisects the marked triangles (plus conformity closure) and advances the
/// level counter.
inline Mesh refine(const Mesh& m, const std::vector<int>& marked) {
  Mesh out = bisect(m, marked);
  out.level = m.level + 1;
  return out;
}

/// One uniform level: every triangle is bisected twice, so the mesh size
/// halves while staying inside the bisection mesh class.  The parent map of
/// the result refers to the input mesh.
inline Mesh uniform_refine(const Mesh& m) {
  std::vector<int> all(m.n_triangles());
  std::iota(all.begin(), all.end(), 0);
  Mesh m1 = bisect(m, all);
  std::vector<int> all1(m1.n_triangles());
  std::iota(all1.begin(), all1.end(), 0);
  Mesh m2 = bisect(m1, all1);
  for (auto& p : m2.parent) p = m1.parent[p];
  m2.level = m.level + 1;
  return m2;
}

}  // namespace hho

#endif
