#pragma once
// shared by the unit tests and the acceptance binary

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "kafmm/engine.hpp"
#include "kafmm/kernel_table.hpp"
#include "kafmm/octree.hpp"

namespace testing_support {

using namespace kafmm;

// K(r) = 1: every route reproduces it exactly, so a target sees the plain sum of
// the source weights routed to it
struct UnitKernel {
  static constexpr int src_dim = 1, trg_dim = 1;
  static constexpr const char* name = "one";
  static bool skip(double r2, const double*) { return r2 == 0.0; }
  static void apply(const double*, double, const double* s, double* t) { t[0] += s[0]; }
};

}  // namespace testing_support

namespace kafmm::detail {
template <>
struct Scaling<testing_support::UnitKernel> {
  static std::vector<int> src() { return {0}; }
  static std::vector<int> trg() { return {0}; }
  static std::optional<int> order() { return 0; }
  static constexpr bool self_adjoint = true;
};
}  // namespace kafmm::detail

namespace testing_support {

inline const KernelTable& counting_table() {
  using U = UnitKernel;
  static const KernelTable t = detail::make_table<U, U, U, void, void, U>("Count", {{"count", 1}});
  return t;
}

// Source boxes whose subtree sources reach target leaf T, one entry per route,
// read off the interaction lists the way the engine walks them.
inline std::vector<int> routed_source_boxes(const Octree& t, const InteractionLists& L, int T, int min_level) {
  std::vector<int> out(L.U[T].begin(), L.U[T].end());
  const bool expansions = t.depth() >= min_level;
  if (!expansions) return out;
  for (int w : L.W[T])
    if (t.boxes[w].level >= min_level) out.push_back(w);
  for (int b = T; b >= 0; b = t.boxes[b].parent) {
    if (t.boxes[b].level < min_level) break;
    for (int v : L.V[b]) out.push_back(v);
    for (int x : L.X[b]) out.push_back(x);
  }
  return out;
}

// times each (target, source) pair is routed, tree order, [t * ns + s]
inline std::vector<int> route_counts(const Octree& t, const InteractionLists& L, int min_level) {
  const std::size_t ns = t.sl_index.size(), nt = t.trg_index.size();
  std::vector<int> c(nt * ns, 0);
  for (std::size_t T = 0; T < t.boxes.size(); ++T) {
    const Box& B = t.boxes[T];
    if (!B.is_leaf) continue;
    for (int a : routed_source_boxes(t, L, static_cast<int>(T), min_level)) {
      const IndexRange s = t.boxes[a].sl;
      for (std::size_t i = B.trg.begin; i < B.trg.end; ++i)
        for (std::size_t j = s.begin; j < s.end; ++j) ++c[i * ns + j];
    }
  }
  return c;
}

inline double laplace(const double* x, const double* y) {
  const double r = std::hypot(x[0] - y[0], x[1] - y[1], x[2] - y[2]);
  return r == 0 ? 0.0 : 1.0 / (4 * std::numbers::pi * r);
}

// direct Laplace potential summed along the routes, input target order
inline std::vector<double> routed_laplace(const Octree& t, const InteractionLists& L, int min_level,
                                          const std::vector<double>& q) {
  std::vector<double> out(t.trg_index.size(), 0.0);
  for (std::size_t T = 0; T < t.boxes.size(); ++T) {
    const Box& B = t.boxes[T];
    if (!B.is_leaf) continue;
    for (int a : routed_source_boxes(t, L, static_cast<int>(T), min_level)) {
      const IndexRange s = t.boxes[a].sl;
      for (std::size_t i = B.trg.begin; i < B.trg.end; ++i)
        for (std::size_t j = s.begin; j < s.end; ++j)
          out[t.trg_index[i]] += laplace(&t.trg_xyz[3 * i], &t.sl_xyz[3 * j]) * q[t.sl_index[j]];
    }
  }
  return out;
}

inline std::vector<double> all_pairs_laplace(const std::vector<double>& src, const std::vector<double>& q,
                                             const std::vector<double>& trg) {
  std::vector<double> out(trg.size() / 3, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) out[i] += laplace(&trg[3 * i], &src[3 * j]) * q[j];
  return out;
}

// clustered points in [0, L)^3
inline std::vector<double> lognormal_points(std::mt19937_64& g, std::size_t n, double L) {
  std::lognormal_distribution<double> ln(-1.0, 0.5);
  std::vector<double> x(3 * n);
  for (double& v : x) {
    const double u = ln(g);
    v = L * (u - std::floor(u));
    if (v >= L) v = std::nextafter(L, 0.0);
  }
  return x;
}

inline double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

}  // namespace testing_support
