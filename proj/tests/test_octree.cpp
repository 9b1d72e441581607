#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "kafmm/bench.hpp"
#include "kafmm/octree.hpp"
#include "support.hpp"

using namespace kafmm;
using namespace testing_support;

namespace {

// one point at the center of each cell of a uniform grid of 2^depth per side
std::vector<double> grid_points(int depth, double L) {
  const int n = 1 << depth;
  const double w = L / n;
  std::vector<double> x;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) x.insert(x.end(), {(i + 0.5) * w, (j + 0.5) * w, (k + 0.5) * w});
  return x;
}

bool is_interior(const Box& b) {
  const std::uint32_t n = 1u << b.level;
  for (int d = 0; d < 3; ++d)
    if (b.anchor[d] == 0 || b.anchor[d] + 1 == n) return false;
  return true;
}

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// lists by brute-force classification over all box pairs
InteractionLists brute_lists(const Octree& t) {
  const std::size_t n = t.boxes.size();
  InteractionLists L;
  L.U.resize(n);
  L.V.resize(n);
  L.W.resize(n);
  L.X.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    const Box& B = t.boxes[b];
    for (std::size_t a = 0; a < n; ++a) {
      const Box& A = t.boxes[a];
      const bool adj = adjacent(A, B);
      if (B.is_leaf && A.is_leaf && adj) L.U[b].push_back(static_cast<int>(a));
      if (A.level == B.level && B.parent >= 0 && !adj && adjacent(t.boxes[A.parent], t.boxes[B.parent]))
        L.V[b].push_back(static_cast<int>(a));
      if (B.is_leaf && A.level > B.level && !adj && adjacent(t.boxes[A.parent], B)) L.W[b].push_back(static_cast<int>(a));
    }
  }
  for (std::size_t b = 0; b < n; ++b)
    for (int w : L.W[b]) L.X[w].push_back(static_cast<int>(b));
  return L;
}

Octree random_tree(std::mt19937_64& g, std::size_t n, int cap) {
  const auto x = lognormal_points(g, n, 32.0);
  return build_tree(x, {}, x, Domain{{0, 0, 0}, 32.0}, cap);
}

}  // namespace

TEST(BuildTree, CapacityNotExceededGivesRootLeaf) {
  std::mt19937_64 g(1);
  const auto x = lognormal_points(g, 1000, 32.0);
  const Octree t = build_tree(x, {}, x, Domain{{0, 0, 0}, 32.0}, 2000);
  ASSERT_EQ(t.boxes.size(), 1u);
  EXPECT_TRUE(t.boxes[0].is_leaf);
  const auto L = build_lists(t);
  EXPECT_EQ(L.U[0], std::vector<int>{0});
  EXPECT_TRUE(L.V[0].empty() && L.W[0].empty() && L.X[0].empty());
}

TEST(BuildTree, ForcedSplitSeparatesTwoPoints) {
  const std::vector<double> x{1.0, 1.0, 1.0, 1.2, 1.0, 1.0};
  const Octree t = build_tree({}, {}, x, Domain{{0, 0, 0}, 32.0}, 1);
  int leaves = 0;
  for (const Box& b : t.boxes)
    if (b.is_leaf && b.has_targets()) {
      EXPECT_EQ(b.trg.size(), 1u);
      ++leaves;
    }
  EXPECT_EQ(leaves, 2);
  // the points differ by 0.2, so they separate once boxes are at most that wide
  EXPECT_EQ(t.depth(), 8);
}

TEST(BuildTree, CoincidentPointsStopAtMaxDepth) {
  const std::vector<double> x{3.0, 3.0, 3.0, 3.0, 3.0, 3.0};
  const Octree t = build_tree({}, {}, x, Domain{{0, 0, 0}, 32.0}, 1, 6);
  EXPECT_EQ(t.depth(), 6);
}

TEST(BuildTree, MillionPointScan) {
  CloudSpec s;
  s.n = 1000000;
  s.seed = 3;
  const auto x = cloud_coords(s);
  const Octree t = build_tree(x, {}, x, Domain{{0, 0, 0}, 32.0}, 2000);
  std::vector<char> seen(s.n, 0);
  for (const Box& b : t.boxes) {
    if (!b.is_leaf) continue;
    EXPECT_LE(b.trg.size(), 2000u);
    for (std::size_t i = b.trg.begin; i < b.trg.end; ++i) {
      ASSERT_FALSE(seen[t.trg_index[i]]);
      seen[t.trg_index[i]] = 1;
    }
  }
  EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), static_cast<long>(s.n));
}

TEST(BuildTree, BoxGeometryInvariants) {
  std::mt19937_64 g(4);
  const Octree t = random_tree(g, 3000, 20);
  for (const Box& b : t.boxes) {
    EXPECT_DOUBLE_EQ(b.half_width, std::ldexp(16.0, -b.level));
    if (b.is_leaf) continue;
    std::size_t sl = 0, trg = 0;
    for (int o = 0; o < 8; ++o) {
      const Box& c = t.boxes[b.children[o]];
      EXPECT_EQ(c.parent, &b - &t.boxes[0]);
      for (int d = 0; d < 3; ++d)
        EXPECT_DOUBLE_EQ(c.center[d], b.center[d] + (((o >> d) & 1) ? 0.5 : -0.5) * b.half_width);
      sl += c.sl.size();
      trg += c.trg.size();
    }
    EXPECT_EQ(sl, b.sl.size());
    EXPECT_EQ(trg, b.trg.size());
  }
}

TEST(BuildTree, ReorderingIsAPermutation) {
  std::mt19937_64 g(5);
  const auto sl = lognormal_points(g, 700, 32.0);
  const auto dl = lognormal_points(g, 300, 32.0);
  const auto tg = lognormal_points(g, 500, 32.0);
  const Octree t = build_tree(sl, dl, tg, Domain{{0, 0, 0}, 32.0}, 10);
  auto check = [](const std::vector<double>& in, const std::vector<double>& out, const std::vector<std::size_t>& idx) {
    std::vector<char> hit(idx.size(), 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      ASSERT_LT(idx[i], idx.size());
      hit[idx[i]] = 1;
      for (int d = 0; d < 3; ++d) ASSERT_EQ(out[3 * i + d], in[3 * idx[i] + d]);
    }
    EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), static_cast<long>(idx.size()));
  };
  check(sl, t.sl_xyz, t.sl_index);
  check(dl, t.dl_xyz, t.dl_index);
  check(tg, t.trg_xyz, t.trg_index);
}

TEST(BuildTree, SourcesAloneDoNotSplitUntilEightfold) {
  std::mt19937_64 g(6);
  const auto sl = lognormal_points(g, 80, 32.0);
  EXPECT_EQ(build_tree(sl, {}, {}, Domain{{0, 0, 0}, 32.0}, 10).boxes.size(), 1u);
  EXPECT_GT(build_tree(sl, {}, {}, Domain{{0, 0, 0}, 32.0}, 9).boxes.size(), 1u);
}

TEST(BuildTree, Errors) {
  const Domain d{{0, 0, 0}, 32.0};
  EXPECT_THROW(build_tree({}, {}, std::vector<double>{1, 2, 32}, d, 10), DomainError);
  EXPECT_THROW(build_tree(std::vector<double>{-1e-9, 2, 3}, {}, {}, d, 10), DomainError);
  EXPECT_THROW(build_tree({}, {}, std::vector<double>{1, NAN, 3}, d, 10), InputError);
  EXPECT_THROW(build_tree({}, {}, std::vector<double>{1, 2}, d, 10), InputError);
  EXPECT_THROW(build_tree({}, {}, {}, d, 0), ParameterError);
  EXPECT_THROW(build_tree({}, {}, {}, d, 1, kMaxDepthLimit + 1), ParameterError);
  EXPECT_THROW(build_tree({}, {}, {}, Domain{{0, 0, 0}, 0.0}, 1), DomainError);
  const Octree empty = build_tree({}, {}, {}, d, 1);
  EXPECT_EQ(empty.boxes.size(), 1u);
}

TEST(Lists, AdjacencyIsSymmetricAndReflexive) {
  std::mt19937_64 g(7);
  const Octree t = random_tree(g, 400, 5);
  for (const Box& a : t.boxes) {
    EXPECT_TRUE(adjacent(a, a));
    for (const Box& b : t.boxes) EXPECT_EQ(adjacent(a, b), adjacent(b, a));
  }
}

TEST(Lists, UniformDepthTwo) {
  const auto x = grid_points(2, 32.0);
  const Octree t = build_tree(x, {}, x, Domain{{0, 0, 0}, 32.0}, 1);
  ASSERT_EQ(t.depth(), 2);
  ASSERT_EQ(t.levels[2].size(), 64u);
  const auto L = build_lists(t);
  const auto B = brute_lists(t);
  int interior = 0;
  for (int b : t.levels[2]) {
    if (!is_interior(t.boxes[b])) continue;
    ++interior;
    EXPECT_EQ(L.U[b].size(), 27u);
    // all level-1 boxes neighbor each other, so V holds the other 64 - 27 boxes
    EXPECT_EQ(L.V[b].size(), 37u);
    EXPECT_EQ(sorted(L.V[b]), sorted(B.V[b]));
    EXPECT_TRUE(L.W[b].empty() && L.X[b].empty());
  }
  EXPECT_EQ(interior, 8);
}

TEST(Lists, UniformDepthThreeFullVList) {
  const auto x = grid_points(3, 32.0);
  const Octree t = build_tree(x, {}, x, Domain{{0, 0, 0}, 32.0}, 1);
  ASSERT_EQ(t.depth(), 3);
  const auto L = build_lists(t);
  int full = 0;
  for (int b : t.levels[3]) {
    const Box& B = t.boxes[b];
    if (!is_interior(t.boxes[B.parent])) continue;
    ++full;
    EXPECT_EQ(L.U[b].size(), 27u);
    EXPECT_EQ(L.V[b].size(), 189u);
    EXPECT_TRUE(L.W[b].empty() && L.X[b].empty());
  }
  EXPECT_EQ(full, 64);
}

TEST(Lists, MatchBruteForceClassification) {
  std::mt19937_64 g(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Octree t = random_tree(g, 100 + 20 * trial, 1 + trial % 7);
    const auto L = build_lists(t);
    const auto B = brute_lists(t);
    for (std::size_t b = 0; b < t.boxes.size(); ++b) {
      if (t.boxes[b].is_leaf) {
        EXPECT_EQ(sorted(L.U[b]), sorted(B.U[b])) << "box " << b;
        EXPECT_EQ(sorted(L.W[b]), sorted(B.W[b])) << "box " << b;
      }
      EXPECT_EQ(sorted(L.V[b]), sorted(B.V[b])) << "box " << b;
      EXPECT_EQ(sorted(L.X[b]), sorted(B.X[b])) << "box " << b;
    }
  }
}

TEST(Lists, EveryLeafPairRoutedOnce) {
  // exhaustive over leaf pairs, trees of at most 200 boxes
  std::mt19937_64 g(9);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 20; ++trial) {
    const Octree t = random_tree(g, 60 + 10 * trial, 2 + trial % 5);
    if (t.boxes.size() > 200) continue;
    ++checked;
    const auto L = build_lists(t);
    for (std::size_t T = 0; T < t.boxes.size(); ++T) {
      if (!t.boxes[T].is_leaf) continue;
      std::vector<int> hits(t.boxes.size(), 0);
      for (int a : routed_source_boxes(t, L, static_cast<int>(T), 2)) {
        // count at the leaves below each routed box
        std::vector<int> st{a};
        while (!st.empty()) {
          const int c = st.back();
          st.pop_back();
          if (t.boxes[c].is_leaf)
            ++hits[c];
          else
            st.insert(st.end(), t.boxes[c].children.begin(), t.boxes[c].children.end());
        }
      }
      for (std::size_t S = 0; S < t.boxes.size(); ++S)
        if (t.boxes[S].is_leaf) EXPECT_EQ(hits[S], 1) << "target leaf " << T << " source leaf " << S;
    }
  }
  EXPECT_GE(checked, 5);
}

TEST(Lists, RoutedLaplaceEqualsAllPairs) {
  std::mt19937_64 g(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + g() % 451;
    const auto src = lognormal_points(g, n, 32.0);
    const auto trg = lognormal_points(g, n, 32.0);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> q(n);
    for (double& v : q) v = u(g);
    const Octree t = build_tree(src, {}, trg, Domain{{0, 0, 0}, 32.0}, 1 + static_cast<int>(g() % 40));
    const auto L = build_lists(t);
    EXPECT_LT(max_rel(routed_laplace(t, L, 2, q), all_pairs_laplace(src, q, trg)), 1e-12);
  }
}

TEST(Lists, GoldenDump) {
  const std::vector<double> x{1, 1, 1, 2, 1, 1, 1, 2, 1, 30, 30, 30, 17, 3, 9, 5, 20, 12, 8, 8, 8, 8.5, 8, 8, 8, 8.5, 8};
  const Octree t = build_tree(x, {}, x, Domain{{0, 0, 0}, 32.0}, 2);
  const std::string dump = debug_dump(t, build_lists(t));
  std::ifstream f(KAFMM_TEST_DATA "/octree_golden.txt");
  ASSERT_TRUE(f) << "missing golden file";
  std::stringstream s;
  s << f.rdbuf();
  EXPECT_EQ(dump, s.str());
}
