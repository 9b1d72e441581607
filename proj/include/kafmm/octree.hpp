#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "kafmm/errors.hpp"

namespace kafmm {

struct Domain {
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  double length = 1.0;
};

struct IndexRange {
  std::size_t begin = 0, end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
};

struct Box {
  int level = 0;
  std::array<double, 3> center{};
  double half_width = 0;
  int parent = -1;
  std::array<int, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};
  // ranges cover the whole subtree
  IndexRange sl, dl, trg;
  bool is_leaf = true;
  std::array<std::uint32_t, 3> anchor{};

  bool has_sources() const { return !sl.empty() || !dl.empty(); }
  bool has_targets() const { return !trg.empty(); }
};

struct Octree {
  Domain domain;
  int leaf_capacity = 0;
  int max_depth = 0;
  std::vector<Box> boxes;               // breadth-first, boxes[0] is the root
  std::vector<std::vector<int>> levels;  // box ids per level
  // points in tree order, and the input index of each
  std::vector<double> sl_xyz, dl_xyz, trg_xyz;
  std::vector<std::size_t> sl_index, dl_index, trg_index;

  int depth() const { return static_cast<int>(levels.size()) - 1; }
  double root_half_width() const { return 0.5 * domain.length; }
};

inline constexpr int kMaxDepthLimit = 20;

namespace detail {

struct PointBlock {
  std::vector<double>* xyz;
  std::vector<std::size_t>* index;
};

inline void check_points(std::span<const double> xyz, const Domain& d, const char* what) {
  if (xyz.size() % 3 != 0) throw InputError(std::string(what) + " coordinate array length is not a multiple of 3");
  for (std::size_t i = 0; i < xyz.size(); ++i) {
    const double v = xyz[i];
    const double lo = d.origin[i % 3];
    if (!std::isfinite(v)) throw InputError(std::string(what) + " point " + std::to_string(i / 3) + " is not finite");
    if (v < lo || v >= lo + d.length)
      throw DomainError(std::string(what) + " point " + std::to_string(i / 3) + " outside the domain");
  }
}

// stable partition of [r.begin, r.end) into 8 octants about c
inline std::array<IndexRange, 8> split_points(std::vector<double>& xyz, std::vector<std::size_t>& index,
                                              IndexRange r, const std::array<double, 3>& c) {
  const std::size_t n = r.size();
  std::vector<unsigned char> oct(n);
  std::array<std::size_t, 9> count{};
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = &xyz[3 * (r.begin + i)];
    const unsigned o = (p[0] >= c[0] ? 1u : 0u) | (p[1] >= c[1] ? 2u : 0u) | (p[2] >= c[2] ? 4u : 0u);
    oct[i] = static_cast<unsigned char>(o);
    ++count[o + 1];
  }
  for (int o = 0; o < 8; ++o) count[o + 1] += count[o];
  std::array<IndexRange, 8> out;
  for (int o = 0; o < 8; ++o) out[o] = {r.begin + count[o], r.begin + count[o + 1]};
  std::vector<double> tx(3 * n);
  std::vector<std::size_t> ti(n);
  std::array<std::size_t, 8> pos;
  for (int o = 0; o < 8; ++o) pos[o] = count[o];
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pos[oct[i]]++;
    std::copy_n(&xyz[3 * (r.begin + i)], 3, &tx[3 * k]);
    ti[k] = index[r.begin + i];
  }
  std::copy(tx.begin(), tx.end(), xyz.begin() + 3 * r.begin);
  std::copy(ti.begin(), ti.end(), index.begin() + r.begin);
  return out;
}

}  // namespace detail

inline Octree build_tree(std::span<const double> sl_xyz, std::span<const double> dl_xyz,
                         std::span<const double> trg_xyz, const Domain& domain, int leaf_capacity,
                         int max_depth = 15) {
  if (leaf_capacity < 1) throw ParameterError("leaf_capacity must be positive");
  if (max_depth < 0 || max_depth > kMaxDepthLimit)
    throw ParameterError("max_depth must lie in [0, " + std::to_string(kMaxDepthLimit) + "]");
  if (!(domain.length > 0) || !std::isfinite(domain.length)) throw DomainError("domain length must be positive");
  detail::check_points(sl_xyz, domain, "single-layer");
  detail::check_points(dl_xyz, domain, "double-layer");
  detail::check_points(trg_xyz, domain, "target");

  Octree t;
  t.domain = domain;
  t.leaf_capacity = leaf_capacity;
  t.max_depth = max_depth;
  t.sl_xyz.assign(sl_xyz.begin(), sl_xyz.end());
  t.dl_xyz.assign(dl_xyz.begin(), dl_xyz.end());
  t.trg_xyz.assign(trg_xyz.begin(), trg_xyz.end());
  auto iota = [](std::vector<std::size_t>& v, std::size_t n) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
  };
  iota(t.sl_index, sl_xyz.size() / 3);
  iota(t.dl_index, dl_xyz.size() / 3);
  iota(t.trg_index, trg_xyz.size() / 3);

  Box root;
  root.level = 0;
  root.half_width = 0.5 * domain.length;
  for (int d = 0; d < 3; ++d) root.center[d] = domain.origin[d] + root.half_width;
  root.sl = {0, t.sl_index.size()};
  root.dl = {0, t.dl_index.size()};
  root.trg = {0, t.trg_index.size()};
  t.boxes.push_back(root);
  t.levels.push_back({0});

  const std::size_t cap = static_cast<std::size_t>(leaf_capacity);
  for (int level = 0; level < max_depth; ++level) {
    std::vector<int> next;
    for (int id : t.levels[level]) {
      const Box b = t.boxes[id];
      const bool split = b.trg.size() > cap || b.sl.size() + b.dl.size() > 8 * cap;
      if (!split) continue;
      const auto sl = detail::split_points(t.sl_xyz, t.sl_index, b.sl, b.center);
      const auto dl = detail::split_points(t.dl_xyz, t.dl_index, b.dl, b.center);
      const auto tg = detail::split_points(t.trg_xyz, t.trg_index, b.trg, b.center);
      const double w = domain.length / std::ldexp(1.0, level + 1);
      for (int o = 0; o < 8; ++o) {
        Box c;
        c.level = level + 1;
        c.parent = id;
        c.half_width = 0.5 * w;
        for (int d = 0; d < 3; ++d) {
          c.anchor[d] = 2 * b.anchor[d] + ((o >> d) & 1);
          c.center[d] = domain.origin[d] + (c.anchor[d] + 0.5) * w;
        }
        c.sl = sl[o];
        c.dl = dl[o];
        c.trg = tg[o];
        const int cid = static_cast<int>(t.boxes.size());
        t.boxes[id].children[o] = cid;
        t.boxes.push_back(c);
        next.push_back(cid);
      }
      t.boxes[id].is_leaf = false;
    }
    if (next.empty()) break;
    t.levels.push_back(std::move(next));
  }
  return t;
}

struct InteractionLists {
  std::vector<std::vector<int>> U, V, W, X;
  std::vector<std::vector<int>> colleagues;  // same-level adjacent boxes, self included
};

// closed cubes touch or overlap
inline bool adjacent(const Box& a, const Box& b) {
  const int D = kMaxDepthLimit;
  for (int d = 0; d < 3; ++d) {
    const std::uint64_t alo = std::uint64_t(a.anchor[d]) << (D - a.level);
    const std::uint64_t ahi = std::uint64_t(a.anchor[d] + 1) << (D - a.level);
    const std::uint64_t blo = std::uint64_t(b.anchor[d]) << (D - b.level);
    const std::uint64_t bhi = std::uint64_t(b.anchor[d] + 1) << (D - b.level);
    if (alo > bhi || blo > ahi) return false;
  }
  return true;
}

inline InteractionLists build_lists(const Octree& t) {
  const std::size_t n = t.boxes.size();
  InteractionLists L;
  L.U.resize(n);
  L.V.resize(n);
  L.W.resize(n);
  L.X.resize(n);
  L.colleagues.resize(n);
  L.colleagues[0] = {0};

  for (std::size_t lvl = 1; lvl < t.levels.size(); ++lvl)
    for (int id : t.levels[lvl]) {
      const Box& b = t.boxes[id];
      for (int pc : L.colleagues[b.parent]) {
        const Box& p = t.boxes[pc];
        if (p.is_leaf) continue;
        for (int c : p.children) {
          if (adjacent(t.boxes[c], b))
            L.colleagues[id].push_back(c);
          else
            L.V[id].push_back(c);
        }
      }
      std::sort(L.colleagues[id].begin(), L.colleagues[id].end());
      std::sort(L.V[id].begin(), L.V[id].end());
    }

  for (std::size_t id = 0; id < n; ++id) {
    const Box& b = t.boxes[id];
    if (!b.is_leaf) continue;
    // coarser or same-level adjacent leaves
    for (int a = static_cast<int>(id); a >= 0; a = t.boxes[a].parent)
      for (int c : L.colleagues[a])
        if (t.boxes[c].is_leaf && adjacent(t.boxes[c], b)) L.U[id].push_back(c);
    // finer boxes below the colleagues
    std::vector<int> stack;
    for (int c : L.colleagues[id])
      if (c != static_cast<int>(id) && !t.boxes[c].is_leaf) stack.push_back(c);
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      for (int k : t.boxes[c].children) {
        const Box& kb = t.boxes[k];
        if (!adjacent(kb, b))
          L.W[id].push_back(k);
        else if (kb.is_leaf)
          L.U[id].push_back(k);
        else
          stack.push_back(k);
      }
    }
    std::sort(L.U[id].begin(), L.U[id].end());
    std::sort(L.W[id].begin(), L.W[id].end());
  }

  for (std::size_t id = 0; id < n; ++id)
    for (int w : L.W[id]) L.X[w].push_back(static_cast<int>(id));
  for (auto& x : L.X) std::sort(x.begin(), x.end());
  return L;
}

// one line per box, for golden comparisons
inline std::string debug_dump(const Octree& t, const InteractionLists& L) {
  std::string out = "id level center half_width parent leaf sl dl trg U V W X\n";
  char buf[512];
  auto list = [](const std::vector<int>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "]";
  };
  for (std::size_t i = 0; i < t.boxes.size(); ++i) {
    const Box& b = t.boxes[i];
    std::snprintf(buf, sizeof buf, "%zu %d (%.17g,%.17g,%.17g) %.17g %d %d [%zu,%zu) [%zu,%zu) [%zu,%zu) ", i,
                  b.level, b.center[0], b.center[1], b.center[2], b.half_width, b.parent, b.is_leaf ? 1 : 0,
                  b.sl.begin, b.sl.end, b.dl.begin, b.dl.end, b.trg.begin, b.trg.end);
    out += buf;
    out += list(L.U[i]) + " " + list(L.V[i]) + " " + list(L.W[i]) + " " + list(L.X[i]) + "\n";
  }
  return out;
}

}  // namespace kafmm
