#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kafmm/errors.hpp"
#include "kafmm/kernel_table.hpp"
#include "kafmm/octree.hpp"
#include "kafmm/translation.hpp"

namespace kafmm {

struct Plan;

// adds to the root downward check values, given the root upward equivalent strengths
using RootHook = std::function<void(const Plan&, std::span<const double> root_equiv, std::span<double> root_check)>;

struct SetupOptions {
  int m = 10;
  int leaf_capacity = 2000;
  Domain domain{};
  int max_depth = 15;
  OperatorCache* cache = nullptr;  // defaults to the process-wide cache
  RootHook root_hook;
};

struct BoxPair {
  int src, trg;
};

struct Plan {
  const KernelTable* table = nullptr;
  int m = 0;
  int M = 0;
  Octree tree;
  InteractionLists lists;
  OperatorCache* ops = nullptr;
  RootHook root_hook;
  double t_tree = 0;
  double t_operators = 0;
  std::vector<double> unit;  // unit surface lattice
  int min_level = 2;         // shallowest level carrying expansions
  // V-list pairs grouped by offset, levels below min_level dropped
  std::map<std::array<int, 3>, std::vector<BoxPair>> m2l;
  std::size_t n_sl = 0, n_dl = 0, n_trg = 0;

  std::vector<double> surface(int box, SurfaceRole role) const {
    const Box& b = tree.boxes[box];
    const double s = role_scale(role) * b.half_width;
    std::vector<double> p(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) p[i] = b.center[i % 3] + s * unit[i];
    return p;
  }
};

struct Evaluation {
  std::vector<double> values;  // n_trg x output_dim, input target order
  double t_run = 0;
  std::vector<std::pair<std::string, double>> stage_seconds;  // wall time per traversal stage
  std::vector<std::string> warnings;
};

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

inline Plan setup(const KernelTable& table, std::span<const double> sl_xyz, std::span<const double> dl_xyz,
                  std::span<const double> trg_xyz, const SetupOptions& opt) {
  if (opt.m < 2) throw ParameterError("m must be at least 2");
  if (!table.has_dl() && !dl_xyz.empty()) throw InputError("table " + table.name + " has no double-layer sources");
  const auto t0 = std::chrono::steady_clock::now();
  Plan p;
  p.table = &table;
  p.m = opt.m;
  p.M = surface_count(opt.m);
  p.tree = build_tree(sl_xyz, dl_xyz, trg_xyz, opt.domain, opt.leaf_capacity, opt.max_depth);
  p.lists = build_lists(p.tree);
  p.ops = opt.cache ? opt.cache : &OperatorCache::global();
  p.root_hook = opt.root_hook;
  p.unit = unit_surface(opt.m);
  p.min_level = p.root_hook ? 0 : 2;
  p.n_sl = sl_xyz.size() / 3;
  p.n_dl = dl_xyz.size() / 3;
  p.n_trg = trg_xyz.size() / 3;

  const auto& boxes = p.tree.boxes;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    if (!boxes[b].has_targets() || boxes[b].level < p.min_level) continue;
    for (int a : p.lists.V[b]) {
      if (!boxes[a].has_sources()) continue;
      std::array<int, 3> off;
      for (int d = 0; d < 3; ++d)
        off[d] = static_cast<int>(std::lround((boxes[a].center[d] - boxes[b].center[d]) / (2 * boxes[b].half_width)));
      p.m2l[off].push_back({a, static_cast<int>(b)});
    }
  }
  p.t_tree = detail::seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  if (p.tree.depth() >= p.min_level) {
    p.ops->check2equiv_unit(table.ml(), p.m, Pass::Upward);
    p.ops->check2equiv_unit(table.ml(), p.m, Pass::Downward);
  }
  p.t_operators = detail::seconds_since(t1);
  return p;
}

namespace detail {

// buffers reused across batches
struct Workspace {
  Eigen::MatrixXd S, R, tmp, T;
};

// per-level diagonal scalings of a unit-width operator
struct LevelScale {
  std::vector<Eigen::VectorXd> in, out;
};

// dst_box += diag(out) T diag(in) src_box over a batch of box pairs, scales picked by the target level
template <class Mul>
void apply_batched(Mul mul, Eigen::Index cols, Eigen::Index rows, const LevelScale& sc,
                   const std::vector<BoxPair>& pairs, const std::vector<Box>& boxes, const std::vector<double>& src,
                   std::vector<double>& dst, Workspace& ws) {
  constexpr std::size_t chunk = 256;
  for (std::size_t b0 = 0; b0 < pairs.size(); b0 += chunk) {
    const std::size_t nb = std::min(chunk, pairs.size() - b0);
    ws.S.resize(cols, nb);
    for (std::size_t k = 0; k < nb; ++k) {
      const BoxPair& pr = pairs[b0 + k];
      ws.S.col(k) = Eigen::Map<const Eigen::VectorXd>(&src[pr.src * cols], cols).cwiseProduct(sc.in[boxes[pr.trg].level]);
    }
    ws.R.resize(rows, nb);
    mul(ws.S, ws.R);
    for (std::size_t k = 0; k < nb; ++k) {
      const BoxPair& pr = pairs[b0 + k];
      Eigen::Map<Eigen::VectorXd>(&dst[pr.trg * rows], rows) += ws.R.col(k).cwiseProduct(sc.out[boxes[pr.trg].level]);
    }
  }
}

inline void apply_scaled(const Eigen::MatrixXd& T, const LevelScale& sc, const std::vector<BoxPair>& pairs,
                         const std::vector<Box>& boxes, const std::vector<double>& src, std::vector<double>& dst,
                         Workspace& ws) {
  apply_batched([&](const Eigen::MatrixXd& S, Eigen::MatrixXd& R) { R.noalias() = T * S; }, T.cols(), T.rows(), sc,
                pairs, boxes, src, dst, ws);
}

inline void apply_pinv(const PinvFactors& P, const LevelScale& sc, const std::vector<BoxPair>& pairs,
                       const std::vector<Box>& boxes, const std::vector<double>& src, std::vector<double>& dst,
                       Workspace& ws) {
  apply_batched(
      [&](const Eigen::MatrixXd& S, Eigen::MatrixXd& R) {
        ws.tmp.resize(P.Ut.rows(), S.cols());
        ws.tmp.noalias() = P.Ut * S;
        R.noalias() = P.VS * ws.tmp;
      },
      P.Ut.cols(), P.VS.rows(), sc, pairs, boxes, src, dst, ws);
}

inline void check_values(std::span<const double> v, std::size_t n, int dim, const char* what) {
  if (v.size() != n * static_cast<std::size_t>(dim))
    throw InputError(std::string(what) + " values: expected " + std::to_string(n * dim) + " entries, got " +
                     std::to_string(v.size()));
  for (double x : v)
    if (!std::isfinite(x)) throw InputError(std::string(what) + " values contain NaN or infinity");
}

inline std::vector<double> to_tree_order(std::span<const double> v, const std::vector<std::size_t>& index, int dim) {
  std::vector<double> out(index.size() * dim);
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(&v[index[i] * dim], dim, &out[i * dim]);
  return out;
}

}  // namespace detail

inline Evaluation evaluate(const Plan& plan, std::span<const double> sl_values, std::span<const double> dl_values) {
  const KernelTable& kt = *plan.table;
  const Octree& tree = plan.tree;
  const auto& boxes = tree.boxes;
  const auto& lists = plan.lists;
  detail::check_values(sl_values, plan.n_sl, kt.sl_dim, "single-layer");
  if (kt.has_dl())
    detail::check_values(dl_values, plan.n_dl, kt.dl_dim, "double-layer");
  else if (!dl_values.empty())
    throw InputError("table " + kt.name + " has no double-layer sources");

  const auto t0 = std::chrono::steady_clock::now();
  Evaluation ev;
  const std::vector<double> slv = detail::to_tree_order(sl_values, tree.sl_index, kt.sl_dim);
  const std::vector<double> dlv =
      kt.has_dl() ? detail::to_tree_order(dl_values, tree.dl_index, kt.dl_dim) : std::vector<double>{};

  if (kt.param_index >= 0 && plan.n_sl > 0) {
    double pmax = 0, wmin = tree.domain.length;
    for (std::size_t i = 0; i < plan.n_sl; ++i) pmax = std::max(pmax, std::abs(slv[i * kt.sl_dim + kt.param_index]));
    for (const Box& b : boxes)
      if (b.is_leaf) wmin = std::min(wmin, 2 * b.half_width);
    if (pmax > 0.1 * wmin)
      ev.warnings.push_back("max source length scale " + std::to_string(pmax) + " exceeds 0.1 x smallest leaf width " +
                            std::to_string(wmin));
  }

  const Kernel& ml = kt.ml();
  const int M = plan.M;
  const std::size_t ne = static_cast<std::size_t>(M) * kt.equiv_dim;
  const std::size_t nc = static_cast<std::size_t>(M) * kt.check_dim;
  const std::size_t nbox = boxes.size();
  const int depth = tree.depth();
  const bool tree_pass = depth >= plan.min_level;

  std::vector<double> up_equiv, up_check, dn_check, dn_equiv;
  std::vector<char> has_up(nbox, 0), has_local(nbox, 0);
  std::vector<double> out(plan.n_trg * kt.output_dim, 0.0);

  auto pts = [&](const std::vector<double>& xyz, IndexRange r) { return &xyz[3 * r.begin]; };
  auto sl_block = [&](const Kernel& k, int a, const double* txyz, double* tv, std::size_t nt) {
    const Box& A = boxes[a];
    if (!A.sl.empty()) k.block(pts(tree.sl_xyz, A.sl), &slv[A.sl.begin * kt.sl_dim], A.sl.size(), txyz, tv, nt);
  };
  auto dl_block = [&](const Kernel& k, int a, const double* txyz, double* tv, std::size_t nt) {
    const Box& A = boxes[a];
    if (!A.dl.empty()) k.block(pts(tree.dl_xyz, A.dl), &dlv[A.dl.begin * kt.dl_dim], A.dl.size(), txyz, tv, nt);
  };

  auto mark = std::chrono::steady_clock::now();
  auto lap = [&](const char* stage) {
    ev.stage_seconds.emplace_back(stage, detail::seconds_since(mark));
    mark = std::chrono::steady_clock::now();
  };

  if (tree_pass) {
    up_equiv.assign(nbox * ne, 0.0);
    up_check.assign(nbox * nc, 0.0);
    dn_check.assign(nbox * nc, 0.0);
    dn_equiv.assign(nbox * ne, 0.0);
    const auto P_up = plan.ops->check2equiv_unit(ml, plan.m, Pass::Upward);
    const auto P_dn = plan.ops->check2equiv_unit(ml, plan.m, Pass::Downward);
    std::array<OperatorCache::MatrixPtr, 8> m2m, l2l;
    detail::Workspace ws;
    // scalings keyed by target level; M2M uses the child width
    detail::LevelScale same, up, pinv;
    for (int level = 0; level <= depth; ++level) {
      const double h = half_width_at(level, tree.root_half_width());
      const double hc = half_width_at(level + 1, tree.root_half_width());
      same.in.push_back(component_scale(ml.src_exp, M, h));
      same.out.push_back(component_scale(ml.trg_exp, M, h));
      up.in.push_back(component_scale(ml.src_exp, M, hc));
      up.out.push_back(component_scale(ml.trg_exp, M, hc));
      pinv.in.push_back(component_scale(ml.trg_exp, M, h).cwiseInverse());
      pinv.out.push_back(component_scale(ml.src_exp, M, h).cwiseInverse());
    }

    // check-to-equivalent for all marked boxes of one level
    auto solve_level = [&](int level, const OperatorCache::PinvPtr& P, const std::vector<char>& mark,
                           const std::vector<double>& check, std::vector<double>& equiv) {
      std::vector<BoxPair> pairs;
      for (int b : tree.levels[level])
        if (mark[b]) pairs.push_back({b, b});
      if (pairs.empty()) return;
      detail::apply_pinv(*P, pinv, pairs, boxes, check, equiv, ws);
    };

    // upward pass
    for (int level = depth; level >= plan.min_level; --level) {
      std::array<std::vector<BoxPair>, 8> child_pairs;
      for (int b : tree.levels[level]) {
        const Box& B = boxes[b];
        if (!B.has_sources()) continue;
        has_up[b] = 1;
        if (B.is_leaf) {
          const auto ck = plan.surface(b, SurfaceRole::UpwardCheck);
          sl_block(*kt.s2m_sl, b, ck.data(), &up_check[b * nc], M);
          if (kt.has_dl()) dl_block(*kt.s2m_dl, b, ck.data(), &up_check[b * nc], M);
        } else {
          for (int o = 0; o < 8; ++o) {
            const int c = B.children[o];
            if (!has_up[c]) continue;
            child_pairs[o].push_back({c, b});
          }
        }
      }
      for (int o = 0; o < 8; ++o) {
        if (child_pairs[o].empty()) continue;
        if (!m2m[o]) m2m[o] = plan.ops->transfer_unit(ml, Transfer::M2M, {o, 0, 0}, plan.m);
        detail::apply_scaled(*m2m[o], up, child_pairs[o], boxes, up_equiv, up_check, ws);
      }
      solve_level(level, P_up, has_up, up_check, up_equiv);
    }
    m2m = {};
    lap("upward");

    // V list
    for (const auto& [off, pairs] : plan.m2l) {
      const auto cached = plan.ops->transfer_cached(ml, Transfer::M2L, off, plan.m);
      if (!cached) build_transfer(ml, Transfer::M2L, off, plan.m, 1.0, ws.T);
      detail::apply_scaled(cached ? *cached : ws.T, same, pairs, boxes, up_equiv, dn_check, ws);
      for (const auto& pr : pairs) has_local[pr.trg] = 1;
    }
    lap("m2l");

    // X list
    for (std::size_t b = 0; b < nbox; ++b) {
      const Box& B = boxes[b];
      if (!B.has_targets() || B.level < plan.min_level || lists.X[b].empty()) continue;
      const auto ck = plan.surface(static_cast<int>(b), SurfaceRole::DownwardCheck);
      for (int a : lists.X[b]) {
        if (!boxes[a].has_sources()) continue;
        sl_block(*kt.s2l_sl, a, ck.data(), &dn_check[b * nc], M);
        if (kt.has_dl()) dl_block(*kt.s2l_dl, a, ck.data(), &dn_check[b * nc], M);
        has_local[b] = 1;
      }
    }

    if (plan.root_hook) {
      plan.root_hook(plan, std::span<const double>(&up_equiv[0], ne), std::span<double>(&dn_check[0], nc));
      has_local[0] = 1;
    }
    lap("s2l");

    // downward pass
    for (int level = plan.min_level; level <= depth; ++level) {
      std::array<std::vector<BoxPair>, 8> child_pairs;
      for (int b : tree.levels[level]) {
        const Box& B = boxes[b];
        if (B.parent < 0 || !has_local[B.parent] || !B.has_targets()) continue;
        for (int o = 0; o < 8; ++o)
          if (boxes[B.parent].children[o] == b) child_pairs[o].push_back({B.parent, b});
        has_local[b] = 1;
      }
      for (int o = 0; o < 8; ++o) {
        if (child_pairs[o].empty()) continue;
        if (!l2l[o]) l2l[o] = plan.ops->transfer_unit(ml, Transfer::L2L, {o, 0, 0}, plan.m);
        detail::apply_scaled(*l2l[o], same, child_pairs[o], boxes, dn_equiv, dn_check, ws);
      }
      solve_level(level, P_dn, has_local, dn_check, dn_equiv);
    }
    lap("downward");
  }

  // leaves: S2T, M2T, L2T
  for (std::size_t b = 0; b < nbox; ++b) {
    const Box& B = boxes[b];
    if (!B.is_leaf || !B.has_targets()) continue;
    const double* tx = pts(tree.trg_xyz, B.trg);
    double* tv = &out[B.trg.begin * kt.output_dim];
    const std::size_t nt = B.trg.size();
    for (int a : lists.U[b]) {
      sl_block(*kt.s2t_sl, a, tx, tv, nt);
      if (kt.has_dl()) dl_block(*kt.s2t_dl, a, tx, tv, nt);
    }
    if (!tree_pass) continue;
    for (int a : lists.W[b]) {
      if (!has_up[a]) continue;
      const auto eq = plan.surface(a, SurfaceRole::UpwardEquiv);
      kt.m2t->block(eq.data(), &up_equiv[a * ne], M, tx, tv, nt);
    }
    if (has_local[b]) {
      const auto eq = plan.surface(static_cast<int>(b), SurfaceRole::DownwardEquiv);
      kt.l2t->block(eq.data(), &dn_equiv[b * ne], M, tx, tv, nt);
    }
  }

  lap("leaves");

  ev.values.assign(out.size(), 0.0);
  const int k = kt.output_dim;
  for (std::size_t i = 0; i < plan.n_trg; ++i) std::copy_n(&out[i * k], k, &ev.values[tree.trg_index[i] * k]);
  ev.t_run = detail::seconds_since(t0);
  return ev;
}

// target sphere velocity (1 + a^2/6 lap) u
inline std::array<double, 3> rpy_target_velocity(const std::array<double, 3>& u, const std::array<double, 3>& lap_u,
                                                  double a) {
  const double c = a * a / 6.0;
  return {u[0] + c * lap_u[0], u[1] + c * lap_u[1], u[2] + c * lap_u[2]};
}

}  // namespace kafmm
