#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kafmm/engine.hpp"
#include "kafmm/errors.hpp"
#include "kafmm/kernel_table.hpp"
#include "kafmm/oracle.hpp"

namespace kafmm {

// Point forces above the no-slip plane x3 = wall_height.
struct WallProblem {
  double wall_height = 0;
  std::vector<double> src_xyz;  // n x 3
  std::vector<double> forces;   // n x 3
  std::vector<double> radii;    // n, empty means all zero
  std::vector<double> trg_xyz;  // n_t x 3
};

struct WallOptions {
  int m = 10;
  int leaf_capacity = 2000;
  int max_depth = 15;
  // user coordinates; must hold the points and their mirror images.
  // Default: smallest cube around both, sitting on the wall plane's mirror.
  std::optional<Domain> domain;
  OperatorCache* cache = nullptr;
};

struct WallResult {
  std::vector<double> u;      // n_t x 3
  std::vector<double> lap_u;  // n_t x 3, empty for the Stokeslet wall
  double t_tree = 0;
  double t_run = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// one sub-summation: table, sources, targets -> values
using WallSum = std::function<std::vector<double>(const KernelTable&, std::span<const double>, std::span<const double>,
                                                  std::span<const double>, std::span<const double>,
                                                  std::span<const double>)>;

inline void check_wall_problem(const WallProblem& p) {
  if (p.src_xyz.size() % 3 || p.trg_xyz.size() % 3) throw InputError("wall coordinates must come in triples");
  const std::size_t n = p.src_xyz.size() / 3;
  if (p.forces.size() != 3 * n) throw InputError("wall forces: expected 3 values per source");
  if (!p.radii.empty() && p.radii.size() != n) throw InputError("wall radii: expected one value per source");
  if (!std::isfinite(p.wall_height)) throw InputError("wall height is not finite");
  for (double r : p.radii)
    if (!(r >= 0) || !std::isfinite(r)) throw ParameterError("sphere radius must be finite and nonnegative");
  for (double f : p.forces)
    if (!std::isfinite(f)) throw InputError("wall forces contain NaN or infinity");
  auto above = [&](const std::vector<double>& xyz, const char* what) {
    for (std::size_t i = 0; i < xyz.size() / 3; ++i) {
      if (!std::isfinite(xyz[3 * i]) || !std::isfinite(xyz[3 * i + 1]) || !std::isfinite(xyz[3 * i + 2]))
        throw InputError(std::string(what) + " point " + std::to_string(i) + " is not finite");
      if (xyz[3 * i + 2] < p.wall_height)
        throw DomainError(std::string(what) + " point " + std::to_string(i) + " lies below the wall");
    }
  };
  above(p.src_xyz, "source");
  above(p.trg_xyz, "target");
}

// shifted so the wall sits at x3 = 0
inline std::vector<double> shift_to_wall(const std::vector<double>& xyz, double h) {
  std::vector<double> out(xyz);
  for (std::size_t i = 2; i < out.size(); i += 3) out[i] -= h;
  return out;
}

inline std::vector<double> mirror(const std::vector<double>& xyz) {
  std::vector<double> out(xyz);
  for (std::size_t i = 2; i < out.size(); i += 3) out[i] = -out[i];
  return out;
}

inline std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// internal-coordinate domain, wall at x3 = 0
inline Domain wall_domain(const WallProblem& p, const std::vector<double>& y, const std::vector<double>& x,
                          const std::optional<Domain>& user) {
  if (user) {
    Domain d = *user;
    d.origin[2] -= p.wall_height;
    return d;
  }
  std::array<double, 2> lo{INFINITY, INFINITY}, hi{-INFINITY, -INFINITY};
  double top = 0;
  for (const auto* v : {&y, &x})
    for (std::size_t i = 0; i < v->size() / 3; ++i) {
      for (int d = 0; d < 2; ++d) {
        lo[d] = std::min(lo[d], (*v)[3 * i + d]);
        hi[d] = std::max(hi[d], (*v)[3 * i + d]);
      }
      top = std::max(top, (*v)[3 * i + 2]);
    }
  double len = std::max({hi[0] - lo[0], hi[1] - lo[1], 2 * top});
  len = len > 0 ? len * (1 + 1e-6) : 1.0;
  Domain d;
  d.length = len;
  d.origin = {lo[0] - 1e-7 * len, lo[1] - 1e-7 * len, -0.5 * len};
  return d;
}

// The four sub-summations and the per-target assembly.
inline WallResult wall_assemble(const WallProblem& p, bool rpy, const WallSum& sum) {
  check_wall_problem(p);
  const std::size_t n = p.src_xyz.size() / 3, nt = p.trg_xyz.size() / 3;
  const std::vector<double> y = shift_to_wall(p.src_xyz, p.wall_height);
  const std::vector<double> x = shift_to_wall(p.trg_xyz, p.wall_height);
  const std::vector<double> yi = mirror(y);
  const std::vector<double> both = concat(y, yi);
  auto rad = [&](std::size_t i) { return p.radii.empty() ? 0.0 : p.radii[i]; };
  const double* f = p.forces.data();

  WallResult out;
  out.u.assign(3 * nt, 0.0);
  if (nt == 0) return out;

  // row 1: wall-parallel force and its negative image
  {
    const KernelTable& t = registry_table(rpy ? "RPY" : "Stokeslet");
    const int k = t.sl_dim;
    std::vector<double> v(2 * n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* a = &v[i * k];
      double* b = &v[(n + i) * k];
      a[0] = f[3 * i];
      a[1] = f[3 * i + 1];
      b[0] = -f[3 * i];
      b[1] = -f[3 * i + 1];
      if (rpy) a[3] = b[3] = rad(i);
    }
    const auto r = sum(t, both, v, {}, {}, x);
    const int kt = t.output_dim;
    if (rpy) out.lap_u.assign(3 * nt, 0.0);
    for (std::size_t j = 0; j < nt; ++j)
      for (int c = 0; c < 3; ++c) {
        out.u[3 * j + c] += r[j * kt + c];
        if (rpy) out.lap_u[3 * j + c] += r[j * kt + 3 + c];
      }
  }

  const KernelTable& lap = registry_table("LapPGradGrad");
  std::vector<double> hz(3 * nt, 0.0);  // d3 grad (phi^SD + phi^Q)
  auto add_potential = [&](const std::vector<double>& r, bool weighted) {
    for (std::size_t j = 0; j < nt; ++j) {
      const double* g = &r[10 * j];
      const double x3 = x[3 * j + 2];
      if (weighted) {
        out.u[3 * j] += x3 * g[1];
        out.u[3 * j + 1] += x3 * g[2];
        out.u[3 * j + 2] += x3 * g[3] - g[0];
        hz[3 * j] += g[6];
        hz[3 * j + 1] += g[8];
        hz[3 * j + 2] += g[9];
      } else {
        for (int c = 0; c < 3; ++c) out.u[3 * j + c] += g[1 + c];
      }
    }
  };

  // row 2: phi^SD
  {
    std::vector<double> q(2 * n), d(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = -0.5 * f[3 * i + 2];
      q[n + i] = 0.5 * f[3 * i + 2];
      const double h = y[3 * i + 2];
      d[3 * i] = -h * f[3 * i];
      d[3 * i + 1] = -h * f[3 * i + 1];
      d[3 * i + 2] = h * f[3 * i + 2];
    }
    add_potential(sum(lap, both, q, yi, d, x), true);
  }

  // row 3: phi^SDZ
  {
    std::vector<double> q(2 * n), d(6 * n, 0.0);
    bool any_b = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = 0.5 * y[3 * i + 2] * f[3 * i + 2];
      q[i] = s;
      q[n + i] = -s;
      const double w = rpy ? rad(i) * rad(i) / 6.0 * f[3 * i + 2] : 0.0;
      d[3 * i + 2] = d[3 * (n + i) + 2] = w;
      any_b = any_b || w != 0;
    }
    if (any_b)
      add_potential(sum(lap, both, q, both, d, x), false);
    else
      add_potential(sum(lap, both, q, {}, {}, x), false);
  }

  // row 4: phi^Q, image side only
  if (rpy) {
    std::vector<double> Q(9 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = rad(i) * rad(i) / 3.0;
      double* a = &Q[9 * i];
      a[0] = c * f[3 * i + 2];
      a[4] = c * f[3 * i + 2];
      a[6] = c * f[3 * i];
      a[7] = c * f[3 * i + 1];
    }
    add_potential(sum(registry_table("LapQPGradGrad"), yi, Q, {}, {}, x), true);
  }

  if (rpy)
    for (std::size_t j = 0; j < nt; ++j)
      for (int c = 0; c < 3; ++c) out.lap_u[3 * j + c] += 2.0 * hz[3 * j + c];
  return out;
}

inline WallResult wall_engine(const WallProblem& p, bool rpy, const WallOptions& opt) {
  check_wall_problem(p);
  const Domain dom =
      wall_domain(p, shift_to_wall(p.src_xyz, p.wall_height), shift_to_wall(p.trg_xyz, p.wall_height), opt.domain);
  double t_tree = 0, t_run = 0;
  std::vector<std::string> warnings;
  WallSum sum = [&](const KernelTable& t, std::span<const double> sl, std::span<const double> slv,
                    std::span<const double> dl, std::span<const double> dlv, std::span<const double> trg) {
    SetupOptions so;
    so.m = opt.m;
    so.leaf_capacity = opt.leaf_capacity;
    so.max_depth = opt.max_depth;
    so.domain = dom;
    so.cache = opt.cache;
    const Plan plan = setup(t, sl, dl, trg, so);
    Evaluation ev = evaluate(plan, slv, dlv);
    t_tree += plan.t_tree;
    t_run += ev.t_run;
    warnings.insert(warnings.end(), ev.warnings.begin(), ev.warnings.end());
    return std::move(ev.values);
  };
  WallResult r = wall_assemble(p, rpy, sum);
  r.t_tree = t_tree;
  r.t_run = t_run;
  r.warnings = std::move(warnings);
  return r;
}

inline WallSum direct_wall_sum() {
  return [](const KernelTable& t, std::span<const double> sl, std::span<const double> slv,
            std::span<const double> dl, std::span<const double> dlv, std::span<const double> trg) {
    return direct_sum(t, sl, slv, dl, dlv, trg);
  };
}

}  // namespace detail

// velocity and its Laplacian above the wall; targets may lie on the wall
inline WallResult rpy_wall(const WallProblem& p, const WallOptions& opt = {}) {
  return detail::wall_engine(p, true, opt);
}

// point forces (radii ignored); velocity only
inline WallResult stokeslet_wall(const WallProblem& p, const WallOptions& opt = {}) {
  return detail::wall_engine(p, false, opt);
}

// the same four summations by all-pairs sums
inline WallResult rpy_wall_direct(const WallProblem& p) { return detail::wall_assemble(p, true, detail::direct_wall_sum()); }
inline WallResult stokeslet_wall_direct(const WallProblem& p) {
  return detail::wall_assemble(p, false, detail::direct_wall_sum());
}

}  // namespace kafmm
