#pragma once

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kafmm/engine.hpp"
#include "kafmm/errors.hpp"
#include "kafmm/kernel_table.hpp"
#include "kafmm/oracle.hpp"
#include "kafmm/wall.hpp"

namespace kafmm {

// substreams of one seed
enum Stream : std::uint32_t {
  kStreamCoords = 0,
  kStreamSL = 1,
  kStreamDL = 2,
  kStreamParams = 3,
  kStreamTargets = 4,
  kStreamProbes = 5,
};

// mt19937_64 seeded through seed_seq{seed lo, seed hi, stream}
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    g_.seed(seq);
  }
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double open_uniform() { return (static_cast<double>(g_() >> 11) + 0.5) * 0x1.0p-53; }  // (0, 1)
  double normal() { return boost::math::quantile(boost::math::normal(), open_uniform()); }

 private:
  std::mt19937_64 g_;
};

struct CloudSpec {
  std::size_t n = 2000;
  double L = 32;
  std::uint64_t seed = 0;
  bool wall = false;
  double lognormal_m = -1;
  double lognormal_s = 0.5;
};

inline void check_cloud(const CloudSpec& s) {
  if (s.n < 1) throw ParameterError("cloud needs at least one point");
  if (!(s.L > 0) || !std::isfinite(s.L)) throw ParameterError("box size must be positive");
  if (!(s.lognormal_s > 0) || !std::isfinite(s.lognormal_s) || !std::isfinite(s.lognormal_m))
    throw ParameterError("log-normal parameters must be finite with s > 0");
}

// x = L (u - floor u), u log-normal; wall clouds squeeze x3 into [L/2, L)
inline std::vector<double> cloud_coords(const CloudSpec& s, std::uint32_t stream = kStreamCoords) {
  check_cloud(s);
  Rng rng(s.seed, stream);
  std::vector<double> x(3 * s.n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = std::exp(s.lognormal_m + s.lognormal_s * rng.normal());
    double v = s.L * (u - std::floor(u));
    if (v >= s.L) v = std::nextafter(s.L, 0.0);
    if (s.wall && i % 3 == 2) {
      v = 0.5 * (s.L + v);
      if (v >= s.L) v = std::nextafter(s.L, 0.0);
    }
    x[i] = v;
  }
  return x;
}

// source columns per table, for point files
inline std::vector<std::string> sl_columns(const KernelTable& t) {
  const std::string& n = t.name;
  if (n == "LapQPGradGrad") return {"Q11", "Q12", "Q13", "Q21", "Q22", "Q23", "Q31", "Q32", "Q33"};
  if (n.rfind("Lap", 0) == 0) return {"q"};
  if (n == "Stokeslet") return {"f1", "f2", "f3"};
  if (n == "RPY") return {"f1", "f2", "f3", "b"};
  if (n == "StokesRegVel") return {"f1", "f2", "f3", "eps"};
  if (n == "StokesRegVelOmega") return {"f1", "f2", "f3", "t1", "t2", "t3", "eps"};
  return {"f1", "f2", "f3", "q"};
}

inline std::vector<std::string> dl_columns(const KernelTable& t) {
  if (!t.has_dl()) return {};
  if (t.dl_dim == 3) return {"d1", "d2", "d3"};
  return {"D11", "D12", "D13", "D21", "D22", "D23", "D31", "D32", "D33"};
}

// output columns, one per component
inline std::vector<std::string> output_columns(const KernelTable& t) {
  std::vector<std::string> c;
  for (const auto& b : t.blocks) {
    if (b.width == 1)
      c.push_back(b.name);
    else
      for (int k = 1; k <= b.width; ++k) c.push_back(b.name + std::to_string(k));
  }
  return c;
}

// points carry co-located SL and DL values and double as targets
struct PointCloud {
  std::vector<double> xyz;
  std::vector<double> sl_values, dl_values;
  std::vector<std::string> sl_names, dl_names;
  std::size_t size() const { return xyz.size() / 3; }
};

// values uniform in [-1, 1]; b or eps uniform in [0, 1e-4]
inline PointCloud generate_points(const CloudSpec& s, const KernelTable& t) {
  PointCloud c;
  c.xyz = cloud_coords(s);
  c.sl_names = sl_columns(t);
  c.dl_names = dl_columns(t);
  Rng sl(s.seed, kStreamSL), dl(s.seed, kStreamDL), par(s.seed, kStreamParams);
  c.sl_values.resize(s.n * t.sl_dim);
  for (std::size_t i = 0; i < s.n; ++i)
    for (int k = 0; k < t.sl_dim; ++k)
      c.sl_values[i * t.sl_dim + k] = k == t.param_index ? par.uniform(0.0, 1e-4) : sl.uniform(-1.0, 1.0);
  c.dl_values.resize(s.n * t.dl_dim);
  for (double& v : c.dl_values) v = dl.uniform(-1.0, 1.0);
  return c;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string points_csv(const PointCloud& c) {
  std::string out = "x,y,z";
  for (const auto& n : c.sl_names) out += "," + n;
  for (const auto& n : c.dl_names) out += "," + n;
  out += "\n";
  const std::size_t ks = c.sl_names.size(), kd = c.dl_names.size();
  for (std::size_t i = 0; i < c.size(); ++i) {
    out += format_double(c.xyz[3 * i]) + "," + format_double(c.xyz[3 * i + 1]) + "," + format_double(c.xyz[3 * i + 2]);
    for (std::size_t k = 0; k < ks; ++k) out += "," + format_double(c.sl_values[i * ks + k]);
    for (std::size_t k = 0; k < kd; ++k) out += "," + format_double(c.dl_values[i * kd + k]);
    out += "\n";
  }
  return out;
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) f.push_back(cur);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

inline std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}
}  // namespace detail

// reads a point file written for table t
inline PointCloud parse_points_csv(const std::string& text, const KernelTable& t) {
  PointCloud c;
  c.sl_names = sl_columns(t);
  c.dl_names = dl_columns(t);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw InputError("point file is empty");
  std::vector<std::string> head = detail::split_csv(line);
  for (auto& h : head) h = detail::trim(h);
  std::vector<std::string> want{"x", "y", "z"};
  want.insert(want.end(), c.sl_names.begin(), c.sl_names.end());
  want.insert(want.end(), c.dl_names.begin(), c.dl_names.end());
  if (head != want) {
    std::string w;
    for (const auto& h : want) w += (w.empty() ? "" : ",") + h;
    throw InputError("point file header does not match kernel " + t.name + ": expected " + w);
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != want.size())
      throw InputError("point file line " + std::to_string(lineno) + ": expected " + std::to_string(want.size()) +
                       " fields, got " + std::to_string(f.size()));
    for (std::size_t k = 0; k < f.size(); ++k) {
      const std::string s = detail::trim(f[k]);
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0')
        throw InputError("point file line " + std::to_string(lineno) + ": cannot parse '" + s + "'");
      if (k < 3)
        c.xyz.push_back(v);
      else if (k < 3 + c.sl_names.size())
        c.sl_values.push_back(v);
      else
        c.dl_values.push_back(v);
    }
  }
  if (c.size() == 0) throw InputError("point file has no rows");
  return c;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("write failed for " + path);
}

inline std::string values_csv(const KernelTable& t, const std::vector<double>& values) {
  const auto cols = output_columns(t);
  std::string out;
  for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k];
  out += "\n";
  const std::size_t w = cols.size();
  for (std::size_t i = 0; i < values.size() / w; ++i) {
    for (std::size_t k = 0; k < w; ++k) out += (k ? "," : "") + format_double(values[i * w + k]);
    out += "\n";
  }
  return out;
}

// Convergence reports

enum class Reference { Direct, MMax };

inline Reference parse_reference(const std::string& s) {
  if (s == "direct") return Reference::Direct;
  if (s == "m_max" || s == "mmax") return Reference::MMax;
  throw ParameterError("reference must be direct or m_max, got " + s);
}

inline const char* reference_name(Reference r) { return r == Reference::Direct ? "direct" : "m_max"; }

struct ReportRow {
  std::string kernel;
  std::string metric;  // eps_l2 or noslip_ratio
  std::string reference;
  int m = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  int leaf_capacity = 0;
  double t_tree = 0;
  double t_run = 0;
  double value = 0;
  std::vector<double> blocks;  // per output block, eps_l2 rows only
};

struct ConvergenceReport {
  std::vector<std::string> block_names;
  std::vector<ReportRow> rows;

  std::string csv(bool with_timings = true) const {
    std::string out = "kernel,metric,reference,m,n,seed,leaf_capacity,t_tree,t_run,value";
    for (const auto& b : block_names) out += ",eps_" + b;
    out += "\n";
    for (const auto& r : rows) {
      out += r.kernel + "," + r.metric + "," + r.reference + "," + std::to_string(r.m) + "," + std::to_string(r.n) +
             "," + std::to_string(r.seed) + "," + std::to_string(r.leaf_capacity) + ",";
      out += with_timings ? format_double(r.t_tree) + "," + format_double(r.t_run) : std::string(",");
      out += "," + format_double(r.value);
      for (std::size_t b = 0; b < block_names.size(); ++b)
        out += "," + (b < r.blocks.size() ? format_double(r.blocks[b]) : std::string());
      out += "\n";
    }
    return out;
  }
};

struct ConvergenceOptions {
  std::vector<int> m_list{6, 8, 10, 12};
  Reference reference = Reference::Direct;
  int m_max = 16;
  int leaf_capacity = 2000;
  bool independent_targets = false;  // targets from their own substream instead of the source points
  std::size_t direct_limit = 100000;
  OperatorCache* cache = nullptr;
};

namespace detail {
inline std::vector<double> block_errors(const KernelTable& t, const std::vector<double>& v,
                                        const std::vector<double>& ref) {
  std::vector<double> e;
  int off = 0;
  for (const auto& b : t.blocks) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < v.size(); i += t.output_dim)
      for (int c = off; c < off + b.width; ++c) {
        num += (v[i + c] - ref[i + c]) * (v[i + c] - ref[i + c]);
        den += ref[i + c] * ref[i + c];
      }
    e.push_back(den > 0 ? std::sqrt(num / den) : std::numeric_limits<double>::quiet_NaN());
    off += b.width;
  }
  return e;
}

inline void check_m_list(const std::vector<int>& ms) {
  if (ms.empty()) throw ParameterError("m list is empty");
  for (int m : ms)
    if (m < 2) throw ParameterError("m must be at least 2, got " + std::to_string(m));
}
}  // namespace detail

inline ConvergenceReport convergence_run(const std::string& kernel, const CloudSpec& cloud,
                                         const ConvergenceOptions& opt = {}) {
  const KernelTable& t = registry_table(kernel);
  detail::check_m_list(opt.m_list);
  if (opt.reference == Reference::Direct && cloud.n > opt.direct_limit)
    throw ParameterError("direct reference limited to n <= " + std::to_string(opt.direct_limit));
  const PointCloud pc = generate_points(cloud, t);
  const std::vector<double> trg = opt.independent_targets ? cloud_coords(cloud, kStreamTargets) : pc.xyz;
  const std::vector<double> dl = t.has_dl() ? pc.xyz : std::vector<double>{};

  SetupOptions so;
  so.leaf_capacity = opt.leaf_capacity;
  so.domain.length = cloud.L;
  so.cache = opt.cache;
  auto run = [&](int m, double* t_tree, double* t_run) {
    so.m = m;
    const Plan p = setup(t, pc.xyz, dl, trg, so);
    Evaluation e = evaluate(p, pc.sl_values, pc.dl_values);
    if (t_tree) *t_tree = p.t_tree;
    if (t_run) *t_run = e.t_run;
    return std::move(e.values);
  };
  const std::vector<double> ref = opt.reference == Reference::Direct
                                      ? direct_sum(t, pc.xyz, pc.sl_values, dl, pc.dl_values, trg)
                                      : run(opt.m_max, nullptr, nullptr);

  ConvergenceReport rep;
  for (const auto& b : t.blocks) rep.block_names.push_back(b.name);
  for (int m : opt.m_list) {
    ReportRow r;
    r.kernel = kernel;
    r.metric = "eps_l2";
    r.reference = reference_name(opt.reference);
    r.m = m;
    r.n = cloud.n;
    r.seed = cloud.seed;
    r.leaf_capacity = opt.leaf_capacity;
    const auto v = run(m, &r.t_tree, &r.t_run);
    r.value = eps_l2(v, ref);
    r.blocks = detail::block_errors(t, v, ref);
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

// Wall benchmark: sources above the plane x3 = L/2, targets at the sources,
// plus a grid of probes on the plane for the no-slip row.
struct WallBenchOptions {
  std::vector<int> m_list{6, 8, 10, 12};
  Reference reference = Reference::Direct;
  int m_max = 16;
  int leaf_capacity = 2000;
  std::size_t probes = 500;
  std::size_t direct_limit = 100000;
  OperatorCache* cache = nullptr;
};

struct WallCloud {
  WallProblem problem;  // targets: sources first, then probes
  std::size_t n_probes = 0;
};

inline WallCloud wall_cloud(const CloudSpec& spec, bool rpy, std::size_t probes) {
  CloudSpec s = spec;
  s.wall = true;
  WallCloud c;
  c.n_probes = probes;
  WallProblem& p = c.problem;
  p.wall_height = 0.5 * s.L;
  p.src_xyz = cloud_coords(s);
  Rng fr(s.seed, kStreamSL), br(s.seed, kStreamParams), pr(s.seed, kStreamProbes);
  p.forces.resize(3 * s.n);
  for (double& f : p.forces) f = fr.uniform(-1.0, 1.0);
  if (rpy) {
    p.radii.resize(s.n);
    for (double& b : p.radii) b = br.uniform(0.0, 1e-4);
  }
  p.trg_xyz = p.src_xyz;
  for (std::size_t i = 0; i < probes; ++i) {
    const double x = pr.uniform(0.0, s.L), y = pr.uniform(0.0, s.L);
    p.trg_xyz.insert(p.trg_xyz.end(), {x, y, p.wall_height});
  }
  return c;
}

// max |u| over probes over the median |u| at the off-wall targets
inline double noslip_ratio(const std::vector<double>& u, std::size_t n_off, std::size_t n_probes) {
  std::vector<double> off(n_off);
  for (std::size_t i = 0; i < n_off; ++i) off[i] = std::hypot(u[3 * i], u[3 * i + 1], u[3 * i + 2]);
  if (off.empty()) throw MetricError("no off-wall targets");
  std::nth_element(off.begin(), off.begin() + off.size() / 2, off.end());
  const double med = off[off.size() / 2];
  if (!(med > 0)) throw MetricError("median off-wall velocity is zero");
  double mx = 0;
  for (std::size_t i = n_off; i < n_off + n_probes; ++i)
    mx = std::max(mx, std::hypot(u[3 * i], u[3 * i + 1], u[3 * i + 2]));
  return mx / med;
}

inline ConvergenceReport wall_bench(const std::string& kernel, const CloudSpec& cloud,
                                    const WallBenchOptions& opt = {}) {
  if (kernel != "Stokeslet" && kernel != "RPY") throw ParameterError("wall bench supports Stokeslet and RPY only");
  detail::check_m_list(opt.m_list);
  if (opt.reference == Reference::Direct && cloud.n > opt.direct_limit)
    throw ParameterError("direct reference limited to n <= " + std::to_string(opt.direct_limit));
  const bool rpy = kernel == "RPY";
  const WallCloud wc = wall_cloud(cloud, rpy, opt.probes);
  const std::size_t n = cloud.n;

  WallOptions wo;
  wo.leaf_capacity = opt.leaf_capacity;
  wo.domain = Domain{{0.0, 0.0, 0.0}, cloud.L};
  wo.cache = opt.cache;
  auto run = [&](int m) {
    wo.m = m;
    return rpy ? rpy_wall(wc.problem, wo) : stokeslet_wall(wc.problem, wo);
  };
  WallResult ref;
  if (opt.reference == Reference::Direct)
    ref = rpy ? rpy_wall_direct(wc.problem) : stokeslet_wall_direct(wc.problem);
  else
    ref = run(opt.m_max);

  // off-wall [u, lap u] per target
  auto joined = [&](const WallResult& r) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
      v.insert(v.end(), r.u.begin() + 3 * i, r.u.begin() + 3 * i + 3);
      if (rpy) v.insert(v.end(), r.lap_u.begin() + 3 * i, r.lap_u.begin() + 3 * i + 3);
    }
    return v;
  };
  KernelTable shape;
  shape.output_dim = rpy ? 6 : 3;
  shape.blocks = rpy ? std::vector<OutputBlock>{{"vel", 3}, {"lapvel", 3}} : std::vector<OutputBlock>{{"vel", 3}};
  const auto ref_v = joined(ref);

  ConvergenceReport rep;
  for (const auto& b : shape.blocks) rep.block_names.push_back(b.name);
  for (int m : opt.m_list) {
    const WallResult r = run(m);
    ReportRow row;
    row.kernel = kernel + "Wall";
    row.metric = "eps_l2";
    row.reference = reference_name(opt.reference);
    row.m = m;
    row.n = n;
    row.seed = cloud.seed;
    row.leaf_capacity = opt.leaf_capacity;
    row.t_tree = r.t_tree;
    row.t_run = r.t_run;
    const auto v = joined(r);
    row.value = eps_l2(v, ref_v);
    row.blocks = detail::block_errors(shape, v, ref_v);
    rep.rows.push_back(row);
    if (opt.probes > 0) {
      row.metric = "noslip_ratio";
      row.value = noslip_ratio(r.u, n, opt.probes);
      row.blocks.clear();
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace kafmm
