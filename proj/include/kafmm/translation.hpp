#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "kafmm/errors.hpp"
#include "kafmm/kernels.hpp"

namespace kafmm {

inline constexpr double kInnerScale = 1.05;
inline constexpr double kOuterScale = 2.95;
inline constexpr double kSvdTolerance = 1e-11;        // vector kernels
inline constexpr double kSvdToleranceScalar = 1e-13;  // scalar kernels

inline double svd_tolerance(const Kernel& ml) { return ml.k_s == 1 && ml.k_t == 1 ? kSvdToleranceScalar : kSvdTolerance; }

enum class SurfaceRole { UpwardEquiv, UpwardCheck, DownwardEquiv, DownwardCheck };
enum class Pass { Upward, Downward };

inline double role_scale(SurfaceRole role) {
  return role == SurfaceRole::UpwardEquiv || role == SurfaceRole::DownwardCheck ? kInnerScale : kOuterScale;
}

inline int surface_count(int m) { return 6 * (m - 1) * (m - 1) + 2; }

// lattice shell on [-1,1]^3; point k and k + M/2 are mirror images
inline std::vector<double> unit_surface(int m) {
  if (m < 2) throw ParameterError("surface order m must be at least 2, got " + std::to_string(m));
  const int n = surface_count(m);
  std::vector<double> c(3 * n);
  const double p = m;
  auto lat = [&](int i) { return (2.0 * i - p + 1.0) / (p - 1.0); };
  c[0] = c[1] = c[2] = -1.0;
  std::size_t k = 1;
  for (int i = 0; i < m - 1; ++i)
    for (int j = 0; j < m - 1; ++j, ++k) {
      c[3 * k] = -1.0;
      c[3 * k + 1] = lat(i + 1);
      c[3 * k + 2] = lat(j);
    }
  for (int i = 0; i < m - 1; ++i)
    for (int j = 0; j < m - 1; ++j, ++k) {
      c[3 * k] = lat(i);
      c[3 * k + 1] = -1.0;
      c[3 * k + 2] = lat(j + 1);
    }
  for (int i = 0; i < m - 1; ++i)
    for (int j = 0; j < m - 1; ++j, ++k) {
      c[3 * k] = lat(i + 1);
      c[3 * k + 1] = lat(j);
      c[3 * k + 2] = -1.0;
    }
  for (int i = 0; i < 3 * (n / 2); ++i) c[3 * k + i] = -c[i];
  return c;
}

inline std::vector<double> surface_points(int m, const std::array<double, 3>& center, double half_width,
                                          double scale) {
  if (!(half_width > 0) || !(scale > 0)) throw ParameterError("surface half-width and scale must be positive");
  std::vector<double> c = unit_surface(m);
  const double s = scale * half_width;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = center[i % 3] + s * c[i];
  return c;
}

// rows: target point * k_t + component, cols: source point * k_s + component
inline Eigen::MatrixXd evaluation_matrix(const Kernel& k, std::span<const double> src_xyz,
                                         std::span<const double> trg_xyz) {
  const std::size_t ns = src_xyz.size() / 3, nt = trg_xyz.size() / 3;
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(nt * k.k_t, ns * k.k_s);
  k.matrix(src_xyz.data(), ns, trg_xyz.data(), nt, E.data());
  return E;
}

// pseudoinverse kept as the pair (V S^+, U^T); applying U^T first confines
// rounding noise to the truncated directions
struct PinvFactors {
  Eigen::MatrixXd VS;  // n x r
  Eigen::MatrixXd Ut;  // r x m
  Eigen::VectorXd s;   // kept singular values
  Eigen::MatrixXd dense() const { return VS * Ut; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return VS * (Ut * x); }
  // factors of pinv(A^T)
  PinvFactors transposed() const {
    return {Ut.transpose() * s.cwiseInverse().asDiagonal(), (VS * s.asDiagonal()).transpose(), s};
  }
};

inline PinvFactors factor_pinv(const Eigen::MatrixXd& A, double tau = kSvdTolerance) {
  if (A.size() == 0 || !A.allFinite()) throw OperatorConstructionError("cannot invert empty or non-finite matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (!(s(0) > 0)) throw OperatorConstructionError("equivalent-to-check matrix is zero");
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > tau * s(0)) ++r;
  PinvFactors f;
  f.VS = svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal();
  f.Ut = svd.matrixU().leftCols(r).transpose();
  f.s = s.head(r);
  return f;
}

inline Eigen::MatrixXd truncated_pinv(const Eigen::MatrixXd& A, double tau = kSvdTolerance) {
  return factor_pinv(A, tau).dense();
}

// surfaces of a box centered at the origin
inline std::vector<double> box_surface(int m, double half_width, SurfaceRole role,
                                       const std::array<double, 3>& center = {0, 0, 0}) {
  return surface_points(m, center, half_width, role_scale(role));
}

// the downward matrix of a self-adjoint kernel is the transpose of the upward one
inline PinvFactors build_check2equiv_factors(const Kernel& ml, int m, double half_width, Pass pass) {
  if (ml.self_adjoint && pass == Pass::Downward)
    return build_check2equiv_factors(ml, m, half_width, Pass::Upward).transposed();
  const auto eq = box_surface(m, half_width, pass == Pass::Upward ? SurfaceRole::UpwardEquiv : SurfaceRole::DownwardEquiv);
  const auto ck = box_surface(m, half_width, pass == Pass::Upward ? SurfaceRole::UpwardCheck : SurfaceRole::DownwardCheck);
  return factor_pinv(evaluation_matrix(ml, eq, ck), svd_tolerance(ml));
}

// maps check values to equivalent strengths for a box of the given half-width
inline Eigen::MatrixXd build_check2equiv(const Kernel& ml, int m, double half_width, Pass pass) {
  return build_check2equiv_factors(ml, m, half_width, pass).dense();
}

inline bool admissible_offset(const std::array<int, 3>& o) {
  bool far = false;
  for (int v : o) {
    if (v < -3 || v > 3) return false;
    if (v < -1 || v > 1) far = true;
  }
  return far;
}

enum class Transfer { M2L, M2M, L2L };

namespace detail {

// integer lattice coordinates in [0, m) of the unit surface points
inline std::vector<int> lattice_index(int m) {
  const auto u = unit_surface(m);
  std::vector<int> idx(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) idx[i] = static_cast<int>(std::lround(0.5 * (u[i] + 1.0) * (m - 1)));
  return idx;
}

// Equivalent-to-check matrix between two surfaces of equal scale s, the source
// shifted by c. Entries depend only on the lattice difference, so the kernel is
// tabulated on the (2m-1)^3 difference grid and gathered.
inline void lattice_transfer(const Kernel& ml, int m, double s, const std::array<double, 3>& c, Eigen::MatrixXd& E) {
  const int n = 2 * m - 1;
  const std::size_t nd = static_cast<std::size_t>(n) * n * n;
  std::vector<double> diff(3 * nd);
  const double step = 2.0 * s / (m - 1);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const std::size_t k = (static_cast<std::size_t>(z) * n + y) * n + x;
        diff[3 * k] = step * (x - (m - 1)) - c[0];
        diff[3 * k + 1] = step * (y - (m - 1)) - c[1];
        diff[3 * k + 2] = step * (z - (m - 1)) - c[2];
      }
  const int ks = ml.k_s, kt = ml.k_t;
  const std::size_t ld = nd * kt;
  std::vector<double> tab(ld * ks, 0.0);
  const double origin[3] = {0.0, 0.0, 0.0};
  ml.matrix(origin, 1, diff.data(), nd, tab.data());

  const auto idx = lattice_index(m);
  const std::size_t M = idx.size() / 3;
  E.resize(M * kt, M * ks);
  for (std::size_t a = 0; a < M; ++a)
    for (int cc = 0; cc < ks; ++cc) {
      double* col = E.data() + (a * ks + cc) * E.rows();
      const double* t0 = tab.data() + cc * ld;
      for (std::size_t b = 0; b < M; ++b) {
        const std::size_t k = (static_cast<std::size_t>(idx[3 * b + 2] - idx[3 * a + 2] + m - 1) * n +
                               (idx[3 * b + 1] - idx[3 * a + 1] + m - 1)) * n +
                              (idx[3 * b] - idx[3 * a] + m - 1);
        for (int t = 0; t < kt; ++t) col[b * kt + t] = t0[k * kt + t];
      }
    }
}

}  // namespace detail

inline std::array<double, 3> octant_offset(int octant) {
  return {(octant & 1) ? 1.0 : -1.0, (octant & 2) ? 1.0 : -1.0, (octant & 4) ? 1.0 : -1.0};
}

// Equivalent-to-check transfer for boxes of half-width h (the child for M2M/L2L).
// M2L: source box at 2h*offset, target at the origin; M2M/L2L: parent at the origin,
// child at h*(+-1,+-1,+-1) picked by the octant in key[0].
inline void build_transfer(const Kernel& ml, Transfer kind, const std::array<int, 3>& key, int m, double h,
                           Eigen::MatrixXd& out) {
  std::vector<double> src, trg;
  switch (kind) {
    case Transfer::M2L: {
      if (!admissible_offset(key)) throw ParameterError("offset is not a V-list displacement");
      const std::array<double, 3> c{2.0 * h * key[0], 2.0 * h * key[1], 2.0 * h * key[2]};
      detail::lattice_transfer(ml, m, kInnerScale * h, c, out);
      return;
    }
    case Transfer::M2M: {
      if (key[0] < 0 || key[0] > 7) throw ParameterError("octant must lie in [0, 8)");
      auto o = octant_offset(key[0]);
      src = box_surface(m, h, SurfaceRole::UpwardEquiv, {h * o[0], h * o[1], h * o[2]});
      trg = box_surface(m, 2 * h, SurfaceRole::UpwardCheck);
      break;
    }
    case Transfer::L2L: {
      if (key[0] < 0 || key[0] > 7) throw ParameterError("octant must lie in [0, 8)");
      auto o = octant_offset(key[0]);
      src = box_surface(m, 2 * h, SurfaceRole::DownwardEquiv);
      trg = box_surface(m, h, SurfaceRole::DownwardCheck, {h * o[0], h * o[1], h * o[2]});
      break;
    }
  }
  out = evaluation_matrix(ml, src, trg);
}

inline Eigen::MatrixXd build_transfer(const Kernel& ml, Transfer kind, const std::array<int, 3>& key, int m,
                                      double h) {
  Eigen::MatrixXd E;
  build_transfer(ml, kind, key, m, h, E);
  return E;
}

// per-component scale factors h^exp, repeated over M surface points
inline Eigen::VectorXd component_scale(const std::vector<int>& exps, int npts, double h) {
  const int k = static_cast<int>(exps.size());
  Eigen::VectorXd s(npts * k);
  for (int c = 0; c < k; ++c) {
    const double v = std::pow(h, exps[c]);
    for (int i = 0; i < npts; ++i) s(i * k + c) = v;
  }
  return s;
}

// Memoized operators at unit half-width; per-level operators follow from the
// kernel's power law, K(h r) = diag(h^trg_exp) K(r) diag(h^src_exp).
class OperatorCache {
 public:
  using MatrixPtr = std::shared_ptr<const Eigen::MatrixXd>;

  explicit OperatorCache(std::size_t budget_bytes = std::size_t(1) << 30) : budget_(budget_bytes) {}

  static OperatorCache& global() {
    static OperatorCache cache;
    return cache;
  }

  void set_budget(std::size_t bytes) {
    std::lock_guard lock(mu_);
    budget_ = bytes;
  }
  std::size_t bytes() const {
    std::lock_guard lock(mu_);
    return bytes_;
  }
  void clear() {
    std::lock_guard lock(mu_);
    pinv_.clear();
    transfer_.clear();
    bytes_ = 0;
  }

  using PinvPtr = std::shared_ptr<const PinvFactors>;

  PinvPtr check2equiv_unit(const Kernel& ml, int m, Pass pass) {
    require_scalable(ml);
    std::lock_guard lock(mu_);
    auto key = std::make_tuple(ml.name, m, static_cast<int>(pass));
    auto it = pinv_.find(key);
    if (it != pinv_.end()) return it->second;
    PinvPtr P;
    if (ml.self_adjoint && pass == Pass::Downward) {
      auto up = pinv_.find(std::make_tuple(ml.name, m, static_cast<int>(Pass::Upward)));
      if (up != pinv_.end()) P = std::make_shared<const PinvFactors>(up->second->transposed());
    }
    if (!P) P = std::make_shared<const PinvFactors>(build_check2equiv_factors(ml, m, 1.0, pass));
    bytes_ += sizeof(double) * (P->VS.size() + P->Ut.size());
    pinv_.emplace(key, P);
    return P;
  }

  // memoized while under budget, otherwise built fresh for the caller
  MatrixPtr transfer_unit(const Kernel& ml, Transfer kind, const std::array<int, 3>& key, int m) {
    if (MatrixPtr T = transfer_cached(ml, kind, key, m)) return T;
    return std::make_shared<const Eigen::MatrixXd>(build_transfer(ml, kind, key, m, 1.0));
  }

  // memoized matrix, or null when it does not fit in the budget
  MatrixPtr transfer_cached(const Kernel& ml, Transfer kind, const std::array<int, 3>& key, int m) {
    require_scalable(ml);
    std::lock_guard lock(mu_);
    auto k = std::make_tuple(ml.name, m, static_cast<int>(kind), key[0], key[1], key[2]);
    auto it = transfer_.find(k);
    if (it != transfer_.end()) return it->second;
    const int M = surface_count(m);
    const std::size_t sz = sizeof(double) * std::size_t(M) * ml.k_s * std::size_t(M) * ml.k_t;
    if (bytes_ + sz > budget_) return nullptr;
    auto T = std::make_shared<const Eigen::MatrixXd>(build_transfer(ml, kind, key, m, 1.0));
    bytes_ += sz;
    transfer_.emplace(k, T);
    return T;
  }

  // materialized operator for half-width h
  Eigen::MatrixXd check2equiv(const Kernel& ml, int m, Pass pass, double h) {
    const PinvPtr P = check2equiv_unit(ml, m, pass);
    const int M = surface_count(m);
    Eigen::VectorXd in = component_scale(ml.trg_exp, M, h).cwiseInverse();
    Eigen::VectorXd out = component_scale(ml.src_exp, M, h).cwiseInverse();
    return out.asDiagonal() * P->dense() * in.asDiagonal();
  }

  Eigen::MatrixXd transfer(const Kernel& ml, Transfer kind, const std::array<int, 3>& key, int m, double h) {
    const MatrixPtr T = transfer_unit(ml, kind, key, m);
    const int M = surface_count(m);
    return component_scale(ml.trg_exp, M, h).asDiagonal() * (*T) * component_scale(ml.src_exp, M, h).asDiagonal();
  }

  Eigen::MatrixXd m2l_matrix(const Kernel& ml, const std::array<int, 3>& offset, int m, double h) {
    if (!admissible_offset(offset)) throw ParameterError("offset is not a V-list displacement");
    const PinvPtr P = check2equiv_unit(ml, m, Pass::Downward);
    const int M = surface_count(m);
    const Eigen::MatrixXd T = transfer(ml, Transfer::M2L, offset, m, h);
    const Eigen::MatrixXd C = P->Ut * (component_scale(ml.trg_exp, M, h).cwiseInverse().asDiagonal() * T);
    return component_scale(ml.src_exp, M, h).cwiseInverse().asDiagonal() * (P->VS * C);
  }

 private:
  static void require_scalable(const Kernel& ml) {
    if (!ml.scalable()) throw ParameterError("kernel " + ml.name + " is not a linear tree kernel");
  }

  mutable std::mutex mu_;
  std::size_t budget_;
  std::size_t bytes_ = 0;
  std::map<std::tuple<std::string, int, int>, PinvPtr> pinv_;
  std::map<std::tuple<std::string, int, int, int, int, int>, MatrixPtr> transfer_;
};

// composed M2L operator built directly at half-width h
inline Eigen::MatrixXd m2l_matrix(const Kernel& ml, const std::array<int, 3>& offset, int m, double h) {
  if (!admissible_offset(offset)) throw ParameterError("offset is not a V-list displacement");
  const PinvFactors P = build_check2equiv_factors(ml, m, h, Pass::Downward);
  return P.VS * (P.Ut * build_transfer(ml, Transfer::M2L, offset, m, h));
}

inline double half_width_at(int level, double root_half_width) { return std::ldexp(root_half_width, -level); }

}  // namespace kafmm
