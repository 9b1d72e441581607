#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kafmm/errors.hpp"

namespace kafmm {

namespace detail {
inline constexpr double inv4pi = 0.25 / std::numbers::pi;
inline constexpr double inv8pi = 0.125 / std::numbers::pi;

inline bool skip_singular(double r2, const double*) { return r2 == 0.0; }
}  // namespace detail

enum class LapWant { Value, Grad, GradGrad };
enum class PVelWant { PVel, Grad, Laplacian };

// Pointwise kernels. apply() accumulates K(r) s into t, r = x - y.

template <LapWant W>
struct LaplaceMonopole {
  static constexpr int src_dim = 1;
  static constexpr int trg_dim = W == LapWant::Value ? 1 : (W == LapWant::Grad ? 4 : 10);
  static constexpr const char* name =
      W == LapWant::Value ? "L" : (W == LapWant::Grad ? "L+gradL" : "L+gradL+gradgradL");
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    const double rinv = 1.0 / std::sqrt(r2);
    const double q = s[0] * detail::inv4pi;
    const double qr1 = q * rinv;
    t[0] += qr1;
    if constexpr (W != LapWant::Value) {
      const double qr3 = qr1 * rinv * rinv;
      t[1] -= qr3 * r[0];
      t[2] -= qr3 * r[1];
      t[3] -= qr3 * r[2];
      if constexpr (W == LapWant::GradGrad) {
        const double qr5 = 3.0 * qr3 * rinv * rinv;
        t[4] += qr5 * r[0] * r[0] - qr3;
        t[5] += qr5 * r[0] * r[1];
        t[6] += qr5 * r[0] * r[2];
        t[7] += qr5 * r[1] * r[1] - qr3;
        t[8] += qr5 * r[1] * r[2];
        t[9] += qr5 * r[2] * r[2] - qr3;
      }
    }
  }
};

// gradient-only and hessian-only parts, used for composition
struct LaplaceGrad {
  static constexpr int src_dim = 1, trg_dim = 3;
  static constexpr const char* name = "gradL";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    double tmp[4] = {0, 0, 0, 0};
    LaplaceMonopole<LapWant::Grad>::apply(r, r2, s, tmp);
    for (int i = 0; i < 3; ++i) t[i] += tmp[i + 1];
  }
};

struct LaplaceGradGrad {
  static constexpr int src_dim = 1, trg_dim = 6;
  static constexpr const char* name = "gradgradL";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    double tmp[10] = {};
    LaplaceMonopole<LapWant::GradGrad>::apply(r, r2, s, tmp);
    for (int i = 0; i < 6; ++i) t[i] += tmp[i + 4];
  }
};

template <LapWant W>
struct LaplaceDipole {
  static constexpr int src_dim = 3;
  static constexpr int trg_dim = LaplaceMonopole<W>::trg_dim;
  static constexpr const char* name =
      W == LapWant::Value ? "LD" : (W == LapWant::Grad ? "LD+gradLD" : "LD+gradLD+gradgradLD");
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* d, double* t) {
    const double rinv = 1.0 / std::sqrt(r2);
    const double rinv2 = rinv * rinv;
    const double rinv3 = rinv * rinv2;
    const double rd = r[0] * d[0] + r[1] * d[1] + r[2] * d[2];
    t[0] += detail::inv4pi * rd * rinv3;
    if constexpr (W != LapWant::Value) {
      const double a = detail::inv4pi * rinv3;
      const double b = 3.0 * a * rd * rinv2;
      for (int i = 0; i < 3; ++i) t[1 + i] += a * d[i] - b * r[i];
      if constexpr (W == LapWant::GradGrad) {
        // -d_i d_k d_j L d_j
        const double c5 = 3.0 * a * rinv2;
        const double c7 = 15.0 * a * rd * rinv2 * rinv2;
        int n = 4;
        for (int i = 0; i < 3; ++i)
          for (int k = i; k < 3; ++k) {
            double v = c7 * r[i] * r[k] - c5 * (d[i] * r[k] + d[k] * r[i]);
            if (i == k) v -= c5 * rd;
            t[n++] += v;
          }
      }
    }
  }
};

template <LapWant W>
struct LaplaceQuadrupole {
  static constexpr int src_dim = 9;
  static constexpr int trg_dim = LaplaceMonopole<W>::trg_dim;
  static constexpr const char* name =
      W == LapWant::Value ? "LQ" : (W == LapWant::Grad ? "LQ+gradLQ" : "LQ+gradLQ+gradgradLQ");
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* Q, double* t) {
    const double rinv = 1.0 / std::sqrt(r2);
    const double rinv2 = rinv * rinv;
    const double rinv3 = rinv * rinv2;
    const double rinv5 = rinv3 * rinv2;
    const double tr = Q[0] + Q[4] + Q[8];
    double g[3];  // (Q + Q^T) r
    for (int i = 0; i < 3; ++i)
      g[i] = (Q[3 * i] + Q[i]) * r[0] + (Q[3 * i + 1] + Q[3 + i]) * r[1] + (Q[3 * i + 2] + Q[6 + i]) * r[2];
    const double s = 0.5 * (g[0] * r[0] + g[1] * r[1] + g[2] * r[2]);
    t[0] += detail::inv4pi * (3.0 * s * rinv5 - tr * rinv3);
    if constexpr (W != LapWant::Value) {
      const double rinv7 = rinv5 * rinv2;
      for (int i = 0; i < 3; ++i)
        t[1 + i] += detail::inv4pi * (-15.0 * r[i] * s * rinv7 + 3.0 * (g[i] + r[i] * tr) * rinv5);
      if constexpr (W == LapWant::GradGrad) {
        const double rinv9 = rinv7 * rinv2;
        int n = 4;
        for (int i = 0; i < 3; ++i)
          for (int l = i; l < 3; ++l) {
            double v = 105.0 * r[i] * r[l] * s * rinv9 -
                       15.0 * (r[l] * g[i] + r[i] * g[l] + r[i] * r[l] * tr) * rinv7 +
                       3.0 * (Q[3 * i + l] + Q[3 * l + i]) * rinv5;
            if (i == l) v += -15.0 * s * rinv7 + 3.0 * tr * rinv5;
            t[n++] += detail::inv4pi * v;
          }
      }
    }
  }
};

// G, optionally concatenated with lap G
template <bool Lap>
struct Stokeslet {
  static constexpr int src_dim = 3;
  static constexpr int trg_dim = Lap ? 6 : 3;
  static constexpr const char* name = Lap ? "G+lapG" : "G";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* f, double* t) {
    const double rinv = 1.0 / std::sqrt(r2);
    const double rinv3 = rinv * rinv * rinv;
    const double rf = r[0] * f[0] + r[1] * f[1] + r[2] * f[2];
    const double a = detail::inv8pi * rinv;
    const double b = detail::inv8pi * rf * rinv3;
    t[0] += a * f[0] + b * r[0];
    t[1] += a * f[1] + b * r[1];
    t[2] += a * f[2] + b * r[2];
    if constexpr (Lap) {
      const double c = 2.0 * detail::inv8pi * rinv3;
      const double d = 6.0 * b * rinv * rinv;
      t[3] += c * f[0] - d * r[0];
      t[4] += c * f[1] - d * r[1];
      t[5] += c * f[2] - d * r[2];
    }
  }
};

struct StokesletLaplacian {
  static constexpr int src_dim = 3, trg_dim = 3;
  static constexpr const char* name = "lapG";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* f, double* t) {
    double tmp[6] = {};
    Stokeslet<true>::apply(r, r2, f, tmp);
    for (int i = 0; i < 3; ++i) t[i] += tmp[3 + i];
  }
};

// G + Omega, singular rotlet part for the angular velocity
struct StokesletOmega {
  static constexpr int src_dim = 3, trg_dim = 6;
  static constexpr const char* name = "G+Omega";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* f, double* t) {
    Stokeslet<false>::apply(r, r2, f, t);
    const double rinv = 1.0 / std::sqrt(r2);
    const double c = detail::inv8pi * rinv * rinv * rinv;
    t[3] += c * (f[1] * r[2] - f[2] * r[1]);
    t[4] += c * (f[2] * r[0] - f[0] * r[2]);
    t[5] += c * (f[0] * r[1] - f[1] * r[0]);
  }
};

// source [f, b]
template <bool Lap>
struct RPY {
  static constexpr int src_dim = 4;
  static constexpr int trg_dim = Lap ? 6 : 3;
  static constexpr const char* name = Lap ? "GRPY+lapGRPY" : "GRPY";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    double tmp[6] = {};
    Stokeslet<true>::apply(r, r2, s, tmp);
    const double b2 = s[3] * s[3] / 6.0;
    t[0] += tmp[0] + b2 * tmp[3];
    t[1] += tmp[1] + b2 * tmp[4];
    t[2] += tmp[2] + b2 * tmp[5];
    if constexpr (Lap) {
      t[3] += tmp[3];
      t[4] += tmp[4];
      t[5] += tmp[5];
    }
  }
};

namespace detail {
struct RegFunctions {
  double H1, H2, Q, D1, D2;
  RegFunctions(double r2, double e2, bool omega) {
    const double d = r2 + e2;
    const double dinv = 1.0 / d;
    const double d32 = dinv * std::sqrt(dinv);
    H1 = inv8pi * (2.0 * e2 + r2) * d32;
    H2 = inv8pi * d32;
    const double d52 = d32 * dinv;
    Q = inv8pi * (5.0 * e2 + 2.0 * r2) * d52;
    if (omega) {
      const double d72 = d52 * dinv;
      D1 = inv8pi * (10.0 * e2 * e2 - 7.0 * e2 * r2 - 2.0 * r2 * r2) * d72;
      D2 = inv8pi * (21.0 * e2 + 6.0 * r2) * d72;
    } else {
      D1 = D2 = 0.0;
    }
  }
};
inline bool skip_regularized(double r2, double eps) { return r2 == 0.0 && eps == 0.0; }
}  // namespace detail

// source [f, eps]
struct RegStokeslet {
  static constexpr int src_dim = 4, trg_dim = 3;
  static constexpr const char* name = "Geps";
  static bool skip(double r2, const double* s) { return detail::skip_regularized(r2, s[3]); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    const detail::RegFunctions k(r2, s[3] * s[3], false);
    const double rf = r[0] * s[0] + r[1] * s[1] + r[2] * s[2];
    for (int i = 0; i < 3; ++i) t[i] += k.H1 * s[i] + k.H2 * rf * r[i];
  }
};

// source [f, t, eps] -> u = Geps f + Teps t
struct RegStokesletTorque {
  static constexpr int src_dim = 7, trg_dim = 3;
  static constexpr const char* name = "Geps+Teps";
  static bool skip(double r2, const double* s) { return detail::skip_regularized(r2, s[6]); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    const detail::RegFunctions k(r2, s[6] * s[6], false);
    const double* f = s;
    const double* m = s + 3;
    const double rf = r[0] * f[0] + r[1] * f[1] + r[2] * f[2];
    const double hq = 0.5 * k.Q;
    t[0] += k.H1 * f[0] + k.H2 * rf * r[0] + hq * (m[1] * r[2] - m[2] * r[1]);
    t[1] += k.H1 * f[1] + k.H2 * rf * r[1] + hq * (m[2] * r[0] - m[0] * r[2]);
    t[2] += k.H1 * f[2] + k.H2 * rf * r[2] + hq * (m[0] * r[1] - m[1] * r[0]);
  }
};

// source [f, t, eps] -> [u, omega]
struct RegStokesletOmega {
  static constexpr int src_dim = 7, trg_dim = 6;
  static constexpr const char* name = "Geps+Omegaeps+Teps+Weps";
  static bool skip(double r2, const double* s) { return detail::skip_regularized(r2, s[6]); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    const detail::RegFunctions k(r2, s[6] * s[6], true);
    const double* f = s;
    const double* m = s + 3;
    const double rf = r[0] * f[0] + r[1] * f[1] + r[2] * f[2];
    const double rm = r[0] * m[0] + r[1] * m[1] + r[2] * m[2];
    const double hq = 0.5 * k.Q;
    t[0] += k.H1 * f[0] + k.H2 * rf * r[0] + hq * (m[1] * r[2] - m[2] * r[1]);
    t[1] += k.H1 * f[1] + k.H2 * rf * r[1] + hq * (m[2] * r[0] - m[0] * r[2]);
    t[2] += k.H1 * f[2] + k.H2 * rf * r[2] + hq * (m[0] * r[1] - m[1] * r[0]);
    const double w1 = 0.25 * k.D1, w2 = 0.25 * k.D2 * rm;
    t[3] += hq * (f[1] * r[2] - f[2] * r[1]) + w1 * m[0] + w2 * r[0];
    t[4] += hq * (f[2] * r[0] - f[0] * r[2]) + w1 * m[1] + w2 * r[1];
    t[5] += hq * (f[0] * r[1] - f[1] * r[0]) + w1 * m[2] + w2 * r[2];
  }
};

inline double eval_blob(const double* r, double eps) {
  const double d = r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + eps * eps;
  return 15.0 * eps * eps * eps * eps * detail::inv8pi / (d * d * d * std::sqrt(d));
}

// source [f, q] -> [p, u] (+ [grad p, grad u] or + lap u)
template <PVelWant W>
struct StokesPVel {
  static constexpr int src_dim = 4;
  static constexpr int trg_dim = W == PVelWant::PVel ? 4 : (W == PVelWant::Grad ? 16 : 7);
  static constexpr const char* name =
      W == PVelWant::PVel ? "GP" : (W == PVelWant::Grad ? "GP+gradGP" : "GP+lapGP");
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    const double* f = s;
    const double q = s[3];
    const double rinv = 1.0 / std::sqrt(r2);
    const double rinv2 = rinv * rinv;
    const double rinv3 = rinv * rinv2;
    const double rf = r[0] * f[0] + r[1] * f[1] + r[2] * f[2];
    t[0] += 2.0 * detail::inv8pi * rf * rinv3;
    const double a = detail::inv8pi * rinv;
    const double b = detail::inv8pi * (rf - q) * rinv3;
    t[1] += a * f[0] + b * r[0];
    t[2] += a * f[1] + b * r[1];
    t[3] += a * f[2] + b * r[2];
    if constexpr (W == PVelWant::Grad) {
      const double rinv5 = rinv3 * rinv2;
      for (int k = 0; k < 3; ++k)
        t[4 + k] += detail::inv4pi * (f[k] * rinv3 - 3.0 * rf * r[k] * rinv5);
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
          double v = (r[i] * f[k] - f[i] * r[k]) * rinv3 - 3.0 * r[i] * r[k] * (rf - q) * rinv5;
          if (i == k) v += (rf - q) * rinv3;
          t[7 + 3 * i + k] += detail::inv8pi * v;
        }
    } else if constexpr (W == PVelWant::Laplacian) {
      const double c = 2.0 * detail::inv8pi * rinv3;
      const double d = 6.0 * detail::inv8pi * rf * rinv3 * rinv2;
      t[4] += c * f[0] - d * r[0];
      t[5] += c * f[1] - d * r[1];
      t[6] += c * f[2] - d * r[2];
    }
  }
};

// source D (3x3 row-major) -> [p, u] (+ gradients or + lap u)
template <PVelWant W>
struct StokesDoubleLayer {
  static constexpr int src_dim = 9;
  static constexpr int trg_dim = StokesPVel<W>::trg_dim;
  static constexpr const char* name =
      W == PVelWant::PVel ? "K" : (W == PVelWant::Grad ? "K+gradK" : "K+lapK");
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* D, double* t) {
    const double rinv = 1.0 / std::sqrt(r2);
    const double rinv2 = rinv * rinv;
    const double rinv3 = rinv * rinv2;
    const double rinv5 = rinv3 * rinv2;
    const double tr = D[0] + D[4] + D[8];
    double g[3];  // (D + D^T) r
    for (int i = 0; i < 3; ++i)
      g[i] = (D[3 * i] + D[i]) * r[0] + (D[3 * i + 1] + D[3 + i]) * r[1] + (D[3 * i + 2] + D[6 + i]) * r[2];
    const double s = 0.5 * (g[0] * r[0] + g[1] * r[1] + g[2] * r[2]);
    t[0] += detail::inv4pi * (-3.0 * s * rinv5 + tr * rinv3);
    const double cu = -3.0 * detail::inv8pi * s * rinv5;
    t[1] += cu * r[0];
    t[2] += cu * r[1];
    t[3] += cu * r[2];
    if constexpr (W == PVelWant::Grad) {
      const double rinv7 = rinv5 * rinv2;
      for (int l = 0; l < 3; ++l)
        t[4 + l] += detail::inv4pi * (-3.0 * g[l] * rinv5 + 15.0 * s * r[l] * rinv7 - 3.0 * tr * r[l] * rinv5);
      for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) {
          double v = r[i] * g[l] * rinv5 - 5.0 * r[i] * s * r[l] * rinv7;
          if (i == l) v += s * rinv5;
          t[7 + 3 * i + l] += -3.0 * detail::inv8pi * v;
        }
    } else if constexpr (W == PVelWant::Laplacian) {
      const double rinv7 = rinv5 * rinv2;
      for (int i = 0; i < 3; ++i)
        t[4 + i] += -3.0 * detail::inv8pi * (2.0 * tr * r[i] * rinv5 + 2.0 * g[i] * rinv5 - 10.0 * r[i] * s * rinv7);
    }
  }
};

namespace detail {
// sigma = -p I + grad u + grad u^T from [p, u, grad p, grad u]
inline void stress_from_grad(const double* pg, double* sigma) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double v = pg[7 + 3 * i + j] + pg[7 + 3 * j + i];
      if (i == j) v -= pg[0];
      sigma[3 * i + j] += v;
    }
}
}  // namespace detail

struct StokesTraction {
  static constexpr int src_dim = 4, trg_dim = 9;
  static constexpr const char* name = "S";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* s, double* t) {
    const double rinv = 1.0 / std::sqrt(r2);
    const double rinv2 = rinv * rinv;
    const double rinv3 = rinv * rinv2;
    const double rinv5 = rinv3 * rinv2;
    const double rf = r[0] * s[0] + r[1] * s[1] + r[2] * s[2];
    const double a = -3.0 * detail::inv4pi * rf * rinv5;
    const double q = s[3] * detail::inv4pi;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double v = (a + 3.0 * q * rinv5) * r[i] * r[j];
        if (i == j) v -= q * rinv3;
        t[3 * i + j] += v;
      }
  }
};

struct StokesTractionDL {
  static constexpr int src_dim = 9, trg_dim = 9;
  static constexpr const char* name = "SD";
  static bool skip(double r2, const double* s) { return detail::skip_singular(r2, s); }
  static void apply(const double* r, double r2, const double* D, double* t) {
    double pg[16] = {};
    StokesDoubleLayer<PVelWant::Grad>::apply(r, r2, D, pg);
    detail::stress_from_grad(pg, t);
  }
};

// Runtime kernel handle.

struct KernelDescriptor {
  std::string name;
  int k_s = 0;
  int k_t = 0;
  std::optional<int> homogeneous_order;
};

using BlockFn = void (*)(const double* src_xyz, const double* src_val, std::size_t ns,
                         const double* trg_xyz, double* trg_val, std::size_t nt);
using PairFn = void (*)(const double* r, double r2, const double* s, double* t);
using SkipFn = bool (*)(double r2, const double* s);
// dense operator, column-major with leading dimension nt * k_t
using MatrixFn = void (*)(const double* src_xyz, std::size_t ns, const double* trg_xyz, std::size_t nt, double* E);

struct Kernel {
  std::string name;
  int k_s = 0;
  int k_t = 0;
  std::optional<int> homogeneous_order;
  // K(l r) = diag(l^trg_exp) K(r) diag(l^src_exp); empty when no such law exists
  std::vector<int> src_exp, trg_exp;
  BlockFn block = nullptr;
  PairFn pair = nullptr;
  SkipFn skip = nullptr;
  MatrixFn matrix = nullptr;
  bool self_adjoint = false;  // K(-r) = K(r)^T

  KernelDescriptor descriptor() const { return {name, k_s, k_t, homogeneous_order}; }
  bool scalable() const { return !src_exp.empty(); }

  // accumulate all pairs; self pairs skipped per kernel policy
  void eval(std::span<const double> src_xyz, std::span<const double> src_val,
            std::span<const double> trg_xyz, std::span<double> trg_val) const {
    block(src_xyz.data(), src_val.data(), src_xyz.size() / 3, trg_xyz.data(), trg_val.data(),
          trg_xyz.size() / 3);
  }
};

template <class K>
void block_eval(const double* sx, const double* sv, std::size_t ns, const double* tx, double* tv,
                std::size_t nt) {
  constexpr int ks = K::src_dim, kt = K::trg_dim;
  for (std::size_t i = 0; i < nt; ++i) {
    double acc[kt] = {};
    const double x0 = tx[3 * i], x1 = tx[3 * i + 1], x2 = tx[3 * i + 2];
    for (std::size_t j = 0; j < ns; ++j) {
      const double r[3] = {x0 - sx[3 * j], x1 - sx[3 * j + 1], x2 - sx[3 * j + 2]};
      const double r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
      const double* s = sv + ks * j;
      if (K::skip(r2, s)) continue;
      K::apply(r, r2, s, acc);
    }
    for (int c = 0; c < kt; ++c) tv[kt * i + c] += acc[c];
  }
}

// E(i*kt + t, j*ks + c) = K(x_i - y_j) applied to the unit vector e_c
template <class K>
void matrix_fill(const double* sx, std::size_t ns, const double* tx, std::size_t nt, double* E) {
  constexpr int ks = K::src_dim, kt = K::trg_dim;
  const std::size_t ld = nt * kt;
  for (std::size_t j = 0; j < ns; ++j) {
    double* col = E + j * ks * ld;
    for (std::size_t i = 0; i < nt; ++i) {
      const double r[3] = {tx[3 * i] - sx[3 * j], tx[3 * i + 1] - sx[3 * j + 1], tx[3 * i + 2] - sx[3 * j + 2]};
      const double r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
      [&]<int... C>(std::integer_sequence<int, C...>) {
        ((
             [&] {
               double unit[ks] = {};
               unit[C] = 1.0;
               if (!K::skip(r2, unit)) K::apply(r, r2, unit, col + C * ld + i * kt);
             }()),
         ...);
      }(std::make_integer_sequence<int, ks>{});
    }
  }
}

namespace detail {
template <class K>
struct Scaling {
  static std::vector<int> src() { return {}; }
  static std::vector<int> trg() { return {}; }
  static std::optional<int> order() { return std::nullopt; }
  static constexpr bool self_adjoint = false;
};
template <>
struct Scaling<LaplaceMonopole<LapWant::Value>> {
  static std::vector<int> src() { return {0}; }
  static std::vector<int> trg() { return {-1}; }
  static std::optional<int> order() { return -1; }
  static constexpr bool self_adjoint = true;
};
template <>
struct Scaling<Stokeslet<false>> {
  static std::vector<int> src() { return {0, 0, 0}; }
  static std::vector<int> trg() { return {-1, -1, -1}; }
  static std::optional<int> order() { return -1; }
  static constexpr bool self_adjoint = true;
};
template <>
struct Scaling<StokesPVel<PVelWant::PVel>> {
  static std::vector<int> src() { return {0, 0, 0, -1}; }
  static std::vector<int> trg() { return {-2, -1, -1, -1}; }
  static std::optional<int> order() { return std::nullopt; }
  static constexpr bool self_adjoint = false;
};
}  // namespace detail

template <class K>
const Kernel& kernel() {
  static const Kernel k{K::name,
                        K::src_dim,
                        K::trg_dim,
                        detail::Scaling<K>::order(),
                        detail::Scaling<K>::src(),
                        detail::Scaling<K>::trg(),
                        &block_eval<K>,
                        &K::apply,
                        &K::skip,
                        &matrix_fill<K>,
                        detail::Scaling<K>::self_adjoint};
  return k;
}

// Combined kernels: ordered concatenation of parts sharing k_s.

struct CombinedKernel {
  std::vector<const Kernel*> parts;
  int k_s = 0;
  int k_t = 0;

  std::vector<double> eval(const double* r, const double* s) const {
    std::vector<double> out(k_t, 0.0);
    const double r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    int off = 0;
    for (const Kernel* p : parts) {
      if (p->skip(r2, s)) throw SingularEvaluation("kernel " + p->name + " is singular at r = 0");
      p->pair(r, r2, s, out.data() + off);
      off += p->k_t;
    }
    return out;
  }
};

inline CombinedKernel compose(const std::vector<const Kernel*>& parts) {
  if (parts.empty()) throw CompositionError("empty kernel composition");
  CombinedKernel c;
  c.k_s = parts.front()->k_s;
  for (const Kernel* p : parts) {
    if (p->k_s != c.k_s)
      throw CompositionError("source dimension mismatch: " + p->name + " has k_s=" +
                             std::to_string(p->k_s) + ", expected " + std::to_string(c.k_s));
    c.k_t += p->k_t;
  }
  c.parts = parts;
  return c;
}

// Single-pair evaluation helpers.

namespace detail {
template <class K>
std::vector<double> eval_pair(const double* r, std::span<const double> src) {
  if (static_cast<int>(src.size()) != K::src_dim)
    throw ParameterError(std::string("kernel ") + K::name + " expects " + std::to_string(K::src_dim) +
                         " source values, got " + std::to_string(src.size()));
  const double r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
  if (K::skip(r2, src.data())) throw SingularEvaluation(std::string("kernel ") + K::name + " at r = 0");
  std::vector<double> t(K::trg_dim, 0.0);
  K::apply(r, r2, src.data(), t.data());
  return t;
}
}  // namespace detail

enum class LapSource { Monopole, Dipole, Quadrupole };

inline std::vector<double> eval_laplace(LapSource variant, const double* r, std::span<const double> src,
                                        LapWant want) {
  auto pick = [&]<template <LapWant> class K>() {
    switch (want) {
      case LapWant::Value: return detail::eval_pair<K<LapWant::Value>>(r, src);
      case LapWant::Grad: return detail::eval_pair<K<LapWant::Grad>>(r, src);
      default: return detail::eval_pair<K<LapWant::GradGrad>>(r, src);
    }
  };
  switch (variant) {
    case LapSource::Monopole: return pick.template operator()<LaplaceMonopole>();
    case LapSource::Dipole: return pick.template operator()<LaplaceDipole>();
    default: return pick.template operator()<LaplaceQuadrupole>();
  }
}

inline std::vector<double> eval_stokeslet(const double* r, std::span<const double> f, bool laplacian) {
  return laplacian ? detail::eval_pair<Stokeslet<true>>(r, f) : detail::eval_pair<Stokeslet<false>>(r, f);
}

// returns [u, lap u]
inline std::vector<double> eval_rpy(const double* r, const double* f, double b) {
  if (b < 0) throw ParameterError("negative RPY radius");
  const double s[4] = {f[0], f[1], f[2], b};
  return detail::eval_pair<RPY<true>>(r, s);
}

// returns u, or [u, omega]
inline std::vector<double> eval_regularized(const double* r, const double* f, const double* t, double eps,
                                            bool omega) {
  if (eps < 0) throw ParameterError("negative regularization length");
  const double s[7] = {f[0], f[1], f[2], t[0], t[1], t[2], eps};
  return omega ? detail::eval_pair<RegStokesletOmega>(r, s) : detail::eval_pair<RegStokesletTorque>(r, s);
}

inline std::vector<double> eval_pvel(const double* r, const double* f, double q, PVelWant want) {
  const double s[4] = {f[0], f[1], f[2], q};
  switch (want) {
    case PVelWant::PVel: return detail::eval_pair<StokesPVel<PVelWant::PVel>>(r, s);
    case PVelWant::Grad: return detail::eval_pair<StokesPVel<PVelWant::Grad>>(r, s);
    default: return detail::eval_pair<StokesPVel<PVelWant::Laplacian>>(r, s);
  }
}

inline std::vector<double> eval_double_layer(const double* r, std::span<const double> D, PVelWant want) {
  switch (want) {
    case PVelWant::PVel: return detail::eval_pair<StokesDoubleLayer<PVelWant::PVel>>(r, D);
    case PVelWant::Grad: return detail::eval_pair<StokesDoubleLayer<PVelWant::Grad>>(r, D);
    default: return detail::eval_pair<StokesDoubleLayer<PVelWant::Laplacian>>(r, D);
  }
}

inline std::vector<double> eval_traction_single(const double* r, const double* f, double q) {
  const double s[4] = {f[0], f[1], f[2], q};
  return detail::eval_pair<StokesTraction>(r, s);
}

inline std::vector<double> eval_traction_double(const double* r, std::span<const double> D) {
  return detail::eval_pair<StokesTractionDL>(r, D);
}

}  // namespace kafmm
