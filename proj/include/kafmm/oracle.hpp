#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "kafmm/errors.hpp"
#include "kafmm/kernel_table.hpp"

namespace kafmm {

// all-pairs sum with the table's S2T kernels, sources in ascending order
inline std::vector<double> direct_sum(const KernelTable& kt, std::span<const double> sl_xyz,
                                      std::span<const double> sl_values, std::span<const double> dl_xyz,
                                      std::span<const double> dl_values, std::span<const double> trg_xyz) {
  const std::size_t nsl = sl_xyz.size() / 3, ndl = dl_xyz.size() / 3, nt = trg_xyz.size() / 3;
  if (sl_values.size() != nsl * kt.sl_dim) throw InputError("single-layer value count does not match points");
  if (!kt.has_dl() && ndl > 0) throw InputError("table " + kt.name + " has no double-layer sources");
  if (kt.has_dl() && dl_values.size() != ndl * kt.dl_dim) throw InputError("double-layer value count does not match points");
  std::vector<double> out(nt * kt.output_dim, 0.0);
  if (nsl) kt.s2t_sl->block(sl_xyz.data(), sl_values.data(), nsl, trg_xyz.data(), out.data(), nt);
  if (ndl) kt.s2t_dl->block(dl_xyz.data(), dl_values.data(), ndl, trg_xyz.data(), out.data(), nt);
  return out;
}

// ||values - reference|| / ||reference||
inline double eps_l2(std::span<const double> values, std::span<const double> reference) {
  if (values.size() != reference.size()) throw InputError("eps_l2 arrays differ in length");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - reference[i];
    num += d * d;
    den += reference[i] * reference[i];
  }
  if (!(den > 0)) throw MetricError("reference has zero norm");
  return std::sqrt(num / den);
}

// error restricted to components [offset, offset + width) of each k-vector
inline double eps_l2_block(std::span<const double> values, std::span<const double> reference, int k, int offset,
                           int width) {
  if (values.size() != reference.size() || values.size() % k) throw InputError("eps_l2 arrays differ in shape");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < values.size(); i += k)
    for (int c = offset; c < offset + width; ++c) {
      const double d = values[i + c] - reference[i + c];
      num += d * d;
      den += reference[i + c] * reference[i + c];
    }
  if (!(den > 0)) throw MetricError("reference block has zero norm");
  return std::sqrt(num / den);
}

}  // namespace kafmm
