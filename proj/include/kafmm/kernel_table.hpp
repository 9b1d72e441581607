#pragma once

#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "kafmm/errors.hpp"
#include "kafmm/kernels.hpp"

namespace kafmm {

struct OutputBlock {
  std::string name;
  int width;
};

// Kernels per traversal stage. DL slots are null when the table has no DL sources.
struct KernelTable {
  std::string name;
  int sl_dim = 0;
  int dl_dim = 0;
  const Kernel* s2m_sl = nullptr;
  const Kernel* s2m_dl = nullptr;
  const Kernel* s2l_sl = nullptr;
  const Kernel* s2l_dl = nullptr;
  const Kernel* s2t_sl = nullptr;
  const Kernel* s2t_dl = nullptr;
  const Kernel* m2m = nullptr;
  const Kernel* m2l = nullptr;
  const Kernel* m2t = nullptr;
  const Kernel* l2l = nullptr;
  const Kernel* l2t = nullptr;
  int output_dim = 0;
  int equiv_dim = 0;
  int check_dim = 0;
  std::vector<OutputBlock> blocks;
  int param_index = -1;  // trailing per-source b or eps in SL values

  bool has_dl() const { return dl_dim > 0; }
  const Kernel& ml() const { return *m2l; }

  // throws RegistryError on any dimension inconsistency
  void validate() const {
    auto fail = [&](const std::string& what) { throw RegistryError("table " + name + ": " + what); };
    if (!s2m_sl || !s2l_sl || !s2t_sl || !m2m || !m2l || !m2t || !l2l || !l2t) fail("missing stage kernel");
    if (has_dl() && (!s2m_dl || !s2l_dl || !s2t_dl)) fail("missing DL stage kernel");
    if (m2m != m2l || m2l != l2l) fail("tree kernels differ");
    if (!m2l->scalable()) fail("tree kernel is not linear");
    if (s2m_sl->k_t != check_dim || s2l_sl->k_t != check_dim || m2m->k_t != check_dim || m2l->k_t != check_dim ||
        l2l->k_t != check_dim)
      fail("check dimension mismatch");
    if (has_dl() && (s2m_dl->k_t != check_dim || s2l_dl->k_t != check_dim)) fail("DL check dimension mismatch");
    if (m2m->k_s != equiv_dim || m2l->k_s != equiv_dim || m2t->k_s != equiv_dim || l2t->k_s != equiv_dim ||
        l2l->k_s != equiv_dim)
      fail("equivalent dimension mismatch");
    if (s2t_sl->k_t != output_dim || m2t->k_t != output_dim || l2t->k_t != output_dim)
      fail("output dimension mismatch");
    if (has_dl() && s2t_dl->k_t != output_dim) fail("DL output dimension mismatch");
    if (s2m_sl->k_s != sl_dim || s2l_sl->k_s != sl_dim || s2t_sl->k_s != sl_dim) fail("SL dimension mismatch");
    if (has_dl() && (s2m_dl->k_s != dl_dim || s2l_dl->k_s != dl_dim || s2t_dl->k_s != dl_dim))
      fail("DL dimension mismatch");
    int w = 0;
    for (const auto& b : blocks) w += b.width;
    if (w != output_dim) fail("output blocks do not cover output_dim");
  }
};

namespace detail {

template <class ML, class SSl, class SSlT, class SDl, class SDlT, class T>
KernelTable make_table(std::string name, std::vector<OutputBlock> blocks, int param_index = -1) {
  KernelTable t;
  t.name = std::move(name);
  t.sl_dim = SSl::src_dim;
  t.s2m_sl = t.s2l_sl = &kernel<SSl>();
  t.s2t_sl = &kernel<SSlT>();
  if constexpr (!std::is_void_v<SDl>) {
    t.dl_dim = SDl::src_dim;
    t.s2m_dl = t.s2l_dl = &kernel<SDl>();
    t.s2t_dl = &kernel<SDlT>();
  }
  t.m2m = t.m2l = t.l2l = &kernel<ML>();
  t.m2t = t.l2t = &kernel<T>();
  t.equiv_dim = ML::src_dim;
  t.check_dim = ML::trg_dim;
  t.output_dim = T::trg_dim;
  t.blocks = std::move(blocks);
  t.param_index = param_index;
  t.validate();
  return t;
}

inline std::vector<KernelTable> build_registry() {
  using L = LaplaceMonopole<LapWant::Value>;
  using G = Stokeslet<false>;
  using GP = StokesPVel<PVelWant::PVel>;
  using LG = LaplaceMonopole<LapWant::Grad>;
  using LGG = LaplaceMonopole<LapWant::GradGrad>;
  std::vector<KernelTable> r;
  r.push_back(make_table<L, L, LG, LaplaceDipole<LapWant::Value>, LaplaceDipole<LapWant::Grad>, LG>(
      "LapPGrad", {{"p", 1}, {"grad", 3}}));
  r.push_back(make_table<L, L, LGG, LaplaceDipole<LapWant::Value>, LaplaceDipole<LapWant::GradGrad>, LGG>(
      "LapPGradGrad", {{"p", 1}, {"grad", 3}, {"gradgrad", 6}}));
  r.push_back(make_table<L, LaplaceQuadrupole<LapWant::Value>, LaplaceQuadrupole<LapWant::GradGrad>, void, void,
                         LGG>("LapQPGradGrad", {{"p", 1}, {"grad", 3}, {"gradgrad", 6}}));
  r.push_back(make_table<G, G, G, void, void, G>("Stokeslet", {{"vel", 3}}));
  r.push_back(make_table<G, RPY<false>, RPY<true>, void, void, Stokeslet<true>>("RPY", {{"vel", 3}, {"lapvel", 3}}, 3));
  r.push_back(make_table<G, RegStokeslet, RegStokeslet, void, void, G>("StokesRegVel", {{"vel", 3}}, 3));
  r.push_back(make_table<G, RegStokesletTorque, RegStokesletOmega, void, void, StokesletOmega>(
      "StokesRegVelOmega", {{"vel", 3}, {"omega", 3}}, 6));
  r.push_back(make_table<GP, GP, GP, StokesDoubleLayer<PVelWant::PVel>, StokesDoubleLayer<PVelWant::PVel>, GP>(
      "PVel", {{"p", 1}, {"vel", 3}}));
  r.push_back(make_table<GP, GP, StokesPVel<PVelWant::Grad>, StokesDoubleLayer<PVelWant::PVel>,
                         StokesDoubleLayer<PVelWant::Grad>, StokesPVel<PVelWant::Grad>>(
      "PVelGrad", {{"p", 1}, {"vel", 3}, {"gradp", 3}, {"gradvel", 9}}));
  r.push_back(make_table<GP, GP, StokesPVel<PVelWant::Laplacian>, StokesDoubleLayer<PVelWant::PVel>,
                         StokesDoubleLayer<PVelWant::Laplacian>, StokesPVel<PVelWant::Laplacian>>(
      "PVelLapLacian", {{"p", 1}, {"vel", 3}, {"lapvel", 3}}));
  r.push_back(make_table<GP, GP, StokesTraction, StokesDoubleLayer<PVelWant::PVel>, StokesTractionDL, StokesTraction>(
      "Traction", {{"stress", 9}}));
  return r;
}

inline const std::vector<KernelTable>& registry() {
  static const std::vector<KernelTable> r = build_registry();
  return r;
}

}  // namespace detail

inline std::vector<std::string> registry_names() {
  std::vector<std::string> n;
  for (const auto& t : detail::registry()) n.push_back(t.name);
  return n;
}

inline const KernelTable& registry_table(std::string_view name) {
  for (const auto& t : detail::registry())
    if (t.name == name) return t;
  throw RegistryError("unknown kernel " + std::string(name));
}

}  // namespace kafmm
