#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "kafmm/engine.hpp"
#include "kafmm/kernel_table.hpp"
#include "kafmm/oracle.hpp"
#include "support.hpp"

using namespace kafmm;
using namespace testing_support;

namespace {

std::vector<double> random_values(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (double& x : v) x = u(g);
  return v;
}

SetupOptions opts(int m, int cap) {
  SetupOptions o;
  o.m = m;
  o.leaf_capacity = cap;
  o.domain.length = 32;
  return o;
}

}  // namespace

// ---- registry ----

TEST(Registry, ElevenTablesAllConsistent) {
  const auto names = registry_names();
  const std::vector<std::string> want{"LapPGrad",     "LapPGradGrad", "LapQPGradGrad",     "Stokeslet",
                                      "RPY",          "StokesRegVel", "StokesRegVelOmega", "PVel",
                                      "PVelGrad",     "PVelLapLacian", "Traction"};
  EXPECT_EQ(names, want);
  std::set<std::string> ml;
  for (const auto& n : names) {
    const KernelTable& t = registry_table(n);
    EXPECT_NO_THROW(t.validate()) << n;
    ml.insert(t.m2l->name);
    EXPECT_EQ(t.m2m, t.m2l);
    EXPECT_EQ(t.l2l, t.m2l);
    EXPECT_EQ(t.m2t, t.l2t);
  }
  EXPECT_EQ(ml, (std::set<std::string>{"L", "G", "GP"}));
  EXPECT_THROW(registry_table("Nope"), RegistryError);
}

TEST(Registry, TableSlots) {
  const KernelTable& rpy = registry_table("RPY");
  EXPECT_EQ(rpy.s2m_sl->name, "GRPY");
  EXPECT_EQ(rpy.s2t_sl->name, "GRPY+lapGRPY");
  EXPECT_EQ(rpy.m2l->name, "G");
  EXPECT_EQ(rpy.l2t->name, "G+lapG");
  EXPECT_EQ(rpy.param_index, 3);
  const KernelTable& lgg = registry_table("LapPGradGrad");
  EXPECT_EQ(lgg.s2m_sl->name, "L");
  EXPECT_EQ(lgg.s2m_dl->name, "LD");
  EXPECT_EQ(lgg.s2t_dl->name, "LD+gradLD+gradgradLD");
  EXPECT_EQ(lgg.l2t->name, "L+gradL+gradgradL");
  EXPECT_EQ(lgg.output_dim, 10);
  const KernelTable& tr = registry_table("Traction");
  EXPECT_EQ(tr.s2m_dl->name, "K");
  EXPECT_EQ(tr.s2t_dl->name, "SD");
  EXPECT_EQ(tr.m2t->name, "S");
  EXPECT_EQ(tr.l2t->name, "S");
  EXPECT_EQ(tr.m2l->name, "GP");
  EXPECT_EQ(tr.output_dim, 9);
}

TEST(Registry, ValidationCatchesMismatch) {
  KernelTable t = registry_table("Stokeslet");
  t.output_dim = 4;
  EXPECT_THROW(t.validate(), RegistryError);
  t = registry_table("Stokeslet");
  t.l2l = registry_table("LapPGrad").m2l;
  EXPECT_THROW(t.validate(), RegistryError);
  t = registry_table("Stokeslet");
  t.s2t_sl = nullptr;
  EXPECT_THROW(t.validate(), RegistryError);
}

// ---- setup ----

TEST(Setup, DeterministicTree) {
  std::mt19937_64 g(1);
  const auto x = lognormal_points(g, 3000, 32);
  const Plan a = setup(registry_table("LapPGrad"), x, {}, x, opts(6, 50));
  const Plan b = setup(registry_table("LapPGrad"), x, {}, x, opts(6, 50));
  EXPECT_EQ(debug_dump(a.tree, a.lists), debug_dump(b.tree, b.lists));
  EXPECT_EQ(a.M, 152);
  const Plan c = setup(registry_table("LapPGrad"), x, {}, x, opts(12, 50));
  EXPECT_EQ(c.M, 728);
  EXPECT_EQ(debug_dump(a.tree, a.lists), debug_dump(c.tree, c.lists));
  EXPECT_EQ(a.n_dl, 0u);
}

TEST(Setup, Errors) {
  const std::vector<double> x{1, 1, 1};
  EXPECT_THROW(setup(registry_table("LapPGrad"), x, {}, x, opts(1, 10)), ParameterError);
  EXPECT_THROW(setup(registry_table("Stokeslet"), x, x, x, opts(6, 10)), InputError);
  EXPECT_THROW(setup(registry_table("Stokeslet"), std::vector<double>{1, 1, 40}, {}, x, opts(6, 10)), DomainError);
}

// ---- evaluate ----

TEST(Evaluate, SingleLeafBitEqualToDirect) {
  std::mt19937_64 g(2);
  for (const auto& name : registry_names()) {
    const KernelTable& t = registry_table(name);
    const auto x = lognormal_points(g, 300, 32);
    const auto y = lognormal_points(g, 200, 32);
    auto sv = random_values(g, 300 * t.sl_dim);
    if (t.param_index >= 0)
      for (std::size_t i = 0; i < 300; ++i) sv[i * t.sl_dim + t.param_index] = std::abs(sv[i * t.sl_dim + t.param_index]) * 1e-4;
    const std::vector<double> dl = t.has_dl() ? y : std::vector<double>{};
    const auto dv = random_values(g, dl.size() / 3 * t.dl_dim);
    const Plan p = setup(t, x, dl, x, opts(6, 2000));
    ASSERT_EQ(p.tree.boxes.size(), 1u);
    EXPECT_EQ(evaluate(p, sv, dv).values, direct_sum(t, x, sv, dl, dv, x)) << name;
  }
}

TEST(Evaluate, ZeroSourcesGiveZeros) {
  std::mt19937_64 g(3);
  const auto x = lognormal_points(g, 1500, 32);
  const KernelTable& t = registry_table("PVelGrad");
  const Plan p = setup(t, x, x, x, opts(6, 30));
  const auto v = evaluate(p, std::vector<double>(1500 * 4, 0.0), std::vector<double>(1500 * 9, 0.0)).values;
  for (double z : v) ASSERT_EQ(z, 0.0);
}

TEST(Evaluate, Superposition) {
  std::mt19937_64 g(4);
  const auto x = lognormal_points(g, 1500, 32);
  for (const char* name : {"LapPGradGrad", "Stokeslet", "Traction"}) {
    const KernelTable& t = registry_table(name);
    const std::vector<double> dl = t.has_dl() ? x : std::vector<double>{};
    const Plan p = setup(t, x, dl, x, opts(6, 30));
    const auto a = random_values(g, 1500 * t.sl_dim), b = random_values(g, 1500 * t.sl_dim);
    const auto da = random_values(g, dl.size() / 3 * t.dl_dim), db = random_values(g, dl.size() / 3 * t.dl_dim);
    std::vector<double> ab(a.size()), dab(da.size());
    for (std::size_t i = 0; i < a.size(); ++i) ab[i] = 2 * a[i] - 0.5 * b[i];
    for (std::size_t i = 0; i < da.size(); ++i) dab[i] = 2 * da[i] - 0.5 * db[i];
    const auto va = evaluate(p, a, da).values, vb = evaluate(p, b, db).values, vab = evaluate(p, ab, dab).values;
    std::vector<double> lin(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) lin[i] = 2 * va[i] - 0.5 * vb[i];
    EXPECT_LT(eps_l2(vab, lin), 1e-12) << name;
  }
}

TEST(Evaluate, Deterministic) {
  std::mt19937_64 g(5);
  const auto x = lognormal_points(g, 2000, 32);
  const KernelTable& t = registry_table("RPY");
  auto sv = random_values(g, 2000 * 4);
  for (std::size_t i = 0; i < 2000; ++i) sv[4 * i + 3] = 1e-4 * std::abs(sv[4 * i + 3]);
  const Plan p = setup(t, x, {}, x, opts(6, 40));
  const auto a = evaluate(p, sv, {});
  EXPECT_EQ(a.values, evaluate(p, sv, {}).values);
  EXPECT_EQ(a.values, evaluate(setup(t, x, {}, x, opts(6, 40)), sv, {}).values);
  std::set<std::string> stages;
  for (const auto& [s, sec] : a.stage_seconds) {
    stages.insert(s);
    EXPECT_GE(sec, 0.0);
  }
  EXPECT_EQ(stages, (std::set<std::string>{"upward", "m2l", "s2l", "downward", "leaves"}));
  EXPECT_GE(a.t_run, 0.0);
  EXPECT_GE(p.t_tree, 0.0);
}

TEST(Evaluate, LaplaceAccuracyM10) {
  std::mt19937_64 g(6);
  const auto x = lognormal_points(g, 2000, 32);
  const auto q = random_values(g, 2000);
  const KernelTable& t = registry_table("LapPGrad");
  const Plan p = setup(t, x, {}, x, opts(10, 64));
  ASSERT_GE(p.tree.depth(), 3);
  EXPECT_LE(eps_l2(evaluate(p, q, {}).values, direct_sum(t, x, q, {}, {}, x)), 1e-8);
}

TEST(Evaluate, SeparateSourceAndTargetSets) {
  std::mt19937_64 g(7);
  const auto x = lognormal_points(g, 1500, 32);
  const auto d = lognormal_points(g, 700, 32);
  const auto y = lognormal_points(g, 900, 32);
  const KernelTable& t = registry_table("PVelLapLacian");
  const auto sv = random_values(g, 1500 * 4), dv = random_values(g, 700 * 9);
  const Plan p = setup(t, x, d, y, opts(10, 40));
  EXPECT_LE(eps_l2(evaluate(p, sv, dv).values, direct_sum(t, x, sv, d, dv, y)), 1e-8);
  // no targets
  const Plan e = setup(t, x, d, {}, opts(6, 40));
  EXPECT_TRUE(evaluate(e, sv, dv).values.empty());
}

TEST(Evaluate, InputErrors) {
  std::mt19937_64 g(8);
  const auto x = lognormal_points(g, 100, 32);
  const Plan p = setup(registry_table("LapPGrad"), x, x, x, opts(6, 10));
  EXPECT_THROW(evaluate(p, std::vector<double>(99, 1.0), std::vector<double>(300, 1.0)), InputError);
  EXPECT_THROW(evaluate(p, std::vector<double>(100, 1.0), std::vector<double>(299, 1.0)), InputError);
  std::vector<double> bad(100, 1.0);
  bad[7] = NAN;
  EXPECT_THROW(evaluate(p, bad, std::vector<double>(300, 1.0)), InputError);
  const Plan s = setup(registry_table("Stokeslet"), x, {}, x, opts(6, 10));
  EXPECT_THROW(evaluate(s, std::vector<double>(300, 1.0), std::vector<double>(3, 1.0)), InputError);
}

TEST(Evaluate, WarnsOnLargeLengthScale) {
  std::mt19937_64 g(9);
  const auto x = lognormal_points(g, 1000, 32);
  const KernelTable& t = registry_table("StokesRegVel");
  auto sv = random_values(g, 4000);
  for (std::size_t i = 0; i < 1000; ++i) sv[4 * i + 3] = 1e-4;
  const Plan p = setup(t, x, {}, x, opts(6, 20));
  EXPECT_TRUE(evaluate(p, sv, {}).warnings.empty());
  sv[3] = 2.0;
  const auto w = evaluate(p, sv, {}).warnings;
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("exceeds"), std::string::npos);
}

TEST(Evaluate, RootHookAddsExternalField) {
  // the hook supplies the potential of a far charge on the root check surface
  std::mt19937_64 g(10);
  const auto x = lognormal_points(g, 1500, 32);
  const auto q = random_values(g, 1500);
  const KernelTable& t = registry_table("LapPGrad");
  const std::array<double, 3> z{200.0, -150.0, 90.0};
  const double Q = 50.0;
  int calls = 0;
  SetupOptions o = opts(10, 40);
  o.root_hook = [&](const Plan& p, std::span<const double> eq, std::span<double> ck) {
    ++calls;
    EXPECT_EQ(eq.size(), static_cast<std::size_t>(p.M));
    const auto pts = p.surface(0, SurfaceRole::DownwardCheck);
    for (int i = 0; i < p.M; ++i) ck[i] += Q * laplace(&pts[3 * i], z.data());
  };
  const Plan p = setup(t, x, {}, x, o);
  EXPECT_EQ(p.min_level, 0);
  const auto v = evaluate(p, q, {}).values;
  EXPECT_EQ(calls, 1);
  auto want = direct_sum(t, x, q, {}, {}, x);
  const auto ext = direct_sum(t, std::vector<double>(z.begin(), z.end()), std::vector<double>{Q}, {}, {}, x);
  for (std::size_t i = 0; i < want.size(); ++i) want[i] += ext[i];
  EXPECT_LT(eps_l2(v, want), 1e-8);
}

TEST(Evaluate, EverySourceRoutedOnce) {
  // constant kernel: each target must receive exactly the sum of all source weights
  std::mt19937_64 g(11);
  const KernelTable& t = counting_table();
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + g() % 451;
    const auto src = lognormal_points(g, n, 32);
    const auto trg = lognormal_points(g, n, 32);
    const auto w = random_values(g, n);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    const Plan p = setup(t, src, {}, trg, opts(4, 1 + static_cast<int>(g() % 30)));
    const auto v = evaluate(p, w, {}).values;
    double worst = 0;
    for (double c : v) worst = std::max(worst, std::abs(c - total));
    EXPECT_LT(worst, 1e-12 * n) << "trial " << trial << " depth " << p.tree.depth();
    const auto counts = route_counts(p.tree, p.lists, p.min_level);
    EXPECT_EQ(std::count(counts.begin(), counts.end(), 1), static_cast<long>(counts.size()));
  }
}

TEST(TargetVelocity, FaxenCorrection) {
  const std::array<double, 3> u{1, 0, 0}, l{6, 0, 0};
  EXPECT_EQ(rpy_target_velocity(u, l, 0.0), u);
  const auto v = rpy_target_velocity(u, l, 1.0);
  EXPECT_DOUBLE_EQ(v[0], 2.0);
  const auto w = rpy_target_velocity({0, 0, 0}, {3, -6, 12}, 2.0);
  const auto w2 = rpy_target_velocity({0, 0, 0}, {6, -12, 24}, 2.0);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(w2[i], 2 * w[i]);
}
