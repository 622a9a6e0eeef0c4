#include <gtest/gtest.h>

#include <cmath>

#include "mpseq/controller.hpp"

using namespace mpseq;

namespace {

ContactConfig quiet() {
  ContactConfig c;
  c.f_noise_sigma = 0.0;
  c.tau_noise_sigma = 0.0;
  return c;
}

World world_at(double x, double y, double z, const ContactConfig& cc = ContactConfig{}) {
  Pose p;
  p.translation = {x, y, z};
  return World(build_geometry(Shape::Round), cc, Pose::identity(), p);
}

Pose goal() {
  Pose g;
  g.translation = {0, 0, -0.020};
  return g;
}

const ManipulationPrimitive& find(const Catalog& cat, Family f, Archetype a, Axis ax, double d = -1.0) {
  for (const auto& mp : cat.primitives)
    if (mp.family == f && mp.archetype == a && mp.axis == ax && (d < 0.0 || mp.stop.d == d)) return mp;
  throw std::logic_error("missing primitive");
}

}  // namespace

TEST(ExecuteMp, FreeDownOntoSolidPlate) {
  const Catalog cat = build_catalog();
  World w = world_at(0.1, 0, 0.005);
  Rng rng(1);
  const ControllerConfig cfg;
  const MpOutcome o = execute_mp(w, cat[0], cfg, rng, goal());
  EXPECT_EQ(o.status, MpStatus::Success);
  EXPECT_FALSE(o.aborted);
  EXPECT_GT(o.duration, 0.45);
  EXPECT_LE(o.duration, 0.6);
  EXPECT_GT(projected_reaction(cat[0], o.end_snapshot.wrench), 8.0);
  EXPECT_NEAR(o.duration, o.ticks * cfg.dt, 1e-12);
}

TEST(ExecuteMp, FreeTranslateTwoMillimetres) {
  const Catalog cat = build_catalog();
  const auto& mp = find(cat, Family::FreeSpace, Archetype::Translate, {0, +1}, 2 * kMm);
  World w = world_at(0, 0, 0.010);
  Rng rng(2);
  const MpOutcome o = execute_mp(w, mp, ControllerConfig{}, rng, goal());
  EXPECT_EQ(o.status, MpStatus::Success);
  EXPECT_NEAR(o.duration, 0.2, 0.01);
  EXPECT_NEAR(w.peg().translation.x(), 2 * kMm, 0.05 * kMm);
  EXPECT_NEAR(w.peg().translation.z(), 0.010, 1e-12);
}

TEST(ExecuteMp, ContactPrimitiveInFreeSpaceStaysBounded) {
  const Catalog cat = build_catalog();
  const auto& mp = find(cat, Family::InContact, Archetype::Translate, {0, +1}, 4 * kMm);
  World w = world_at(0.1, 0, 0.003);
  Rng rng(3);
  const ControllerConfig cfg;
  double worst_v = 0.0, worst_w = 0.0;
  const TraceSink sink = [&](const TraceRecord& r) {
    worst_v = std::max(worst_v, r.twist.linear.norm());
    worst_w = std::max(worst_w, r.twist.angular.norm());
  };
  const MpOutcome o = execute_mp(w, mp, cfg, rng, goal(), kDefaultRotWeight, &sink);
  EXPECT_LE(worst_v, cfg.v_max + 1e-12);
  EXPECT_LE(worst_w, cfg.w_max + 1e-12);
  // The force loop pulled it down onto the plate.
  EXPECT_LT(w.peg().translation.z(), 0.003);
  EXPECT_LE(o.ticks, static_cast<int>(std::ceil((mp.stop.timeout + 0.1) / cfg.dt)));
}

TEST(ExecuteMp, EveryPrimitiveTerminatesInTime) {
  const Catalog cat = build_catalog();
  const ControllerConfig cfg;
  for (const auto& mp : cat.primitives) {
    for (double z : {0.010, -0.0001}) {
      World w = world_at(0.0008, -0.0005, z);
      Rng rng(mp.id);
      double worst_v = 0.0;
      const TraceSink sink = [&](const TraceRecord& r) { worst_v = std::max(worst_v, r.twist.linear.norm()); };
      const MpOutcome o = execute_mp(w, mp, cfg, rng, goal(), kDefaultRotWeight, &sink);
      EXPECT_LE(o.duration, mp.stop.timeout + 0.1) << mp.label();
      EXPECT_NE(o.status, MpStatus::Continue);
      EXPECT_LE(worst_v, cfg.v_max + 1e-12);
    }
  }
}

TEST(ExecuteMp, ForceTrackingOnFlatPlate) {
  const Catalog cat = build_catalog();
  const auto& mp = find(cat, Family::InContact, Archetype::Translate, {0, +1}, 4 * kMm);
  World w = world_at(0.1, 0, 0.0);
  Rng rng(4);
  std::vector<double> fz;
  const TraceSink sink = [&](const TraceRecord& r) { fz.push_back(r.wrench.force.z()); };
  const MpOutcome o = execute_mp(w, mp, ControllerConfig{}, rng, goal(), kDefaultRotWeight, &sink);
  EXPECT_EQ(o.status, MpStatus::Success);
  ASSERT_GT(fz.size(), 10u);
  double mean = 0.0;
  for (std::size_t i = fz.size() / 2; i < fz.size(); ++i) mean += fz[i];
  mean /= static_cast<double>(fz.size() - fz.size() / 2);
  EXPECT_NEAR(mean, -3.0, 1.0);
}

TEST(ExecuteMp, BitReproducibleWithoutNoise) {
  const Catalog cat = build_catalog();
  for (int id : {0, 30, 50, 88}) {
    World a = world_at(0.0007, 0.0003, 0.0001, quiet());
    World b = world_at(0.0007, 0.0003, 0.0001, quiet());
    Rng ra(5), rb(99);
    const MpOutcome oa = execute_mp(a, cat[id], ControllerConfig{}, ra, goal());
    const MpOutcome ob = execute_mp(b, cat[id], ControllerConfig{}, rb, goal());
    EXPECT_EQ(oa.ticks, ob.ticks);
    EXPECT_EQ(a.peg(), b.peg());
    EXPECT_EQ(oa.end_snapshot.wrench.vector(), ob.end_snapshot.wrench.vector());
  }
}

TEST(ExecuteMp, InsertBottomsOut) {
  const Catalog cat = build_catalog();
  World w = world_at(0, 0, -0.002);
  Rng rng(6);
  // A goal below the floor keeps the insert pushing until it times out.
  Pose deep;
  deep.translation = {0, 0, -0.030};
  execute_mp(w, cat[88], ControllerConfig{}, rng, deep);
  EXPECT_LE(w.true_depth(), w.geometry().insertion_depth + 0.001);
  EXPECT_GT(w.true_depth(), 0.019);
}

TEST(ExecuteMp, InsertSucceedsWhenAligned) {
  const Catalog cat = build_catalog();
  World w = world_at(0, 0, -0.001);
  Rng rng(7);
  const MpOutcome o = execute_mp(w, cat[86], ControllerConfig{}, rng, goal());
  EXPECT_EQ(o.status, MpStatus::Success);
  EXPECT_LT(pose_distance(o.end_snapshot.pose, goal()), 2 * kMm);
}

TEST(ExecuteMp, BlockedTranslateFails) {
  const Catalog cat = build_catalog();
  // Sideways into the hole wall: the reaction trips f_thr before 4 mm.
  const auto& mp = find(cat, Family::InContact, Archetype::Translate, {0, +1}, 4 * kMm);
  World w = world_at(0, 0, -0.005);
  Rng rng(8);
  const MpOutcome o = execute_mp(w, mp, ControllerConfig{}, rng, goal());
  EXPECT_EQ(o.status, MpStatus::Failure);
  EXPECT_FALSE(o.aborted);
  EXPECT_LT(w.peg().translation.x(), 0.001);
}

TEST(ExecuteMp, SafetyAbort) {
  ManipulationPrimitive ram = build_catalog()[0];
  ram.stop.f_thr = 1000.0;
  World w = world_at(0.1, 0, 0.001);
  Rng rng(8);
  const ControllerConfig cfg;
  const MpOutcome o = execute_mp(w, ram, cfg, rng, goal());
  EXPECT_EQ(o.status, MpStatus::Failure);
  EXPECT_TRUE(o.aborted);
  EXPECT_GT(o.end_snapshot.wrench.force.norm(), cfg.f_abort);
}

TEST(Settle, FreeSpaceReadsNoise) {
  World w = world_at(0, 0, 0.010);
  Rng rng(9);
  const SensorSnapshot s = settle(w, ControllerConfig{}, rng);
  EXPECT_LT(s.wrench.force.norm(), 0.5);
}

TEST(Settle, PressedContactPersists) {
  const Catalog cat = build_catalog();
  // Off the 20 um tick grid so the peg does not land at exactly zero penetration.
  World w = world_at(0.1, 0, 0.00201);
  Rng rng(10);
  execute_mp(w, cat[0], ControllerConfig{}, rng, goal());
  const SensorSnapshot s = settle(w, ControllerConfig{}, rng);
  EXPECT_LT(s.wrench.force.z(), -5.0);
  EXPECT_TRUE(in_contact(s.wrench, w.contact_config()));
}

TEST(Settle, DeterministicUnderSeed) {
  World a = world_at(0.1, 0, -0.0001), b = world_at(0.1, 0, -0.0001);
  Rng ra(11), rb(11);
  EXPECT_EQ(settle(a, ControllerConfig{}, ra).wrench.vector(), settle(b, ControllerConfig{}, rb).wrench.vector());
}

TEST(ControllerConfigValidate, AbortAboveThresholds) {
  ControllerConfig c;
  c.f_abort = 10.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
