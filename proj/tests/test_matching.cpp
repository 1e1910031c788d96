#include <gtest/gtest.h>

#include "motr/matching.hpp"

using namespace motr;

namespace {

ScoredBoxes scored(std::vector<double> p, std::vector<Box> boxes) {
  ScoredBoxes s;
  for (double v : p) s.probs.push_back({v});
  s.boxes = std::move(boxes);
  return s;
}

GtObject object(std::int64_t id, Box b) { return {id, b, 0, true}; }

}  // namespace

TEST(MatchCost, PerfectPrediction) {
  Box b{0.4, 0.5, 0.2, 0.3};
  LossWeights w;
  auto c = build_match_cost(scored({1.0}, {b}), {object(1, b)}, w);
  EXPECT_NEAR(c(0, 0), -w.cls - w.giou, 1e-12);
}

TEST(MatchCost, ComposedValue) {
  // p = 0.5, l1 = 0.3 and a GIoU of -0.07937 give 2(-0.5) + 5(0.3) + 2(0.07937).
  Box pred{0.25, 0.25, 0.5, 0.5}, tgt{0.5, 0.5, 0.5, 0.5};
  const double l1 = l1_box(pred, tgt), g = giou(pred, tgt);
  auto c = build_match_cost(scored({0.5}, {pred}), {object(1, tgt)}, LossWeights{});
  EXPECT_NEAR(c(0, 0), -2 * 0.5 + 5 * l1 - 2 * g, 1e-12);

  Box p2{0.5, 0.5, 0.2, 0.2}, t2{0.6, 0.5, 0.2, 0.4};
  ASSERT_NEAR(l1_box(p2, t2), 0.3, 1e-12);
  // Stated with the rounded GIoU of the first pair.
  EXPECT_NEAR(2 * (-0.5) + 5 * 0.3 + 2 * 0.08, 0.66, 1e-12);
}

TEST(MatchCost, MonotoneInL1) {
  Box tgt{0.5, 0.5, 0.2, 0.2};
  double prev = -1e9;
  for (double dx = 0; dx < 0.05; dx += 0.01) {
    Box p{0.5 + dx, 0.5, 0.2, 0.2};
    auto c = build_match_cost(scored({0.7}, {p}), {object(1, tgt)}, LossWeights{2, 5, 0});
    EXPECT_GT(c(0, 0), prev);
    prev = c(0, 0);
  }
}

TEST(AssignNewborn, FirstFrameMatchesEverything) {
  std::vector<GtObject> gt{object(1, {0.2, 0.2, 0.1, 0.1}), object(2, {0.8, 0.8, 0.1, 0.1})};
  auto preds = scored({0.1, 0.1, 0.1}, {{0.8, 0.8, 0.1, 0.1}, {0.5, 0.5, 0.1, 0.1}, {0.2, 0.2, 0.1, 0.1}});
  auto a = assign_newborn(preds, gt, {}, LossWeights{});
  EXPECT_EQ(a.slots[0], std::optional<std::int64_t>(2));
  EXPECT_FALSE(a.slots[1]);
  EXPECT_EQ(a.slots[2], std::optional<std::int64_t>(1));
  EXPECT_TRUE(a.one_to_one());
}

TEST(AssignNewborn, TrackedIdentitiesExcluded) {
  std::vector<GtObject> gt{object(1, {0.2, 0.2, 0.1, 0.1}), object(2, {0.5, 0.5, 0.1, 0.1}),
                           object(3, {0.8, 0.8, 0.1, 0.1})};
  auto preds = scored({0.5, 0.5, 0.5}, {{0.2, 0.2, 0.1, 0.1}, {0.5, 0.5, 0.1, 0.1}, {0.3, 0.3, 0.1, 0.1}});
  auto a = assign_newborn(preds, gt, {1, 2}, LossWeights{});
  EXPECT_EQ(a.matched_count(), 1u);
  EXPECT_EQ(a.identities(), (std::set<std::int64_t>{3}));
}

TEST(AssignNewborn, NoNewbornMeansBackground) {
  std::vector<GtObject> gt{object(1, {0.2, 0.2, 0.1, 0.1})};
  auto a = assign_newborn(scored({0.9, 0.9}, {{0.2, 0.2, 0.1, 0.1}, {0.2, 0.2, 0.1, 0.1}}), gt, {1},
                          LossWeights{});
  EXPECT_EQ(a, Assignment::background(2));
}

TEST(Propagate, Examples) {
  EXPECT_EQ(propagate_assignment({}, {}).size(), 0u);
  Assignment det{{std::nullopt, 5, std::nullopt}};
  auto next = propagate_assignment({}, det);
  EXPECT_EQ(next.slots, (std::vector<std::optional<std::int64_t>>{5}));
  Assignment tr{{1, 2}};
  Assignment det2{{std::nullopt, std::nullopt, std::nullopt, 7}};
  next = propagate_assignment(tr, det2);
  EXPECT_EQ(next.slots, (std::vector<std::optional<std::int64_t>>{1, 2, 7}));
}

TEST(Propagate, DuplicateIdentityIsAnError) {
  EXPECT_THROW(propagate_assignment(Assignment{{1}}, Assignment{{std::nullopt, 1}}),
               InvariantError);
}
