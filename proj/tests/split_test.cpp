#include "demote/split.hpp"

#include <map>
#include <set>

#include "demote/synthetic.hpp"
#include "gtest/gtest.h"

namespace demote {
namespace {

Dataset numbered(int n, int cells) {
  Dataset ds;
  for (int i = 0; i < n; ++i) {
    ds.examples.push_back(
        Example{{"t" + std::to_string(i)}, (i % cells) % 2, (i % cells) / 2 % 2, {}});
  }
  return ds;
}

std::multiset<std::string> fingerprints(const Dataset& ds) {
  std::multiset<std::string> out;
  for (const Example& ex : ds.examples) out.insert(to_jsonl_record(ex));
  return out;
}

TEST(LargestRemainder, Basics) {
  EXPECT_EQ(largest_remainder(10, {0.8, 0.1, 0.1}), (std::array<int, 3>{8, 1, 1}));
  EXPECT_EQ(largest_remainder(7, {0.8, 0.1, 0.1}), (std::array<int, 3>{5, 1, 1}));
  const auto s = largest_remainder(1001, {0.8, 0.1, 0.1});
  EXPECT_EQ(s[0] + s[1] + s[2], 1001);
}

TEST(Split, TenExamplesGiveEightOneOne) {
  const SplitResult r = split(numbered(10, 1), {}, 3);
  EXPECT_EQ(r.train.size(), 8u);
  EXPECT_EQ(r.dev.size(), 1u);
  EXPECT_EQ(r.test.size(), 1u);
}

TEST(Split, Deterministic) {
  const Dataset ds = numbered(200, 4);
  const SplitResult a = split(ds, {}, 9);
  const SplitResult b = split(ds, {}, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.dev, b.dev);
  EXPECT_EQ(a.test, b.test);
  const SplitResult c = split(ds, {}, 10);
  EXPECT_NE(a.train.examples, c.train.examples);
}

TEST(Split, PartitionsTheInput) {
  const Dataset ds = numbered(137, 4);
  const SplitResult r = split(ds, {}, 5);
  std::multiset<std::string> all = fingerprints(r.train);
  for (const auto& s : {fingerprints(r.dev), fingerprints(r.test)}) all.insert(s.begin(), s.end());
  EXPECT_EQ(all, fingerprints(ds));
  EXPECT_EQ(r.train.size() + r.dev.size() + r.test.size(), ds.size());
}

TEST(Split, CellProportionsTrackTheFullDataset) {
  SyntheticSpec spec;
  spec.q1 = 0.5;
  spec.q0 = 0.5;
  const Dataset ds = generate_synthetic(spec);
  const SplitResult r = split(ds, {}, 11);
  ASSERT_TRUE(r.stratified);
  auto proportions = [](const Dataset& d) {
    std::map<std::pair<int, int>, double> p;
    for (const Example& ex : d.examples) p[{ex.target, ex.protected_label}] += 1.0;
    for (auto& [cell, v] : p) v /= static_cast<double>(d.size());
    return p;
  };
  const auto full = proportions(ds);
  for (const Dataset* part : {&r.train, &r.dev, &r.test}) {
    const auto got = proportions(*part);
    for (const auto& [cell, v] : full) {
      ASSERT_TRUE(got.count(cell));
      EXPECT_NEAR(got.at(cell), v, 0.02);
    }
  }
}

TEST(Split, EveryCellWithThreeMembersReachesEverySplit) {
  Dataset ds = numbered(40, 1);
  for (int i = 0; i < 3; ++i) ds.examples.push_back(Example{{"rare"}, 1, 1, {}});
  const SplitResult r = split(ds, {}, 2);
  ASSERT_TRUE(r.stratified);
  for (const Dataset* part : {&r.train, &r.dev, &r.test}) {
    bool found = false;
    for (const Example& ex : part->examples) found |= ex.target == 1 && ex.protected_label == 1;
    EXPECT_TRUE(found);
  }
}

TEST(Split, TooSmallFallsBack) {
  // Four examples give sizes 3/1/0, yet a three-member cell needs a test slot.
  Dataset ds = numbered(3, 1);
  ds.examples.push_back(Example{{"odd"}, 1, 1, {}});
  const SplitResult r = split(ds, {}, 1);
  EXPECT_FALSE(r.stratified);
  EXPECT_EQ(r.train.size() + r.dev.size() + r.test.size(), 4u);
}

}  // namespace
}  // namespace demote
