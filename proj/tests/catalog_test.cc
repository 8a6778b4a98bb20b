#include <gtest/gtest.h>

#include <set>

#include "hospx/catalog.h"
#include "hospx/cohort.h"
#include "test_util.h"

namespace hospx {
namespace {

TEST(Catalog, Sizes) {
  EXPECT_EQ(Conditions().size(), 66u);
  EXPECT_EQ(Quantities().size(), 22u);
  // 66 conditions + 10 age bins + gender
  EXPECT_EQ(Conditions().size() + kNumAgeBins + 1, 77u);
  EXPECT_EQ(4 * Quantities().size(), 88u);
}

TEST(Catalog, SlugsUnique) {
  std::set<std::string_view> slugs;
  for (const auto& c : Conditions()) EXPECT_TRUE(slugs.insert(c.slug).second) << c.slug;
  for (const auto& q : Quantities()) EXPECT_TRUE(slugs.insert(q.slug).second) << q.slug;
}

TEST(Catalog, PrevalencesAreFractions) {
  for (const auto& c : Conditions()) {
    EXPECT_GE(c.prevalence_h0, 0.0);
    EXPECT_LE(c.prevalence_h1, 1.0);
  }
  const auto& ht = Conditions().front();
  EXPECT_EQ(ht.slug, "hypertension");
  EXPECT_NEAR(ht.prevalence_h0, 0.3222, 1e-12);
  EXPECT_NEAR(ht.prevalence_h1, 0.7278, 1e-12);
}

TEST(Catalog, QuartilesOrdered) {
  for (const auto& q : Quantities()) {
    EXPECT_LE(q.q1_h0, q.median_h0) << q.slug;
    EXPECT_LE(q.median_h0, q.q3_h0) << q.slug;
    EXPECT_LE(q.q1_h1, q.median_h1) << q.slug;
    EXPECT_LE(q.median_h1, q.q3_h1) << q.slug;
    EXPECT_GT(q.q1_h0, 0.0) << q.slug;
  }
}

TEST(Catalog, AgeBins) {
  EXPECT_EQ(AgeBin(0), 0);
  EXPECT_EQ(AgeBin(9), 0);
  EXPECT_EQ(AgeBin(10), 1);
  EXPECT_EQ(AgeBin(79), 7);
  EXPECT_EQ(AgeBin(80), 8);
  EXPECT_EQ(AgeBin(104), 8);
  EXPECT_EQ(AgeBin(-1), kNumAgeBins - 1);
  for (bool h : {false, true}) {
    double total = 0;
    for (double v : AgeBinPrevalence(h)) total += v;
    EXPECT_NEAR(total, 1.0, 0.02);
  }
}

TEST(Catalog, HierarchyIsAcyclicAndNamed) {
  const CodeHierarchy h = DefaultHierarchy();
  EXPECT_GT(h.size(), Conditions().size());
  for (std::size_t i = 0; i < Conditions().size(); ++i) {
    const std::string id = ConditionConceptId(i);
    ASSERT_TRUE(h.contains(id));
    const std::string child = ConditionChildConceptId(i);
    if (!child.empty()) {
      const auto anc = h.Ancestors(child);
      EXPECT_NE(std::find(anc.begin(), anc.end(), id), anc.end());
    }
  }
}

}  // namespace
}  // namespace hospx
