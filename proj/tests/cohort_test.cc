#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "hospx/catalog.h"
#include "hospx/cohort.h"
#include "test_util.h"

namespace hospx {
namespace {

using testing::Demographic;
using testing::Diagnosis;
using testing::Encounter;
using testing::Measurement;
using testing::TestResult;

PatternSet Covid() { return PatternSet({"covid"}, {"ruled out"}); }

TEST(Classify, IcdCodes) {
  const CodeHierarchy h;
  EXPECT_EQ(ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kIcd10, "U07.1"), Covid(), h),
            EvidenceClass::kConfirmed);
  EXPECT_EQ(ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kIcd10, "U07.2"), Covid(), h),
            EvidenceClass::kSuspected);
}

TEST(Classify, TextPatterns) {
  const CodeHierarchy h;
  EXPECT_EQ(ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kNone, "", "suspected covid-19 infection"), Covid(), h),
            EvidenceClass::kSuspected);
  EXPECT_EQ(ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kNone, "", "covid-19 ruled out"), Covid(), h),
            EvidenceClass::kDisregarded);
  EXPECT_EQ(ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kNone, "", "Suspected COVID-19"), Covid(), h),
            EvidenceClass::kSuspected);
  EXPECT_EQ(ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kIcd10, "J18.9", "Pneumonia"), Covid(), h),
            EvidenceClass::kDisregarded);
}

TEST(Classify, RegexPattern) {
  const PatternSet p({"re:sars-?cov-?2"}, {});
  EXPECT_EQ(ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kNone, "", "SARSCoV2 pneumonia"), p, CodeHierarchy{}),
            EvidenceClass::kSuspected);
}

TEST(Classify, ExclusionNeverYieldsSuspected) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> words = {"covid", "ruled out", "pneumonia", "sars", "negative", "screening", "acute"};
  const PatternSet p({"covid", "sars"}, {"ruled out", "screening"});
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (int w = 0; w < 3; ++w) text += words[rng() % words.size()] + " ";
    const EvidenceClass c = ClassifyDiagnosis(Diagnosis("p", 0, CodeSystem::kNone, "", text), p, CodeHierarchy{});
    if (p.MatchesExclusion(text)) {
      EXPECT_EQ(c, EvidenceClass::kDisregarded) << text;
    } else {
      EXPECT_EQ(c, p.MatchesInclusion(text) ? EvidenceClass::kSuspected : EvidenceClass::kDisregarded) << text;
    }
  }
}

TEST(Hierarchy, AncestorMatch) {
  const CodeHierarchy h = CodeHierarchy::FromEdges({
      {"1", "", "pneumonia"},
      {"2", "1", "viral pneumonia"},
      {"3", "2", "pneumonia due to covid ruled out"},
      {"4", "", "sepsis"},
  });
  EXPECT_TRUE(MatchHierarchical("2", PatternSet({"pneumonia"}, {}), h));
  EXPECT_FALSE(MatchHierarchical("3", PatternSet({"pneumonia"}, {"ruled out"}), h));
  EXPECT_FALSE(MatchHierarchical("4", PatternSet({"pneumonia"}, {}), h));
  EXPECT_FALSE(MatchHierarchical("999", PatternSet({"pneumonia"}, {}), h));
}

TEST(Hierarchy, ChainRootOnlyMatches) {
  const CodeHierarchy h = CodeHierarchy::FromEdges({{"C", "", "target root"}, {"B", "C", "middle"}, {"A", "B", "leaf"}});
  EXPECT_TRUE(MatchHierarchical("A", PatternSet({"target"}, {}), h));
}

// Exhaustive ancestor enumeration on a 10-node DAG against a reachability
// oracle computed by Floyd–Warshall closure.
TEST(Hierarchy, AncestorsMatchTransitiveClosure) {
  const std::vector<std::pair<int, int>> edges = {{1, 0}, {2, 0}, {3, 1}, {3, 2}, {4, 3}, {5, 3},
                                                  {6, 4}, {6, 5}, {7, 2}, {8, 7}, {9, 8}, {9, 6}};
  std::vector<CodeHierarchy::Edge> e;
  for (int i = 0; i < 10; ++i) e.push_back({"n" + std::to_string(i), "", "name " + std::to_string(i)});
  for (auto [c, p] : edges) e.push_back({"n" + std::to_string(c), "n" + std::to_string(p), "name " + std::to_string(c)});
  const CodeHierarchy h = CodeHierarchy::FromEdges(e);
  bool reach[10][10] = {};
  for (auto [c, p] : edges) reach[c][p] = true;
  for (int k = 0; k < 10; ++k)
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) reach[i][j] |= reach[i][k] && reach[k][j];
  for (int i = 0; i < 10; ++i) {
    const auto got = h.Ancestors("n" + std::to_string(i));
    std::set<std::string> got_set(got.begin(), got.end());
    EXPECT_EQ(got_set.size(), got.size()) << "duplicates for n" << i;
    std::set<std::string> want;
    for (int j = 0; j < 10; ++j) {
      if (reach[i][j]) want.insert("n" + std::to_string(j));
    }
    EXPECT_EQ(got_set, want) << "n" << i;
    // Matching only one node's name: true for exactly that node and its descendants.
    for (int j = 0; j < 10; ++j) {
      const PatternSet only_j({"re:^name " + std::to_string(j) + "$"}, {});
      EXPECT_EQ(MatchHierarchical("n" + std::to_string(i), only_j, h), i == j || reach[i][j]) << i << "," << j;
    }
  }
}

TEST(Hierarchy, RejectsCyclesAndUnnamedNodes) {
  EXPECT_THROW(CodeHierarchy::FromEdges({{"a", "b", "A"}, {"b", "a", "B"}}), Error);
  EXPECT_THROW(CodeHierarchy::FromEdges({{"a", "b", "A"}}), Error);
}

TEST(Hierarchy, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "hospx_hierarchy_test.tsv").string();
  WriteHierarchy(DefaultHierarchyEdgeList(), path);
  const CodeHierarchy h = LoadHierarchy(path);
  EXPECT_EQ(h.size(), DefaultHierarchy().size());
  EXPECT_EQ(h.Name(std::string(kCovidConceptId)), DefaultHierarchy().Name(std::string(kCovidConceptId)));
  std::filesystem::remove(path);
}

TEST(Patterns, FileLoading) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto inc = (dir / "hospx_inc.txt").string(), exc = (dir / "hospx_exc.txt").string();
  std::ofstream(inc) << "# comment\ncovid\n\nre:sars.cov\n";
  std::ofstream(exc) << "ruled out\n";
  const PatternSet p = LoadPatternSet(inc, exc);
  EXPECT_EQ(p.inclusion_sources().size(), 2u);
  EXPECT_TRUE(p.Accepts("SARS-CoV-2 infection"));
  EXPECT_FALSE(p.Accepts("covid ruled out"));
  std::filesystem::remove(inc);
  std::filesystem::remove(exc);
}

TEST(PositiveTest, CodeAndFlag) {
  EXPECT_TRUE(DetectPositiveTest(TestResult("p", 0, ResultFlag::kPositive)));
  EXPECT_FALSE(DetectPositiveTest(TestResult("p", 0, ResultFlag::kNegative)));
  EXPECT_FALSE(DetectPositiveTest(TestResult("p", 0, ResultFlag::kPositive, "718-7")));
}

std::vector<CohortCandidate> Select(std::vector<RawRecord> records) {
  return SelectCohort(RecordStore::FromRecords(std::move(records)), DefaultCovidPatterns(), DefaultHierarchy());
}

TEST(Select, TestWindow) {
  auto in = Select({Diagnosis("p", 100, CodeSystem::kIcd10, "U07.1"), TestResult("p", 110, ResultFlag::kPositive)});
  ASSERT_EQ(in.size(), 1u);
  EXPECT_EQ(in[0].anchor_day, 100);
  EXPECT_EQ(in[0].diagnosis_class, EvidenceClass::kConfirmed);
  EXPECT_TRUE(Select({Diagnosis("p", 100, CodeSystem::kIcd10, "U07.1"), TestResult("p", 135, ResultFlag::kPositive)})
                  .empty());
  EXPECT_TRUE(Select({TestResult("p", 100, ResultFlag::kPositive)}).empty());
}

TEST(Select, WindowBoundsInclusive) {
  for (int d : {72, 128}) {
    EXPECT_EQ(Select({Diagnosis("p", 100, CodeSystem::kIcd10, "U07.2"), TestResult("p", d, ResultFlag::kPositive)}).size(),
              1u)
        << d;
  }
  for (int d : {71, 129}) {
    EXPECT_TRUE(Select({Diagnosis("p", 100, CodeSystem::kIcd10, "U07.2"), TestResult("p", d, ResultFlag::kPositive)})
                    .empty())
        << d;
  }
}

TEST(Select, AnchorIsEarliestCovidDiagnosis) {
  auto in = Select({Diagnosis("p", 100, CodeSystem::kIcd10, "U07.1"),
                    Diagnosis("p", 90, CodeSystem::kNone, "", "Suspected COVID-19 infection"),
                    Diagnosis("p", 80, CodeSystem::kNone, "", "COVID-19 ruled out"),
                    TestResult("p", 95, ResultFlag::kPositive)});
  ASSERT_EQ(in.size(), 1u);
  EXPECT_EQ(in[0].anchor_day, 90);
}

TEST(Select, NegativeTestDoesNotQualify) {
  EXPECT_TRUE(Select({Diagnosis("p", 100, CodeSystem::kIcd10, "U07.1"), TestResult("p", 101, ResultFlag::kNegative)})
                  .empty());
}

TEST(Select, NonCovidDiagnosesNeverChangeMembership) {
  std::mt19937_64 rng(9);
  const std::vector<std::string> texts = {"Pneumonia", "Hypertension", "Fever", "Cough", "Family history of diabetes"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawRecord> base = {Diagnosis("p", 100, CodeSystem::kIcd10, trial % 2 ? "U07.1" : "U07.2"),
                                   TestResult("p", 100 + static_cast<int>(rng() % 60) - 30, ResultFlag::kPositive)};
    const auto before = Select(base);
    for (int i = 0; i < 5; ++i) {
      base.push_back(Diagnosis("p", static_cast<int>(rng() % 300), CodeSystem::kNone, "", texts[rng() % texts.size()]));
    }
    const auto after = Select(base);
    ASSERT_EQ(before.size(), after.size());
    if (!before.empty()) EXPECT_EQ(before[0].anchor_day, after[0].anchor_day);
  }
}

std::vector<RawRecord> Timeline(std::vector<RawRecord> records) {
  return RecordStore::FromRecords(std::move(records)).Timeline("p");
}

TEST(Label, DurationBoundary) {
  auto o = LabelHospitalization(Timeline({Encounter("p", 102, EncounterType::kInpatient, 30)}), 100);
  EXPECT_EQ(o.kind, HospitalizationOutcome::Kind::kH1);
  EXPECT_EQ(o.admission_offset, 2);
  o = LabelHospitalization(Timeline({Encounter("p", 102, EncounterType::kInpatient, 20)}), 100);
  EXPECT_EQ(o.kind, HospitalizationOutcome::Kind::kH0);
  EXPECT_FALSE(o.admission_offset);
  o = LabelHospitalization(Timeline({Encounter("p", 102, EncounterType::kInpatient, 24)}), 100);
  EXPECT_EQ(o.kind, HospitalizationOutcome::Kind::kH0);
}

TEST(Label, PriorHospitalizationExcludes) {
  const auto o = LabelHospitalization(Timeline({Encounter("p", 90, EncounterType::kInpatient, 48),
                                                Encounter("p", 103, EncounterType::kInpatient, 48)}),
                                      100);
  EXPECT_EQ(o.kind, HospitalizationOutcome::Kind::kExcludedPriorHosp);
}

TEST(Label, WindowEdges) {
  using K = HospitalizationOutcome::Kind;
  auto kind = [](int day) {
    return LabelHospitalization(Timeline({Encounter("p", day, EncounterType::kHospitalEncounter, 30)}), 100).kind;
  };
  EXPECT_EQ(kind(128), K::kH1);
  EXPECT_EQ(kind(129), K::kH0);
  EXPECT_EQ(kind(100), K::kH1);
  EXPECT_EQ(kind(99), K::kExcludedPriorHosp);
  EXPECT_EQ(kind(72), K::kExcludedPriorHosp);
  EXPECT_EQ(kind(71), K::kH0);
}

TEST(Label, EncounterTypeAndEarliestAdmission) {
  auto o = LabelHospitalization(Timeline({Encounter("p", 102, EncounterType::kOther, 72)}), 100);
  EXPECT_EQ(o.kind, HospitalizationOutcome::Kind::kH0);
  o = LabelHospitalization(Timeline({Encounter("p", 110, EncounterType::kInpatient, 30),
                                     Encounter("p", 104, EncounterType::kHospitalEmergencyRoomVisit, 26)}),
                           100);
  EXPECT_EQ(o.admission_offset, 4);
}

TEST(Build, PartitionAndReport) {
  std::vector<RawRecord> records;
  auto add = [&](const std::string& pid, std::optional<int> enc_day) {
    records.push_back(Demographic(pid, "age_years:50"));
    records.push_back(Diagnosis(pid, 100, CodeSystem::kIcd10, "U07.1"));
    records.push_back(TestResult(pid, 100, ResultFlag::kPositive));
    if (enc_day) records.push_back(Encounter(pid, *enc_day, EncounterType::kInpatient, 48));
  };
  add("a", std::nullopt);
  add("b", 105);
  add("c", 95);
  records.push_back(Measurement("d", 3, "718-7", 13));
  CohortReport report;
  const auto cohort = BuildCohort(RecordStore::FromRecords(records), DefaultCovidPatterns(), DefaultHierarchy(), &report);
  ASSERT_EQ(cohort.size(), 2u);
  EXPECT_EQ(report.candidates, 3u);
  EXPECT_EQ(report.excluded_prior_hospitalization, 1u);
  EXPECT_EQ(report.h0 + report.h1 + report.excluded_prior_hospitalization, report.candidates);
  for (const auto& e : cohort) {
    EXPECT_EQ(e.label == Label::kH1, e.admission_offset.has_value());
    if (e.admission_offset) {
      EXPECT_GE(*e.admission_offset, 0);
      EXPECT_LE(*e.admission_offset, 28);
    }
  }
  const auto path = (std::filesystem::temp_directory_path() / "hospx_cohort_test.tsv").string();
  WriteCohort(cohort, path);
  EXPECT_EQ(ReadCohort(path), cohort);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace hospx
