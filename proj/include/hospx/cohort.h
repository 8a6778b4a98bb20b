#ifndef HOSPX_COHORT_H_
#define HOSPX_COHORT_H_

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hospx/records.h"

namespace hospx {

// Case-insensitive patterns. A pattern prefixed with "re:" is an ECMAScript
// regular expression searched anywhere in the text; anything else is a plain
// substring.
class Pattern {
 public:
  explicit Pattern(std::string_view source);
  bool Matches(std::string_view lowered_text) const;
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::string needle_;  // lower-cased substring, empty for regexes
  std::optional<std::regex> regex_;
};

class PatternSet {
 public:
  PatternSet() = default;
  PatternSet(const std::vector<std::string>& inclusions,
             const std::vector<std::string>& exclusions);

  // Inputs are lower-cased internally.
  bool MatchesInclusion(std::string_view text) const;
  bool MatchesExclusion(std::string_view text) const;
  // Inclusion and not exclusion.
  bool Accepts(std::string_view text) const;

  std::vector<std::string> inclusion_sources() const;
  std::vector<std::string> exclusion_sources() const;

 private:
  std::vector<Pattern> inclusions_;
  std::vector<Pattern> exclusions_;
};

// Newline-delimited pattern files; blank lines and '#' comments are skipped.
// `exclusion_path` may be empty.
PatternSet LoadPatternSet(const std::string& inclusion_path,
                          const std::string& exclusion_path);
PatternSet DefaultCovidPatterns();

// Concept DAG with child -> parent edges.
class CodeHierarchy {
 public:
  CodeHierarchy() = default;

  // Edge with an empty parent only names a root concept. Throws
  // Error(kInvalidArgument) on a cycle or an unnamed endpoint.
  struct Edge {
    std::string child;
    std::string parent;
    std::string child_name;
  };
  static CodeHierarchy FromEdges(const std::vector<Edge>& edges);

  bool contains(std::string_view concept_id) const;
  // Throws Error(kNotFound).
  const std::string& Name(std::string_view concept_id) const;
  // All strict ancestors, each once, in breadth-first order.
  std::vector<std::string> Ancestors(std::string_view concept_id) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_map<std::string, std::string> names_;
  std::unordered_map<std::string, std::vector<std::string>> parents_;
};

// `child<TAB>parent<TAB>name` per line.
CodeHierarchy LoadHierarchy(const std::string& path);
void WriteHierarchy(const std::vector<CodeHierarchy::Edge>& edges, const std::string& path);
CodeHierarchy DefaultHierarchy();
std::vector<CodeHierarchy::Edge> DefaultHierarchyEdgeList();

enum class EvidenceClass { kConfirmed, kSuspected, kPositiveTest, kDisregarded };
std::string_view ToString(EvidenceClass c);

// True iff the concept's own name or any ancestor name matches an inclusion
// pattern and the concept's own name matches no exclusion. Unknown concepts
// yield false with a warning.
bool MatchHierarchical(std::string_view concept_id, const PatternSet& patterns,
                       const CodeHierarchy& hierarchy);

// Total over diagnosis records: U07.1 -> Confirmed, U07.2 -> Suspected,
// otherwise a text or hierarchical inclusion match without any exclusion
// match -> Suspected, else Disregarded.
EvidenceClass ClassifyDiagnosis(const RawRecord& record, const PatternSet& patterns,
                                const CodeHierarchy& hierarchy);

bool DetectPositiveTest(const RawRecord& record);

// Inclusive window, in days, around the anchor diagnosis.
inline constexpr int kCohortWindowDays = 28;
inline constexpr double kHospitalizationMinHours = 24.0;

struct CohortCandidate {
  std::string patient_id;
  std::size_t patient_index = 0;
  int anchor_day = 0;
  EvidenceClass diagnosis_class = EvidenceClass::kSuspected;
  bool has_positive_test = true;
};

std::vector<CohortCandidate> SelectCohort(const RecordStore& store, const PatternSet& patterns,
                                          const CodeHierarchy& hierarchy);

enum class Label { kH0, kH1 };

struct HospitalizationOutcome {
  enum class Kind { kExcludedPriorHosp, kH1, kH0 } kind = Kind::kH0;
  std::optional<int> admission_offset;
};

bool IsQualifyingEncounter(const RawRecord& record);
HospitalizationOutcome LabelHospitalization(const std::vector<RawRecord>& timeline,
                                            int anchor_day);

struct CohortEntry {
  std::string patient_id;
  int anchor_day = 0;
  Label label = Label::kH0;
  std::optional<int> admission_offset;  // present iff label == kH1
  EvidenceClass diagnosis_class = EvidenceClass::kSuspected;
  bool has_positive_test = true;

  bool operator==(const CohortEntry&) const = default;
};

struct CohortReport {
  std::size_t candidates = 0;
  std::size_t excluded_prior_hospitalization = 0;
  std::size_t h0 = 0;
  std::size_t h1 = 0;
};

// Selection followed by labeling; prior-hospitalization patients are dropped.
std::vector<CohortEntry> BuildCohort(const RecordStore& store, const PatternSet& patterns,
                                     const CodeHierarchy& hierarchy,
                                     CohortReport* report = nullptr);

void WriteCohort(const std::vector<CohortEntry>& cohort, const std::string& path);
std::vector<CohortEntry> ReadCohort(const std::string& path);

}  // namespace hospx

#endif  // HOSPX_COHORT_H_
