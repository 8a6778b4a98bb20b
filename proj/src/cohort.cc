#include "hospx/cohort.h"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include "hospx/catalog.h"
#include "hospx/common.h"
#include "json.hpp"

namespace hospx {

Pattern::Pattern(std::string_view source) : source_(source) {
  if (source.starts_with("re:")) {
    try {
      regex_.emplace(std::string(source.substr(3)),
                     std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    } catch (const std::regex_error& e) {
      Fail(ErrorKind::kConfig, "pattern '" + source_ + "' does not compile: " + e.what());
    }
  } else {
    needle_ = ToLower(source);
    if (needle_.empty()) Fail(ErrorKind::kConfig, "empty pattern");
  }
}

bool Pattern::Matches(std::string_view lowered_text) const {
  if (regex_) {
    return std::regex_search(lowered_text.begin(), lowered_text.end(), *regex_);
  }
  return lowered_text.find(needle_) != std::string_view::npos;
}

PatternSet::PatternSet(const std::vector<std::string>& inclusions,
                       const std::vector<std::string>& exclusions) {
  for (const auto& p : inclusions) inclusions_.emplace_back(p);
  for (const auto& p : exclusions) exclusions_.emplace_back(p);
}

bool PatternSet::MatchesInclusion(std::string_view text) const {
  const std::string lowered = ToLower(text);
  return std::any_of(inclusions_.begin(), inclusions_.end(),
                     [&](const Pattern& p) { return p.Matches(lowered); });
}

bool PatternSet::MatchesExclusion(std::string_view text) const {
  const std::string lowered = ToLower(text);
  return std::any_of(exclusions_.begin(), exclusions_.end(),
                     [&](const Pattern& p) { return p.Matches(lowered); });
}

bool PatternSet::Accepts(std::string_view text) const {
  return MatchesInclusion(text) && !MatchesExclusion(text);
}

std::vector<std::string> PatternSet::inclusion_sources() const {
  std::vector<std::string> out;
  for (const auto& p : inclusions_) out.push_back(p.source());
  return out;
}

std::vector<std::string> PatternSet::exclusion_sources() const {
  std::vector<std::string> out;
  for (const auto& p : exclusions_) out.push_back(p.source());
  return out;
}

namespace {

std::vector<std::string> ReadPatternLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read pattern file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace

PatternSet LoadPatternSet(const std::string& inclusion_path,
                          const std::string& exclusion_path) {
  std::vector<std::string> exclusions;
  if (!exclusion_path.empty()) exclusions = ReadPatternLines(exclusion_path);
  return PatternSet(ReadPatternLines(inclusion_path), exclusions);
}

PatternSet DefaultCovidPatterns() {
  return PatternSet(DefaultCovidInclusions(), DefaultCovidExclusions());
}

CodeHierarchy CodeHierarchy::FromEdges(const std::vector<Edge>& edges) {
  CodeHierarchy h;
  for (const auto& e : edges) {
    if (e.child.empty()) Fail(ErrorKind::kInvalidArgument, "hierarchy edge without child");
    if (e.child_name.empty()) {
      Fail(ErrorKind::kInvalidArgument, "concept '" + e.child + "' has no name");
    }
    auto [it, inserted] = h.names_.try_emplace(e.child, e.child_name);
    if (!inserted && it->second != e.child_name) {
      Fail(ErrorKind::kInvalidArgument, "concept '" + e.child + "' has conflicting names");
    }
    auto& parents = h.parents_[e.child];
    if (!e.parent.empty() &&
        std::find(parents.begin(), parents.end(), e.parent) == parents.end()) {
      parents.push_back(e.parent);
    }
  }
  for (const auto& [child, parents] : h.parents_) {
    for (const auto& p : parents) {
      if (!h.names_.contains(p)) {
        Fail(ErrorKind::kInvalidArgument, "concept '" + p + "' has no name");
      }
    }
  }
  // Cycle check: iterative DFS with colors.
  std::unordered_map<std::string, int> color;
  for (const auto& [start, unused] : h.names_) {
    if (color[start] != 0) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
    color[start] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto pit = h.parents_.find(node);
      const std::size_t n = pit == h.parents_.end() ? 0 : pit->second.size();
      if (next < n) {
        const std::string parent = pit->second[next++];
        int& c = color[parent];
        if (c == 1) Fail(ErrorKind::kInvalidArgument, "hierarchy has a cycle through '" + parent + "'");
        if (c == 0) {
          c = 1;
          stack.emplace_back(parent, 0);
        }
      } else {
        color[node] = 2;
        stack.pop_back();
      }
    }
  }
  return h;
}

bool CodeHierarchy::contains(std::string_view concept_id) const {
  return names_.contains(std::string(concept_id));
}

const std::string& CodeHierarchy::Name(std::string_view concept_id) const {
  auto it = names_.find(std::string(concept_id));
  if (it == names_.end()) {
    Fail(ErrorKind::kNotFound, "unknown concept '" + std::string(concept_id) + "'");
  }
  return it->second;
}

std::vector<std::string> CodeHierarchy::Ancestors(std::string_view concept_id) const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::deque<std::string> queue{std::string(concept_id)};
  while (!queue.empty()) {
    const std::string node = std::move(queue.front());
    queue.pop_front();
    auto it = parents_.find(node);
    if (it == parents_.end()) continue;
    for (const auto& p : it->second) {
      if (seen.insert(p).second) {
        out.push_back(p);
        queue.push_back(p);
      }
    }
  }
  return out;
}

CodeHierarchy LoadHierarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read hierarchy file '" + path + "'");
  std::vector<CodeHierarchy::Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3) {
      Fail(ErrorKind::kConfig, path + ":" + std::to_string(line_no) +
                                   ": expected child<TAB>parent<TAB>name");
    }
    edges.push_back({fields[0], fields[1], fields[2]});
  }
  return CodeHierarchy::FromEdges(edges);
}

void WriteHierarchy(const std::vector<CodeHierarchy::Edge>& edges, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write hierarchy file '" + path + "'");
  for (const auto& e : edges) out << e.child << '\t' << e.parent << '\t' << e.child_name << '\n';
}

std::vector<CodeHierarchy::Edge> DefaultHierarchyEdgeList() {
  std::vector<CodeHierarchy::Edge> edges;
  for (auto& e : DefaultHierarchyEdges()) edges.push_back({e.child, e.parent, e.child_name});
  return edges;
}

CodeHierarchy DefaultHierarchy() { return CodeHierarchy::FromEdges(DefaultHierarchyEdgeList()); }

std::string_view ToString(EvidenceClass c) {
  switch (c) {
    case EvidenceClass::kConfirmed: return "Confirmed";
    case EvidenceClass::kSuspected: return "Suspected";
    case EvidenceClass::kPositiveTest: return "PositiveTest";
    case EvidenceClass::kDisregarded: return "Disregarded";
  }
  return "?";
}

bool MatchHierarchical(std::string_view concept_id, const PatternSet& patterns,
                       const CodeHierarchy& hierarchy) {
  if (!hierarchy.contains(concept_id)) {
    LogWarning("concept '" + std::string(concept_id) + "' not in hierarchy");
    return false;
  }
  const std::string& own = hierarchy.Name(concept_id);
  if (patterns.MatchesExclusion(own)) return false;
  if (patterns.MatchesInclusion(own)) return true;
  for (const auto& a : hierarchy.Ancestors(concept_id)) {
    if (patterns.MatchesInclusion(hierarchy.Name(a))) return true;
  }
  return false;
}

EvidenceClass ClassifyDiagnosis(const RawRecord& record, const PatternSet& patterns,
                                const CodeHierarchy& hierarchy) {
  if (record.code_system == CodeSystem::kIcd10) {
    if (record.code == kCovidConfirmedCode) return EvidenceClass::kConfirmed;
    if (record.code == kCovidSuspectedCode) return EvidenceClass::kSuspected;
  }
  const bool coded = record.code_system == CodeSystem::kSnomed && !record.code.empty() &&
                     hierarchy.contains(record.code);
  if (patterns.MatchesExclusion(record.text)) return EvidenceClass::kDisregarded;
  if (coded && patterns.MatchesExclusion(hierarchy.Name(record.code))) {
    return EvidenceClass::kDisregarded;
  }
  if (patterns.MatchesInclusion(record.text)) return EvidenceClass::kSuspected;
  if (coded && MatchHierarchical(record.code, patterns, hierarchy)) {
    return EvidenceClass::kSuspected;
  }
  return EvidenceClass::kDisregarded;
}

bool DetectPositiveTest(const RawRecord& record) {
  return record.kind == RecordKind::kObservation && record.code == kCovidTestLoinc &&
         record.result_flag == ResultFlag::kPositive;
}

namespace {

std::optional<CohortCandidate> SelectPatient(const RecordStore& store, std::size_t index,
                                             const PatternSet& patterns,
                                             const CodeHierarchy& hierarchy) {
  const auto& timeline = store.TimelineAt(index);
  std::optional<int> anchor;
  bool any_confirmed = false;
  for (const auto& r : timeline) {
    if (r.kind != RecordKind::kDiagnosis) continue;
    const EvidenceClass c = ClassifyDiagnosis(r, patterns, hierarchy);
    if (c != EvidenceClass::kConfirmed && c != EvidenceClass::kSuspected) continue;
    any_confirmed |= c == EvidenceClass::kConfirmed;
    if (!anchor || *r.day < *anchor) anchor = *r.day;
  }
  if (!anchor) return std::nullopt;
  for (const auto& r : timeline) {
    if (!DetectPositiveTest(r)) continue;
    if (std::abs(*r.day - *anchor) <= kCohortWindowDays) {
      return CohortCandidate{store.patient_ids()[index], index, *anchor,
                             any_confirmed ? EvidenceClass::kConfirmed
                                           : EvidenceClass::kSuspected,
                             true};
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<CohortCandidate> SelectCohort(const RecordStore& store, const PatternSet& patterns,
                                          const CodeHierarchy& hierarchy) {
  const std::size_t n = store.num_patients();
  std::vector<std::optional<CohortCandidate>> slots(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < n; ++i) {
    slots[i] = SelectPatient(store, i, patterns, hierarchy);
  }
  std::vector<CohortCandidate> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

bool IsQualifyingEncounter(const RawRecord& record) {
  if (record.kind != RecordKind::kEncounter || !record.encounter_type) return false;
  const EncounterType t = *record.encounter_type;
  const bool hospital = t == EncounterType::kInpatient ||
                        t == EncounterType::kHospitalEmergencyRoomVisit ||
                        t == EncounterType::kHospitalEncounter;
  return hospital && record.duration_hours.value_or(0.0) > kHospitalizationMinHours;
}

HospitalizationOutcome LabelHospitalization(const std::vector<RawRecord>& timeline,
                                            int anchor_day) {
  std::optional<int> earliest_after;
  for (const auto& r : timeline) {
    if (!IsQualifyingEncounter(r)) continue;
    const int offset = *r.day - anchor_day;
    if (offset >= -kCohortWindowDays && offset <= -1) {
      return {HospitalizationOutcome::Kind::kExcludedPriorHosp, std::nullopt};
    }
    if (offset >= 0 && offset <= kCohortWindowDays) {
      if (!earliest_after || offset < *earliest_after) earliest_after = offset;
    }
  }
  if (earliest_after) return {HospitalizationOutcome::Kind::kH1, earliest_after};
  return {HospitalizationOutcome::Kind::kH0, std::nullopt};
}

std::vector<CohortEntry> BuildCohort(const RecordStore& store, const PatternSet& patterns,
                                     const CodeHierarchy& hierarchy, CohortReport* report) {
  const auto candidates = SelectCohort(store, patterns, hierarchy);
  CohortReport local;
  local.candidates = candidates.size();
  std::vector<CohortEntry> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto outcome = LabelHospitalization(store.TimelineAt(c.patient_index), c.anchor_day);
    if (outcome.kind == HospitalizationOutcome::Kind::kExcludedPriorHosp) {
      ++local.excluded_prior_hospitalization;
      continue;
    }
    CohortEntry e;
    e.patient_id = c.patient_id;
    e.anchor_day = c.anchor_day;
    e.diagnosis_class = c.diagnosis_class;
    e.has_positive_test = c.has_positive_test;
    if (outcome.kind == HospitalizationOutcome::Kind::kH1) {
      e.label = Label::kH1;
      e.admission_offset = outcome.admission_offset;
      ++local.h1;
    } else {
      ++local.h0;
    }
    out.push_back(std::move(e));
  }
  if (report) *report = local;
  return out;
}

void WriteCohort(const std::vector<CohortEntry>& cohort, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write cohort file '" + path + "'");
  for (const auto& e : cohort) {
    nlohmann::ordered_json j;
    j["patient_id"] = e.patient_id;
    j["anchor_day"] = e.anchor_day;
    j["label"] = e.label == Label::kH1 ? "H1" : "H0";
    if (e.admission_offset) j["admission_offset"] = *e.admission_offset;
    j["diagnosis_class"] = ToString(e.diagnosis_class);
    j["has_positive_test"] = e.has_positive_test;
    out << j.dump() << '\n';
  }
}

std::vector<CohortEntry> ReadCohort(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read cohort file '" + path + "'");
  std::vector<CohortEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CohortEntry e;
      e.patient_id = j.at("patient_id").get<std::string>();
      e.anchor_day = j.at("anchor_day").get<int>();
      e.label = j.at("label").get<std::string>() == "H1" ? Label::kH1 : Label::kH0;
      if (j.contains("admission_offset")) e.admission_offset = j["admission_offset"].get<int>();
      e.diagnosis_class = j.value("diagnosis_class", std::string("Suspected")) == "Confirmed"
                              ? EvidenceClass::kConfirmed
                              : EvidenceClass::kSuspected;
      e.has_positive_test = j.value("has_positive_test", true);
      if ((e.label == Label::kH1) != e.admission_offset.has_value()) {
        Fail(ErrorKind::kInvalidArgument, "admission_offset must be present iff label is H1");
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kInvalidArgument, "bad cohort line in '" + path + "': " + e.what());
    }
  }
  return out;
}

}  // namespace hospx
