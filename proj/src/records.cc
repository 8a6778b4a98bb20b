#include "hospx/records.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "hospx/common.h"
#include "json.hpp"

namespace hospx {
namespace {

using ordered_json = nlohmann::ordered_json;

template <typename E, std::size_t N>
E ParseEnum(std::string_view s, const std::string_view (&names)[N],
            std::string_view field) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  Fail(ErrorKind::kInvalidArgument,
       "unknown " + std::string(field) + " '" + std::string(s) + "'");
}

constexpr std::string_view kKindNames[] = {"Demographic", "Diagnosis",
                                           "Observation", "Encounter"};
constexpr std::string_view kSystemNames[] = {"ICD10", "SNOMED", "LOINC", "None"};
constexpr std::string_view kFlagNames[] = {"Positive", "Negative", "Unknown"};
constexpr std::string_view kEncounterNames[] = {
    "Inpatient", "HospitalEmergencyRoomVisit", "HospitalEncounter", "Other"};

bool IsInteger(std::string_view s) {
  if (s.empty()) return false;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::string_view ToString(RecordKind v) { return kKindNames[static_cast<int>(v)]; }
std::string_view ToString(CodeSystem v) { return kSystemNames[static_cast<int>(v)]; }
std::string_view ToString(ResultFlag v) { return kFlagNames[static_cast<int>(v)]; }
std::string_view ToString(EncounterType v) {
  return kEncounterNames[static_cast<int>(v)];
}

bool RawRecord::operator==(const RawRecord& o) const {
  return std::tie(patient_id, kind, day, code_system, code, text, value, unit,
                  result_flag, encounter_type, duration_hours) ==
         std::tie(o.patient_id, o.kind, o.day, o.code_system, o.code, o.text,
                  o.value, o.unit, o.result_flag, o.encounter_type,
                  o.duration_hours);
}

void ValidateRecord(const RawRecord& r) {
  auto bad = [&](const std::string& why) {
    Fail(ErrorKind::kInvalidArgument, "record for '" + r.patient_id + "': " + why);
  };
  if (r.patient_id.empty()) bad("empty patient_id");
  switch (r.kind) {
    case RecordKind::kDemographic: {
      if (r.day) bad("demographic must not carry a day");
      const std::string_view code = r.code;
      if (code.starts_with("age_years:")) {
        if (!IsInteger(code.substr(10))) bad("age_years must be an integer");
      } else if (code.starts_with("gender:")) {
        const auto g = code.substr(7);
        if (g != "F" && g != "M" && g != "U") bad("gender must be F, M or U");
      } else {
        bad("demographic code must be age_years:<int> or gender:<F|M|U>");
      }
      break;
    }
    case RecordKind::kObservation:
      if (!r.day) bad("missing day");
      if (r.code_system != CodeSystem::kLoinc) bad("observation must be LOINC");
      if (r.value.has_value() == r.result_flag.has_value()) {
        bad("observation needs exactly one of value/result_flag");
      }
      break;
    case RecordKind::kEncounter:
      if (!r.day) bad("missing day");
      if (!r.encounter_type || !r.duration_hours) {
        bad("encounter needs encounter_type and duration_hours");
      }
      if (*r.duration_hours < 0) bad("negative duration_hours");
      break;
    case RecordKind::kDiagnosis:
      if (!r.day) bad("missing day");
      break;
  }
}

std::string EncodeRecord(const RawRecord& r) {
  ordered_json j;
  j["patient_id"] = r.patient_id;
  j["kind"] = ToString(r.kind);
  if (r.day) j["day"] = *r.day;
  j["code_system"] = ToString(r.code_system);
  j["code"] = r.code;
  j["text"] = r.text;
  if (r.value) j["value"] = *r.value;
  if (r.unit) j["unit"] = *r.unit;
  if (r.result_flag) j["result_flag"] = ToString(*r.result_flag);
  if (r.encounter_type) j["encounter_type"] = ToString(*r.encounter_type);
  if (r.duration_hours) j["duration_hours"] = *r.duration_hours;
  return j.dump();
}

RawRecord DecodeRecord(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorKind::kInvalidArgument, std::string("parse error: ") + e.what());
  }
  if (!j.is_object()) Fail(ErrorKind::kInvalidArgument, "record is not an object");
  RawRecord r;
  try {
    r.patient_id = j.at("patient_id").get<std::string>();
    r.kind = ParseEnum<RecordKind>(j.at("kind").get<std::string>(), kKindNames, "kind");
    if (j.contains("day")) r.day = j["day"].get<int>();
    r.code_system = ParseEnum<CodeSystem>(j.value("code_system", std::string("None")),
                                          kSystemNames, "code_system");
    r.code = j.value("code", std::string());
    r.text = j.value("text", std::string());
    if (j.contains("value")) r.value = j["value"].get<double>();
    if (j.contains("unit")) r.unit = j["unit"].get<std::string>();
    if (j.contains("result_flag")) {
      r.result_flag = ParseEnum<ResultFlag>(j["result_flag"].get<std::string>(),
                                            kFlagNames, "result_flag");
    }
    if (j.contains("encounter_type")) {
      r.encounter_type = ParseEnum<EncounterType>(
          j["encounter_type"].get<std::string>(), kEncounterNames, "encounter_type");
    }
    if (j.contains("duration_hours")) r.duration_hours = j["duration_hours"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument, std::string("bad field: ") + e.what());
  }
  ValidateRecord(r);
  return r;
}

RecordStore RecordStore::FromRecords(std::vector<RawRecord> records,
                                     IngestReport* report) {
  RecordStore store;
  // Identity is the whole record: code-less diagnoses differ only by text and
  // encounters only by type and duration.
  std::set<std::string> seen;
  std::uint64_t seq = 0;
  std::size_t duplicates = 0;
  for (auto& r : records) {
    if (!seen.insert(EncodeRecord(r)).second) {
      ++duplicates;
      continue;
    }
    r.seq = seq++;
    auto [it, inserted] = store.index_.try_emplace(r.patient_id, store.patient_ids_.size());
    if (inserted) {
      store.patient_ids_.push_back(r.patient_id);
      store.timelines_.emplace_back();
    }
    store.timelines_[it->second].push_back(std::move(r));
  }
  for (auto& timeline : store.timelines_) {
    std::stable_sort(timeline.begin(), timeline.end(),
                     [](const RawRecord& a, const RawRecord& b) {
                       const bool da = a.kind == RecordKind::kDemographic;
                       const bool db = b.kind == RecordKind::kDemographic;
                       if (da != db) return da;
                       if (da) return false;
                       return *a.day < *b.day;
                     });
  }
  if (report) report->duplicates += duplicates;
  return store;
}

std::size_t RecordStore::num_records() const {
  std::size_t n = 0;
  for (const auto& t : timelines_) n += t.size();
  return n;
}

bool RecordStore::contains(std::string_view patient_id) const {
  return index_.contains(std::string(patient_id));
}

const std::vector<RawRecord>& RecordStore::Timeline(std::string_view patient_id) const {
  auto it = index_.find(std::string(patient_id));
  if (it == index_.end()) {
    Fail(ErrorKind::kNotFound, "unknown patient '" + std::string(patient_id) + "'");
  }
  return timelines_[it->second];
}

RecordStore IngestRecords(std::istream& in, IngestReport* report) {
  IngestReport local;
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(DecodeRecord(line));
    } catch (const Error& e) {
      ++local.rejected;
      LogWarning("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  RecordStore store = RecordStore::FromRecords(std::move(records), &local);
  local.accepted = store.num_records();
  if (report) *report = local;
  return store;
}

RecordStore IngestRecords(const std::string& path, IngestReport* report) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read record file '" + path + "'");
  return IngestRecords(in, report);
}

void WriteRecords(const RecordStore& store, std::ostream& out) {
  for (std::size_t p = 0; p < store.num_patients(); ++p) {
    for (const auto& r : store.TimelineAt(p)) out << EncodeRecord(r) << '\n';
  }
}

void WriteRecords(const RecordStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write record file '" + path + "'");
  WriteRecords(store, out);
}

}  // namespace hospx
