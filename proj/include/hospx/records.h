#ifndef HOSPX_RECORDS_H_
#define HOSPX_RECORDS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hospx {

enum class RecordKind { kDemographic, kDiagnosis, kObservation, kEncounter };
enum class CodeSystem { kIcd10, kSnomed, kLoinc, kNone };
enum class ResultFlag { kPositive, kNegative, kUnknown };
enum class EncounterType {
  kInpatient,
  kHospitalEmergencyRoomVisit,
  kHospitalEncounter,
  kOther,
};

std::string_view ToString(RecordKind v);
std::string_view ToString(CodeSystem v);
std::string_view ToString(ResultFlag v);
std::string_view ToString(EncounterType v);

// One EHR event. `day` is an integer day offset from the data epoch and is
// absent only for demographics.
struct RawRecord {
  std::string patient_id;
  RecordKind kind = RecordKind::kDiagnosis;
  std::optional<int> day;
  CodeSystem code_system = CodeSystem::kNone;
  std::string code;
  std::string text;
  std::optional<double> value;
  std::optional<std::string> unit;
  std::optional<ResultFlag> result_flag;
  std::optional<EncounterType> encounter_type;
  std::optional<double> duration_hours;

  // Ingestion sequence number; not serialized. Breaks same-day ties.
  std::uint64_t seq = 0;

  bool operator==(const RawRecord& o) const;
};

// Throws Error(kInvalidArgument) describing the first violated invariant.
void ValidateRecord(const RawRecord& r);

// Canonical single-line encoding (fixed key order, absent optionals omitted).
std::string EncodeRecord(const RawRecord& r);
// Parses and validates one line; throws Error(kInvalidArgument) on failure.
RawRecord DecodeRecord(std::string_view line);

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
};

// Immutable after construction. Per-patient timelines are ordered
// demographics first, then ascending day, ties by ingestion order.
class RecordStore {
 public:
  RecordStore() = default;

  // Adds records in the given order; assigns sequence numbers, drops
  // duplicate (patient_id, kind, day, code, value) tuples.
  static RecordStore FromRecords(std::vector<RawRecord> records,
                                 IngestReport* report = nullptr);

  std::size_t num_patients() const { return patient_ids_.size(); }
  std::size_t num_records() const;
  // Patients in order of first appearance.
  const std::vector<std::string>& patient_ids() const { return patient_ids_; }
  bool contains(std::string_view patient_id) const;

  // Throws Error(kNotFound) for an unknown patient.
  const std::vector<RawRecord>& Timeline(std::string_view patient_id) const;
  const std::vector<RawRecord>& TimelineAt(std::size_t patient_index) const {
    return timelines_[patient_index];
  }

  bool operator==(const RecordStore& o) const {
    return patient_ids_ == o.patient_ids_ && timelines_ == o.timelines_;
  }

 private:
  std::vector<std::string> patient_ids_;
  std::vector<std::vector<RawRecord>> timelines_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads a newline-delimited record file. Malformed lines are skipped and
// logged with their line number; an unreadable file throws Error(kIo).
RecordStore IngestRecords(const std::string& path, IngestReport* report = nullptr);
RecordStore IngestRecords(std::istream& in, IngestReport* report = nullptr);

void WriteRecords(const RecordStore& store, const std::string& path);
void WriteRecords(const RecordStore& store, std::ostream& out);

inline const std::vector<RawRecord>& PatientTimeline(const RecordStore& store,
                                                     std::string_view patient_id) {
  return store.Timeline(patient_id);
}

}  // namespace hospx

#endif  // HOSPX_RECORDS_H_
