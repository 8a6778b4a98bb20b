#ifndef HOSPX_TESTS_TEST_UTIL_H_
#define HOSPX_TESTS_TEST_UTIL_H_

#include <string>

#include "hospx/common.h"
#include "hospx/records.h"

namespace hospx::testing {

inline const bool kQuietLogs = (SetLogQuiet(true), true);

inline RawRecord Demographic(const std::string& pid, const std::string& code) {
  RawRecord r;
  r.patient_id = pid;
  r.kind = RecordKind::kDemographic;
  r.code = code;
  return r;
}

inline RawRecord Diagnosis(const std::string& pid, int day, CodeSystem system, const std::string& code,
                           const std::string& text = "") {
  RawRecord r;
  r.patient_id = pid;
  r.kind = RecordKind::kDiagnosis;
  r.day = day;
  r.code_system = system;
  r.code = code;
  r.text = text;
  return r;
}

inline RawRecord TestResult(const std::string& pid, int day, ResultFlag flag,
                            const std::string& loinc = "94500-6") {
  RawRecord r;
  r.patient_id = pid;
  r.kind = RecordKind::kObservation;
  r.day = day;
  r.code_system = CodeSystem::kLoinc;
  r.code = loinc;
  r.result_flag = flag;
  return r;
}

inline RawRecord Measurement(const std::string& pid, int day, const std::string& loinc, double value) {
  RawRecord r;
  r.patient_id = pid;
  r.kind = RecordKind::kObservation;
  r.day = day;
  r.code_system = CodeSystem::kLoinc;
  r.code = loinc;
  r.value = value;
  return r;
}

inline RawRecord Encounter(const std::string& pid, int day, EncounterType type, double hours) {
  RawRecord r;
  r.patient_id = pid;
  r.kind = RecordKind::kEncounter;
  r.day = day;
  r.encounter_type = type;
  r.duration_hours = hours;
  return r;
}

}  // namespace hospx::testing

#endif  // HOSPX_TESTS_TEST_UTIL_H_
