#pragma once

// JSON and text formats shared by the command-line tool and the HTTP service.

#include "titepk/escalation.hpp"
#include "titepk/inference.hpp"
#include "titepk/pk.hpp"
#include "titepk/scenarios.hpp"
#include "titepk/trial_sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace titepk {

using json = nlohmann::json;

struct FieldError {
  std::string field;
  std::string message;
};

// One or more invalid inputs, each naming the offending field or row.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<FieldError> errors);
  ValidationError(std::string field, std::string message);

  const std::vector<FieldError>& errors() const { return errors_; }

 private:
  std::vector<FieldError> errors_;
};

json to_json(const ValidationError& e);

// Everything needed to evaluate a trial: PK constants, prior, decision rules
// and the candidate combinations. Defaults reproduce the Vidaza design.
struct DesignConfig {
  PkParams pk = vidaza::pk_params();
  BetaPrior prior = vidaza::prior();
  EscalationConfig escalation{};
  std::vector<double> doses = vidaza::doses();
  std::vector<Schedule> schedules = vidaza::schedules();
};

// Missing members keep their defaults. Throws ValidationError.
DesignConfig parse_design_config(const json& body);
json to_json(const DesignConfig& cfg);

// A record plus the grid combination it was given on, if any.
struct RecordEntry {
  PatientRecord record;
  std::optional<std::size_t> combination;
};

// Accepts {"combination": "24/B"} or {"dose": 24, "schedule": "B"} or
// {"dose": 24, "interval_h": 96} / {"dose": 24, "freq_per_h": 0.0104},
// optionally "dose_times_h": [...] for an irregular history, plus
// "dlt": bool and "time_h": event or censoring time.
RecordEntry parse_record_json(const json& body, const CombinationGrid& grid, double t_star,
                              const std::string& field_prefix = "");
json to_json(const RecordEntry& entry, const CombinationGrid& grid);

// CSV with a header row, either `combination,dlt,time_h` or
// `dose,interval_h,dlt,time_h`. Blank lines and '#' comments are skipped.
std::vector<RecordEntry> parse_record_file(std::string_view text, const CombinationGrid& grid,
                                           double t_star);

json to_json(const DltProbability& p);
json to_json(const DecisionTable& table, const CombinationGrid& grid, const EscalationConfig& cfg);
json to_json(const OperatingCharacteristics& oc, const CombinationGrid& grid);
json to_json(const TrialSummary& t, const CombinationGrid& grid);
json to_json(const TrialResult& result, const CombinationGrid& grid, const EscalationConfig& cfg);

std::string to_string(ToxicityClass c);

// Fixed-width text rendering of a decision table.
std::string format_decision_table(const DecisionTable& table, const CombinationGrid& grid,
                                  const EscalationConfig& cfg);

// Simulation study definition used by `titepk simulate`.
struct StudyConfig {
  std::optional<Scenario> scenario;
  DesignConfig design;
  DltGenerator generator = DltGenerator::TitePkProcess;
  std::size_t n_trials = 1000;
  std::uint64_t seed = 20180101;
};

// "scenario" may be an id ("S1"), {"file": path} or an inline
// {"doses", "schedules", "true_p"} matrix. Throws ValidationError.
StudyConfig parse_study_config(const json& body);

}  // namespace titepk
