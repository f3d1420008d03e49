#pragma once

#include "titepk/inference.hpp"
#include "titepk/pk.hpp"
#include "titepk/rng.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace titepk {

struct Schedule {
  std::string label;
  double freq = 0.0;  // administrations per hour
};

struct Combination {
  std::size_t dose_index = 0;
  std::size_t schedule_index = 0;
  double dose = 0.0;
  double freq = 0.0;
  double auc_cycle = 0.0;  // AUC_E(t*)
  std::string label;       // e.g. "24/B"
};

// Doses x schedules, each cell carrying its AUC_E(t*). Combinations are
// stored schedule-major: index = schedule * n_doses + dose.
class CombinationGrid {
 public:
  CombinationGrid(std::vector<double> doses, std::vector<Schedule> schedules,
                  const ExposureModel& model);

  std::span<const double> doses() const { return doses_; }
  std::span<const Schedule> schedules() const { return schedules_; }
  std::span<const Combination> combinations() const { return combinations_; }
  std::size_t size() const { return combinations_.size(); }
  const Combination& operator[](std::size_t i) const { return combinations_.at(i); }

  std::size_t index(std::size_t schedule, std::size_t dose) const;
  std::optional<std::size_t> find(double dose, double freq) const;
  std::optional<std::size_t> find(std::string_view label) const;
  std::optional<std::size_t> find_schedule(std::string_view label) const;

  // Exposure level of each combination: combinations whose AUC_E(t*) agree
  // to 1e-9 relative share a level; level 0 is the lowest exposure.
  std::size_t level(std::size_t combination) const { return levels_.at(combination); }
  std::size_t level_count() const { return level_count_; }
  // Combination with the lowest AUC_E(t*) (first in grid order on ties).
  std::size_t lowest_exposure() const;

 private:
  std::vector<double> doses_;
  std::vector<Schedule> schedules_;
  std::vector<Combination> combinations_;
  std::vector<std::size_t> levels_;
  std::size_t level_count_ = 0;
};

enum class SelectionStrategy { HighestEligibleExposure, LowestEligibleExposure, MaxTargetProbability };

std::string to_string(SelectionStrategy s);
SelectionStrategy parse_selection_strategy(std::string_view name);

struct EscalationConfig {
  double feasibility_bound = 0.25;  // a
  IntervalBounds bounds{};
  double target_confidence = 0.50;
  int min_patients_at_mtc = 9;
  int min_patients_total_fallback = 21;
  int max_patients = 60;
  int cohort_size = 1;
  SelectionStrategy selection_strategy = SelectionStrategy::HighestEligibleExposure;
  bool no_skip = true;

  void validate() const;
};

enum class Rationale {
  Recommended,        // best eligible combination under the strategy
  CappedByNoSkip,     // a higher eligible combination exists but is not yet reachable
  AllOverdosing,      // no combination satisfies EWOC
};

std::string to_string(Rationale r);

struct DecisionRow {
  std::size_t combination = 0;
  DltProbability dlt;
  double auc_cycle = 0.0;
  bool ewoc_ok = false;
  int n_patients = 0;
};

struct DecisionTable {
  std::vector<DecisionRow> rows;  // one per grid combination, grid order
  std::optional<std::size_t> recommendation;  // nullopt means stop
  Rationale rationale = Rationale::AllOverdosing;
  bool tie_broken = false;

  bool stop() const { return !recommendation.has_value(); }
};

// Interval probabilities and EWOC eligibility for every combination, plus the
// next recommendation. `patients_per_combination` (grid order, may be empty)
// drives the no-skip rule; ties are broken with `rng`.
DecisionTable evaluate_grid(const Posterior& posterior, const CombinationGrid& grid,
                            const EscalationConfig& cfg,
                            std::span<const int> patients_per_combination, Rng& rng,
                            SummaryDetail detail = SummaryDetail::Full);

// Snapshot of a running trial: the records observed so far and the grid
// combination each patient received.
struct TrialState {
  std::vector<PatientRecord> records;
  std::vector<std::size_t> assignments;
  Posterior posterior = Posterior::point_mass(0.0);

  std::vector<int> patients_per_combination(std::size_t grid_size) const;
  int enrolled() const { return static_cast<int>(records.size()); }
};

// Next combination, or nullopt to stop.
std::optional<std::size_t> next_patient_assignment(const TrialState& state,
                                                   const CombinationGrid& grid,
                                                   const EscalationConfig& cfg, Rng& rng);

enum class CompletionKind { Continue, DeclareMTC, StopNoMTC };

struct Completion {
  CompletionKind kind = CompletionKind::Continue;
  std::optional<std::size_t> mtc;
};

std::string to_string(CompletionKind k);

// Stopping rules applied to the table computed after the latest outcome.
Completion check_completion(const DecisionTable& table, int total_enrolled,
                            const EscalationConfig& cfg);

}  // namespace titepk
