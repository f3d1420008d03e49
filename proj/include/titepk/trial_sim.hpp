#pragma once

// Monte-Carlo simulation of TITE-PK dose-schedule escalation trials.

#include "titepk/escalation.hpp"
#include "titepk/inference.hpp"
#include "titepk/pk.hpp"
#include "titepk/rng.hpp"
#include "titepk/scenarios.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace titepk {

// How a virtual patient's time to DLT is generated. All variants produce a
// DLT within cycle 1 with exactly the scenario's true probability.
enum class DltGenerator {
  TitePkProcess,   // non-homogeneous Poisson process with hazard prop. to E(t)
  UniformTime,     // Bernoulli, then time uniform over cycle 1
  ExponentialTime, // constant hazard -log(1-p)/t*
  EarlyLateTime,   // Bernoulli, then 40% in [0, t*/5], 40% in [4t*/5, t*], 20% between
};

std::string to_string(DltGenerator g);
DltGenerator parse_dlt_generator(std::string_view name);

struct DltOutcome {
  bool event = false;
  double time = 0.0;  // event time when event, else t*
};

DltOutcome sample_dlt(DltGenerator gen, double true_p, const ExposureProfile& profile, Rng& rng);

struct PatientLog {
  std::size_t combination = 0;
  bool dlt = false;
  double time = 0.0;
};

struct TrialResult {
  Completion outcome;
  std::vector<PatientLog> patients;
  // Table at every decision point: before each assignment, then the final one.
  std::vector<DecisionTable> decisions;
  Posterior final_posterior = Posterior::point_mass(0.0);

  int dlts() const;
};

enum class ToxicityClass { Underdosing, TargetedToxicity, Overdosing };

ToxicityClass classify(double true_p, IntervalBounds bounds);

struct TrialSummary {
  std::size_t index = 0;
  CompletionKind outcome = CompletionKind::Continue;
  std::optional<std::size_t> mtc;
  std::optional<ToxicityClass> mtc_class;
  int patients = 0;
  int patients_od = 0;
  int dlts = 0;
};

struct OperatingCharacteristics {
  std::size_t n_trials = 0;
  std::size_t count_tt = 0;
  std::size_t count_od = 0;
  std::size_t count_ud = 0;
  std::size_t count_none = 0;
  double p_select_tt = 0.0;
  double p_select_od = 0.0;
  double p_select_ud = 0.0;
  double p_select_none = 0.0;
  double mean_patients_od = 0.0;
  double mean_patients_total = 0.0;
  double mean_dlts = 0.0;
  std::vector<double> schedule_selection;  // P(MTC uses schedule s)
};

struct StudyResult {
  OperatingCharacteristics oc;
  std::vector<TrialSummary> trials;
};

// Fixed design pieces shared by every simulated trial.
class TrialSimulator {
 public:
  TrialSimulator(Scenario scenario, EscalationConfig cfg, DltGenerator generator,
                 BetaPrior prior, const PkParams& params);

  // Trial `index` of a study seeded with `seed`.
  TrialResult run_trial(std::uint64_t seed, std::uint64_t index = 0) const;
  TrialSummary summarize(const TrialResult& result, std::size_t index) const;
  // threads == 0 uses every available core; results do not depend on it.
  StudyResult run_study(std::size_t n_trials, std::uint64_t seed, unsigned threads = 0) const;

  const Scenario& scenario() const { return scenario_; }
  const CombinationGrid& grid() const { return grid_; }
  const EscalationConfig& config() const { return cfg_; }
  const ExposureModel& model() const { return model_; }

 private:
  Scenario scenario_;
  EscalationConfig cfg_;
  DltGenerator generator_;
  BetaPrior prior_;
  ExposureModel model_;
  CombinationGrid grid_;
  std::vector<ExposureProfile> profiles_;
};

TrialResult run_trial(const Scenario& scenario, const EscalationConfig& cfg, DltGenerator gen,
                      const BetaPrior& prior, const PkParams& params, std::uint64_t seed);

OperatingCharacteristics run_study(const Scenario& scenario, const EscalationConfig& cfg,
                                   DltGenerator gen, const BetaPrior& prior,
                                   const PkParams& params, std::size_t n_trials,
                                   std::uint64_t seed);

}  // namespace titepk
