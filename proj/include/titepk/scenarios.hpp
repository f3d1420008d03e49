#pragma once

// Vidaza-motivated constants, the published toxicity scenarios, and the
// published operating characteristics used as regression targets.

#include "titepk/escalation.hpp"
#include "titepk/inference.hpp"
#include "titepk/pk.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace titepk {

namespace vidaza {

inline constexpr double kHalfLifeHours = 4.0;
inline constexpr double kLogKeff = -0.15;
inline constexpr double kCycleHours = 672.0;  // 28 days
inline constexpr double kReferenceDose = 24.0;
inline constexpr double kReferenceIntervalHours = 96.0;  // schedule B
inline constexpr double kPriorReferenceProbability = 0.3;

PkParams pk_params();
BetaPrior prior();
std::vector<double> doses();
// A-D: every 192, 96, 48 and 24 hours.
std::vector<Schedule> schedules();
CombinationGrid grid(const ExposureModel& model);

}  // namespace vidaza

// True end-of-cycle-1 DLT probabilities over a dose x schedule grid.
struct Scenario {
  std::string label;
  std::vector<double> doses;
  std::vector<Schedule> schedules;
  std::vector<std::vector<double>> true_p;  // [schedule][dose]

  void validate() const;
  CombinationGrid grid(const ExposureModel& model) const;
  // True probability for grid combination `index` (schedule-major).
  double true_p_at(std::size_t index) const;
};

// "S1" .. "S10". Throws std::out_of_range for unknown ids.
Scenario load_scenario(std::string_view id);
std::vector<std::string> scenario_ids();

// Plain-text table: '#' comments, a header `schedule interval_h <dose>...`,
// then one row per schedule: `<label> <interval hours> <p>...`.
Scenario parse_scenario(std::string_view text, std::string label);
Scenario load_scenario_file(const std::filesystem::path& path);
std::string format_scenario(const Scenario& scenario);

// FNV-1a over format_scenario of every built-in scenario in id order.
std::uint64_t scenario_catalog_checksum();

// Published operating characteristics. Methods: titepk_a025, titepk_a050,
// pocrm_complete, pocrm_partial, titepk_a050_uniform,
// titepk_a050_exponential, titepk_a050_earlylate. Metrics: p_select_tt,
// p_select_od, p_select_none, mean_patients_od, mean_patients_total,
// mean_dlts, schedule_A .. schedule_D.
// Throws std::out_of_range when the tuple was not published.
double reference_results(std::string_view scenario, std::string_view method,
                         std::string_view metric);
std::optional<double> find_reference_result(std::string_view scenario, std::string_view method,
                                            std::string_view metric);

}  // namespace titepk
