#include "titepk/escalation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace titepk {

namespace {

constexpr double kLevelTol = 1e-9;

bool same_level(double a, double b) {
  return std::abs(a - b) <= kLevelTol * std::max(std::abs(a), std::abs(b));
}

std::string format_dose(double dose) {
  return dose == std::round(dose) ? fmt::format("{:.0f}", dose) : fmt::format("{:g}", dose);
}

}  // namespace

CombinationGrid::CombinationGrid(std::vector<double> doses, std::vector<Schedule> schedules,
                                 const ExposureModel& model)
    : doses_(std::move(doses)), schedules_(std::move(schedules)) {
  if (doses_.empty() || schedules_.empty()) {
    throw std::invalid_argument("combination grid needs at least one dose and one schedule");
  }
  for (std::size_t s = 0; s < schedules_.size(); ++s) {
    for (std::size_t d = 0; d < doses_.size(); ++d) {
      Combination c;
      c.dose_index = d;
      c.schedule_index = s;
      c.dose = doses_[d];
      c.freq = schedules_[s].freq;
      c.auc_cycle = model.combination(c.dose, c.freq).auc_cycle();
      if (!(c.auc_cycle > 0.0)) {
        throw std::invalid_argument("every combination needs positive AUC_E(t*)");
      }
      c.label = format_dose(c.dose) + "/" + schedules_[s].label;
      combinations_.push_back(std::move(c));
    }
  }

  std::vector<std::size_t> order(combinations_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return combinations_[a].auc_cycle < combinations_[b].auc_cycle;
  });
  levels_.assign(combinations_.size(), 0);
  std::size_t level = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && !same_level(combinations_[order[k]].auc_cycle,
                             combinations_[order[k - 1]].auc_cycle)) {
      ++level;
    }
    levels_[order[k]] = level;
  }
  level_count_ = level + 1;
}

std::size_t CombinationGrid::index(std::size_t schedule, std::size_t dose) const {
  if (schedule >= schedules_.size() || dose >= doses_.size()) {
    throw std::out_of_range("combination index out of range");
  }
  return schedule * doses_.size() + dose;
}

std::optional<std::size_t> CombinationGrid::find(double dose, double freq) const {
  for (std::size_t i = 0; i < combinations_.size(); ++i) {
    const auto& c = combinations_[i];
    if (std::abs(c.dose - dose) <= 1e-9 * c.dose && std::abs(c.freq - freq) <= 1e-9 * c.freq) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> CombinationGrid::find(std::string_view label) const {
  for (std::size_t i = 0; i < combinations_.size(); ++i) {
    if (combinations_[i].label == label) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> CombinationGrid::find_schedule(std::string_view label) const {
  for (std::size_t i = 0; i < schedules_.size(); ++i) {
    if (schedules_[i].label == label) return i;
  }
  return std::nullopt;
}

std::size_t CombinationGrid::lowest_exposure() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < combinations_.size(); ++i) {
    if (levels_[i] < levels_[best]) best = i;
  }
  return best;
}

std::string to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::HighestEligibleExposure: return "highest";
    case SelectionStrategy::LowestEligibleExposure: return "lowest";
    case SelectionStrategy::MaxTargetProbability: return "max-target";
  }
  return "unknown";
}

SelectionStrategy parse_selection_strategy(std::string_view name) {
  if (name == "highest") return SelectionStrategy::HighestEligibleExposure;
  if (name == "lowest") return SelectionStrategy::LowestEligibleExposure;
  if (name == "max-target") return SelectionStrategy::MaxTargetProbability;
  throw std::invalid_argument(fmt::format("unknown selection strategy '{}'", name));
}

std::string to_string(Rationale r) {
  switch (r) {
    case Rationale::Recommended: return "recommended";
    case Rationale::CappedByNoSkip: return "capped_by_no_skip";
    case Rationale::AllOverdosing: return "all_overdosing";
  }
  return "unknown";
}

std::string to_string(CompletionKind k) {
  switch (k) {
    case CompletionKind::Continue: return "continue";
    case CompletionKind::DeclareMTC: return "declare_mtc";
    case CompletionKind::StopNoMTC: return "stop_no_mtc";
  }
  return "unknown";
}

void EscalationConfig::validate() const {
  if (!(feasibility_bound > 0.0 && feasibility_bound < 1.0)) {
    throw std::invalid_argument("feasibility_bound must lie in (0, 1)");
  }
  if (!(bounds.lower > 0.0 && bounds.lower < bounds.upper && bounds.upper < 1.0)) {
    throw std::invalid_argument("interval bounds must satisfy 0 < lower < upper < 1");
  }
  if (!(target_confidence > 0.0 && target_confidence < 1.0)) {
    throw std::invalid_argument("target_confidence must lie in (0, 1)");
  }
  if (min_patients_at_mtc < 1) throw std::invalid_argument("min_patients_at_mtc must be positive");
  if (min_patients_total_fallback < 1) {
    throw std::invalid_argument("min_patients_total_fallback must be positive");
  }
  if (max_patients < 1) throw std::invalid_argument("max_patients must be positive");
  if (cohort_size < 1) throw std::invalid_argument("cohort_size must be positive");
}

DecisionTable evaluate_grid(const Posterior& posterior, const CombinationGrid& grid,
                            const EscalationConfig& cfg,
                            std::span<const int> patients_per_combination, Rng& rng,
                            SummaryDetail detail) {
  if (grid.size() == 0) throw std::invalid_argument("empty combination grid");
  if (!patients_per_combination.empty() && patients_per_combination.size() != grid.size()) {
    throw std::invalid_argument("patient counts do not match the grid");
  }

  DecisionTable table;
  table.rows.reserve(grid.size());
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    DecisionRow row;
    row.combination = i;
    row.auc_cycle = grid[i].auc_cycle;
    row.dlt = prob_dlt_cycle1(posterior, row.auc_cycle, cfg.bounds, detail);
    row.ewoc_ok = row.dlt.p_overdosing < cfg.feasibility_bound;
    row.n_patients = patients_per_combination.empty() ? 0 : patients_per_combination[i];
    if (row.ewoc_ok) eligible.push_back(i);
    table.rows.push_back(row);
  }
  if (eligible.empty()) {
    table.rationale = Rationale::AllOverdosing;
    return table;
  }

  std::vector<std::size_t> candidates = eligible;
  bool capped = false;
  if (cfg.no_skip) {
    std::optional<std::size_t> highest_tried;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (table.rows[i].n_patients > 0) {
        highest_tried = std::max(highest_tried.value_or(0), grid.level(i));
      }
    }
    const std::size_t cap =
        highest_tried ? std::min(*highest_tried + 1, grid.level_count() - 1) : 0;
    std::erase_if(candidates, [&](std::size_t i) { return grid.level(i) > cap; });
    capped = candidates.size() < eligible.size() &&
             cfg.selection_strategy != SelectionStrategy::LowestEligibleExposure;
    if (candidates.empty()) {
      // only reachable if eligibility were not monotone in exposure
      candidates = {eligible.front()};
      for (std::size_t i : eligible) {
        if (grid.level(i) < grid.level(candidates.front())) candidates = {i};
      }
    }
  }

  // Score candidates; keep every candidate tied with the best.
  auto score = [&](std::size_t i) -> double {
    switch (cfg.selection_strategy) {
      case SelectionStrategy::HighestEligibleExposure: return static_cast<double>(grid.level(i));
      case SelectionStrategy::LowestEligibleExposure: return -static_cast<double>(grid.level(i));
      case SelectionStrategy::MaxTargetProbability: return table.rows[i].dlt.p_targeted_toxicity;
    }
    return 0.0;
  };
  double best = score(candidates.front());
  for (std::size_t i : candidates) best = std::max(best, score(i));
  std::vector<std::size_t> tied;
  for (std::size_t i : candidates) {
    if (std::abs(score(i) - best) <= 1e-12) tied.push_back(i);
  }

  table.tie_broken = tied.size() > 1;
  table.recommendation = table.tie_broken ? tied[uniform_index(rng, tied.size())] : tied.front();
  table.rationale = capped ? Rationale::CappedByNoSkip : Rationale::Recommended;
  return table;
}

std::vector<int> TrialState::patients_per_combination(std::size_t grid_size) const {
  std::vector<int> counts(grid_size, 0);
  for (std::size_t a : assignments) {
    if (a < grid_size) ++counts[a];
  }
  return counts;
}

std::optional<std::size_t> next_patient_assignment(const TrialState& state,
                                                   const CombinationGrid& grid,
                                                   const EscalationConfig& cfg, Rng& rng) {
  const auto counts = state.patients_per_combination(grid.size());
  return evaluate_grid(state.posterior, grid, cfg, counts, rng).recommendation;
}

Completion check_completion(const DecisionTable& table, int total_enrolled,
                            const EscalationConfig& cfg) {
  if (table.stop()) return {CompletionKind::StopNoMTC, std::nullopt};
  const std::size_t rec = *table.recommendation;
  const DecisionRow& row = table.rows.at(rec);
  const bool enough_at_rec = row.n_patients >= cfg.min_patients_at_mtc;
  const bool confident = row.dlt.p_targeted_toxicity >= cfg.target_confidence ||
                         total_enrolled >= cfg.min_patients_total_fallback;
  if (enough_at_rec && confident) return {CompletionKind::DeclareMTC, rec};
  if (total_enrolled >= cfg.max_patients) {
    if (enough_at_rec) return {CompletionKind::DeclareMTC, rec};
    return {CompletionKind::StopNoMTC, std::nullopt};
  }
  return {CompletionKind::Continue, std::nullopt};
}

}  // namespace titepk
