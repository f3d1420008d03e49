#include "titepk/trial_sim.hpp"

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <utility>

namespace titepk {

namespace {

constexpr double kEventTimeTolHours = 1e-6;

// Solves AUC_E(t) = target on (0, t*]; AUC_E is increasing after the first dose.
double invert_auc(const ExposureProfile& profile, double target) {
  const double t_star = profile.params().t_star;
  auto f = [&](double t) { return profile.auc(t) - target; };
  if (f(t_star) <= 0.0) return t_star;
  auto tol = [](double a, double b) { return std::abs(b - a) <= kEventTimeTolHours; };
  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(f, 0.0, t_star, -target, f(t_star), tol,
                                                         max_iter);
  return std::clamp(0.5 * (bracket.first + bracket.second), kEventTimeTolHours, t_star);
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform_open01(rng); }

}  // namespace

std::string to_string(DltGenerator g) {
  switch (g) {
    case DltGenerator::TitePkProcess: return "titepk";
    case DltGenerator::UniformTime: return "uniform";
    case DltGenerator::ExponentialTime: return "exponential";
    case DltGenerator::EarlyLateTime: return "earlylate";
  }
  return "unknown";
}

DltGenerator parse_dlt_generator(std::string_view name) {
  if (name == "titepk") return DltGenerator::TitePkProcess;
  if (name == "uniform") return DltGenerator::UniformTime;
  if (name == "exponential") return DltGenerator::ExponentialTime;
  if (name == "earlylate") return DltGenerator::EarlyLateTime;
  throw std::invalid_argument(fmt::format("unknown DLT generator '{}'", name));
}

DltOutcome sample_dlt(DltGenerator gen, double true_p, const ExposureProfile& profile, Rng& rng) {
  if (!(true_p > 0.0 && true_p < 1.0)) {
    throw std::invalid_argument("true DLT probability must lie in (0, 1)");
  }
  const double t_star = profile.params().t_star;
  switch (gen) {
    case DltGenerator::TitePkProcess: {
      const double u = uniform_open01(rng);
      if (!(u < true_p)) return {false, t_star};
      // beta_true * AUC_E(t) = -log(1 - u), with beta_true = -log(1 - p) / AUC_E(t*)
      const double target = profile.auc_cycle() * std::log1p(-u) / std::log1p(-true_p);
      return {true, invert_auc(profile, target)};
    }
    case DltGenerator::ExponentialTime: {
      const double rate = -std::log1p(-true_p) / t_star;
      const double t = -std::log1p(-uniform_open01(rng)) / rate;
      if (t > t_star) return {false, t_star};
      return {true, t};
    }
    case DltGenerator::UniformTime: {
      if (!(uniform_open01(rng) < true_p)) return {false, t_star};
      return {true, uniform_in(rng, 0.0, t_star)};
    }
    case DltGenerator::EarlyLateTime: {
      if (!(uniform_open01(rng) < true_p)) return {false, t_star};
      const double band = uniform_open01(rng);
      if (band < 0.4) return {true, uniform_in(rng, 0.0, t_star / 5.0)};
      if (band < 0.8) return {true, uniform_in(rng, 4.0 * t_star / 5.0, t_star)};
      return {true, uniform_in(rng, t_star / 5.0, 4.0 * t_star / 5.0)};
    }
  }
  throw std::logic_error("unhandled DLT generator");
}

int TrialResult::dlts() const {
  return static_cast<int>(std::count_if(patients.begin(), patients.end(),
                                        [](const PatientLog& p) { return p.dlt; }));
}

ToxicityClass classify(double true_p, IntervalBounds bounds) {
  if (true_p < bounds.lower) return ToxicityClass::Underdosing;
  if (true_p <= bounds.upper) return ToxicityClass::TargetedToxicity;
  return ToxicityClass::Overdosing;
}

TrialSimulator::TrialSimulator(Scenario scenario, EscalationConfig cfg, DltGenerator generator,
                               BetaPrior prior, const PkParams& params)
    : scenario_(std::move(scenario)),
      cfg_(cfg),
      generator_(generator),
      prior_(prior),
      model_(params),
      grid_(scenario_.grid(model_)) {
  scenario_.validate();
  cfg_.validate();
  prior_.validate();
  for (const auto& c : grid_.combinations()) profiles_.push_back(model_.combination(c.dose, c.freq));
}

TrialResult TrialSimulator::run_trial(std::uint64_t seed, std::uint64_t index) const {
  Rng rng = make_stream(seed, index);
  TrialResult result;
  LikelihoodSummary summary;
  std::vector<int> counts(grid_.size(), 0);
  Posterior posterior = fit_posterior(summary, prior_);
  int enrolled = 0;

  for (;;) {
    DecisionTable table =
        evaluate_grid(posterior, grid_, cfg_, counts, rng, SummaryDetail::IntervalsOnly);
    const Completion completion = check_completion(table, enrolled, cfg_);
    const auto rec = table.recommendation;
    result.decisions.push_back(std::move(table));
    if (completion.kind != CompletionKind::Continue) {
      result.outcome = completion;
      break;
    }
    const std::size_t c = *rec;
    for (int k = 0; k < cfg_.cohort_size && enrolled < cfg_.max_patients; ++k) {
      const DltOutcome outcome = sample_dlt(generator_, scenario_.true_p_at(c), profiles_[c], rng);
      result.patients.push_back({c, outcome.event, outcome.time});
      summary.add(PatientRecord{profiles_[c].regimen(), outcome.event, outcome.time}, model_);
      ++counts[c];
      ++enrolled;
    }
    posterior = fit_posterior(summary, prior_);
  }
  result.final_posterior = std::move(posterior);
  return result;
}

TrialSummary TrialSimulator::summarize(const TrialResult& result, std::size_t index) const {
  TrialSummary s;
  s.index = index;
  s.outcome = result.outcome.kind;
  s.mtc = result.outcome.mtc;
  if (s.mtc) s.mtc_class = classify(scenario_.true_p_at(*s.mtc), cfg_.bounds);
  s.patients = static_cast<int>(result.patients.size());
  s.dlts = result.dlts();
  for (const auto& p : result.patients) {
    if (classify(scenario_.true_p_at(p.combination), cfg_.bounds) == ToxicityClass::Overdosing) {
      ++s.patients_od;
    }
  }
  return s;
}

StudyResult TrialSimulator::run_study(std::size_t n_trials, std::uint64_t seed,
                                      unsigned threads) const {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
  StudyResult study;
  study.trials.resize(n_trials);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_trials));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_trials; i = next++) {
      study.trials[i] = summarize(run_trial(seed, i), i);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  auto& oc = study.oc;
  oc.n_trials = n_trials;
  oc.schedule_selection.assign(grid_.schedules().size(), 0.0);
  std::vector<std::size_t> schedule_counts(grid_.schedules().size(), 0);
  double patients = 0.0, patients_od = 0.0, dlts = 0.0;
  for (const auto& t : study.trials) {
    patients += t.patients;
    patients_od += t.patients_od;
    dlts += t.dlts;
    if (!t.mtc) {
      ++oc.count_none;
      continue;
    }
    ++schedule_counts[grid_[*t.mtc].schedule_index];
    switch (*t.mtc_class) {
      case ToxicityClass::Underdosing: ++oc.count_ud; break;
      case ToxicityClass::TargetedToxicity: ++oc.count_tt; break;
      case ToxicityClass::Overdosing: ++oc.count_od; break;
    }
  }
  const double n = static_cast<double>(n_trials);
  oc.p_select_tt = static_cast<double>(oc.count_tt) / n;
  oc.p_select_od = static_cast<double>(oc.count_od) / n;
  oc.p_select_ud = static_cast<double>(oc.count_ud) / n;
  oc.p_select_none = static_cast<double>(oc.count_none) / n;
  oc.mean_patients_total = patients / n;
  oc.mean_patients_od = patients_od / n;
  oc.mean_dlts = dlts / n;
  for (std::size_t s = 0; s < schedule_counts.size(); ++s) {
    oc.schedule_selection[s] = static_cast<double>(schedule_counts[s]) / n;
  }
  return study;
}

TrialResult run_trial(const Scenario& scenario, const EscalationConfig& cfg, DltGenerator gen,
                      const BetaPrior& prior, const PkParams& params, std::uint64_t seed) {
  return TrialSimulator(scenario, cfg, gen, prior, params).run_trial(seed);
}

OperatingCharacteristics run_study(const Scenario& scenario, const EscalationConfig& cfg,
                                   DltGenerator gen, const BetaPrior& prior,
                                   const PkParams& params, std::size_t n_trials,
                                   std::uint64_t seed) {
  return TrialSimulator(scenario, cfg, gen, prior, params).run_study(n_trials, seed).oc;
}

}  // namespace titepk
