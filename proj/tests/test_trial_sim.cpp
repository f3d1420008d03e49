#include "titepk/scenarios.hpp"
#include "titepk/trial_sim.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace titepk;

namespace {

const ExposureModel& vidaza_model() {
  static const ExposureModel model(vidaza::pk_params());
  return model;
}

constexpr DltGenerator kGenerators[] = {DltGenerator::TitePkProcess, DltGenerator::UniformTime,
                                        DltGenerator::ExponentialTime, DltGenerator::EarlyLateTime};

EscalationConfig config(double a) {
  EscalationConfig cfg;
  cfg.feasibility_bound = a;
  return cfg;
}

}  // namespace

TEST_CASE("generator names round-trip") {
  for (auto g : kGenerators) CHECK(parse_dlt_generator(to_string(g)) == g);
  CHECK_THROWS_AS(parse_dlt_generator("weibull"), std::invalid_argument);
}

TEST_CASE("degenerate probabilities are rejected") {
  Rng rng = make_stream(1, 0);
  const auto profile = vidaza_model().combination(24.0, 1.0 / 96.0);
  CHECK_THROWS_AS(sample_dlt(DltGenerator::UniformTime, 0.0, profile, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_dlt(DltGenerator::UniformTime, 1.0, profile, rng), std::invalid_argument);
}

TEST_CASE("exponential generator event fraction over 1e6 draws") {
  Rng rng = make_stream(2, 0);
  const auto profile = vidaza_model().combination(24.0, 1.0 / 96.0);
  const int n = 1000000;
  int events = 0;
  for (int i = 0; i < n; ++i) events += sample_dlt(DltGenerator::ExponentialTime, 0.3, profile, rng).event;
  const double sigma = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(events / double(n) - 0.3) < 3 * sigma);
}

TEST_CASE("all generators reproduce the marginal probability") {
  const auto profile = vidaza_model().combination(8.0, 1.0 / 24.0);
  for (auto g : kGenerators) {
    for (double p : {0.05, 0.3, 0.7}) {
      Rng rng = make_stream(3, static_cast<std::uint64_t>(g));
      const int n = 100000;
      int events = 0;
      for (int i = 0; i < n; ++i) {
        const auto out = sample_dlt(g, p, profile, rng);
        events += out.event;
        if (out.event) {
          CHECK(out.time > 0.0);
          CHECK(out.time <= 672.0);
        } else {
          CHECK(out.time == 672.0);
        }
      }
      CHECK(std::abs(events / double(n) - p) < 3 * std::sqrt(p * (1 - p) / n));
    }
  }
}

TEST_CASE("TITE-PK event times follow the normalised cumulative hazard") {
  const double p = 0.4;
  for (const char* label : {"24/B", "8/A", "16/D"}) {
    const ExposureModel& model = vidaza_model();
    const CombinationGrid grid = vidaza::grid(model);
    const auto& c = grid[*grid.find(label)];
    const auto profile = model.combination(c.dose, c.freq);
    const double beta = -std::log1p(-p) / profile.auc_cycle();
    Rng rng = make_stream(4, 0);
    std::vector<double> times;
    while (times.size() < 100000) {
      const auto out = sample_dlt(DltGenerator::TitePkProcess, p, profile, rng);
      if (out.event) times.push_back(out.time);
    }
    std::sort(times.begin(), times.end());
    double ks = 0.0;
    const double n = static_cast<double>(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double f = -std::expm1(-beta * profile.auc(times[i])) / p;
      ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    CHECK(ks < 0.01);
  }
}

TEST_CASE("early/late generator band fractions") {
  Rng rng = make_stream(5, 0);
  const auto profile = vidaza_model().combination(24.0, 1.0 / 96.0);
  int early = 0, late = 0, events = 0;
  while (events < 100000) {
    const auto out = sample_dlt(DltGenerator::EarlyLateTime, 0.5, profile, rng);
    if (!out.event) continue;
    ++events;
    early += out.time <= 672.0 / 5;
    late += out.time >= 4 * 672.0 / 5;
  }
  const double sigma = std::sqrt(0.4 * 0.6 / events);
  CHECK(std::abs(early / double(events) - 0.4) < 3 * sigma);
  CHECK(std::abs(late / double(events) - 0.4) < 3 * sigma);
}

TEST_CASE("uniform generator event times average t*/2") {
  Rng rng = make_stream(6, 0);
  const auto profile = vidaza_model().combination(24.0, 1.0 / 96.0);
  double sum = 0.0;
  int events = 0;
  while (events < 100000) {
    const auto out = sample_dlt(DltGenerator::UniformTime, 0.5, profile, rng);
    if (!out.event) continue;
    ++events;
    sum += out.time;
  }
  CHECK(std::abs(sum / events - 336.0) < 3 * 672.0 / std::sqrt(12.0 * events));
}

TEST_CASE("trials are deterministic given the seed") {
  const TrialSimulator sim(load_scenario("S3"), config(0.5), DltGenerator::TitePkProcess,
                           vidaza::prior(), vidaza::pk_params());
  const TrialResult a = sim.run_trial(99, 7);
  const TrialResult b = sim.run_trial(99, 7);
  REQUIRE(a.patients.size() == b.patients.size());
  for (std::size_t i = 0; i < a.patients.size(); ++i) {
    CHECK(a.patients[i].combination == b.patients[i].combination);
    CHECK(a.patients[i].dlt == b.patients[i].dlt);
    CHECK(a.patients[i].time == b.patients[i].time);
  }
  CHECK(a.outcome.kind == b.outcome.kind);
  CHECK(a.outcome.mtc == b.outcome.mtc);
  CHECK(a.decisions.size() == a.patients.size() + 1);
  CHECK(a.final_posterior.mean() == b.final_posterior.mean());

  const auto serial = sim.run_study(40, 5, 1);
  const auto parallel = sim.run_study(40, 5, 4);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(serial.trials[i].mtc == parallel.trials[i].mtc);
    CHECK(serial.trials[i].patients == parallel.trials[i].patients);
    CHECK(serial.trials[i].dlts == parallel.trials[i].dlts);
  }
  CHECK(serial.oc.p_select_tt == parallel.oc.p_select_tt);
}

TEST_CASE("a one-patient trial ends after one patient") {
  EscalationConfig cfg = config(0.5);
  cfg.max_patients = 1;
  const TrialSimulator sim(load_scenario("S1"), cfg, DltGenerator::TitePkProcess, vidaza::prior(),
                           vidaza::pk_params());
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto r = sim.run_trial(1, i);
    CHECK(r.patients.size() == 1);
    CHECK(r.outcome.kind == CompletionKind::StopNoMTC);
  }
}

TEST_CASE("study aggregates partition and respect the patient cap") {
  const TrialSimulator sim(load_scenario("S4"), config(0.5), DltGenerator::UniformTime,
                           vidaza::prior(), vidaza::pk_params());
  const auto study = sim.run_study(100, 8);
  const auto& oc = study.oc;
  CHECK(oc.count_tt + oc.count_od + oc.count_ud + oc.count_none == 100);
  CHECK(oc.p_select_tt + oc.p_select_od + oc.p_select_ud + oc.p_select_none == doctest::Approx(1.0).epsilon(1e-15));
  double schedules = 0.0;
  for (double s : oc.schedule_selection) schedules += s;
  CHECK(schedules == doctest::Approx(1.0 - oc.p_select_none).epsilon(1e-12));
  for (const auto& t : study.trials) {
    CHECK(t.patients <= 60);
    if (t.mtc) CHECK(t.outcome == CompletionKind::DeclareMTC);
  }
}

TEST_CASE("no OD or UD selections when every combination is on target") {
  Scenario s = load_scenario("S1");
  s.label = "flat";
  for (auto& row : s.true_p) std::fill(row.begin(), row.end(), 0.3);
  const TrialSimulator sim(s, config(0.5), DltGenerator::TitePkProcess, vidaza::prior(),
                           vidaza::pk_params());
  const auto oc = sim.run_study(60, 9).oc;
  CHECK(oc.p_select_od == 0.0);
  CHECK(oc.p_select_ud == 0.0);
  CHECK(oc.mean_patients_od == 0.0);
}

TEST_CASE("classification boundaries count as targeted toxicity") {
  CHECK(classify(0.20, {}) == ToxicityClass::TargetedToxicity);
  CHECK(classify(0.40, {}) == ToxicityClass::TargetedToxicity);
  CHECK(classify(0.19, {}) == ToxicityClass::Underdosing);
  CHECK(classify(0.41, {}) == ToxicityClass::Overdosing);
}
