#include "support/pk_ode.hpp"
#include "titepk/pk.hpp"
#include "titepk/rng.hpp"
#include "titepk/scenarios.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

using namespace titepk;

namespace {

Regimen random_regimen(Rng& rng) {
  const double dose = 1.0 + 30.0 * uniform01(rng);
  const std::size_t n = 1 + uniform_index(rng, 12);
  std::vector<double> times;
  for (std::size_t i = 0; i < n; ++i) times.push_back(600.0 * uniform01(rng));
  times.push_back(0.0);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return Regimen(dose, times);
}

}  // namespace

TEST_CASE("regular regimens place doses strictly before the horizon") {
  const Regimen r = Regimen::regular(24.0, 1.0 / 96.0, 672.0);
  REQUIRE(r.dose_times().size() == 7);
  CHECK(r.dose_times().front() == 0.0);
  CHECK(r.dose_times().back() == 576.0);
  CHECK(Regimen::regular(8.0, 1.0 / 24.0, 672.0).dose_times().size() == 28);
  CHECK_THROWS_AS(Regimen::regular(-1.0, 0.01, 672.0), std::invalid_argument);
  CHECK_THROWS_AS(Regimen(1.0, {-5.0}), std::invalid_argument);
}

TEST_CASE("closed form matches RK4 integration of the compartment ODE") {
  const PkParams params = vidaza::pk_params();
  Rng rng = make_stream(2024, 1);
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Regimen regimen = random_regimen(rng);
    std::vector<double> times;
    for (int i = 0; i < 100; ++i) times.push_back(0.5 + 671.5 * uniform01(rng));
    const auto ode = testing::rk4_ceff(regimen, params, times, 0.01);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double exact = concentration_eff(regimen, params, times[i]);
      worst = std::max(worst, std::abs(exact - ode[i]) / std::abs(ode[i]));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("AUC matches trapezoid quadrature at 24, 168 and 672 hours") {
  const PkParams params = vidaza::pk_params();
  Rng rng = make_stream(2024, 2);
  for (int k = 0; k < 3; ++k) {
    const Regimen regimen = random_regimen(rng);
    for (double t : {24.0, 168.0, 672.0}) {
      const double quad = testing::trapezoid_auc(regimen, params, t, 0.01);
      CHECK(std::abs(auc_ceff(regimen, params, t) - quad) <= 1e-5 * quad);
    }
  }
}

TEST_CASE("single dose AUC tends to dose / k_e") {
  const PkParams params = vidaza::pk_params();
  const Regimen single(10.0, {0.0});
  CHECK(auc_ceff(single, params, 0.0) == 0.0);
  CHECK(auc_ceff(single, params, 1e4) == doctest::Approx(10.0 / params.k_e).epsilon(1e-12));
  const double quad = testing::trapezoid_auc(single, params, 400.0, 0.01);
  CHECK(std::abs(quad - 10.0 / params.k_e) < 1e-5 * 10.0 / params.k_e);
  CHECK_THROWS_AS(auc_ceff(single, params, -1.0), std::invalid_argument);
}

TEST_CASE("equal rates use the analytic limit") {
  PkParams p = vidaza::pk_params();
  p.k_eff = p.k_e;
  const Regimen single(1.0, {0.0});
  const double k = p.k_e;
  for (double t : {0.5, 3.0, 40.0}) {
    CHECK(concentration_eff(single, p, t) == doctest::Approx(k * t * std::exp(-k * t)).epsilon(1e-14));
  }
  PkParams near = p;
  near.k_eff = p.k_e * (1.0 + 1e-6);
  CHECK(concentration_eff(single, near, 3.0) == doctest::Approx(concentration_eff(single, p, 3.0)).epsilon(1e-5));
  CHECK(auc_ceff(single, p, 1e4) == doctest::Approx(1.0 / k).epsilon(1e-12));
}

TEST_CASE("reference combination has unit AUC_E at t*") {
  const ExposureModel model(vidaza::pk_params());
  CHECK(std::abs(model.combination(24.0, 1.0 / 96.0).auc_cycle() - 1.0) < 1e-9);
  CHECK(std::abs(model.profile(model.reference_regimen()).auc(672.0) - 1.0) < 1e-9);
}

TEST_CASE("8 mg daily is about 4/3 of the reference") {
  const ExposureModel model(vidaza::pk_params());
  const double auc = model.combination(8.0, 1.0 / 24.0).auc_cycle();
  CHECK(std::abs(auc - 4.0 / 3.0) < 0.05 * 4.0 / 3.0);
}

TEST_CASE("superposition, time shift, linearity and monotone AUC") {
  const PkParams params = vidaza::pk_params();
  Rng rng = make_stream(2024, 3);
  for (int k = 0; k < 20; ++k) {
    const Regimen full = random_regimen(rng);
    std::vector<double> a, b;
    for (double t : full.dose_times()) (uniform01(rng) < 0.5 ? a : b).push_back(t);
    for (int i = 0; i < 20; ++i) {
      const double t = 672.0 * uniform01(rng);
      const double whole = concentration_eff(full, params, t);
      const double parts = concentration_eff(Regimen(full.dose(), a), params, t) +
                           concentration_eff(Regimen(full.dose(), b), params, t);
      CHECK(std::abs(whole - parts) <= 1e-12 * std::max(whole, 1e-300) + 1e-300);

      const double doubled = concentration_eff(Regimen(2.0 * full.dose(), {full.dose_times().begin(), full.dose_times().end()}), params, t);
      CHECK(doubled == doctest::Approx(2.0 * whole).epsilon(1e-13));
    }
    const double s = 500.0 * uniform01(rng);
    const double t = s + 100.0 * uniform01(rng);
    CHECK(concentration_eff(Regimen(1.0, {s}), params, t) ==
          doctest::Approx(concentration_eff(Regimen(1.0, {0.0}), params, t - s)).epsilon(1e-12));

    const ExposureProfile profile = make_exposure(full, params);
    double prev = 0.0;
    for (double t2 = 0.0; t2 <= 672.0; t2 += 3.7) {
      const double cur = profile.auc(t2);
      CHECK(cur >= prev);
      prev = cur;
    }
  }
}

TEST_CASE("steady state averages d f / (k_e K) and peaks stay bounded") {
  // average over one interval at steady state
  const PkParams params = vidaza::pk_params();
  const ExposureModel model(params);
  const double f = 1.0 / 24.0;
  const Regimen long_course = Regimen::regular(8.0, f, 24.0 * 200);
  const ExposureProfile profile = model.profile(long_course);
  const double t0 = 24.0 * 150;
  const double avg = (profile.auc(t0 + 24.0) - profile.auc(t0)) / 24.0;
  const double level = 8.0 * f / (params.k_e * model.normalization());
  CHECK(avg == doctest::Approx(level).epsilon(1e-9));

  // the peak cap only holds when the interval is short relative to 1/k_e
  PkParams slow = params;
  slow.k_e = std::log(2.0) / 48.0;
  const ExposureModel slow_model(slow);
  const ExposureProfile slow_profile = slow_model.profile(Regimen::regular(8.0, f, 24.0 * 200));
  const double slow_level = 8.0 * f / (slow.k_e * slow_model.normalization());
  double peak = 0.0;
  for (double t = 24.0 * 150; t < 24.0 * 152; t += 0.05) peak = std::max(peak, slow_profile.exposure(t));
  CHECK(peak <= slow_level * 1.5);
  CHECK(peak > slow_level);
}

TEST_CASE("PK parameters are validated") {
  PkParams p = vidaza::pk_params();
  p.k_e = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_THROWS_AS(ExposureModel{p}, std::invalid_argument);
  p = vidaza::pk_params();
  p.t_star = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("log-normal quantile matching") {
  const LogNormal sym = fit_keff_from_quantiles(1.0, std::exp(2.0 * 1.959964));
  CHECK(sym.mu == doctest::Approx(1.959964).epsilon(1e-12));
  CHECK(sym.sigma == doctest::Approx(1.0).epsilon(1e-7));

  const LogNormal vz = fit_keff_from_quantiles(1.0 / 672.0, 2.0);
  // frozen from the closed form: mu = (ln(1/672) + ln 2) / 2
  CHECK(vz.mu == doctest::Approx(-2.9085555800).epsilon(1e-9));
  CHECK(vz.sigma == doctest::Approx(1.8376372163).epsilon(1e-9));
  CHECK(vz.quantile(0.025) == doctest::Approx(1.0 / 672.0).epsilon(1e-12));
  CHECK(vz.quantile(0.975) == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_keff_from_quantiles(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_keff_from_quantiles(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("Vidaza grid exposure values") {
  const ExposureModel model(vidaza::pk_params());
  const CombinationGrid grid = vidaza::grid(model);
  // frozen: AUC_E(t*) per combination
  const std::pair<const char*, double> expected[] = {
      {"8/A", 0.190476}, {"8/B", 0.333333}, {"16/A", 0.380952}, {"24/A", 0.571429},
      {"8/C", 0.666652}, {"16/B", 0.666667}, {"24/B", 1.0},      {"8/D", 1.332387},
      {"16/C", 1.333304}, {"24/C", 1.999956}, {"16/D", 2.664774}, {"24/D", 3.997161}};
  for (const auto& [label, auc] : expected) {
    const auto idx = grid.find(label);
    REQUIRE(idx);
    CHECK(grid[*idx].auc_cycle == doctest::Approx(auc).epsilon(2e-6));
  }
  CHECK(grid.level_count() == 12);
  CHECK(grid[grid.lowest_exposure()].label == "8/A");
}
