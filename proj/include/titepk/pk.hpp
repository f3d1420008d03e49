#pragma once

// Pseudo-PK: a central compartment with first-order elimination feeding a
// lagged effect compartment. All times are in hours, all rates in 1/hour.

#include <cstddef>
#include <span>
#include <vector>

namespace titepk {

struct PkParams {
  double k_e = 0.0;       // elimination rate constant
  double k_eff = 0.0;     // effect-compartment rate constant
  double t_star = 0.0;    // end of cycle 1
  double ref_dose = 0.0;  // d*
  double ref_freq = 0.0;  // f*

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// A dosing history with a constant amount per administration.
class Regimen {
 public:
  Regimen(double dose, std::vector<double> dose_times);

  // Administrations at 0, 1/f, 2/f, ... strictly before `horizon`.
  static Regimen regular(double dose, double freq, double horizon);

  double dose() const { return dose_; }
  std::span<const double> dose_times() const { return dose_times_; }

  bool operator==(const Regimen&) const = default;

 private:
  double dose_;
  std::vector<double> dose_times_;
};

// Effect-compartment concentration (unit volume, latent units).
double concentration_eff(const Regimen& regimen, const PkParams& params, double t);

// Exact integral of concentration_eff over [0, t].
double auc_ceff(const Regimen& regimen, const PkParams& params, double t);

class ExposureProfile;

// PkParams plus the cached normalisation constant
//   K = auc_ceff(reference regimen, t*),
// so that the reference combination has AUC_E(t*) = 1.
class ExposureModel {
 public:
  explicit ExposureModel(const PkParams& params);

  const PkParams& params() const { return params_; }
  double normalization() const { return normalization_; }
  Regimen reference_regimen() const;

  ExposureProfile profile(Regimen regimen) const;

  // Shorthand for profile(Regimen::regular(dose, freq, t*)).
  ExposureProfile combination(double dose, double freq) const;

 private:
  PkParams params_;
  double normalization_;
};

// E(t) and AUC_E(t) for one regimen.
class ExposureProfile {
 public:
  ExposureProfile(Regimen regimen, const PkParams& params, double normalization);

  double exposure(double t) const;
  double auc(double t) const;
  // AUC_E(t*), the quantity that orders combinations.
  double auc_cycle() const { return auc(params_.t_star); }

  const Regimen& regimen() const { return regimen_; }
  const PkParams& params() const { return params_; }

 private:
  Regimen regimen_;
  PkParams params_;
  double normalization_;
};

ExposureProfile make_exposure(const Regimen& regimen, const PkParams& params);

struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;

  double quantile(double p) const;
};

// Log-normal whose 2.5% and 97.5% quantiles are q_low and q_high.
LogNormal fit_keff_from_quantiles(double q_low, double q_high);

}  // namespace titepk
