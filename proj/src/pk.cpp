#include "titepk/pk.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace titepk {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

void require_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("time must be finite and non-negative");
  }
}

// Rates closer than this (relative to k_e) use the k_eff == k_e limit.
constexpr double kEqualRatesTol = 1e-8;

bool equal_rates(const PkParams& p) {
  return std::abs(p.k_eff - p.k_e) < kEqualRatesTol * p.k_e;
}

// Effect-compartment response to a unit dose, `tau` hours after it.
double unit_response(const PkParams& p, double tau) {
  if (equal_rates(p)) {
    const double k = 0.5 * (p.k_e + p.k_eff);
    return k * tau * std::exp(-k * tau);
  }
  const double diff = p.k_eff - p.k_e;
  // k_eff/(k_eff-k_e) * (e^{-k_e tau} - e^{-k_eff tau}), without cancellation
  return p.k_eff * std::exp(-p.k_e * tau) * -std::expm1(-diff * tau) / diff;
}

// Integral of unit_response over [0, tau].
double unit_area(const PkParams& p, double tau) {
  if (equal_rates(p)) {
    const double k = 0.5 * (p.k_e + p.k_eff);
    return (-std::expm1(-k * tau) - k * tau * std::exp(-k * tau)) / k;
  }
  const double diff = p.k_eff - p.k_e;
  const double a = -std::expm1(-p.k_e * tau) / p.k_e;
  const double b = -std::expm1(-p.k_eff * tau) / p.k_eff;
  return p.k_eff * (a - b) / diff;
}

template <typename Kernel>
double superpose(const Regimen& regimen, double t, Kernel kernel) {
  require_time(t);
  double total = 0.0;
  for (double ti : regimen.dose_times()) {
    if (ti > t) break;
    total += kernel(t - ti);
  }
  return regimen.dose() * total;
}

}  // namespace

void PkParams::validate() const {
  require_positive(k_e, "k_e");
  require_positive(k_eff, "k_eff");
  require_positive(t_star, "t_star");
  require_positive(ref_dose, "ref_dose");
  require_positive(ref_freq, "ref_freq");
}

Regimen::Regimen(double dose, std::vector<double> dose_times)
    : dose_(dose), dose_times_(std::move(dose_times)) {
  require_positive(dose, "dose");
  for (std::size_t i = 0; i < dose_times_.size(); ++i) {
    const double t = dose_times_[i];
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("dose times must be finite and non-negative");
    }
    if (i > 0 && !(t > dose_times_[i - 1])) {
      throw std::invalid_argument("dose times must be strictly increasing");
    }
  }
}

Regimen Regimen::regular(double dose, double freq, double horizon) {
  require_positive(freq, "freq");
  require_time(horizon);
  std::vector<double> times;
  const double cutoff = horizon * (1.0 - 1e-12);
  for (std::size_t i = 0;; ++i) {
    double t = static_cast<double>(i) / freq;
    // 1/f is rarely exact; snap whole hours back onto the grid
    const double whole = std::round(t);
    if (std::abs(t - whole) < 1e-9 * std::max(1.0, t)) t = whole;
    if (!(t < cutoff)) break;
    times.push_back(t);
  }
  return Regimen(dose, std::move(times));
}

double concentration_eff(const Regimen& regimen, const PkParams& params, double t) {
  return superpose(regimen, t, [&](double tau) { return unit_response(params, tau); });
}

double auc_ceff(const Regimen& regimen, const PkParams& params, double t) {
  return superpose(regimen, t, [&](double tau) { return unit_area(params, tau); });
}

ExposureModel::ExposureModel(const PkParams& params) : params_(params) {
  params_.validate();
  normalization_ = auc_ceff(reference_regimen(), params_, params_.t_star);
  if (!(normalization_ > 0.0) || !std::isfinite(normalization_)) {
    throw std::invalid_argument("reference regimen has no exposure over cycle 1");
  }
}

Regimen ExposureModel::reference_regimen() const {
  return Regimen::regular(params_.ref_dose, params_.ref_freq, params_.t_star);
}

ExposureProfile ExposureModel::profile(Regimen regimen) const {
  return ExposureProfile(std::move(regimen), params_, normalization_);
}

ExposureProfile ExposureModel::combination(double dose, double freq) const {
  return profile(Regimen::regular(dose, freq, params_.t_star));
}

ExposureProfile::ExposureProfile(Regimen regimen, const PkParams& params,
                                 double normalization)
    : regimen_(std::move(regimen)), params_(params), normalization_(normalization) {}

double ExposureProfile::exposure(double t) const {
  return concentration_eff(regimen_, params_, t) / normalization_;
}

double ExposureProfile::auc(double t) const {
  return auc_ceff(regimen_, params_, t) / normalization_;
}

ExposureProfile make_exposure(const Regimen& regimen, const PkParams& params) {
  return ExposureModel(params).profile(regimen);
}

double LogNormal::quantile(double p) const {
  const boost::math::normal_distribution<double> normal(mu, sigma);
  return std::exp(boost::math::quantile(normal, p));
}

LogNormal fit_keff_from_quantiles(double q_low, double q_high) {
  require_positive(q_low, "q_low");
  require_positive(q_high, "q_high");
  if (!(q_low < q_high)) {
    throw std::invalid_argument("q_low must be smaller than q_high");
  }
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.975);
  const double lo = std::log(q_low);
  const double hi = std::log(q_high);
  return LogNormal{0.5 * (lo + hi), (hi - lo) / (2.0 * z)};
}

}  // namespace titepk
