#include "titepk/inference.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace titepk {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Integral over [0, s] (in units of the cell width) of the cubic Hermite
// basis functions h00, h10, h01, h11.
struct HermiteArea {
  double h00, h10, h01, h11;
};

HermiteArea hermite_area(double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double s4 = s3 * s;
  return {s4 / 2.0 - s3 + s, s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0, -s4 / 2.0 + s3,
          s4 / 4.0 - s3 / 3.0};
}

}  // namespace

void PatientRecord::validate(double t_star) const {
  if (!std::isfinite(time) || !(time > 0.0) || !(time <= t_star)) {
    throw std::invalid_argument(dlt ? "event time must lie in (0, t_star]"
                                    : "censoring time must lie in (0, t_star]");
  }
}

void BetaPrior::validate() const {
  if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("sigma must be positive and finite");
  }
}

double cloglog(double p) { return std::log(-std::log1p(-p)); }

double inverse_cloglog(double x) { return -std::expm1(-std::exp(x)); }

BetaPrior default_prior(double p_ref) {
  if (!(p_ref > 0.0 && p_ref < 1.0)) {
    throw std::invalid_argument("p_ref must lie in (0, 1)");
  }
  return BetaPrior{cloglog(p_ref), kDefaultPriorSigma};
}

void LikelihoodSummary::add(const PatientRecord& record, const ExposureModel& model) {
  const ExposureProfile profile = model.profile(record.regimen);
  if (record.dlt) {
    events += 1.0;
    const double e = profile.exposure(record.time);
    sum_log_exposure += e > 0.0 ? std::log(e) : kNegInf;
  }
  sum_auc += profile.auc(record.time);
}

LikelihoodSummary LikelihoodSummary::from_records(std::span<const PatientRecord> records,
                                                  const ExposureModel& model) {
  LikelihoodSummary summary;
  for (const auto& r : records) summary.add(r, model);
  return summary;
}

double LikelihoodSummary::log_likelihood(double log_beta) const {
  if (sum_log_exposure == kNegInf) return kNegInf;
  return events * log_beta + sum_log_exposure - std::exp(log_beta) * sum_auc;
}

double LikelihoodSummary::d_log_likelihood(double log_beta) const {
  return events - std::exp(log_beta) * sum_auc;
}

double log_likelihood(std::span<const PatientRecord> records, double log_beta,
                      const ExposureModel& model) {
  return LikelihoodSummary::from_records(records, model).log_likelihood(log_beta);
}

Posterior Posterior::point_mass(double log_beta) {
  if (!std::isfinite(log_beta)) throw std::invalid_argument("point mass must be finite");
  Posterior p;
  p.nodes_ = {log_beta};
  p.density_ = {1.0};
  p.d_density_ = {0.0};
  p.cumulative_ = {1.0};
  return p;
}

Posterior Posterior::from_grid(double lower, double upper, std::vector<double> density,
                               std::vector<double> d_density) {
  const std::size_t n = density.size();
  if (n < 2 || d_density.size() != n || !(upper > lower)) {
    throw std::invalid_argument("posterior grid needs at least two nodes on a proper interval");
  }
  Posterior p;
  p.step_ = (upper - lower) / static_cast<double>(n - 1);
  p.nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.nodes_[i] = lower + static_cast<double>(i) * p.step_;
  p.nodes_.back() = upper;

  // Cell masses from the cubic Hermite interpolant (end-corrected trapezoid).
  const double h = p.step_;
  p.cumulative_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double cell = 0.5 * h * (density[i] + density[i + 1]) +
                        h * h / 12.0 * (d_density[i] - d_density[i + 1]);
    p.cumulative_[i + 1] = p.cumulative_[i] + std::max(cell, 0.0);
  }
  const double total = p.cumulative_.back();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::domain_error("posterior density does not normalise");
  }
  for (std::size_t i = 0; i < n; ++i) {
    density[i] /= total;
    d_density[i] /= total;
    p.cumulative_[i] /= total;
  }
  p.cumulative_.back() = 1.0;
  p.density_ = std::move(density);
  p.d_density_ = std::move(d_density);
  return p;
}

double Posterior::partial_cell(std::size_t cell, double x) const {
  const double h = step_;
  const double s = std::clamp((x - nodes_[cell]) / h, 0.0, 1.0);
  const HermiteArea a = hermite_area(s);
  return h * (density_[cell] * a.h00 + h * d_density_[cell] * a.h10 +
              density_[cell + 1] * a.h01 + h * d_density_[cell + 1] * a.h11);
}

double Posterior::cdf(double x) const {
  if (is_point_mass()) return x >= nodes_.front() ? 1.0 : 0.0;
  if (x <= nodes_.front()) return 0.0;
  if (x >= nodes_.back()) return 1.0;
  auto cell = static_cast<std::size_t>((x - nodes_.front()) / step_);
  cell = std::min(cell, nodes_.size() - 2);
  const double value = cumulative_[cell] + partial_cell(cell, x);
  return std::clamp(value, cumulative_[cell], cumulative_[cell + 1]);
}

double Posterior::cdf_below(double x) const {
  if (is_point_mass()) return x > nodes_.front() ? 1.0 : 0.0;
  return cdf(x);
}

double Posterior::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability must lie in [0, 1]");
  if (is_point_mass()) return nodes_.front();
  if (p <= 0.0) return nodes_.front();
  if (p >= 1.0) return nodes_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), p);
  const std::size_t cell =
      std::min(static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0)),
               nodes_.size() - 2);
  const double target = p - cumulative_[cell];
  auto f = [&](double x) { return partial_cell(cell, x) - target; };
  const double lo = nodes_[cell];
  const double hi = nodes_[cell + 1];
  if (f(lo) >= 0.0) return lo;
  if (f(hi) <= 0.0) return hi;
  const auto bracket = boost::math::tools::bisect(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 3));
  return 0.5 * (bracket.first + bracket.second);
}

double Posterior::mean() const {
  return expect([](double x) { return x; });
}

double Posterior::sd() const {
  const double m = mean();
  return std::sqrt(expect([m](double x) { return (x - m) * (x - m); }));
}

Posterior fit_posterior(const LikelihoodSummary& summary, const BetaPrior& prior,
                        std::size_t grid_size) {
  prior.validate();
  if (grid_size < 201) throw std::invalid_argument("grid_size must be at least 201");
  if (summary.sum_log_exposure == kNegInf) {
    throw std::domain_error("data inconsistent with model support");
  }
  const double lower = prior.mu - kGridHalfWidthSds * prior.sigma;
  const double upper = prior.mu + kGridHalfWidthSds * prior.sigma;
  const double step = (upper - lower) / static_cast<double>(grid_size - 1);
  const double inv_var = 1.0 / (prior.sigma * prior.sigma);

  std::vector<double> log_density(grid_size);
  std::vector<double> slope(grid_size);
  double peak = kNegInf;
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double x = lower + static_cast<double>(i) * step;
    const double z = x - prior.mu;
    log_density[i] = -0.5 * z * z * inv_var + summary.log_likelihood(x);
    slope[i] = -z * inv_var + summary.d_log_likelihood(x);
    peak = std::max(peak, log_density[i]);
  }
  if (!std::isfinite(peak)) throw std::domain_error("data inconsistent with model support");

  std::vector<double> density(grid_size);
  std::vector<double> d_density(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    density[i] = std::exp(log_density[i] - peak);
    d_density[i] = density[i] == 0.0 ? 0.0 : density[i] * slope[i];
  }
  return Posterior::from_grid(lower, upper, std::move(density), std::move(d_density));
}

Posterior fit_posterior(std::span<const PatientRecord> records, const BetaPrior& prior,
                        const ExposureModel& model, std::size_t grid_size) {
  return fit_posterior(LikelihoodSummary::from_records(records, model), prior, grid_size);
}

double log_beta_threshold(double p, double auc_cycle) {
  if (!(auc_cycle > 0.0)) throw std::invalid_argument("AUC_E(t*) must be positive");
  return cloglog(p) - std::log(auc_cycle);
}

DltProbability prob_dlt_cycle1(const Posterior& posterior, double auc_cycle,
                               IntervalBounds bounds, SummaryDetail detail) {
  const double lower = log_beta_threshold(bounds.lower, auc_cycle);
  const double upper = log_beta_threshold(bounds.upper, auc_cycle);
  const double log_auc = std::log(auc_cycle);
  auto to_prob = [log_auc](double log_beta) { return inverse_cloglog(log_beta + log_auc); };

  DltProbability out;
  if (detail == SummaryDetail::Full) {
    out.mean = posterior.expect(to_prob);
    for (std::size_t i = 0; i < kSummaryQuantiles.size(); ++i) {
      out.quantiles[i] = to_prob(posterior.quantile(kSummaryQuantiles[i]));
    }
  } else {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    out.quantiles.fill(out.mean);
  }
  const double below = posterior.cdf_below(lower);
  const double at_most_upper = std::max(posterior.cdf(upper), below);
  out.p_underdosing = below;
  out.p_targeted_toxicity = at_most_upper - below;
  out.p_overdosing = 1.0 - at_most_upper;
  return out;
}

DltProbability prob_dlt_cycle1(const Posterior& posterior, const ExposureProfile& combination,
                               IntervalBounds bounds) {
  return prob_dlt_cycle1(posterior, combination.auc_cycle(), bounds);
}

}  // namespace titepk
