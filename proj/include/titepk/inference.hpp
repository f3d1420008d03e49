#pragma once

// Time-to-first-DLT model: hazard h(t) = beta * E(t), so the cumulative
// hazard is beta * AUC_E(t). The only unknown is log(beta), whose posterior
// is tabulated on a uniform grid.

#include "titepk/pk.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace titepk {

struct PatientRecord {
  Regimen regimen;
  bool dlt = false;
  // Event time when dlt, otherwise the censoring time (hours).
  double time = 0.0;

  // Throws std::invalid_argument unless 0 < time <= t_star.
  void validate(double t_star) const;
};

struct BetaPrior {
  double mu = 0.0;     // mean of log(beta)
  double sigma = 1.0;  // sd of log(beta)

  void validate() const;
};

// Normal prior on log(beta) centred where the reference combination has
// cycle-1 DLT probability p_ref.
BetaPrior default_prior(double p_ref);

inline constexpr double kDefaultPriorSigma = 1.75;

double cloglog(double p);
double inverse_cloglog(double x);

// Everything the likelihood needs from a record set:
//   loglik(x) = events * x + sum_log_exposure - exp(x) * sum_auc
struct LikelihoodSummary {
  double events = 0.0;
  double sum_log_exposure = 0.0;
  double sum_auc = 0.0;

  static LikelihoodSummary from_records(std::span<const PatientRecord> records,
                                        const ExposureModel& model);
  void add(const PatientRecord& record, const ExposureModel& model);
  double log_likelihood(double log_beta) const;
  double d_log_likelihood(double log_beta) const;
};

double log_likelihood(std::span<const PatientRecord> records, double log_beta,
                      const ExposureModel& model);

// Posterior of log(beta), either tabulated on a grid or a single atom.
class Posterior {
 public:
  static Posterior point_mass(double log_beta);

  // density and its derivative at uniformly spaced nodes (need not be normalised)
  static Posterior from_grid(double lower, double upper, std::vector<double> density,
                             std::vector<double> d_density);

  bool is_point_mass() const { return nodes_.size() == 1; }
  std::span<const double> nodes() const { return nodes_; }
  // Normalised density at the nodes.
  std::span<const double> density() const { return density_; }

  // P(log beta <= x)
  double cdf(double x) const;
  // P(log beta < x); differs from cdf only for a point mass
  double cdf_below(double x) const;
  double quantile(double p) const;

  double mean() const;
  double sd() const;

  // E[g(log beta)] by trapezoid rule over the grid.
  template <typename F>
  double expect(F&& g) const {
    if (is_point_mass()) return g(nodes_.front());
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const double w = (i == 0 || i + 1 == nodes_.size()) ? 0.5 : 1.0;
      acc += w * density_[i] * g(nodes_[i]);
    }
    return acc * step_;
  }

 private:
  Posterior() = default;
  double partial_cell(std::size_t cell, double x) const;

  std::vector<double> nodes_;
  std::vector<double> density_;
  std::vector<double> d_density_;
  std::vector<double> cumulative_;
  double step_ = 0.0;
};

inline constexpr std::size_t kDefaultGridSize = 2001;
inline constexpr double kGridHalfWidthSds = 7.0;

// Tabulates prior x likelihood on [mu - 7 sigma, mu + 7 sigma].
// Throws std::domain_error when the data have zero likelihood everywhere.
Posterior fit_posterior(std::span<const PatientRecord> records, const BetaPrior& prior,
                        const ExposureModel& model, std::size_t grid_size = kDefaultGridSize);
Posterior fit_posterior(const LikelihoodSummary& summary, const BetaPrior& prior,
                        std::size_t grid_size = kDefaultGridSize);

struct IntervalBounds {
  double lower = 0.20;
  double upper = 0.40;
};

// Posterior summary of P(T <= t*) for one combination.
struct DltProbability {
  double mean = 0.0;
  // at 2.5%, 50%, 97.5%
  std::array<double, 3> quantiles{};
  double p_underdosing = 0.0;         // P(P < lower)
  double p_targeted_toxicity = 0.0;   // P(lower <= P <= upper)
  double p_overdosing = 0.0;          // P(P > upper)
};

inline constexpr std::array<double, 3> kSummaryQuantiles{0.025, 0.5, 0.975};

enum class SummaryDetail { Full, IntervalsOnly };

// P(T <= t*) = 1 - exp(-beta * auc_cycle) pushed through the posterior.
// IntervalsOnly skips the mean and quantiles (left as NaN).
DltProbability prob_dlt_cycle1(const Posterior& posterior, double auc_cycle,
                               IntervalBounds bounds = {},
                               SummaryDetail detail = SummaryDetail::Full);
DltProbability prob_dlt_cycle1(const Posterior& posterior, const ExposureProfile& combination,
                               IntervalBounds bounds = {});

// Value of log(beta) at which a combination with the given AUC_E(t*) has
// cycle-1 DLT probability p.
double log_beta_threshold(double p, double auc_cycle);

}  // namespace titepk
