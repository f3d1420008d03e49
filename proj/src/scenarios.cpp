#include "titepk/scenarios.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace titepk {

namespace vidaza {

PkParams pk_params() {
  PkParams p;
  p.k_e = std::log(2.0) / kHalfLifeHours;
  p.k_eff = std::exp(kLogKeff);
  p.t_star = kCycleHours;
  p.ref_dose = kReferenceDose;
  p.ref_freq = 1.0 / kReferenceIntervalHours;
  return p;
}

BetaPrior prior() { return default_prior(kPriorReferenceProbability); }

std::vector<double> doses() { return {8.0, 16.0, 24.0}; }

std::vector<Schedule> schedules() {
  return {{"A", 1.0 / 192.0}, {"B", 1.0 / 96.0}, {"C", 1.0 / 48.0}, {"D", 1.0 / 24.0}};
}

CombinationGrid grid(const ExposureModel& model) {
  return CombinationGrid(doses(), schedules(), model);
}

}  // namespace vidaza

namespace {

using Matrix = std::array<std::array<double, 3>, 4>;

struct CatalogEntry {
  const char* id;
  Matrix p;  // rows A-D, columns 8/16/24
};

// Scenarios 1-7 and the three additional scenarios 8-10.
constexpr std::array<CatalogEntry, 10> kCatalog{{
    {"S1", {{{0.05, 0.07, 0.11}, {0.09, 0.12, 0.18}, {0.16, 0.18, 0.23}, {0.22, 0.26, 0.30}}}},
    {"S2", {{{0.50, 0.54, 0.58}, {0.53, 0.60, 0.65}, {0.55, 0.65, 0.75}, {0.57, 0.73, 0.78}}}},
    {"S3", {{{0.03, 0.14, 0.28}, {0.09, 0.21, 0.40}, {0.18, 0.32, 0.54}, {0.31, 0.45, 0.62}}}},
    {"S4", {{{0.03, 0.15, 0.30}, {0.12, 0.30, 0.50}, {0.30, 0.50, 0.60}, {0.50, 0.60, 0.75}}}},
    {"S5", {{{0.01, 0.10, 0.50}, {0.03, 0.30, 0.55}, {0.05, 0.50, 0.60}, {0.10, 0.60, 0.70}}}},
    {"S6", {{{0.05, 0.07, 0.11}, {0.16, 0.18, 0.23}, {0.09, 0.12, 0.18}, {0.22, 0.26, 0.30}}}},
    {"S7", {{{0.10, 0.26, 0.35}, {0.45, 0.50, 0.62}, {0.30, 0.32, 0.50}, {0.55, 0.62, 0.72}}}},
    {"S8", {{{0.10, 0.26, 0.35}, {0.30, 0.32, 0.50}, {0.45, 0.50, 0.62}, {0.55, 0.62, 0.72}}}},
    {"S9", {{{0.10, 0.28, 0.45}, {0.12, 0.30, 0.48}, {0.14, 0.32, 0.55}, {0.30, 0.48, 0.70}}}},
    {"S10", {{{0.01, 0.10, 0.50}, {0.05, 0.50, 0.60}, {0.03, 0.30, 0.55}, {0.10, 0.60, 0.70}}}},
}};

constexpr double kNA = std::numeric_limits<double>::quiet_NaN();

struct ResultRow {
  const char* method;
  const char* metric;
  int first_scenario;
  std::array<double, 7> values;  // unused trailing slots are NaN
};

// clang-format off
const std::array kResults{
    // Scenarios 1-7: selection, overdosing exposure, sample size and DLTs.
    ResultRow{"pocrm_complete", "p_select_tt", 1, {0.62, kNA, 0.74, 0.65, 0.42, 0.57, 0.52}},
    ResultRow{"pocrm_partial", "p_select_tt", 1, {0.65, kNA, 0.74, 0.63, 0.44, 0.66, 0.57}},
    ResultRow{"titepk_a025", "p_select_tt", 1, {0.42, kNA, 0.56, 0.36, 0.22, 0.36, 0.28}},
    ResultRow{"titepk_a050", "p_select_tt", 1, {0.72, kNA, 0.79, 0.55, 0.42, 0.74, 0.57}},
    ResultRow{"pocrm_complete", "p_select_od", 1, {0.00, 0.49, 0.08, 0.20, 0.36, 0.00, 0.26}},
    ResultRow{"pocrm_partial", "p_select_od", 1, {0.00, 0.50, 0.10, 0.21, 0.36, 0.00, 0.26}},
    ResultRow{"titepk_a025", "p_select_od", 1, {0.00, 0.06, 0.01, 0.03, 0.04, 0.00, 0.05}},
    ResultRow{"titepk_a050", "p_select_od", 1, {0.00, 0.28, 0.08, 0.16, 0.16, 0.00, 0.19}},
    ResultRow{"pocrm_complete", "p_select_none", 1, {0.05, 0.51, 0.03, 0.03, 0.01, 0.06, 0.09}},
    ResultRow{"pocrm_partial", "p_select_none", 1, {0.05, 0.50, 0.03, 0.03, 0.01, 0.02, 0.10}},
    ResultRow{"titepk_a025", "p_select_none", 1, {0.10, 0.94, 0.14, 0.16, 0.08, 0.13, 0.39}},
    ResultRow{"titepk_a050", "p_select_none", 1, {0.03, 0.72, 0.02, 0.03, 0.02, 0.04, 0.10}},
    ResultRow{"pocrm_complete", "mean_patients_od", 1, {0.0, 17.0, 2.5, 6.1, 9.3, 0.0, 8.1}},
    ResultRow{"pocrm_partial", "mean_patients_od", 1, {0.0, 17.6, 3.2, 7.0, 10.1, 0.0, 8.2}},
    ResultRow{"titepk_a025", "mean_patients_od", 1, {0.0, 1.0, 2.7, 3.6, 4.8, 0.0, 4.0}},
    ResultRow{"titepk_a050", "mean_patients_od", 1, {0.0, 4.6, 7.3, 8.5, 9.4, 0.0, 7.6}},
    ResultRow{"pocrm_complete", "mean_patients_total", 1, {25.6, 17.0, 24.5, 24.2, 24.6, 25.2, 22.2}},
    ResultRow{"pocrm_partial", "mean_patients_total", 1, {25.9, 17.6, 25.7, 25.3, 25.8, 25.9, 23.6}},
    ResultRow{"titepk_a025", "mean_patients_total", 1, {21.4, 3.6, 18.7, 18.2, 18.8, 20.9, 13.7}},
    ResultRow{"titepk_a050", "mean_patients_total", 1, {18.7, 8.5, 20.6, 21.1, 21.0, 18.6, 19.7}},
    ResultRow{"pocrm_complete", "mean_dlts", 1, {4.6, 8.9, 6.6, 7.2, 7.1, 4.5, 7.6}},
    ResultRow{"pocrm_partial", "mean_dlts", 1, {4.7, 9.3, 6.9, 7.8, 7.7, 4.7, 8.3}},
    ResultRow{"titepk_a025", "mean_dlts", 1, {4.0, 4.5, 1.9, 4.6, 4.7, 3.8, 4.1}},
    ResultRow{"titepk_a050", "mean_dlts", 1, {4.3, 6.7, 4.8, 7.3, 7.4, 4.1, 7.5}},
    // Schedule of the declared MTC.
    ResultRow{"titepk_a050", "schedule_A", 1, {0.00, 0.25, 0.12, 0.33, 0.46, 0.01, 0.55}},
    ResultRow{"titepk_a050", "schedule_B", 1, {0.08, 0.02, 0.47, 0.56, 0.46, 0.08, 0.15}},
    ResultRow{"titepk_a050", "schedule_C", 1, {0.25, 0.02, 0.34, 0.08, 0.06, 0.16, 0.19}},
    ResultRow{"titepk_a050", "schedule_D", 1, {0.63, 0.00, 0.05, 0.00, 0.01, 0.72, 0.01}},
    ResultRow{"pocrm_partial", "schedule_A", 1, {0.02, 0.45, 0.17, 0.28, 0.16, 0.02, 0.36}},
    ResultRow{"pocrm_partial", "schedule_B", 1, {0.19, 0.04, 0.30, 0.34, 0.45, 0.27, 0.20}},
    ResultRow{"pocrm_partial", "schedule_C", 1, {0.23, 0.01, 0.29, 0.29, 0.27, 0.15, 0.33}},
    ResultRow{"pocrm_partial", "schedule_D", 1, {0.51, 0.00, 0.20, 0.06, 0.10, 0.50, 0.02}},
    // Alternative time-to-DLT generators, a = 0.50.
    ResultRow{"titepk_a050_uniform", "p_select_tt", 1, {0.76, 0.00, 0.79, 0.58, 0.42, 0.76, 0.54}},
    ResultRow{"titepk_a050_exponential", "p_select_tt", 1, {0.75, 0.00, 0.80, 0.56, 0.46, 0.74, 0.54}},
    ResultRow{"titepk_a050_earlylate", "p_select_tt", 1, {0.76, 0.00, 0.80, 0.57, 0.42, 0.76, 0.54}},
    ResultRow{"titepk_a050_uniform", "mean_patients_od", 1, {0.0, 9.9, 5.1, 8.6, 10.4, 0.0, 8.7}},
    ResultRow{"titepk_a050_exponential", "mean_patients_od", 1, {0.0, 9.6, 4.7, 8.0, 10.1, 0.0, 8.4}},
    ResultRow{"titepk_a050_earlylate", "mean_patients_od", 1, {0.0, 9.6, 4.8, 8.2, 10.0, 0.0, 8.9}},
    ResultRow{"titepk_a050_uniform", "mean_patients_total", 1, {18.4, 9.9, 20.4, 21.0, 21.1, 18.2, 19.8}},
    ResultRow{"titepk_a050_exponential", "mean_patients_total", 1, {18.9, 9.6, 20.4, 21.4, 21.5, 18.6, 19.5}},
    ResultRow{"titepk_a050_earlylate", "mean_patients_total", 1, {19.0, 9.6, 20.0, 20.8, 21.0, 18.7, 19.8}},
    // Scenarios 8-10.
    ResultRow{"pocrm_partial", "p_select_tt", 8, {0.62, 0.63, 0.44, kNA, kNA, kNA, kNA}},
    ResultRow{"titepk_a050", "p_select_tt", 8, {0.68, 0.75, 0.21, kNA, kNA, kNA, kNA}},
    ResultRow{"pocrm_partial", "p_select_od", 8, {0.22, 0.17, 0.33, kNA, kNA, kNA, kNA}},
    ResultRow{"titepk_a050", "p_select_od", 8, {0.11, 0.12, 0.30, kNA, kNA, kNA, kNA}},
    ResultRow{"pocrm_partial", "p_select_none", 8, {0.10, 0.10, 0.01, kNA, kNA, kNA, kNA}},
    ResultRow{"titepk_a050", "p_select_none", 8, {0.11, 0.08, 0.01, kNA, kNA, kNA, kNA}},
    ResultRow{"pocrm_partial", "mean_patients_od", 8, {7.9, 5.7, 10.0, kNA, kNA, kNA, kNA}},
    ResultRow{"titepk_a050", "mean_patients_od", 8, {6.1, 6.8, 11.3, kNA, kNA, kNA, kNA}},
    ResultRow{"pocrm_partial", "mean_patients_total", 8, {24.0, 24.8, 25.7, kNA, kNA, kNA, kNA}},
    ResultRow{"titepk_a050", "mean_patients_total", 8, {19.1, 19.3, 21.6, kNA, kNA, kNA, kNA}},
    ResultRow{"pocrm_partial", "mean_dlts", 8, {8.4, 7.4, 7.7, kNA, kNA, kNA, kNA}},
    ResultRow{"titepk_a050", "mean_dlts", 8, {7.0, 7.0, 7.9, kNA, kNA, kNA, kNA}},
};
// clang-format on

Scenario from_catalog(const CatalogEntry& entry) {
  Scenario s;
  s.label = entry.id;
  s.doses = vidaza::doses();
  s.schedules = vidaza::schedules();
  for (const auto& row : entry.p) s.true_p.emplace_back(row.begin(), row.end());
  return s;
}

int scenario_number(std::string_view id) {
  if (id.size() < 2 || id.front() != 'S') return -1;
  int n = 0;
  for (char c : id.substr(1)) {
    if (c < '0' || c > '9') return -1;
    n = n * 10 + (c - '0');
  }
  return n;
}

std::string format_interval(double freq) {
  const double interval = 1.0 / freq;
  return std::abs(interval - std::round(interval)) < 1e-9 ? fmt::format("{:.0f}", interval)
                                                          : fmt::format("{:.17g}", interval);
}

}  // namespace

void Scenario::validate() const {
  if (doses.empty() || schedules.empty()) throw std::invalid_argument("scenario grid is empty");
  if (true_p.size() != schedules.size()) {
    throw std::invalid_argument("scenario needs one probability row per schedule");
  }
  for (const auto& row : true_p) {
    if (row.size() != doses.size()) {
      throw std::invalid_argument("scenario needs one probability per dose");
    }
    for (double p : row) {
      if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("true probabilities must lie in (0, 1)");
    }
  }
}

CombinationGrid Scenario::grid(const ExposureModel& model) const {
  return CombinationGrid(doses, schedules, model);
}

double Scenario::true_p_at(std::size_t index) const {
  return true_p.at(index / doses.size()).at(index % doses.size());
}

Scenario load_scenario(std::string_view id) {
  for (const auto& entry : kCatalog) {
    if (id == entry.id) return from_catalog(entry);
  }
  throw std::out_of_range(fmt::format("unknown scenario '{}'", id));
}

std::vector<std::string> scenario_ids() {
  std::vector<std::string> ids;
  for (const auto& entry : kCatalog) ids.emplace_back(entry.id);
  return ids;
}

Scenario parse_scenario(std::string_view text, std::string label) {
  Scenario s;
  s.label = std::move(label);
  std::istringstream in{std::string(text)};
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    if (!header_seen) {
      std::string second;
      if (first != "schedule" || !(fields >> second) || second != "interval_h") {
        throw std::invalid_argument(
            fmt::format("line {}: expected header 'schedule interval_h <doses>'", line_no));
      }
      double dose = 0.0;
      while (fields >> dose) s.doses.push_back(dose);
      if (!fields.eof()) throw std::invalid_argument(fmt::format("line {}: bad dose", line_no));
      header_seen = true;
      continue;
    }
    double interval = 0.0;
    if (!(fields >> interval) || !(interval > 0.0)) {
      throw std::invalid_argument(fmt::format("line {}: bad dosing interval", line_no));
    }
    std::vector<double> row;
    double p = 0.0;
    while (fields >> p) row.push_back(p);
    if (!fields.eof()) throw std::invalid_argument(fmt::format("line {}: bad probability", line_no));
    if (row.size() != s.doses.size()) {
      throw std::invalid_argument(
          fmt::format("line {}: expected {} probabilities", line_no, s.doses.size()));
    }
    s.schedules.push_back({first, 1.0 / interval});
    s.true_p.push_back(std::move(row));
  }
  if (!header_seen) throw std::invalid_argument("scenario file has no header");
  s.validate();
  return s;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path.stem().string());
}

std::string format_scenario(const Scenario& scenario) {
  std::string out = "schedule interval_h";
  for (double d : scenario.doses) out += fmt::format(" {:g}", d);
  out += '\n';
  for (std::size_t s = 0; s < scenario.schedules.size(); ++s) {
    out += scenario.schedules[s].label + " " + format_interval(scenario.schedules[s].freq);
    for (double p : scenario.true_p[s]) out += fmt::format(" {:.2f}", p);
    out += '\n';
  }
  return out;
}

std::uint64_t scenario_catalog_checksum() {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& entry : kCatalog) {
    const std::string text = std::string(entry.id) + "\n" + format_scenario(from_catalog(entry));
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::optional<double> find_reference_result(std::string_view scenario, std::string_view method,
                                            std::string_view metric) {
  const int n = scenario_number(scenario);
  for (const auto& row : kResults) {
    if (method != row.method || metric != row.metric) continue;
    const int slot = n - row.first_scenario;
    if (slot < 0 || slot >= static_cast<int>(row.values.size())) continue;
    const double v = row.values[static_cast<std::size_t>(slot)];
    if (!std::isnan(v)) return v;
  }
  return std::nullopt;
}

double reference_results(std::string_view scenario, std::string_view method,
                         std::string_view metric) {
  if (auto v = find_reference_result(scenario, method, metric)) return *v;
  throw std::out_of_range(
      fmt::format("no published value for ({}, {}, {})", scenario, method, metric));
}

}  // namespace titepk
