#include "titepk/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace titepk {

namespace {

std::string join_messages(const std::vector<FieldError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += e.field.empty() ? e.message : e.field + ": " + e.message;
  }
  return out;
}

std::string path(const std::string& prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : prefix + "." + std::string(key);
}

// Typed access to optional members of a JSON object, collecting errors.
class Reader {
 public:
  Reader(const json& obj, std::string prefix, std::vector<FieldError>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (!obj_.is_object()) fail("", "must be a JSON object");
  }

  bool has(std::string_view key) const {
    return obj_.is_object() && obj_.contains(key) && !obj_.at(std::string(key)).is_null();
  }
  const json& at(std::string_view key) const { return obj_.at(std::string(key)); }
  std::string field(std::string_view key) const { return path(prefix_, key); }

  void fail(std::string_view key, std::string message) {
    errors_.push_back({key.empty() ? prefix_ : field(key), std::move(message)});
  }

  bool number(std::string_view key, double& out) {
    if (!has(key)) return false;
    const json& v = at(key);
    if (!v.is_number()) {
      fail(key, "must be a number");
      return false;
    }
    out = v.get<double>();
    if (!std::isfinite(out)) {
      fail(key, "must be finite");
      return false;
    }
    return true;
  }

  bool positive(std::string_view key, double& out) {
    double v = 0.0;
    if (!number(key, v)) return false;
    if (!(v > 0.0)) {
      fail(key, "must be positive");
      return false;
    }
    out = v;
    return true;
  }

  bool probability(std::string_view key, double& out) {
    double v = 0.0;
    if (!number(key, v)) return false;
    if (!(v > 0.0 && v < 1.0)) {
      fail(key, "must lie strictly between 0 and 1");
      return false;
    }
    out = v;
    return true;
  }

  bool count(std::string_view key, int& out) {
    if (!has(key)) return false;
    const json& v = at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 1000000) {
      fail(key, "must be a positive integer");
      return false;
    }
    out = v.get<int>();
    return true;
  }

  bool boolean(std::string_view key, bool& out) {
    if (!has(key)) return false;
    if (!at(key).is_boolean()) {
      fail(key, "must be true or false");
      return false;
    }
    out = at(key).get<bool>();
    return true;
  }

  bool string(std::string_view key, std::string& out) {
    if (!has(key)) return false;
    if (!at(key).is_string()) {
      fail(key, "must be a string");
      return false;
    }
    out = at(key).get<std::string>();
    return true;
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<FieldError>& errors_;
};

void throw_if_any(std::vector<FieldError>& errors) {
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

std::vector<Schedule> parse_schedules(const json& arr, const std::string& field,
                                      std::vector<FieldError>& errors) {
  std::vector<Schedule> out;
  if (!arr.is_array() || arr.empty()) {
    errors.push_back({field, "must be a non-empty array"});
    return out;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Reader r(arr[i], fmt::format("{}[{}]", field, i), errors);
    Schedule s;
    if (!r.string("label", s.label) || s.label.empty()) r.fail("label", "is required");
    double interval = 0.0;
    if (r.positive("interval_h", interval)) {
      s.freq = 1.0 / interval;
    } else if (!r.positive("freq_per_h", s.freq) && !r.has("interval_h")) {
      r.fail("interval_h", "is required");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> parse_positive_array(const json& arr, const std::string& field,
                                         std::vector<FieldError>& errors) {
  std::vector<double> out;
  if (!arr.is_array() || arr.empty()) {
    errors.push_back({field, "must be a non-empty array"});
    return out;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number() || !(arr[i].get<double>() > 0.0)) {
      errors.push_back({fmt::format("{}[{}]", field, i), "must be a positive number"});
      continue;
    }
    out.push_back(arr[i].get<double>());
  }
  return out;
}

std::optional<Scenario> parse_scenario_field(const json& v, std::vector<FieldError>& errors) {
  try {
    if (v.is_string()) return load_scenario(v.get<std::string>());
    if (v.is_object() && v.contains("file")) {
      if (!v["file"].is_string()) {
        errors.push_back({"scenario.file", "must be a path"});
        return std::nullopt;
      }
      return load_scenario_file(v["file"].get<std::string>());
    }
    if (v.is_object()) {
      Scenario s;
      s.label = v.value("label", std::string("custom"));
      const std::size_t before = errors.size();
      s.doses = parse_positive_array(v.value("doses", json()), "scenario.doses", errors);
      s.schedules = parse_schedules(v.value("schedules", json()), "scenario.schedules", errors);
      const json& p = v.value("true_p", json());
      if (!p.is_array()) {
        errors.push_back({"scenario.true_p", "must be a matrix [schedule][dose]"});
      } else {
        for (const auto& row : p) {
          if (!row.is_array()) {
            errors.push_back({"scenario.true_p", "must be a matrix [schedule][dose]"});
            break;
          }
          std::vector<double> values;
          for (const auto& x : row) values.push_back(x.is_number() ? x.get<double>() : -1.0);
          s.true_p.push_back(std::move(values));
        }
      }
      if (errors.size() != before) return std::nullopt;
      s.validate();
      return s;
    }
    errors.push_back({"scenario", "must be a scenario id, {\"file\": ...} or an inline matrix"});
  } catch (const std::out_of_range& e) {
    errors.push_back({"scenario", e.what()});
  } catch (const std::exception& e) {
    errors.push_back({"scenario", e.what()});
  }
  return std::nullopt;
}

std::string format_number(double v) { return fmt::format("{:g}", v); }

}  // namespace

ValidationError::ValidationError(std::vector<FieldError> errors)
    : std::runtime_error(join_messages(errors)), errors_(std::move(errors)) {}

ValidationError::ValidationError(std::string field, std::string message)
    : ValidationError(std::vector<FieldError>{{std::move(field), std::move(message)}}) {}

json to_json(const ValidationError& e) {
  json errors = json::array();
  for (const auto& f : e.errors()) errors.push_back({{"field", f.field}, {"message", f.message}});
  return {{"errors", errors}};
}

DesignConfig parse_design_config(const json& body) {
  DesignConfig cfg;
  std::vector<FieldError> errors;
  if (body.is_null()) return cfg;
  Reader top(body, "", errors);
  throw_if_any(errors);

  if (top.has("pk")) {
    Reader r(top.at("pk"), "pk", errors);
    double half_life = 0.0;
    if (!r.positive("k_e", cfg.pk.k_e) && r.positive("half_life_h", half_life)) {
      cfg.pk.k_e = std::log(2.0) / half_life;
    }
    double log_k_eff = 0.0;
    if (!r.positive("k_eff", cfg.pk.k_eff) && r.number("log_k_eff", log_k_eff)) {
      cfg.pk.k_eff = std::exp(log_k_eff);
    }
    r.positive("t_star_h", cfg.pk.t_star);
    r.positive("ref_dose", cfg.pk.ref_dose);
    double interval = 0.0;
    if (r.positive("ref_interval_h", interval)) {
      cfg.pk.ref_freq = 1.0 / interval;
    } else {
      r.positive("ref_freq_per_h", cfg.pk.ref_freq);
    }
  }
  if (top.has("prior")) {
    Reader r(top.at("prior"), "prior", errors);
    double p_ref = 0.0;
    if (r.probability("p_ref", p_ref)) cfg.prior.mu = cloglog(p_ref);
    r.number("mu", cfg.prior.mu);
    r.positive("sigma", cfg.prior.sigma);
  }
  if (top.has("escalation")) {
    Reader r(top.at("escalation"), "escalation", errors);
    auto& e = cfg.escalation;
    r.probability("feasibility_bound", e.feasibility_bound);
    r.probability("interval_lower", e.bounds.lower);
    r.probability("interval_upper", e.bounds.upper);
    if (!(e.bounds.lower < e.bounds.upper)) r.fail("interval_upper", "must exceed interval_lower");
    r.probability("target_confidence", e.target_confidence);
    r.count("min_patients_at_mtc", e.min_patients_at_mtc);
    r.count("min_patients_total_fallback", e.min_patients_total_fallback);
    r.count("max_patients", e.max_patients);
    r.count("cohort_size", e.cohort_size);
    r.boolean("no_skip", e.no_skip);
    std::string strategy;
    if (r.string("selection_strategy", strategy)) {
      try {
        e.selection_strategy = parse_selection_strategy(strategy);
      } catch (const std::invalid_argument& ex) {
        r.fail("selection_strategy", ex.what());
      }
    }
  }
  if (top.has("grid")) {
    Reader r(top.at("grid"), "grid", errors);
    if (r.has("doses")) cfg.doses = parse_positive_array(r.at("doses"), "grid.doses", errors);
    if (r.has("schedules")) {
      cfg.schedules = parse_schedules(r.at("schedules"), "grid.schedules", errors);
    }
  }
  throw_if_any(errors);

  try {
    ExposureModel model(cfg.pk);
    CombinationGrid grid(cfg.doses, cfg.schedules, model);
  } catch (const std::invalid_argument& e) {
    throw ValidationError("pk", e.what());
  }
  return cfg;
}

json to_json(const DesignConfig& cfg) {
  json schedules = json::array();
  for (const auto& s : cfg.schedules) {
    schedules.push_back({{"label", s.label}, {"freq_per_h", s.freq}, {"interval_h", 1.0 / s.freq}});
  }
  const auto& e = cfg.escalation;
  return {
      {"pk",
       {{"k_e", cfg.pk.k_e},
        {"k_eff", cfg.pk.k_eff},
        {"t_star_h", cfg.pk.t_star},
        {"ref_dose", cfg.pk.ref_dose},
        {"ref_freq_per_h", cfg.pk.ref_freq}}},
      {"prior", {{"mu", cfg.prior.mu}, {"sigma", cfg.prior.sigma}}},
      {"escalation",
       {{"feasibility_bound", e.feasibility_bound},
        {"interval_lower", e.bounds.lower},
        {"interval_upper", e.bounds.upper},
        {"target_confidence", e.target_confidence},
        {"min_patients_at_mtc", e.min_patients_at_mtc},
        {"min_patients_total_fallback", e.min_patients_total_fallback},
        {"max_patients", e.max_patients},
        {"cohort_size", e.cohort_size},
        {"no_skip", e.no_skip},
        {"selection_strategy", to_string(e.selection_strategy)}}},
      {"grid", {{"doses", cfg.doses}, {"schedules", schedules}}},
  };
}

RecordEntry parse_record_json(const json& body, const CombinationGrid& grid, double t_star,
                              const std::string& field_prefix) {
  std::vector<FieldError> errors;
  Reader r(body, field_prefix, errors);
  throw_if_any(errors);

  std::optional<std::size_t> combination;
  double dose = 0.0;
  double freq = 0.0;
  std::string label;
  if (r.string("combination", label)) {
    combination = grid.find(label);
    if (combination) {
      dose = grid[*combination].dose;
      freq = grid[*combination].freq;
    } else {
      r.fail("combination", fmt::format("unknown combination '{}'", label));
    }
  } else if (r.positive("dose", dose)) {
    std::string schedule;
    double interval = 0.0;
    if (r.string("schedule", schedule)) {
      if (auto s = grid.find_schedule(schedule)) {
        freq = grid.schedules()[*s].freq;
      } else {
        r.fail("schedule", fmt::format("unknown schedule '{}'", schedule));
      }
    } else if (r.positive("interval_h", interval)) {
      freq = 1.0 / interval;
    } else if (!r.positive("freq_per_h", freq) && !r.has("dose_times_h")) {
      r.fail("schedule", "a schedule label, interval_h or freq_per_h is required");
    }
    if (freq > 0.0) combination = grid.find(dose, freq);
  } else if (!r.has("dose")) {
    r.fail("combination", "a combination label or a dose is required");
  }

  bool dlt = false;
  if (!r.boolean("dlt", dlt) && !r.has("dlt")) r.fail("dlt", "is required");
  double time = 0.0;
  if (r.number("time_h", time)) {
    if (!(time > 0.0 && time <= t_star)) {
      r.fail("time_h", fmt::format("must lie in (0, {}] hours", format_number(t_star)));
    }
  } else if (!r.has("time_h")) {
    r.fail("time_h", "is required");
  }

  std::optional<std::vector<double>> dose_times;
  if (r.has("dose_times_h")) {
    const json& arr = r.at("dose_times_h");
    if (!arr.is_array() || !std::all_of(arr.begin(), arr.end(), [](const json& x) { return x.is_number(); })) {
      r.fail("dose_times_h", "must be an array of times in hours");
    } else {
      dose_times = arr.get<std::vector<double>>();
    }
  }
  throw_if_any(errors);

  try {
    Regimen regimen = dose_times ? Regimen(dose, *dose_times) : Regimen::regular(dose, freq, t_star);
    if (dose_times) combination.reset();
    return RecordEntry{PatientRecord{std::move(regimen), dlt, time}, combination};
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path(field_prefix, dose_times ? "dose_times_h" : "dose"), e.what());
  }
}

json to_json(const RecordEntry& entry, const CombinationGrid& grid) {
  json out;
  const auto& reg = entry.record.regimen;
  out["dose"] = reg.dose();
  if (entry.combination) {
    const auto& c = grid[*entry.combination];
    out["combination"] = c.label;
    out["schedule"] = grid.schedules()[c.schedule_index].label;
    out["freq_per_h"] = c.freq;
  } else {
    out["dose_times_h"] = std::vector<double>(reg.dose_times().begin(), reg.dose_times().end());
  }
  out["dlt"] = entry.record.dlt;
  out["time_h"] = entry.record.time;
  return out;
}

std::vector<RecordEntry> parse_record_file(std::string_view text, const CombinationGrid& grid,
                                           double t_star) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  std::vector<RecordEntry> out;
  int line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };
  auto parse_number = [&](const std::string& cell, const std::string& field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) {
      throw ValidationError(fmt::format("line {}: {}", line_no, field),
                            fmt::format("'{}' is not a number", cell));
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (header.empty()) {
      header = cells;
      const bool by_label = header == std::vector<std::string>{"combination", "dlt", "time_h"};
      const bool by_dose =
          header == std::vector<std::string>{"dose", "interval_h", "dlt", "time_h"};
      if (!by_label && !by_dose) {
        throw ValidationError(fmt::format("line {}", line_no),
                              "header must be 'combination,dlt,time_h' or "
                              "'dose,interval_h,dlt,time_h'");
      }
      continue;
    }
    if (cells.size() != header.size()) {
      throw ValidationError(fmt::format("line {}", line_no),
                            fmt::format("expected {} fields", header.size()));
    }
    json body;
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string& name = header[i];
      if (name == "combination") {
        body[name] = cells[i];
      } else if (name == "dlt") {
        if (cells[i] != "0" && cells[i] != "1") {
          throw ValidationError(fmt::format("line {}: dlt", line_no), "must be 0 or 1");
        }
        body[name] = cells[i] == "1";
      } else {
        body[name] = parse_number(cells[i], name);
      }
    }
    out.push_back(parse_record_json(body, grid, t_star, fmt::format("line {}", line_no)));
  }
  if (header.empty()) throw ValidationError("line 1", "missing header row");
  return out;
}

json to_json(const DltProbability& p) {
  auto num = [](double v) { return std::isnan(v) ? json() : json(v); };
  return {
      {"mean_dlt_probability", num(p.mean)},
      {"dlt_probability_q025", num(p.quantiles[0])},
      {"dlt_probability_q50", num(p.quantiles[1])},
      {"dlt_probability_q975", num(p.quantiles[2])},
      {"p_underdosing", p.p_underdosing},
      {"p_targeted_toxicity", p.p_targeted_toxicity},
      {"p_overdosing", p.p_overdosing},
  };
}

json to_json(const DecisionTable& table, const CombinationGrid& grid, const EscalationConfig& cfg) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    const auto& c = grid[row.combination];
    json r = to_json(row.dlt);
    r["combination"] = c.label;
    r["dose"] = c.dose;
    r["schedule"] = grid.schedules()[c.schedule_index].label;
    r["freq_per_h"] = c.freq;
    r["auc_e_tstar"] = row.auc_cycle;
    r["ewoc_eligible"] = row.ewoc_ok;
    r["n_patients"] = row.n_patients;
    rows.push_back(std::move(r));
  }
  return {
      {"feasibility_bound", cfg.feasibility_bound},
      {"interval_lower", cfg.bounds.lower},
      {"interval_upper", cfg.bounds.upper},
      {"selection_strategy", to_string(cfg.selection_strategy)},
      {"recommendation",
       table.recommendation ? json(grid[*table.recommendation].label) : json()},
      {"stop", table.stop()},
      {"rationale", to_string(table.rationale)},
      {"tie_broken", table.tie_broken},
      {"rows", rows},
  };
}

std::string to_string(ToxicityClass c) {
  switch (c) {
    case ToxicityClass::Underdosing: return "UD";
    case ToxicityClass::TargetedToxicity: return "TT";
    case ToxicityClass::Overdosing: return "OD";
  }
  return "?";
}

json to_json(const OperatingCharacteristics& oc, const CombinationGrid& grid) {
  json schedules = json::object();
  for (std::size_t s = 0; s < oc.schedule_selection.size(); ++s) {
    schedules[grid.schedules()[s].label] = oc.schedule_selection[s];
  }
  return {
      {"n_trials", oc.n_trials},
      {"p_select_tt", oc.p_select_tt},
      {"p_select_od", oc.p_select_od},
      {"p_select_ud", oc.p_select_ud},
      {"p_select_none", oc.p_select_none},
      {"mean_patients_od", oc.mean_patients_od},
      {"mean_patients_total", oc.mean_patients_total},
      {"mean_dlts", oc.mean_dlts},
      {"schedule_selection", schedules},
  };
}

json to_json(const TrialSummary& t, const CombinationGrid& grid) {
  return {
      {"trial", t.index},
      {"outcome", to_string(t.outcome)},
      {"mtc", t.mtc ? json(grid[*t.mtc].label) : json()},
      {"mtc_class", t.mtc_class ? json(to_string(*t.mtc_class)) : json()},
      {"patients", t.patients},
      {"patients_od", t.patients_od},
      {"dlts", t.dlts},
  };
}

json to_json(const TrialResult& result, const CombinationGrid& grid, const EscalationConfig& cfg) {
  json patients = json::array();
  for (std::size_t i = 0; i < result.patients.size(); ++i) {
    const auto& p = result.patients[i];
    patients.push_back({{"patient", i + 1},
                        {"combination", grid[p.combination].label},
                        {"dlt", p.dlt},
                        {"time_h", p.time}});
  }
  json decisions = json::array();
  for (const auto& d : result.decisions) decisions.push_back(to_json(d, grid, cfg));
  return {
      {"outcome", to_string(result.outcome.kind)},
      {"mtc", result.outcome.mtc ? json(grid[*result.outcome.mtc].label) : json()},
      {"time_unit", "hours"},
      {"patients", patients},
      {"decisions", decisions},
      {"final_log_beta_mean", result.final_posterior.mean()},
      {"final_log_beta_sd", result.final_posterior.sd()},
  };
}

std::string format_decision_table(const DecisionTable& table, const CombinationGrid& grid,
                                  const EscalationConfig& cfg) {
  std::string out = fmt::format("{:<8} {:>10} {:>8} {:>8} {:>8} {:>9} {:>6} {:>4}\n", "combo",
                                "AUC_E(t*)", "P(UD)", "P(TT)", "P(OD)", "mean P", "EWOC", "n");
  for (const auto& row : table.rows) {
    const auto& c = grid[row.combination];
    const bool rec = table.recommendation && *table.recommendation == row.combination;
    out += fmt::format("{:<8} {:>10.4f} {:>8.4f} {:>8.4f} {:>8.4f} {:>9.4f} {:>6} {:>4}{}\n",
                       c.label, row.auc_cycle, row.dlt.p_underdosing,
                       row.dlt.p_targeted_toxicity, row.dlt.p_overdosing, row.dlt.mean,
                       row.ewoc_ok ? "ok" : "-", row.n_patients, rec ? "  <= next" : "");
  }
  if (table.stop()) {
    out += fmt::format("Stop: every combination has P(OD) >= {:g}\n", cfg.feasibility_bound);
  } else {
    out += fmt::format("Recommendation: {} ({})\n", grid[*table.recommendation].label,
                       to_string(table.rationale));
  }
  return out;
}

StudyConfig parse_study_config(const json& body) {
  StudyConfig cfg;
  std::vector<FieldError> errors;
  Reader r(body, "", errors);
  throw_if_any(errors);

  if (r.has("scenario")) cfg.scenario = parse_scenario_field(r.at("scenario"), errors);

  json design = json::object();
  for (const char* key : {"pk", "prior", "escalation", "grid"}) {
    if (r.has(key)) design[key] = r.at(key);
  }
  // Common escalation settings may also sit at top level.
  for (const char* key : {"feasibility_bound", "selection_strategy", "no_skip", "max_patients",
                          "cohort_size"}) {
    if (r.has(key)) design["escalation"][key] = r.at(key);
  }
  try {
    cfg.design = parse_design_config(design);
  } catch (const ValidationError& e) {
    errors.insert(errors.end(), e.errors().begin(), e.errors().end());
  }

  std::string generator;
  if (r.string("generator", generator)) {
    try {
      cfg.generator = parse_dlt_generator(generator);
    } catch (const std::invalid_argument& e) {
      r.fail("generator", e.what());
    }
  }
  int trials = 0;
  if (r.count("n_trials", trials)) cfg.n_trials = static_cast<std::size_t>(trials);
  if (r.has("seed")) {
    const json& seed = r.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
      r.fail("seed", "must be a non-negative integer");
    } else {
      cfg.seed = r.at("seed").get<std::uint64_t>();
    }
  }
  throw_if_any(errors);
  return cfg;
}

}  // namespace titepk
