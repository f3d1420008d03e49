// titepk: simulation studies, decisions on observed data, exposure curves and
// the HTTP service.

#include "titepk/io.hpp"
#include "titepk/service.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace titepk;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

std::string read_file(const fs::path& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw ValidationError(field, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& path, const std::string& field) {
  try {
    return json::parse(read_file(path, field));
  } catch (const json::parse_error& e) {
    throw ValidationError(field, fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
}

// --- simulate -------------------------------------------------------------

struct SimulateOptions {
  std::string config_path;
  std::string scenario;
  std::optional<double> bound;
  std::string strategy;
  std::string generator;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format;
  unsigned threads = 0;
};

json scenario_json(const Scenario& s) {
  json schedules = json::array();
  for (const auto& sch : s.schedules) schedules.push_back({{"label", sch.label}, {"interval_h", 1.0 / sch.freq}});
  return {{"label", s.label}, {"doses", s.doses}, {"schedules", schedules}, {"true_p", s.true_p}};
}

StudyConfig build_study_config(const SimulateOptions& opt) {
  json body = opt.config_path.empty() ? json::object() : read_json_file(opt.config_path, "config");
  if (!body.is_object()) throw ValidationError("config", "must be a JSON object");
  if (!opt.scenario.empty()) {
    if (fs::exists(opt.scenario)) {
      body["scenario"] = {{"file", opt.scenario}};
    } else {
      body["scenario"] = opt.scenario;
    }
  }
  if (opt.bound) body["escalation"]["feasibility_bound"] = *opt.bound;
  if (!opt.strategy.empty()) body["escalation"]["selection_strategy"] = opt.strategy;
  if (!opt.generator.empty()) body["generator"] = opt.generator;
  if (opt.trials) body["n_trials"] = *opt.trials;
  if (opt.seed) body["seed"] = *opt.seed;

  StudyConfig cfg = parse_study_config(body);
  if (!cfg.scenario) {
    throw ValidationError("scenario", "is required (an id such as S1, a scenario file or an inline matrix)");
  }
  return cfg;
}

json study_config_json(const StudyConfig& cfg) {
  json out = to_json(cfg.design);
  out.erase("grid");
  out["scenario"] = scenario_json(*cfg.scenario);
  out["generator"] = to_string(cfg.generator);
  out["n_trials"] = cfg.n_trials;
  out["seed"] = cfg.seed;
  return out;
}

std::string oc_csv(const StudyConfig& cfg, const OperatingCharacteristics& oc,
                   const CombinationGrid& grid) {
  std::string header =
      "scenario,feasibility_bound,selection_strategy,generator,n_trials,seed,p_select_tt,"
      "p_select_od,p_select_ud,p_select_none,mean_patients_od,mean_patients_total,mean_dlts";
  std::string row = fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}", cfg.scenario->label,
                                cfg.design.escalation.feasibility_bound,
                                to_string(cfg.design.escalation.selection_strategy),
                                to_string(cfg.generator), oc.n_trials, cfg.seed, oc.p_select_tt,
                                oc.p_select_od, oc.p_select_ud, oc.p_select_none,
                                oc.mean_patients_od, oc.mean_patients_total, oc.mean_dlts);
  for (std::size_t s = 0; s < oc.schedule_selection.size(); ++s) {
    header += ",schedule_" + grid.schedules()[s].label;
    row += fmt::format(",{}", oc.schedule_selection[s]);
  }
  return header + "\n" + row + "\n";
}

std::string trials_csv(const std::vector<TrialSummary>& trials, const CombinationGrid& grid) {
  std::string out = "trial,outcome,mtc,mtc_class,patients,patients_od,dlts\n";
  for (const auto& t : trials) {
    out += fmt::format("{},{},{},{},{},{},{}\n", t.index, to_string(t.outcome),
                       t.mtc ? grid[*t.mtc].label : "", t.mtc_class ? to_string(*t.mtc_class) : "",
                       t.patients, t.patients_od, t.dlts);
  }
  return out;
}

std::string oc_block(const StudyConfig& cfg, const OperatingCharacteristics& oc,
                     const CombinationGrid& grid) {
  std::string out = fmt::format(
      "Scenario {}  a = {:.2f}  strategy = {}  generator = {}  trials = {}  seed = {}\n",
      cfg.scenario->label, cfg.design.escalation.feasibility_bound,
      to_string(cfg.design.escalation.selection_strategy), to_string(cfg.generator), oc.n_trials,
      cfg.seed);
  out += fmt::format("  {:<28}{:>8.3f}\n", "P(select TT combination)", oc.p_select_tt);
  out += fmt::format("  {:<28}{:>8.3f}\n", "P(select OD combination)", oc.p_select_od);
  out += fmt::format("  {:<28}{:>8.3f}\n", "P(select UD combination)", oc.p_select_ud);
  out += fmt::format("  {:<28}{:>8.3f}\n", "P(no MTC selected)", oc.p_select_none);
  out += fmt::format("  {:<28}{:>8.2f}\n", "mean patients at OD", oc.mean_patients_od);
  out += fmt::format("  {:<28}{:>8.2f}\n", "mean patients", oc.mean_patients_total);
  out += fmt::format("  {:<28}{:>8.2f}\n", "mean DLTs", oc.mean_dlts);
  for (std::size_t s = 0; s < oc.schedule_selection.size(); ++s) {
    out += fmt::format("  {:<28}{:>8.3f}\n", "P(select schedule " + grid.schedules()[s].label + ")",
                       oc.schedule_selection[s]);
  }
  return out;
}

int cmd_simulate(const SimulateOptions& opt) {
  const StudyConfig cfg = build_study_config(opt);
  fs::path out_dir = opt.out_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv("TITEPK_OUT_DIR");
    out_dir = env && *env ? fs::path(env) : fs::path(".");
  }
  fs::create_directories(out_dir);

  const TrialSimulator sim(*cfg.scenario, cfg.design.escalation, cfg.generator, cfg.design.prior,
                           cfg.design.pk);
  const StudyResult study = sim.run_study(cfg.n_trials, cfg.seed, opt.threads);
  const CombinationGrid& grid = sim.grid();

  if (opt.format.empty() || opt.format == "json") {
    json trials = json::array();
    for (const auto& t : study.trials) trials.push_back(to_json(t, grid));
    const json doc = {{"config", study_config_json(cfg)},
                      {"operating_characteristics", to_json(study.oc, grid)},
                      {"trials", trials}};
    write_file(out_dir / "oc.json", doc.dump(2) + "\n");
  }
  if (opt.format.empty() || opt.format == "csv") {
    write_file(out_dir / "oc.csv", oc_csv(cfg, study.oc, grid));
    write_file(out_dir / "trials.csv", trials_csv(study.trials, grid));
  }
  std::cout << oc_block(cfg, study.oc, grid);
  return 0;
}

// --- recommend ------------------------------------------------------------

struct RecommendOptions {
  std::string records_path;
  std::string config_path;
  std::string format = "both";
  std::uint64_t seed = 1;
};

int cmd_recommend(const RecommendOptions& opt) {
  const DesignConfig design = opt.config_path.empty()
                                  ? DesignConfig{}
                                  : parse_design_config(read_json_file(opt.config_path, "config"));
  const ExposureModel model(design.pk);
  const CombinationGrid grid(design.doses, design.schedules, model);
  const auto entries =
      parse_record_file(read_file(opt.records_path, "records"), grid, design.pk.t_star);

  LikelihoodSummary summary;
  std::vector<int> counts(grid.size(), 0);
  for (const auto& e : entries) {
    summary.add(e.record, model);
    if (e.combination) ++counts[*e.combination];
  }
  Posterior posterior = Posterior::point_mass(0.0);
  try {
    posterior = fit_posterior(summary, design.prior);
  } catch (const std::domain_error& e) {
    throw ValidationError("records", e.what());
  }
  Rng rng = make_stream(opt.seed, 0);
  const DecisionTable table = evaluate_grid(posterior, grid, design.escalation, counts, rng);

  if (opt.format != "json") {
    std::cout << fmt::format("{} record(s), {} DLT(s)\n", entries.size(),
                             static_cast<int>(summary.events));
    std::cout << format_decision_table(table, grid, design.escalation);
  }
  if (opt.format != "table") {
    json doc = to_json(table, grid, design.escalation);
    doc["n_records"] = entries.size();
    doc["time_unit"] = "hours";
    if (opt.format == "both") std::cout << '\n';
    std::cout << doc.dump(2) << '\n';
  }
  return 0;
}

// --- exposure -------------------------------------------------------------

struct ExposureOptions {
  std::string config_path;
  double dose = 0.0;
  std::string schedule;
  std::optional<double> interval_h;
  std::vector<double> dose_times;
  std::optional<double> horizon_h;
  std::optional<double> weeks;
  double step_h = 1.0;
  std::string out;
};

int cmd_exposure(const ExposureOptions& opt) {
  const DesignConfig design = opt.config_path.empty()
                                  ? DesignConfig{}
                                  : parse_design_config(read_json_file(opt.config_path, "config"));
  if (!(opt.dose > 0.0)) throw ValidationError("dose", "must be positive");
  if (!(opt.step_h > 0.0)) throw ValidationError("step-h", "must be positive");
  double horizon = design.pk.t_star;
  if (opt.horizon_h) horizon = *opt.horizon_h;
  if (opt.weeks) horizon = *opt.weeks * 168.0;
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw ValidationError("horizon", "must be non-negative");
  }
  if (horizon / opt.step_h > 1e7) throw ValidationError("step-h", "too many samples");

  const ExposureModel model(design.pk);
  const double regimen_horizon = std::max(horizon, design.pk.t_star);
  std::optional<Regimen> regimen;
  try {
    if (!opt.dose_times.empty()) {
      regimen.emplace(opt.dose, opt.dose_times);
    } else if (opt.interval_h) {
      if (!(*opt.interval_h > 0.0)) throw ValidationError("interval-h", "must be positive");
      regimen = Regimen::regular(opt.dose, 1.0 / *opt.interval_h, regimen_horizon);
    } else if (!opt.schedule.empty()) {
      const auto it = std::find_if(design.schedules.begin(), design.schedules.end(),
                                   [&](const Schedule& s) { return s.label == opt.schedule; });
      if (it == design.schedules.end()) {
        throw ValidationError("schedule", fmt::format("unknown schedule '{}'", opt.schedule));
      }
      regimen = Regimen::regular(opt.dose, it->freq, regimen_horizon);
    } else {
      throw ValidationError("schedule", "one of --schedule, --interval-h or --dose-times is required");
    }
  } catch (const std::invalid_argument& e) {
    throw ValidationError("regimen", e.what());
  }
  const ExposureProfile profile = model.profile(*regimen);

  std::string csv = "t_h,exposure,auc_e\n";
  auto row = [&](double t) {
    csv += fmt::format("{},{:.12g},{:.12g}\n", t, profile.exposure(t), profile.auc(t));
  };
  const auto n = static_cast<std::size_t>(std::floor(horizon / opt.step_h + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) row(static_cast<double>(i) * opt.step_h);
  if (static_cast<double>(n) * opt.step_h < horizon) row(horizon);

  if (opt.out.empty()) {
    std::cout << csv;
  } else {
    write_file(opt.out, csv);
  }
  return 0;
}

// --- serve ----------------------------------------------------------------

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store;
};

int cmd_serve(const ServeOptions& opt) {
  SessionService service(opt.store.empty() ? std::nullopt
                                           : std::optional<fs::path>(opt.store));
  httplib::Server server;
  mount_routes(server, service);
  std::cerr << fmt::format("listening on {}:{} ({} stored session(s))\n", opt.host, opt.port,
                           service.session_count());
  if (!server.listen(opt.host, opt.port)) {
    std::cerr << fmt::format("error: cannot listen on {}:{}\n", opt.host, opt.port);
    return kExitInternal;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian dose-schedule escalation with time-to-event PK exposure"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation study and write operating characteristics");
  simulate->add_option("config", sim.config_path, "Study configuration (JSON)")->check(CLI::ExistingFile);
  simulate->add_option("--scenario", sim.scenario, "Scenario id (S1..S10) or scenario file");
  simulate->add_option("--bound", sim.bound, "Feasibility bound a");
  simulate->add_option("--strategy", sim.strategy, "highest | lowest | max-target");
  simulate->add_option("--generator", sim.generator, "titepk | uniform | exponential | earlylate");
  simulate->add_option("--trials", sim.trials, "Number of simulated trials");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--out", sim.out_dir, "Output directory (default $TITEPK_OUT_DIR or .)");
  simulate->add_option("--format", sim.format, "Write only json or only csv outputs")
      ->check(CLI::IsMember({"json", "csv"}));
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");

  RecommendOptions rec;
  auto* recommend = app.add_subcommand("recommend", "Decision table for observed patient records");
  recommend->add_option("records", rec.records_path, "Patient record CSV")->required();
  recommend->add_option("--config", rec.config_path, "Design configuration (JSON)");
  recommend->add_option("--format", rec.format, "table | json | both")
      ->check(CLI::IsMember({"table", "json", "both"}));
  recommend->add_option("--seed", rec.seed, "Seed for random tie-breaking");

  ExposureOptions exp;
  auto* exposure = app.add_subcommand("exposure", "Sample E(t) and AUC_E(t) for a regimen");
  exposure->add_option("--config", exp.config_path, "Design configuration (JSON)");
  exposure->add_option("--dose", exp.dose, "Dose per administration")->required();
  auto* schedule_opt = exposure->add_option("--schedule", exp.schedule, "Schedule label (A..D)");
  auto* interval_opt = exposure->add_option("--interval-h", exp.interval_h, "Dosing interval in hours");
  auto* times_opt = exposure->add_option("--dose-times", exp.dose_times, "Comma-separated dose times in hours")
                        ->delimiter(',');
  schedule_opt->excludes(interval_opt)->excludes(times_opt);
  interval_opt->excludes(times_opt);
  auto* horizon_opt = exposure->add_option("--horizon-h", exp.horizon_h, "Horizon in hours (default t*)");
  exposure->add_option("--weeks", exp.weeks, "Horizon in weeks")->excludes(horizon_opt);
  exposure->add_option("--step-h", exp.step_h, "Sampling step in hours");
  exposure->add_option("--out", exp.out, "Write CSV here instead of standard output");

  ServeOptions srv;
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--host", srv.host, "Bind address");
  serve->add_option("--port", srv.port, "Port");
  serve->add_option("--store", srv.store, "Directory for persisted sessions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*recommend) return cmd_recommend(rec);
    if (*exposure) return cmd_exposure(exp);
    if (*serve) return cmd_serve(srv);
  } catch (const ValidationError& e) {
    for (const auto& f : e.errors()) {
      std::cerr << fmt::format("error: {}: {}\n", f.field, f.message);
    }
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
