#include "titepk/service.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <stdexcept>

namespace titepk {

namespace {

constexpr std::size_t kMaxExposureSamples = 100000;

Response error(int status, std::string message) {
  return {status, {{"error", std::move(message)}}};
}

Response unprocessable(const ValidationError& e) {
  Response r{422, to_json(e)};
  r.body["error"] = "validation failed";
  return r;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string new_session_id() {
  static std::mutex mutex;
  static std::mt19937_64 engine{std::random_device{}()};
  std::lock_guard lock(mutex);
  return fmt::format("{:016x}", engine());
}

double parse_query_number(const std::map<std::string, std::string>& query, const std::string& key,
                          std::optional<double> fallback) {
  const auto it = query.find(key);
  if (it == query.end()) {
    if (fallback) return *fallback;
    throw ValidationError(key, "is required");
  }
  double v = 0.0;
  const auto& s = it->second;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
    throw ValidationError(key, fmt::format("'{}' is not a number", s));
  }
  return v;
}

}  // namespace

struct SessionService::Session {
  Session(std::string id_, DesignConfig cfg)
      : id(std::move(id_)),
        config(std::move(cfg)),
        model(config.pk),
        grid(config.doses, config.schedules, model),
        posterior(fit_posterior(LikelihoodSummary{}, config.prior)) {}

  std::string id;
  DesignConfig config;
  ExposureModel model;
  CombinationGrid grid;

  std::mutex mutex;  // guards everything below
  std::vector<RecordEntry> records;
  Posterior posterior;
  std::uint64_t revision = 0;
  std::optional<std::filesystem::path> log_path;

  Posterior fit(const std::vector<RecordEntry>& entries) const {
    LikelihoodSummary summary;
    for (const auto& e : entries) summary.add(e.record, model);
    return fit_posterior(summary, config.prior);
  }

  // Tie-breaks draw from a stream fixed by (session, revision) so repeated
  // reads of the same state agree.
  DecisionTable table(const std::vector<RecordEntry>& entries, const Posterior& post,
                      std::uint64_t rev) const {
    std::vector<int> counts(grid.size(), 0);
    for (const auto& e : entries) {
      if (e.combination) ++counts[*e.combination];
    }
    Rng rng = make_stream(fnv1a(id), rev);
    return evaluate_grid(post, grid, config.escalation, counts, rng);
  }

  json decision_json(const std::vector<RecordEntry>& entries, const Posterior& post,
                     std::uint64_t rev) const {
    json recs = json::array();
    for (const auto& e : entries) recs.push_back(to_json(e, grid));
    return {
        {"session_id", id},
        {"revision", rev},
        {"time_unit", "hours"},
        {"n_records", entries.size()},
        {"records", recs},
        {"decision", to_json(table(entries, post, rev), grid, config.escalation)},
    };
  }

  void append_log(const json& line) const {
    if (!log_path) return;
    std::ofstream out(*log_path, std::ios::app);
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", log_path->string()));
  }
};

SessionService::SessionService(std::optional<std::filesystem::path> store)
    : store_(std::move(store)) {
  if (!store_) return;
  std::filesystem::create_directories(*store_);
  for (const auto& entry : std::filesystem::directory_iterator(*store_)) {
    if (entry.path().extension() != ".jsonl") continue;
    std::ifstream in(entry.path());
    std::string line;
    std::shared_ptr<Session> session;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json op = json::parse(line);
      const std::string kind = op.at("op");
      if (kind == "create") {
        session = std::make_shared<Session>(op.at("id").get<std::string>(),
                                            parse_design_config(op.at("config")));
      } else if (!session) {
        throw std::runtime_error(fmt::format("{}: log does not start with create", entry.path().string()));
      } else if (kind == "add") {
        session->records.push_back(parse_record_json(op.at("record"), session->grid,
                                                     session->config.pk.t_star));
        ++session->revision;
      } else if (kind == "delete") {
        const auto index = op.at("index").get<std::size_t>();
        session->records.erase(session->records.begin() + static_cast<std::ptrdiff_t>(index));
        ++session->revision;
      }
    }
    if (!session) continue;
    session->posterior = session->fit(session->records);
    session->log_path = entry.path();
    sessions_.emplace(session->id, session);
  }
}

SessionService::~SessionService() = default;

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

Response SessionService::create_session(const json& body) {
  DesignConfig cfg;
  try {
    cfg = parse_design_config(body);
  } catch (const ValidationError& e) {
    return unprocessable(e);
  }
  std::shared_ptr<Session> session;
  {
    std::unique_lock lock(sessions_mutex_);
    std::string id;
    do {
      id = new_session_id();
    } while (sessions_.contains(id));
    session = std::make_shared<Session>(id, cfg);
    if (store_) {
      session->log_path = *store_ / (id + ".jsonl");
      session->append_log({{"op", "create"}, {"id", id}, {"config", to_json(cfg)}});
    }
    sessions_.emplace(id, session);
  }
  std::lock_guard lock(session->mutex);
  Response r{201, session->decision_json(session->records, session->posterior, session->revision)};
  r.body["config"] = to_json(session->config);
  return r;
}

Response SessionService::get_decision(const std::string& id) const {
  const auto session = find(id);
  if (!session) return error(404, fmt::format("unknown session '{}'", id));
  std::lock_guard lock(session->mutex);
  return {200, session->decision_json(session->records, session->posterior, session->revision)};
}

Response SessionService::post_record(const std::string& id, const json& body) {
  const auto session = find(id);
  if (!session) return error(404, fmt::format("unknown session '{}'", id));

  std::optional<std::uint64_t> revision;
  const json* record_body = &body;
  if (body.is_object() && body.contains("record")) record_body = &body.at("record");
  if (body.is_object() && body.contains("revision")) {
    const json& rev = body.at("revision");
    if (!rev.is_number_integer() || (!rev.is_number_unsigned() && rev.get<std::int64_t>() < 0)) {
      return unprocessable(ValidationError("revision", "must be a non-negative integer"));
    }
    revision = body.at("revision").get<std::uint64_t>();
  }
  std::optional<RecordEntry> parsed;
  try {
    parsed = parse_record_json(*record_body, session->grid, session->config.pk.t_star,
                              record_body == &body ? "" : "record");
  } catch (const ValidationError& e) {
    return unprocessable(e);
  }
  const RecordEntry& entry = *parsed;

  std::lock_guard lock(session->mutex);
  if (revision && *revision != session->revision) {
    return error(409, fmt::format("stale revision {}; current revision is {}", *revision,
                                  session->revision));
  }
  auto records = session->records;
  records.push_back(entry);
  Posterior posterior = session->posterior;
  try {
    posterior = session->fit(records);
  } catch (const std::domain_error& e) {
    return unprocessable(ValidationError("record", e.what()));
  }
  session->append_log({{"op", "add"}, {"record", to_json(entry, session->grid)}});
  session->records = std::move(records);
  session->posterior = std::move(posterior);
  ++session->revision;
  return {200, session->decision_json(session->records, session->posterior, session->revision)};
}

Response SessionService::delete_record(const std::string& id, std::size_t index,
                                       std::optional<std::uint64_t> revision) {
  const auto session = find(id);
  if (!session) return error(404, fmt::format("unknown session '{}'", id));
  std::lock_guard lock(session->mutex);
  if (revision && *revision != session->revision) {
    return error(409, fmt::format("stale revision {}; current revision is {}", *revision,
                                  session->revision));
  }
  if (index >= session->records.size()) {
    return error(404, fmt::format("no record at index {}", index));
  }
  auto records = session->records;
  records.erase(records.begin() + static_cast<std::ptrdiff_t>(index));
  Posterior posterior = session->fit(records);
  session->append_log({{"op", "delete"}, {"index", index}});
  session->records = std::move(records);
  session->posterior = std::move(posterior);
  ++session->revision;
  return {200, session->decision_json(session->records, session->posterior, session->revision)};
}

Response SessionService::what_if(const std::string& id, const json& body) const {
  const auto session = find(id);
  if (!session) return error(404, fmt::format("unknown session '{}'", id));
  const json* list = &body;
  if (body.is_object()) {
    if (!body.contains("records")) {
      return unprocessable(ValidationError("records", "is required"));
    }
    list = &body.at("records");
  }
  if (!list->is_array()) return unprocessable(ValidationError("records", "must be an array"));

  std::vector<RecordEntry> hypothetical;
  try {
    for (std::size_t i = 0; i < list->size(); ++i) {
      hypothetical.push_back(parse_record_json((*list)[i], session->grid,
                                               session->config.pk.t_star,
                                               fmt::format("records[{}]", i)));
    }
  } catch (const ValidationError& e) {
    return unprocessable(e);
  }

  std::vector<RecordEntry> records;
  std::uint64_t rev = 0;
  {
    std::lock_guard lock(session->mutex);
    records = session->records;
    rev = session->revision;
  }
  records.insert(records.end(), hypothetical.begin(), hypothetical.end());
  try {
    const Posterior posterior = session->fit(records);
    Response r{200, session->decision_json(records, posterior, rev)};
    r.body["hypothetical"] = hypothetical.size();
    return r;
  } catch (const std::domain_error& e) {
    return unprocessable(ValidationError("records", e.what()));
  }
}

Response SessionService::exposure(const std::string& id,
                                  const std::map<std::string, std::string>& query) const {
  const auto session = find(id);
  if (!session) return error(404, fmt::format("unknown session '{}'", id));
  const PkParams& pk = session->config.pk;
  try {
    const double dose = parse_query_number(query, "dose", std::nullopt);
    double freq = 0.0;
    if (query.contains("interval_h")) {
      freq = 1.0 / parse_query_number(query, "interval_h", std::nullopt);
    } else {
      freq = parse_query_number(query, "freq", std::nullopt);
    }
    const double horizon = parse_query_number(query, "horizon_h", pk.t_star);
    const double step = parse_query_number(query, "step_h", 1.0);
    if (!(dose > 0.0)) throw ValidationError("dose", "must be positive");
    if (!(freq > 0.0)) throw ValidationError("freq", "must be positive");
    if (!(horizon >= 0.0)) throw ValidationError("horizon_h", "must be non-negative");
    if (!(step > 0.0)) throw ValidationError("step_h", "must be positive");
    if (horizon / step > static_cast<double>(kMaxExposureSamples)) {
      throw ValidationError("step_h", "too many samples requested");
    }

    const ExposureProfile profile =
        session->model.profile(Regimen::regular(dose, freq, std::max(horizon, pk.t_star)));
    json samples = json::array();
    const auto n = static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) * step;
      samples.push_back({{"t_h", t}, {"exposure", profile.exposure(t)}, {"auc_e", profile.auc(t)}});
    }
    if (static_cast<double>(n) * step < horizon) {
      samples.push_back({{"t_h", horizon},
                         {"exposure", profile.exposure(horizon)},
                         {"auc_e", profile.auc(horizon)}});
    }
    return {200,
            {{"dose", dose},
             {"freq_per_h", freq},
             {"time_unit", "hours"},
             {"auc_e_tstar", profile.auc_cycle()},
             {"samples", samples}}};
  } catch (const ValidationError& e) {
    return unprocessable(e);
  } catch (const std::invalid_argument& e) {
    return unprocessable(ValidationError("dose", e.what()));
  }
}

}  // namespace titepk
