#include "titepk/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <thread>

using namespace titepk;
namespace fs = std::filesystem;

namespace {

const json kCensored8A = {{"combination", "8/A"}, {"dlt", false}, {"time_h", 672}};

std::string create(SessionService& svc, const json& body = json::object()) {
  const Response r = svc.create_session(body);
  REQUIRE(r.status == 201);
  return r.body["session_id"].get<std::string>();
}

const json& row(const json& decision, const std::string& label) {
  for (const auto& r : decision["decision"]["rows"]) {
    if (r["combination"] == label) return r;
  }
  FAIL("missing row " << label);
  static const json none;
  return none;
}

void check_same_rows(const json& a, const json& b, double tol) {
  const auto& ra = a["decision"]["rows"];
  const auto& rb = b["decision"]["rows"];
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    for (const char* key : {"p_underdosing", "p_targeted_toxicity", "p_overdosing"}) {
      CHECK(std::abs(ra[i][key].get<double>() - rb[i][key].get<double>()) <= tol);
    }
  }
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("titepk_store_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("sessions are created with distinct ids") {
  SessionService svc;
  const std::string a = create(svc);
  const std::string b = create(svc);
  CHECK(a != b);
  CHECK(svc.session_count() == 2);
  const Response r = svc.get_decision(a);
  CHECK(r.status == 200);
  CHECK(r.body["revision"] == 0);
  CHECK(r.body["decision"]["recommendation"] == "8/A");
  CHECK(r.body["time_unit"] == "hours");
}

TEST_CASE("invalid configuration is rejected with field messages") {
  SessionService svc;
  const Response r = svc.create_session({{"prior", {{"sigma", -1}}}});
  CHECK(r.status == 422);
  REQUIRE(r.body["errors"].size() == 1);
  CHECK(r.body["errors"][0]["field"].get<std::string>().find("sigma") != std::string::npos);
  CHECK(svc.session_count() == 0);
}

TEST_CASE("reads are idempotent") {
  SessionService svc;
  const std::string id = create(svc);
  svc.post_record(id, kCensored8A);
  const Response a = svc.get_decision(id);
  const Response b = svc.get_decision(id);
  CHECK(a.body == b.body);
  CHECK(a.body["revision"] == 1);
}

TEST_CASE("a censored record lowers every overdosing probability") {
  SessionService svc;
  const std::string id = create(svc);
  const json prior = svc.get_decision(id).body;
  const Response r = svc.post_record(id, kCensored8A);
  REQUIRE(r.status == 200);
  CHECK(r.body["revision"] == 1);
  CHECK(r.body["records"].size() == 1);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(r.body["decision"]["rows"][i]["p_overdosing"].get<double>() <
          prior["decision"]["rows"][i]["p_overdosing"].get<double>());
  }
  CHECK(row(r.body, "8/A")["n_patients"] == 1);
}

TEST_CASE("add then delete restores the prior-only table") {
  SessionService svc;
  const std::string id = create(svc);
  const json prior = svc.get_decision(id).body;
  REQUIRE(svc.post_record(id, {{"record", {{"combination", "24/B"}, {"dlt", true}, {"time_h", 30}}}, {"revision", 0}}).status == 200);
  const Response del = svc.delete_record(id, 0, 1);
  REQUIRE(del.status == 200);
  CHECK(del.body["revision"] == 2);
  check_same_rows(del.body, prior, 1e-9);
}

TEST_CASE("record errors, unknown sessions and stale revisions") {
  SessionService svc;
  const std::string id = create(svc);
  const Response late = svc.post_record(id, {{"combination", "8/A"}, {"dlt", true}, {"time_h", 700}});
  CHECK(late.status == 422);
  CHECK(late.body["errors"][0]["field"] == "time_h");
  CHECK(svc.get_decision(id).body["revision"] == 0);

  CHECK(svc.get_decision("ffff").status == 404);
  CHECK(svc.post_record("ffff", kCensored8A).status == 404);
  CHECK(svc.what_if("ffff", json::array()).status == 404);

  REQUIRE(svc.post_record(id, {{"record", kCensored8A}, {"revision", 0}}).status == 200);
  CHECK(svc.post_record(id, {{"record", kCensored8A}, {"revision", 0}}).status == 409);
  CHECK(svc.delete_record(id, 0, 0).status == 409);
  CHECK(svc.delete_record(id, 5, std::nullopt).status == 404);
  CHECK(svc.get_decision(id).body["revision"] == 1);

  // an event before the first dose has zero likelihood
  const Response impossible = svc.post_record(id, {{"dose", 24}, {"dose_times_h", {100}}, {"dlt", true}, {"time_h", 50}});
  CHECK(impossible.status == 422);
}

TEST_CASE("what-if leaves the session untouched") {
  SessionService svc;
  const std::string id = create(svc);
  svc.post_record(id, kCensored8A);
  const json current = svc.get_decision(id).body;

  const Response same = svc.what_if(id, {{"records", json::array()}});
  REQUIRE(same.status == 200);
  CHECK(same.body["decision"] == current["decision"]);

  const std::string rec = current["decision"]["recommendation"];
  const Response dlt = svc.what_if(id, json::array({{{"combination", rec}, {"dlt", true}, {"time_h", 200}}}));
  REQUIRE(dlt.status == 200);
  CHECK(row(dlt.body, rec)["p_overdosing"].get<double>() > row(current, rec)["p_overdosing"].get<double>());
  CHECK(dlt.body["revision"] == current["revision"]);
  CHECK(svc.get_decision(id).body == current);

  const Response bad = svc.what_if(id, {{"records", {{{"combination", rec}, {"dlt", true}, {"time_h", -1}}}}});
  CHECK(bad.status == 422);
  CHECK(bad.body["errors"][0]["field"] == "records[0].time_h");
}

TEST_CASE("concurrent posts on one revision admit exactly one winner") {
  SessionService svc;
  const std::string id = create(svc);
  for (int round = 0; round < 20; ++round) {
    const auto rev = svc.get_decision(id).body["revision"].get<std::uint64_t>();
    std::atomic<int> ok{0}, conflict{0};
    std::vector<std::jthread> threads;
    for (int t = 0; t < 2; ++t) {
      threads.emplace_back([&] {
        const int status = svc.post_record(id, {{"record", kCensored8A}, {"revision", rev}}).status;
        (status == 200 ? ok : conflict)++;
      });
    }
    threads.clear();
    CHECK(ok == 1);
    CHECK(conflict == 1);
  }
  CHECK(svc.get_decision(id).body["revision"] == 20);
}

TEST_CASE("sessions survive a restart") {
  TempDir dir;
  std::string id;
  json before;
  {
    SessionService svc(dir.path);
    id = create(svc, {{"escalation", {{"feasibility_bound", 0.5}}}});
    svc.post_record(id, kCensored8A);
    svc.post_record(id, {{"dose", 16}, {"schedule", "B"}, {"dlt", true}, {"time_h", 90}});
    svc.post_record(id, {{"dose", 24}, {"dose_times_h", {0, 48, 300}}, {"dlt", false}, {"time_h", 400}});
    svc.delete_record(id, 0, std::nullopt);
    before = svc.get_decision(id).body;
  }
  SessionService reloaded(dir.path);
  CHECK(reloaded.session_count() == 1);
  const Response after = reloaded.get_decision(id);
  REQUIRE(after.status == 200);
  CHECK(after.body == before);
  CHECK(after.body["decision"]["feasibility_bound"] == 0.5);
}

TEST_CASE("exposure curves") {
  SessionService svc;
  const std::string id = create(svc);
  const Response r = svc.exposure(id, {{"dose", "24"}, {"freq", "0.010417"}});
  REQUIRE(r.status == 200);
  const auto& samples = r.body["samples"];
  CHECK(samples.size() == 673);
  CHECK(samples.back()["t_h"] == 672.0);
  CHECK(std::abs(samples.back()["auc_e"].get<double>() - 1.0) < 1e-4);
  CHECK(samples.front()["auc_e"] == 0.0);

  const Response interval = svc.exposure(id, {{"dose", "24"}, {"interval_h", "96"}, {"step_h", "24"}});
  REQUIRE(interval.status == 200);
  CHECK(std::abs(interval.body["samples"].back()["auc_e"].get<double>() - 1.0) < 1e-9);
  CHECK(interval.body["auc_e_tstar"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(svc.exposure(id, {{"freq", "0.01"}}).status == 422);
  CHECK(svc.exposure(id, {{"dose", "abc"}, {"freq", "0.01"}}).status == 422);
  CHECK(svc.exposure(id, {{"dose", "24"}, {"freq", "0.01"}, {"step_h", "0"}}).status == 422);
}

TEST_CASE("HTTP round trip") {
  SessionService svc;
  httplib::Server server;
  mount_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto post = [&](const std::string& path, const json& body) {
    return client.Post(path, body.dump(), "application/json");
  };

  auto created = post("/sessions", json::object());
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["session_id"];
  const std::string base = "/sessions/" + id;

  auto bad_cfg = post("/sessions", {{"prior", {{"sigma", -1}}}});
  REQUIRE(bad_cfg);
  CHECK(bad_cfg->status == 422);

  auto malformed = client.Post("/sessions", "{not json", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);

  auto added = post(base + "/records", {{"record", kCensored8A}, {"revision", 0}});
  REQUIRE(added);
  CHECK(added->status == 200);
  CHECK(json::parse(added->body)["revision"] == 1);

  auto stale = post(base + "/records", {{"record", kCensored8A}, {"revision", 0}});
  REQUIRE(stale);
  CHECK(stale->status == 409);

  auto decision = client.Get(base + "/decision");
  REQUIRE(decision);
  CHECK(decision->status == 200);
  CHECK(decision->get_header_value("Content-Type") == "application/json");

  auto whatif = post(base + "/what-if", {{"records", {{{"combination", "8/A"}, {"dlt", true}, {"time_h", 50}}}}});
  REQUIRE(whatif);
  CHECK(whatif->status == 200);

  auto exposure = client.Get(base + "/exposure?dose=8&freq=0.041666666666666664&step_h=168");
  REQUIRE(exposure);
  CHECK(exposure->status == 200);
  CHECK(json::parse(exposure->body)["samples"].size() == 5);

  auto del_stale = client.Delete(base + "/records/0?revision=0");
  REQUIRE(del_stale);
  CHECK(del_stale->status == 409);
  auto del = client.Delete(base + "/records/0?revision=1");
  REQUIRE(del);
  CHECK(del->status == 200);
  CHECK(json::parse(del->body)["records"].empty());

  auto missing = client.Get("/sessions/abcdef/decision");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  loop.join();
}
