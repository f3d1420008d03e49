#include "titepk/service.hpp"

#include <httplib.h>

#include <charconv>

namespace titepk {

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

// Parses the request body; empty bodies read as null.
std::optional<json> read_body(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return json();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    reply(res, {400, {{"error", std::string("malformed JSON: ") + e.what()}}});
    return std::nullopt;
  }
}

std::optional<std::uint64_t> parse_unsigned(const std::string& s) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

void mount_routes(httplib::Server& server, SessionService& service) {
  server.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
    if (auto body = read_body(req, res)) reply(res, service.create_session(*body));
  });
  server.Get(R"(/sessions/([0-9a-f]+)/decision)",
             [&](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_decision(req.matches[1]));
             });
  server.Post(R"(/sessions/([0-9a-f]+)/records)",
              [&](const httplib::Request& req, httplib::Response& res) {
                if (auto body = read_body(req, res)) {
                  reply(res, service.post_record(req.matches[1], *body));
                }
              });
  server.Delete(R"(/sessions/([0-9a-f]+)/records/(\d+))",
                [&](const httplib::Request& req, httplib::Response& res) {
                  const auto index = parse_unsigned(req.matches[2]);
                  std::optional<std::uint64_t> revision;
                  if (req.has_param("revision")) {
                    revision = parse_unsigned(req.get_param_value("revision"));
                    if (!revision) {
                      reply(res, {422, {{"error", "validation failed"},
                                        {"errors", {{{"field", "revision"},
                                                     {"message", "must be a non-negative integer"}}}}}});
                      return;
                    }
                  }
                  if (!index) {
                    reply(res, {404, {{"error", "no such record"}}});
                    return;
                  }
                  reply(res, service.delete_record(req.matches[1], *index, revision));
                });
  server.Post(R"(/sessions/([0-9a-f]+)/what-if)",
              [&](const httplib::Request& req, httplib::Response& res) {
                if (auto body = read_body(req, res)) {
                  reply(res, service.what_if(req.matches[1], *body));
                }
              });
  server.Get(R"(/sessions/([0-9a-f]+)/exposure)",
             [&](const httplib::Request& req, httplib::Response& res) {
               std::map<std::string, std::string> query;
               for (const auto& [k, v] : req.params) query.emplace(k, v);
               reply(res, service.exposure(req.matches[1], query));
             });
  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          message = e.what();
        } catch (...) {
        }
        reply(res, {500, {{"error", message}}});
      });
}

}  // namespace titepk
