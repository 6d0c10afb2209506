#pragma once

// HTTP/JSON facade over Service. Every response body is JSON except the
// DOT export; failures use {"error": {"code", "message"}}.
//
//   GET  /healthz
//   POST /students                        admin
//   POST /curricula                       instructor
//   GET  /curricula/{id}
//   PUT  /curricula/{id}/mode             instructor
//   POST /enrollments                     student
//   GET  /enrollments/{id}/map
//   GET  /enrollments/{id}/map.dot
//   POST /enrollments/{id}/attempts       student (own enrollment)
//   GET  /enrollments/{id}/recommendations
//   POST /enrollments/{id}/revoke         instructor
//
// Admin tokens may call every mutating route. GET routes need no token.

#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"
#include "service.hpp"

namespace learnpath::api {

enum class Role { student, instructor, admin };

inline std::optional<Role> parse_role(std::string_view text) {
    if (text == "student") return Role::student;
    if (text == "instructor") return Role::instructor;
    if (text == "admin") return Role::admin;
    return std::nullopt;
}

struct ApiToken {
    std::string token;
    Role role = Role::student;
    std::string subject_id;
};

/// Static bearer tokens. File format:
///   {"tokens": [{"token": "...", "role": "student", "subject_id": "s52"}, ...]}
class TokenTable {
public:
    TokenTable() = default;

    explicit TokenTable(const json& doc) {
        if (!doc.is_object() || !doc.contains("tokens") || !doc["tokens"].is_array())
            throw Error(ErrorCode::schema_violation, "token file needs a \"tokens\" array");
        for (const auto& t : doc["tokens"]) {
            auto role = t.is_object() && t.contains("role") && t["role"].is_string()
                            ? parse_role(t["role"].get<std::string>())
                            : std::nullopt;
            if (!role || !t.contains("token") || !t["token"].is_string() ||
                t["token"].get<std::string>().empty())
                throw Error(ErrorCode::schema_violation, "bad token entry: " + t.dump());
            add({t["token"], *role, t.value("subject_id", "")});
        }
    }

    static TokenTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::storage_failure, "cannot read token file " + path);
        try {
            return TokenTable(json::parse(in));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::schema_violation, "token file " + path + ": " + e.what());
        }
    }

    void add(ApiToken token) {
        auto key = token.token;
        tokens_[std::move(key)] = std::move(token);
    }

    const ApiToken* find(const std::string& token) const {
        auto it = tokens_.find(token);
        return it == tokens_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, ApiToken> tokens_;
};

inline int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::bad_request:
    case ErrorCode::schema_violation:
    case ErrorCode::invalid_mode:
    case ErrorCode::score_out_of_range:
    case ErrorCode::below_pass_threshold: return 400;
    case ErrorCode::forbidden: return 403;
    case ErrorCode::unknown_student:
    case ErrorCode::unknown_curriculum:
    case ErrorCode::unknown_enrollment:
    case ErrorCode::unknown_milestone:
    case ErrorCode::unknown_assessment:
    case ErrorCode::unknown_node: return 404;
    case ErrorCode::duplicate_student:
    case ErrorCode::duplicate_curriculum:
    case ErrorCode::duplicate_enrollment:
    case ErrorCode::milestone_locked:
    case ErrorCode::not_passed:
    case ErrorCode::not_struggling:
    case ErrorCode::no_prerequisites:
    case ErrorCode::node_is_out: return 409;
    case ErrorCode::invalid_curriculum:
    case ErrorCode::cycle_detected:
    case ErrorCode::missing_status:
    case ErrorCode::illegal_consequent:
    case ErrorCode::overlapping_lists:
    case ErrorCode::non_monotonic_cycle:
    case ErrorCode::not_an_assumption: return 422;
    case ErrorCode::storage_failure:
    case ErrorCode::corrupt_log:
    case ErrorCode::store_locked: return 500;
    }
    return 500;
}

inline json error_body(std::string_view code, const std::string& message) {
    return json{{"error", {{"code", code}, {"message", message}}}};
}

struct ApiConfig {
    std::string cors_origin = "*";
};

namespace detail {

inline void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline json body_of(const httplib::Request& req) {
    try {
        auto body = json::parse(req.body);
        if (!body.is_object()) throw Error(ErrorCode::bad_request, "request body must be a JSON object");
        return body;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::bad_request, std::string("malformed JSON body: ") + e.what());
    }
}

inline std::string string_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string())
        throw Error(ErrorCode::bad_request, std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

inline std::optional<std::string> optional_string(const json& body, const char* key) {
    if (!body.contains(key) || body[key].is_null()) return std::nullopt;
    return string_field(body, key);
}

inline double number_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_number())
        throw Error(ErrorCode::bad_request, std::string("field \"") + key + "\" must be a number");
    return it->get<double>();
}

} // namespace detail

class Server {
public:
    Server(Service& service, TokenTable tokens, ApiConfig config = {})
        : service_(service), tokens_(std::move(tokens)), config_(std::move(config)) {
        routes();
    }

    httplib::Server& http() noexcept { return http_; }

    bool listen(const std::string& host, int port) { return http_.listen(host, port); }

    /// Binds an ephemeral port and returns it; call run() afterwards.
    int bind_any(const std::string& host) { return http_.bind_to_any_port(host); }
    bool run() { return http_.listen_after_bind(); }
    void wait_until_ready() const { http_.wait_until_ready(); }
    void stop() { http_.stop(); }

private:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    // Wraps a handler so domain errors become the error envelope.
    static Handler guarded(Handler fn) {
        return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                detail::send(res, http_status(e.code()), error_body(to_string(e.code()), e.what()));
            }
        };
    }

    const ApiToken& authorize(const httplib::Request& req, std::initializer_list<Role> roles) const {
        const auto header = req.get_header_value("Authorization");
        constexpr std::string_view prefix = "Bearer ";
        if (header.rfind(prefix, 0) != 0)
            throw Error(ErrorCode::forbidden, "missing bearer token");
        const auto* token = tokens_.find(header.substr(prefix.size()));
        if (!token) throw Error(ErrorCode::forbidden, "unknown token");
        if (token->role == Role::admin) return *token;
        for (auto r : roles)
            if (token->role == r) return *token;
        throw Error(ErrorCode::forbidden, "role not allowed on this route");
    }

    void routes() {
        http_.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin}});
        http_.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.status = 204;
            res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
        });
        http_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            const auto code = res.status == 404 ? "not_found" : "http_" + std::to_string(res.status);
            detail::send(res, res.status, error_body(code, httplib::status_message(res.status)));
            return httplib::Server::HandlerResponse::Handled;
        });
        http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string message = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                message = e.what();
            } catch (...) {
            }
            detail::send(res, 500, error_body("internal", message));
        });

        http_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            detail::send(res, 200, {{"status", "ok"}});
        });

        http_.Post("/students", guarded([this](const httplib::Request& req, httplib::Response& res) {
            authorize(req, {});
            const auto body = detail::body_of(req);
            const auto id = detail::string_field(body, "student_id");
            const auto name = detail::optional_string(body, "display_name").value_or(id);
            detail::send(res, 201, service_.create_student(id, name));
        }));

        http_.Post("/curricula", guarded([this](const httplib::Request& req, httplib::Response& res) {
            authorize(req, {Role::instructor});
            const auto reg = service_.register_curriculum(detail::body_of(req));
            if (!reg.ok()) {
                auto body = error_body("invalid_curriculum", reg.report.front().message);
                body["error"]["validation_report"] = reg.report;
                detail::send(res, 422, body);
                return;
            }
            detail::send(res, 201, *reg.curriculum);
        }));

        http_.Get(R"(/curricula/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            detail::send(res, 200, *service_.curriculum(req.matches[1]));
        }));

        http_.Put(R"(/curricula/([^/]+)/mode)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            authorize(req, {Role::instructor});
            const auto mode = parse_mode(detail::string_field(detail::body_of(req), "mode"));
            detail::send(res, 200, *service_.set_mode(req.matches[1], mode));
        }));

        http_.Post("/enrollments", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto& token = authorize(req, {Role::student});
            const auto body = detail::body_of(req);
            std::string student = token.subject_id;
            if (token.role == Role::admin) student = detail::string_field(body, "student_id");
            else if (auto given = detail::optional_string(body, "student_id"); given && *given != student)
                throw Error(ErrorCode::forbidden, "students may only enroll themselves");
            std::optional<Mode> mode;
            if (auto m = detail::optional_string(body, "mode")) mode = parse_mode(*m);
            StrugglePolicy policy;
            if (body.contains("k_failures")) {
                if (!body["k_failures"].is_number_integer())
                    throw Error(ErrorCode::bad_request, "field \"k_failures\" must be an integer");
                policy.k_failures = body["k_failures"].get<int>();
            }
            const auto id =
                service_.enroll(student, detail::string_field(body, "curriculum_id"), mode, policy);
            detail::send(res, 201, service_.map(id));
        }));

        http_.Get(R"(/enrollments/([^/]+)/map)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            detail::send(res, 200, service_.map(req.matches[1]));
        }));

        http_.Get(R"(/enrollments/([^/]+)/map\.dot)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            res.status = 200;
            res.set_content(service_.dot(req.matches[1]), "text/vnd.graphviz");
        }));

        http_.Post(R"(/enrollments/([^/]+)/attempts)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto& token = authorize(req, {Role::student});
            const std::string id = req.matches[1];
            if (token.role == Role::student && service_.owner_of(id) != token.subject_id)
                throw Error(ErrorCode::forbidden, "enrollment belongs to another student");
            const auto body = detail::body_of(req);
            const auto delta = service_.record_attempt(id, detail::string_field(body, "milestone_id"),
                                                       detail::string_field(body, "assessment_id"),
                                                       detail::number_field(body, "score"));
            detail::send(res, 200, delta);
        }));

        http_.Get(R"(/enrollments/([^/]+)/recommendations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            detail::send(res, 200, service_.recommendations(req.matches[1]));
        }));

        http_.Post(R"(/enrollments/([^/]+)/revoke)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            authorize(req, {Role::instructor});
            const auto body = detail::body_of(req);
            const auto delta = service_.revoke(req.matches[1], detail::string_field(body, "milestone_id"),
                                               detail::optional_string(body, "reason").value_or(""));
            detail::send(res, 200, delta);
        }));
    }

    Service& service_;
    TokenTable tokens_;
    ApiConfig config_;
    httplib::Server http_;
};

} // namespace learnpath::api
