#include "kgmark/http_api.hpp"

#include "httplib.h"
#include "kgmark/error.hpp"

namespace kgmark::api {

int http_status(ErrorCode code)
{
    switch (code) {
    case ErrorCode::validation: return 422;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::unauthorized: return 401;
    case ErrorCode::unavailable: return 503;
    case ErrorCode::ambiguity: return 422;
    case ErrorCode::parse: return 422;
    }
    return 500;
}

namespace {

constexpr const char* session_cookie = "kgmark_session";

using Reply = std::pair<int, json>;

void send(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message)
{
    send(res, status, json{{"error", {{"code", code}, {"message", message}}}});
}

json body_of(const httplib::Request& req)
{
    if (req.body.empty()) return json::object();
    return json::parse(req.body);  // json::parse_error -> 400
}

std::string token_of(const httplib::Request& req)
{
    auto auth = req.get_header_value("Authorization");
    if (auth.rfind("Bearer ", 0) == 0) return auth.substr(7);
    auto cookies = req.get_header_value("Cookie");
    const std::string key = std::string(session_cookie) + "=";
    for (std::size_t pos = 0; pos < cookies.size();) {
        auto end = cookies.find(';', pos);
        if (end == std::string::npos) end = cookies.size();
        auto part = trim(std::string_view(cookies).substr(pos, end - pos));
        if (part.rfind(key, 0) == 0) return part.substr(key.size());
        pos = end + 1;
    }
    return {};
}

std::string query(const httplib::Request& req, const char* name, std::string fallback = {})
{
    return req.has_param(name) ? req.get_param_value(name) : fallback;
}

bool query_flag(const httplib::Request& req, const char* name)
{
    auto v = query(req, name, "false");
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorCode::validation, std::string("query parameter '") + name + "' must be true or false");
}

template <class F>
void guarded(httplib::Response& res, F&& f)
{
    try {
        auto [status, body] = f();
        send(res, status, body);
    } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::parse_error& e) {
        send_error(res, 400, "malformed_json", e.what());
    } catch (const json::exception& e) {
        send_error(res, 422, "validation", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

} // namespace

struct HttpApi::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) { routes(); }

    using Authed = std::function<Reply(const httplib::Request&, const std::string& user)>;

    httplib::Server::Handler open(std::function<Reply(const httplib::Request&, httplib::Response&)> h)
    {
        return [h](const httplib::Request& req, httplib::Response& res) { guarded(res, [&] { return h(req, res); }); };
    }

    httplib::Server::Handler authed(Authed h)
    {
        return [this, h](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { return h(req, service.authenticate(token_of(req))); });
        };
    }

    void routes()
    {
        const std::string pid = R"(/projects/([A-Za-z0-9_-]+))";
        const std::string tid = R"(/texts/([A-Za-z0-9_-]+\.[A-Za-z0-9_-]+))";
        const std::string ref = R"(/markups/([A-Za-z0-9_-]+\.[A-Za-z0-9_-]+\.[A-Za-z0-9_-]+))";
        auto& s = service;

        server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"status", "ok"}}); });

        server.Post("/auth/register", open([&s](const auto& req, auto&) { return Reply{201, s.register_user(body_of(req))}; }));
        server.Post("/auth/login", open([&s](const auto& req, auto& res) {
                        auto out = s.login(body_of(req));
                        res.set_header("Set-Cookie", std::string(session_cookie) + "=" + out["token"].template get<std::string>() +
                                                         "; Path=/; HttpOnly; SameSite=Strict");
                        return Reply{200, out};
                    }));
        server.Post("/auth/logout", open([&s](const auto& req, auto&) {
                        s.logout(token_of(req));
                        return Reply{200, json{{"logged_out", true}}};
                    }));

        server.Get("/projects", authed([&s](const auto&, const auto& u) { return Reply{200, s.list_projects(u)}; }));
        server.Post("/projects", authed([&s](const auto& req, const auto& u) {
                        return Reply{201, s.create_project(u, body_of(req))};
                    }));
        server.Post("/projects/review", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.review(u, body_of(req))};
                    }));
        server.Get(pid, authed([&s](const auto& req, const auto& u) { return Reply{200, s.get_project(u, req.matches[1])}; }));
        server.Post(pid + "/settings", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.update_settings(u, req.matches[1], body_of(req))};
                    }));
        server.Post(pid + "/members", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.add_member(u, req.matches[1], body_of(req))};
                    }));
        server.Get(pid + "/texts", authed([&s](const auto& req, const auto& u) {
                       std::optional<int> cluster;
                       if (req.has_param("cluster")) {
                           try {
                               cluster = std::stoi(req.get_param_value("cluster"));
                           } catch (...) {
                               fail(ErrorCode::validation, "cluster must be an integer");
                           }
                       }
                       return Reply{200, s.list_texts(u, req.matches[1], cluster)};
                   }));
        server.Post(pid + "/texts", authed([&s](const auto& req, const auto& u) {
                        return Reply{201, s.add_texts(u, req.matches[1], body_of(req))};
                    }));
        server.Get(pid + "/dashboard", authed([&s](const auto& req, const auto& u) {
                       return Reply{200, s.dashboard(u, req.matches[1])};
                   }));
        server.Get(pid + "/graph", authed([&s](const auto& req, const auto& u) {
                       return Reply{200, s.graph(u, req.matches[1], query(req, "quality", "all"))};
                   }));
        server.Get(pid + "/export", authed([&s](const auto& req, const auto& u) {
                       return Reply{200, s.export_project(u, req.matches[1], query(req, "quality", "all"),
                                                          query_flag(req, "saved_only"))};
                   }));
        server.Post(pid + "/import", authed([&s](const auto& req, const auto& u) {
                        return Reply{201, s.import_texts(u, req.matches[1], body_of(req))};
                    }));
        server.Get(pid + "/kb", authed([&s](const auto& req, const auto& u) {
                       return Reply{200, s.knowledge_base(u, req.matches[1])};
                   }));
        server.Post(pid + "/kb", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.load_knowledge_base(u, req.matches[1], body_of(req))};
                    }));

        server.Get(tid, authed([&s](const auto& req, const auto& u) { return Reply{200, s.get_text(u, req.matches[1])}; }));
        server.Post(tid + "/markups", authed([&s](const auto& req, const auto& u) {
                        auto out = s.add_markup(u, req.matches[1], body_of(req));
                        return Reply{out["created"].template get<bool>() ? 201 : 200, out};
                    }));
        server.Post(tid + "/autolabel", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.autolabel(u, req.matches[1], body_of(req))};
                    }));
        server.Post(tid + "/saved", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.set_saved(u, req.matches[1], body_of(req))};
                    }));
        server.Post(ref + "/transition", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.transition(u, req.matches[1], body_of(req))};
                    }));
        server.Post(ref + "/propagate", authed([&s](const auto& req, const auto& u) {
                        return Reply{200, s.propagate(u, req.matches[1], body_of(req))};
                    }));

        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) send_error(res, res.status, "http", httplib::status_message(res.status));
        });
    }
};

HttpApi::HttpApi(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port)
{
    if (port == 0) return impl_->server.bind_to_any_port(host);
    if (!impl_->server.bind_to_port(host, port)) return -1;
    return port;
}

void HttpApi::serve() { impl_->server.listen_after_bind(); }

void HttpApi::stop() { impl_->server.stop(); }

} // namespace kgmark::api
