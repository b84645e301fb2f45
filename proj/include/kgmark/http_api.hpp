#pragma once

#include <memory>
#include <string>

#include "kgmark/error.hpp"
#include "kgmark/service.hpp"

namespace kgmark::api {

/// REST routes over a Service. Sessions travel as `Authorization: Bearer <token>` or
/// the `kgmark_session` cookie set by POST /auth/login. Errors answer
/// {"error": {"code", "message"}} with 401/404/409/422/503 (400 for malformed JSON).
class HttpApi {
public:
    explicit HttpApi(Service& service);
    ~HttpApi();

    /// Binds `host:port`; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

} // namespace kgmark::api
