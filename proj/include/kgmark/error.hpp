#pragma once

#include <stdexcept>
#include <string>

namespace kgmark {

enum class ErrorCode {
    validation,    // malformed input or a rule violation (HTTP 422)
    not_found,     // unknown id (HTTP 404)
    conflict,      // stale version (HTTP 409), retryable
    unauthorized,  // missing or bad credentials (HTTP 401)
    unavailable,   // generation endpoint down after retries (HTTP 503)
    ambiguity,     // triples cannot be regrouped into native records
    parse,         // scheme text or file parse failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline const char* to_string(ErrorCode c)
{
    switch (c) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::unauthorized: return "unauthorized";
    case ErrorCode::unavailable: return "unavailable";
    case ErrorCode::ambiguity: return "ambiguity";
    case ErrorCode::parse: return "parse";
    }
    return "unknown";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

} // namespace kgmark
