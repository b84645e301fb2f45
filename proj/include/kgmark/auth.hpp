#pragma once

#include <string>
#include <string_view>

namespace kgmark::api {

/// PBKDF2-HMAC-SHA256 with a random 16-byte salt; hex encoded.
struct Credential {
    std::string salt;
    std::string hash;
    int iterations = 0;
};

Credential hash_password(std::string_view password, int iterations);
/// Constant-time comparison against the stored hash.
bool verify_password(std::string_view password, const Credential& c);

/// Hex string of `bytes` random bytes from the OpenSSL CSPRNG.
std::string random_token(std::size_t bytes = 32);

} // namespace kgmark::api
