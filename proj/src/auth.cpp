#include "kgmark/auth.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <vector>

#include "kgmark/error.hpp"

namespace kgmark::api {

namespace {

std::string hex(const unsigned char* p, std::size_t n)
{
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        out += digits[p[i] >> 4];
        out += digits[p[i] & 0xf];
    }
    return out;
}

std::string derive(std::string_view password, const std::string& salt, int iterations)
{
    unsigned char out[32];
    if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()),
                          reinterpret_cast<const unsigned char*>(salt.data()), static_cast<int>(salt.size()),
                          iterations, EVP_sha256(), sizeof out, out) != 1)
        fail(ErrorCode::unavailable, "password hashing failed");
    return hex(out, sizeof out);
}

} // namespace

std::string random_token(std::size_t bytes)
{
    std::vector<unsigned char> buf(bytes);
    if (RAND_bytes(buf.data(), static_cast<int>(buf.size())) != 1) fail(ErrorCode::unavailable, "random source failed");
    return hex(buf.data(), buf.size());
}

Credential hash_password(std::string_view password, int iterations)
{
    Credential c;
    c.salt = random_token(16);
    c.iterations = iterations;
    c.hash = derive(password, c.salt, iterations);
    return c;
}

bool verify_password(std::string_view password, const Credential& c)
{
    if (c.iterations <= 0 || c.hash.empty()) return false;
    auto h = derive(password, c.salt, c.iterations);
    return h.size() == c.hash.size() && CRYPTO_memcmp(h.data(), c.hash.data(), h.size()) == 0;
}

} // namespace kgmark::api
