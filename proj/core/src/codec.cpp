#include "krrlab/codec.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>

#include <sodium.h>

namespace krrlab::codec {

namespace {

void ensure_sodium() {
  static const int status = sodium_init();
  if (status < 0) throw std::runtime_error("libsodium initialization failed");
}

static_assert(std::endian::native == std::endian::little, "model export assumes a little-endian host");

}  // namespace

std::string encode_doubles(std::span<const double> values) {
  ensure_sodium();
  const auto bytes = values.size() * sizeof(double);
  const auto cap = sodium_base64_ENCODED_LEN(bytes, sodium_base64_VARIANT_ORIGINAL);
  std::string out(cap, '\0');
  sodium_bin2base64(out.data(), cap, reinterpret_cast<const unsigned char*>(values.data()), bytes,
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<double> decode_doubles(std::string_view text) {
  ensure_sodium();
  std::vector<unsigned char> raw(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(raw.data(), raw.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw std::invalid_argument("malformed base64 payload");
  }
  if (len % sizeof(double) != 0) throw std::invalid_argument("base64 payload is not a whole number of doubles");
  std::vector<double> out(len / sizeof(double));
  std::memcpy(out.data(), raw.data(), len);
  return out;
}

std::string sha256_hex(std::string_view data) {
  ensure_sodium();
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(data.data()), data.size());
  char hex[crypto_hash_sha256_BYTES * 2 + 1];
  sodium_bin2hex(hex, sizeof(hex), digest, sizeof(digest));
  return std::string(hex);
}

}  // namespace krrlab::codec
