#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace krrlab::codec {

/// Standard (padded) base64 of the little-endian bytes of `values`.
std::string encode_doubles(std::span<const double> values);

/// Inverse of encode_doubles. Throws std::invalid_argument on malformed input.
std::vector<double> decode_doubles(std::string_view text);

/// Lower-case hex SHA-256 digest of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace krrlab::codec
