#pragma once

#include <string>

namespace vizpipe {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(const std::string& data);

std::string base64_encode(const std::string& bytes);
/// Throws ParseError on malformed input.
std::string base64_decode(const std::string& text);

}  // namespace vizpipe
