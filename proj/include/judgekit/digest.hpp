#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace judgekit {

// Lowercase hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

// Digest of a field sequence. Each field is length-prefixed before hashing so
// ("ab","c") and ("a","bc") can never collide.
std::string sha256_fields(const std::vector<std::string_view>& fields);

} // namespace judgekit
