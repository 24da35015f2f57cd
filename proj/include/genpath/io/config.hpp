// SPDX-License-Identifier: Apache-2.0
#pragma once

// "key = value" text configuration. Blank lines are ignored and `#` starts a
// comment. Keys keep their file order; a repeated key is an error.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace genpath::io {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(const std::string& text);

// Conversions that throw ConfigError naming the key on malformed input.
std::size_t to_size(const std::string& key, const std::string& value);
std::uint64_t to_u64(const std::string& key, const std::string& value);
double to_double(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);

}  // namespace genpath::io
