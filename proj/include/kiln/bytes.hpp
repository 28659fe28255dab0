#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kiln {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

inline void append(Bytes &dst, ByteView src) { dst.insert(dst.end(), src.begin(), src.end()); }

// Lowercase or uppercase hex; no separators.
std::string to_hex(ByteView b, bool upper = false);

// Accepts an optional 0x prefix, ignores ':' '_' and whitespace. Throws
// std::invalid_argument on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

std::string base64_encode(ByteView b);
// Throws std::invalid_argument on malformed input. Whitespace is ignored.
Bytes base64_decode(std::string_view text);

} // namespace kiln
