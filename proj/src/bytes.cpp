#include "kiln/bytes.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <stdexcept>

namespace kiln {

std::string to_hex(ByteView b, bool upper) {
    static constexpr char lower_digits[] = "0123456789abcdef";
    static constexpr char upper_digits[] = "0123456789ABCDEF";
    const char *digits = upper ? upper_digits : lower_digits;
    std::string out;
    out.reserve(b.size() * 2);
    for (auto byte : b) {
        out.push_back(digits[byte >> 4]);
        out.push_back(digits[byte & 0x0F]);
    }
    return out;
}

static int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

Bytes from_hex(std::string_view hex) {
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    std::string digits;
    for (char c : hex) {
        if (c == ':' || c == '_' || std::isspace(static_cast<unsigned char>(c))) continue;
        if (hex_value(c) < 0) throw std::invalid_argument("non-hex character in '" + std::string(hex) + "'");
        digits.push_back(c);
    }
    if (digits.size() % 2 != 0) throw std::invalid_argument("odd number of hex digits");
    Bytes out(digits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(hex_value(digits[2 * i]) << 4 | hex_value(digits[2 * i + 1]));
    return out;
}

std::string base64_encode(ByteView b) {
    std::string out(4 * ((b.size() + 2) / 3), '\0');
    if (b.empty()) return out;
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()), b.data(), static_cast<int>(b.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

Bytes base64_decode(std::string_view text) {
    std::string compact;
    compact.reserve(text.size());
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    if (compact.empty()) return {};
    if (compact.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
    std::size_t padding = 0;
    if (compact.back() == '=') ++padding;
    if (compact.size() > 1 && compact[compact.size() - 2] == '=') ++padding;
    Bytes out(compact.size() / 4 * 3);
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char *>(compact.data()),
                            static_cast<int>(compact.size()));
    if (n < 0) throw std::invalid_argument("malformed base64");
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

} // namespace kiln
