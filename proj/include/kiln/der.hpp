#pragma once

// Minimal DER codec for the ASN.1 subset used by RPKI objects.

#include "kiln/bytes.hpp"

#include <chrono>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kiln::der {

enum class TagClass : std::uint8_t { Universal = 0, Application = 1, Context = 2, Private = 3 };

struct Tag {
    TagClass cls = TagClass::Universal;
    bool constructed = false;
    std::uint32_t number = 0;

    friend bool operator==(const Tag &, const Tag &) = default;
};

std::string to_string(const Tag &tag);

namespace tags {
inline constexpr Tag Boolean{TagClass::Universal, false, 1};
inline constexpr Tag Integer{TagClass::Universal, false, 2};
inline constexpr Tag BitString{TagClass::Universal, false, 3};
inline constexpr Tag OctetString{TagClass::Universal, false, 4};
inline constexpr Tag Null{TagClass::Universal, false, 5};
inline constexpr Tag Oid{TagClass::Universal, false, 6};
inline constexpr Tag Utf8String{TagClass::Universal, false, 12};
inline constexpr Tag Sequence{TagClass::Universal, true, 16};
inline constexpr Tag Set{TagClass::Universal, true, 17};
inline constexpr Tag PrintableString{TagClass::Universal, false, 19};
inline constexpr Tag Ia5String{TagClass::Universal, false, 22};
inline constexpr Tag UtcTime{TagClass::Universal, false, 23};
inline constexpr Tag GeneralizedTime{TagClass::Universal, false, 24};

constexpr Tag context(std::uint32_t number, bool constructed = true) {
    return Tag{TagClass::Context, constructed, number};
}
} // namespace tags

/// Largest tag number accepted: two base-128 octets in high-tag-number form.
inline constexpr std::uint32_t kMaxTagNumber = (1u << 14) - 1;
/// Default content-length cap applied by encode and decode.
inline constexpr std::size_t kDefaultContentCap = std::size_t{1} << 20;

struct Value {
    Tag tag;
    Bytes content;

    friend bool operator==(const Value &, const Value &) = default;
};

enum class Errc {
    Truncated,
    NonMinimalLength,
    IndefiniteLength,
    OversizeContent,
    BadTag,
    NonMinimalTag,
    BadConstruction,
    WrongTag,
    EmptyContent,
    BadUnusedBits,
    NonZeroTrailingBits,
    BadOid,
    BadInteger,
    BadBoolean,
    BadNull,
    BadString,
    BadTime,
    TrailingData,
    Malformed,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    explicit Error(Errc code, const std::string &detail = {});
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// ---------------------------------------------------------------------------
// TLV layer

Bytes encode(const Value &value, std::size_t cap = kDefaultContentCap);
void encode_to(Bytes &out, const Value &value, std::size_t cap = kDefaultContentCap);

struct Decoded {
    Value value;
    std::size_t consumed = 0;
};

/// Decodes the first TLV of `input`. Never reads past the returned
/// `consumed` count; the remainder of the input is left untouched.
Decoded decode(ByteView input, std::size_t cap = kDefaultContentCap);

/// Decodes a single TLV that must span `input` exactly.
Value decode_exact(ByteView input, std::size_t cap = kDefaultContentCap);

/// Splits concatenated TLVs, e.g. the content of a constructed value.
std::vector<Value> decode_all(ByteView input, std::size_t cap = kDefaultContentCap);

/// Children of a constructed value. Throws BadConstruction on primitives.
std::vector<Value> children(const Value &value);

void expect_tag(const Value &value, const Tag &tag);

/// Sequential cursor over the children of a constructed value.
class Reader {
public:
    explicit Reader(const Value &constructed);

    bool at_end() const noexcept { return pos_ >= items_.size(); }
    bool next_is(const Tag &tag) const noexcept;
    const Value &next();
    const Value &next(const Tag &tag);
    std::optional<Value> next_if(const Tag &tag);
    /// Throws TrailingData if unread children remain.
    void finish() const;

private:
    std::vector<Value> items_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Universal types

struct BitStringValue {
    std::uint8_t unused_bits = 0;
    Bytes bytes;

    /// The raw BIT STRING content: unused-bits octet followed by payload.
    Bytes content() const;
    std::size_t content_length() const noexcept { return bytes.size() + 1; }

    friend bool operator==(const BitStringValue &, const BitStringValue &) = default;
};

/// Strict mode enforces the DER bit-string rules. Lax mode only requires the
/// unused-bits octet to be present and keeps every payload byte verbatim.
BitStringValue decode_bit_string(const Value &value, bool strict);
Value make_bit_string(const BitStringValue &bits);
/// Wraps already-formed BIT STRING content without validation.
Value make_bit_string_raw(ByteView content);

struct Oid {
    std::vector<std::uint64_t> arcs;

    static Oid parse(std::string_view dotted);
    std::string to_string() const;

    friend bool operator==(const Oid &, const Oid &) = default;
    friend auto operator<=>(const Oid &, const Oid &) = default;
};

Value make_oid(const Oid &oid);
Oid decode_oid(const Value &value);

Value make_integer(std::int64_t v);
/// Non-negative integer from a big-endian magnitude (leading zeros allowed).
Value make_unsigned_integer(ByteView magnitude);
std::int64_t decode_int64(const Value &value);
/// Two's-complement content after minimality checks.
Bytes decode_integer_bytes(const Value &value);

Value make_boolean(bool v);
bool decode_boolean(const Value &value);

Value make_null();
void decode_null(const Value &value);

Value make_octet_string(ByteView bytes);
Bytes decode_octet_string(const Value &value);

Value make_string(const Tag &tag, std::string_view text);
std::string decode_string(const Value &value, const Tag &tag);

using Time = std::chrono::sys_seconds;
/// UTCTime for years before 2050, GeneralizedTime otherwise.
Value make_time(Time t);
Value make_generalized_time(Time t);
/// Accepts either UTCTime or GeneralizedTime in the DER "Z" form.
Time decode_time(const Value &value);

// ---------------------------------------------------------------------------
// Construction helpers

Value constructed(const Tag &tag, const std::vector<Value> &items);
Value seq(std::initializer_list<Value> items);
Value seq(const std::vector<Value> &items);
/// SET OF with elements sorted by their encodings.
Value set_of(std::vector<Value> items);
/// [n] EXPLICIT wrapper.
Value explicit_tag(std::uint32_t number, const Value &inner);
/// Re-tags `inner` keeping its content (IMPLICIT tagging).
Value implicit_tag(const Tag &tag, const Value &inner);

} // namespace kiln::der
