#include "kiln/der.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace kiln::der {

namespace {

bool must_be_primitive(const Tag &tag) {
    if (tag.cls != TagClass::Universal) return false;
    switch (tag.number) {
    case 1: case 2: case 3: case 4: case 5: case 6:
    case 12: case 19: case 22: case 23: case 24:
        return true;
    default:
        return false;
    }
}

bool must_be_constructed(const Tag &tag) {
    return tag.cls == TagClass::Universal && (tag.number == 16 || tag.number == 17);
}

void check_tag(const Tag &tag) {
    if (tag.number > kMaxTagNumber) throw Error(Errc::BadTag, "tag number too large");
    if (tag.cls == TagClass::Universal && tag.number == 0) throw Error(Errc::BadTag, "end-of-contents tag");
    if (must_be_primitive(tag) && tag.constructed)
        throw Error(Errc::BadConstruction, to_string(tag) + " must be primitive");
    if (must_be_constructed(tag) && !tag.constructed)
        throw Error(Errc::BadConstruction, to_string(tag) + " must be constructed");
}

void encode_tag(Bytes &out, const Tag &tag) {
    std::uint8_t lead = static_cast<std::uint8_t>(static_cast<std::uint8_t>(tag.cls) << 6);
    if (tag.constructed) lead |= 0x20;
    if (tag.number < 31) {
        out.push_back(static_cast<std::uint8_t>(lead | tag.number));
        return;
    }
    out.push_back(lead | 0x1F);
    if (tag.number >= 0x80) out.push_back(static_cast<std::uint8_t>(0x80 | (tag.number >> 7)));
    out.push_back(static_cast<std::uint8_t>(tag.number & 0x7F));
}

void encode_length(Bytes &out, std::size_t len) {
    if (len < 0x80) {
        out.push_back(static_cast<std::uint8_t>(len));
        return;
    }
    std::uint8_t tmp[sizeof(std::size_t)];
    int n = 0;
    for (std::size_t v = len; v != 0; v >>= 8) tmp[n++] = static_cast<std::uint8_t>(v & 0xFF);
    out.push_back(static_cast<std::uint8_t>(0x80 | n));
    while (n > 0) out.push_back(tmp[--n]);
}

int digits(std::string_view s, std::size_t pos, std::size_t count) {
    int v = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        if (s[i] < '0' || s[i] > '9') throw Error(Errc::BadTime, "non-digit in time");
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

std::string format_time(Time t, bool generalized) {
    auto day = std::chrono::floor<std::chrono::days>(t);
    std::chrono::year_month_day ymd{day};
    std::chrono::hh_mm_ss hms{t - day};
    int year = static_cast<int>(ymd.year());
    char buf[64];
    if (generalized)
        std::snprintf(buf, sizeof buf, "%04d%02u%02u%02ld%02ld%02lldZ", year, static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()), static_cast<long>(hms.hours().count()),
                      static_cast<long>(hms.minutes().count()), static_cast<long long>(hms.seconds().count()));
    else
        std::snprintf(buf, sizeof buf, "%02d%02u%02u%02ld%02ld%02lldZ", year % 100, static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()), static_cast<long>(hms.hours().count()),
                      static_cast<long>(hms.minutes().count()), static_cast<long long>(hms.seconds().count()));
    return buf;
}

} // namespace

std::string to_string(const Tag &tag) {
    static constexpr const char *classes[] = {"UNIVERSAL", "APPLICATION", "CONTEXT", "PRIVATE"};
    return std::string(classes[static_cast<int>(tag.cls)]) + (tag.constructed ? " constructed " : " primitive ") +
           std::to_string(tag.number);
}

std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::Truncated: return "Truncated";
    case Errc::NonMinimalLength: return "NonMinimalLength";
    case Errc::IndefiniteLength: return "IndefiniteLength";
    case Errc::OversizeContent: return "OversizeContent";
    case Errc::BadTag: return "BadTag";
    case Errc::NonMinimalTag: return "NonMinimalTag";
    case Errc::BadConstruction: return "BadConstruction";
    case Errc::WrongTag: return "WrongTag";
    case Errc::EmptyContent: return "EmptyContent";
    case Errc::BadUnusedBits: return "BadUnusedBits";
    case Errc::NonZeroTrailingBits: return "NonZeroTrailingBits";
    case Errc::BadOid: return "BadOid";
    case Errc::BadInteger: return "BadInteger";
    case Errc::BadBoolean: return "BadBoolean";
    case Errc::BadNull: return "BadNull";
    case Errc::BadString: return "BadString";
    case Errc::BadTime: return "BadTime";
    case Errc::TrailingData: return "TrailingData";
    case Errc::Malformed: return "Malformed";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string &detail)
    : std::runtime_error(detail.empty() ? std::string(to_string(code))
                                        : std::string(to_string(code)) + ": " + detail),
      code_(code) {}

// ---------------------------------------------------------------------------

void encode_to(Bytes &out, const Value &value, std::size_t cap) {
    check_tag(value.tag);
    if (value.content.size() > cap) throw Error(Errc::OversizeContent);
    encode_tag(out, value.tag);
    encode_length(out, value.content.size());
    append(out, value.content);
}

Bytes encode(const Value &value, std::size_t cap) {
    Bytes out;
    out.reserve(value.content.size() + 8);
    encode_to(out, value, cap);
    return out;
}

Decoded decode(ByteView input, std::size_t cap) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (input.size() - pos < n) throw Error(Errc::Truncated);
    };

    need(1);
    const std::uint8_t lead = input[pos++];
    Tag tag;
    tag.cls = static_cast<TagClass>(lead >> 6);
    tag.constructed = (lead & 0x20) != 0;
    if ((lead & 0x1F) != 0x1F) {
        tag.number = lead & 0x1F;
    } else {
        need(1);
        std::uint8_t b = input[pos++];
        if (b == 0x80) throw Error(Errc::NonMinimalTag, "leading zero in tag number");
        std::uint32_t number = b & 0x7F;
        if (b & 0x80) {
            need(1);
            b = input[pos++];
            if (b & 0x80) throw Error(Errc::BadTag, "tag number too large");
            number = (number << 7) | b;
        }
        if (number < 31) throw Error(Errc::NonMinimalTag, "low tag number in high-tag form");
        tag.number = number;
    }
    check_tag(tag);

    need(1);
    const std::uint8_t first = input[pos++];
    std::size_t length = 0;
    if (first < 0x80) {
        length = first;
    } else if (first == 0x80) {
        throw Error(Errc::IndefiniteLength);
    } else {
        const std::size_t n = first & 0x7F;
        if (n > 4) throw Error(Errc::OversizeContent, "length field too wide");
        need(n);
        if (input[pos] == 0) throw Error(Errc::NonMinimalLength, "leading zero length octet");
        for (std::size_t i = 0; i < n; ++i) length = (length << 8) | input[pos++];
        if (length < 0x80) throw Error(Errc::NonMinimalLength, "long form for short length");
    }
    if (length > cap) throw Error(Errc::OversizeContent);
    need(length);

    Decoded out;
    out.value.tag = tag;
    out.value.content.assign(input.begin() + static_cast<std::ptrdiff_t>(pos),
                             input.begin() + static_cast<std::ptrdiff_t>(pos + length));
    out.consumed = pos + length;
    return out;
}

Value decode_exact(ByteView input, std::size_t cap) {
    auto d = decode(input, cap);
    if (d.consumed != input.size()) throw Error(Errc::TrailingData);
    return std::move(d.value);
}

std::vector<Value> decode_all(ByteView input, std::size_t cap) {
    std::vector<Value> out;
    while (!input.empty()) {
        auto d = decode(input, cap);
        input = input.subspan(d.consumed);
        out.push_back(std::move(d.value));
    }
    return out;
}

std::vector<Value> children(const Value &value) {
    if (!value.tag.constructed) throw Error(Errc::BadConstruction, "expected constructed value");
    return decode_all(value.content);
}

void expect_tag(const Value &value, const Tag &tag) {
    if (!(value.tag == tag)) throw Error(Errc::WrongTag, "expected " + to_string(tag) + ", got " + to_string(value.tag));
}

Reader::Reader(const Value &constructed) : items_(children(constructed)) {}

bool Reader::next_is(const Tag &tag) const noexcept { return !at_end() && items_[pos_].tag == tag; }

const Value &Reader::next() {
    if (at_end()) throw Error(Errc::Truncated, "sequence ended early");
    return items_[pos_++];
}

const Value &Reader::next(const Tag &tag) {
    const Value &v = next();
    expect_tag(v, tag);
    return v;
}

std::optional<Value> Reader::next_if(const Tag &tag) {
    if (!next_is(tag)) return std::nullopt;
    return items_[pos_++];
}

void Reader::finish() const {
    if (!at_end()) throw Error(Errc::TrailingData, "unexpected trailing element");
}

// ---------------------------------------------------------------------------

Bytes BitStringValue::content() const {
    Bytes out;
    out.reserve(bytes.size() + 1);
    out.push_back(unused_bits);
    append(out, bytes);
    return out;
}

BitStringValue decode_bit_string(const Value &value, bool strict) {
    expect_tag(value, tags::BitString);
    if (value.content.empty()) throw Error(Errc::EmptyContent, "bit string lacks unused-bits octet");
    BitStringValue out;
    out.unused_bits = value.content[0];
    out.bytes.assign(value.content.begin() + 1, value.content.end());
    if (strict) {
        if (out.unused_bits > 7) throw Error(Errc::BadUnusedBits);
        if (out.bytes.empty() && out.unused_bits != 0) throw Error(Errc::BadUnusedBits, "empty bit string with padding");
        if (!out.bytes.empty()) {
            const std::uint8_t mask = static_cast<std::uint8_t>((1u << out.unused_bits) - 1);
            if (out.bytes.back() & mask) throw Error(Errc::NonZeroTrailingBits);
        }
    }
    return out;
}

Value make_bit_string(const BitStringValue &bits) {
    if (bits.unused_bits > 7 || (bits.bytes.empty() && bits.unused_bits != 0)) throw Error(Errc::BadUnusedBits);
    return Value{tags::BitString, bits.content()};
}

Value make_bit_string_raw(ByteView content) { return Value{tags::BitString, Bytes(content.begin(), content.end())}; }

// ---------------------------------------------------------------------------

Oid Oid::parse(std::string_view dotted) {
    Oid oid;
    while (true) {
        auto dot = dotted.find('.');
        auto part = dotted.substr(0, dot);
        std::uint64_t arc = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), arc);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size())
            throw Error(Errc::BadOid, "bad arc in '" + std::string(dotted) + "'");
        oid.arcs.push_back(arc);
        if (dot == std::string_view::npos) break;
        dotted.remove_prefix(dot + 1);
    }
    return oid;
}

std::string Oid::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        if (i) out.push_back('.');
        out += std::to_string(arcs[i]);
    }
    return out;
}

Value make_oid(const Oid &oid) {
    const auto &a = oid.arcs;
    if (a.size() < 2 || a[0] > 2 || (a[0] < 2 && a[1] > 39)) throw Error(Errc::BadOid, "invalid leading arcs");
    if (a[0] == 2 && a[1] > UINT64_MAX - 80) throw Error(Errc::BadOid, "arc overflow");
    Bytes content;
    auto put = [&](std::uint64_t v) {
        std::uint8_t tmp[10];
        int n = 0;
        do {
            tmp[n++] = static_cast<std::uint8_t>(v & 0x7F);
            v >>= 7;
        } while (v != 0);
        while (n > 1) content.push_back(static_cast<std::uint8_t>(0x80 | tmp[--n]));
        content.push_back(tmp[0]);
    };
    put(a[0] * 40 + a[1]);
    for (std::size_t i = 2; i < a.size(); ++i) put(a[i]);
    return Value{tags::Oid, std::move(content)};
}

Oid decode_oid(const Value &value) {
    expect_tag(value, tags::Oid);
    if (value.content.empty()) throw Error(Errc::BadOid, "empty");
    std::vector<std::uint64_t> raw;
    std::uint64_t cur = 0;
    bool in_arc = false;
    for (auto b : value.content) {
        if (!in_arc && b == 0x80) throw Error(Errc::BadOid, "non-minimal arc");
        if (cur > (UINT64_MAX >> 7)) throw Error(Errc::BadOid, "arc overflow");
        cur = (cur << 7) | (b & 0x7F);
        in_arc = (b & 0x80) != 0;
        if (!in_arc) {
            raw.push_back(cur);
            cur = 0;
        }
    }
    if (in_arc) throw Error(Errc::BadOid, "truncated arc");
    Oid oid;
    if (raw[0] < 40) {
        oid.arcs = {0, raw[0]};
    } else if (raw[0] < 80) {
        oid.arcs = {1, raw[0] - 40};
    } else {
        oid.arcs = {2, raw[0] - 80};
    }
    oid.arcs.insert(oid.arcs.end(), raw.begin() + 1, raw.end());
    return oid;
}

// ---------------------------------------------------------------------------

Value make_integer(std::int64_t v) {
    Bytes content;
    for (int shift = 56; shift >= 0; shift -= 8) content.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    std::size_t skip = 0;
    while (skip + 1 < content.size()) {
        bool redundant = (content[skip] == 0x00 && !(content[skip + 1] & 0x80)) ||
                         (content[skip] == 0xFF && (content[skip + 1] & 0x80));
        if (!redundant) break;
        ++skip;
    }
    content.erase(content.begin(), content.begin() + static_cast<std::ptrdiff_t>(skip));
    return Value{tags::Integer, std::move(content)};
}

Value make_unsigned_integer(ByteView magnitude) {
    std::size_t skip = 0;
    while (skip < magnitude.size() && magnitude[skip] == 0) ++skip;
    Bytes content;
    if (skip == magnitude.size() || (magnitude[skip] & 0x80)) content.push_back(0x00);
    content.insert(content.end(), magnitude.begin() + static_cast<std::ptrdiff_t>(skip), magnitude.end());
    return Value{tags::Integer, std::move(content)};
}

Bytes decode_integer_bytes(const Value &value) {
    expect_tag(value, tags::Integer);
    const auto &c = value.content;
    if (c.empty()) throw Error(Errc::BadInteger, "empty");
    if (c.size() > 1 && ((c[0] == 0x00 && !(c[1] & 0x80)) || (c[0] == 0xFF && (c[1] & 0x80))))
        throw Error(Errc::BadInteger, "non-minimal encoding");
    return c;
}

std::int64_t decode_int64(const Value &value) {
    const Bytes c = decode_integer_bytes(value);
    if (c.size() > 8) throw Error(Errc::BadInteger, "does not fit 64 bits");
    std::uint64_t v = (c[0] & 0x80) ? ~std::uint64_t{0} : 0;
    for (auto b : c) v = (v << 8) | b;
    return static_cast<std::int64_t>(v);
}

Value make_boolean(bool v) { return Value{tags::Boolean, Bytes{static_cast<std::uint8_t>(v ? 0xFF : 0x00)}}; }

bool decode_boolean(const Value &value) {
    expect_tag(value, tags::Boolean);
    if (value.content.size() != 1 || (value.content[0] != 0x00 && value.content[0] != 0xFF))
        throw Error(Errc::BadBoolean);
    return value.content[0] == 0xFF;
}

Value make_null() { return Value{tags::Null, {}}; }

void decode_null(const Value &value) {
    expect_tag(value, tags::Null);
    if (!value.content.empty()) throw Error(Errc::BadNull);
}

Value make_octet_string(ByteView bytes) { return Value{tags::OctetString, Bytes(bytes.begin(), bytes.end())}; }

Bytes decode_octet_string(const Value &value) {
    expect_tag(value, tags::OctetString);
    return value.content;
}

Value make_string(const Tag &tag, std::string_view text) { return Value{tag, to_bytes(text)}; }

std::string decode_string(const Value &value, const Tag &tag) {
    expect_tag(value, tag);
    for (auto b : value.content) {
        if (tag == tags::Ia5String && b > 0x7F) throw Error(Errc::BadString, "non-ASCII in IA5String");
        if (tag == tags::PrintableString) {
            bool ok = (b >= 'a' && b <= 'z') || (b >= 'A' && b <= 'Z') || (b >= '0' && b <= '9') ||
                      std::string_view(" '()+,-./:=?").find(static_cast<char>(b)) != std::string_view::npos;
            if (!ok) throw Error(Errc::BadString, "invalid PrintableString character");
        }
    }
    return kiln::to_string(value.content);
}

// ---------------------------------------------------------------------------

Value make_time(Time t) {
    auto year = static_cast<int>(std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(t)}.year());
    if (year >= 1950 && year < 2050) return Value{tags::UtcTime, to_bytes(format_time(t, false))};
    return make_generalized_time(t);
}

Value make_generalized_time(Time t) { return Value{tags::GeneralizedTime, to_bytes(format_time(t, true))}; }

Time decode_time(const Value &value) {
    const std::string s = kiln::to_string(value.content);
    int year = 0;
    std::size_t pos = 0;
    if (value.tag == tags::UtcTime) {
        if (s.size() != 13) throw Error(Errc::BadTime, "UTCTime must be YYMMDDHHMMSSZ");
        int yy = digits(s, 0, 2);
        year = yy >= 50 ? 1900 + yy : 2000 + yy;
        pos = 2;
    } else if (value.tag == tags::GeneralizedTime) {
        if (s.size() != 15) throw Error(Errc::BadTime, "GeneralizedTime must be YYYYMMDDHHMMSSZ");
        year = digits(s, 0, 4);
        pos = 4;
    } else {
        throw Error(Errc::WrongTag, "expected a time value, got " + to_string(value.tag));
    }
    if (s.back() != 'Z') throw Error(Errc::BadTime, "missing Z");
    unsigned month = static_cast<unsigned>(digits(s, pos, 2));
    unsigned day = static_cast<unsigned>(digits(s, pos + 2, 2));
    int hh = digits(s, pos + 4, 2), mm = digits(s, pos + 6, 2), ss = digits(s, pos + 8, 2);
    std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) throw Error(Errc::BadTime, "field out of range");
    return std::chrono::sys_days{ymd} + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss};
}

// ---------------------------------------------------------------------------

Value constructed(const Tag &tag, const std::vector<Value> &items) {
    Value out{tag, {}};
    for (const auto &item : items) encode_to(out.content, item);
    return out;
}

Value seq(std::initializer_list<Value> items) { return constructed(tags::Sequence, std::vector<Value>(items)); }

Value seq(const std::vector<Value> &items) { return constructed(tags::Sequence, items); }

Value set_of(std::vector<Value> items) {
    std::vector<Bytes> encoded;
    encoded.reserve(items.size());
    for (const auto &item : items) encoded.push_back(encode(item));
    std::sort(encoded.begin(), encoded.end());
    Value out{tags::Set, {}};
    for (const auto &e : encoded) append(out.content, e);
    return out;
}

Value explicit_tag(std::uint32_t number, const Value &inner) {
    return Value{tags::context(number, true), encode(inner)};
}

Value implicit_tag(const Tag &tag, const Value &inner) { return Value{tag, inner.content}; }

} // namespace kiln::der
