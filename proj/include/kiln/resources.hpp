#pragma once

// IP prefixes and AS ranges carried by resource certificates and ROAs,
// with their RFC 3779 encodings.

#include "kiln/bytes.hpp"
#include "kiln/der.hpp"

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kiln {

enum class AddressFamily : std::uint8_t { IPv4 = 1, IPv6 = 2 };

struct IpPrefix {
    AddressFamily family = AddressFamily::IPv4;
    /// 4 or 16 bytes, host bits zero.
    Bytes address;
    unsigned length = 0;

    /// "192.0.2.0/24" or "2001:db8::/32". Host bits must be clear.
    static IpPrefix parse(std::string_view text);
    std::string to_string() const;

    bool contains(const IpPrefix &other) const;

    friend bool operator==(const IpPrefix &, const IpPrefix &) = default;
    friend auto operator<=>(const IpPrefix &, const IpPrefix &) = default;
};

struct AsRange {
    std::uint32_t min = 0;
    std::uint32_t max = 0;

    /// "65000" or "65000-65010".
    static AsRange parse(std::string_view text);
    std::string to_string() const;

    friend bool operator==(const AsRange &, const AsRange &) = default;
    friend auto operator<=>(const AsRange &, const AsRange &) = default;
};

struct Resources {
    std::vector<IpPrefix> prefixes;
    std::vector<AsRange> asns;

    bool empty() const noexcept { return prefixes.empty() && asns.empty(); }
    /// Every prefix and AS of `other` is covered by this set.
    bool contains(const Resources &other) const;
    bool contains_prefix(const IpPrefix &p) const;
    bool contains_asn(std::uint32_t asn) const;

    friend bool operator==(const Resources &, const Resources &) = default;
};

/// BIT STRING form of a prefix: significant bytes only, padding counted.
der::Value encode_prefix_bits(const IpPrefix &prefix);
IpPrefix decode_prefix_bits(const der::Value &bits, AddressFamily family);
der::Value encode_address_family(AddressFamily family);
AddressFamily decode_address_family(const der::Value &value);

/// IPAddrBlocks extension value.
der::Value encode_ip_blocks(const std::vector<IpPrefix> &prefixes);
std::vector<IpPrefix> decode_ip_blocks(const der::Value &value);

/// ASIdentifiers extension value (asnum only).
der::Value encode_as_identifiers(const std::vector<AsRange> &asns);
std::vector<AsRange> decode_as_identifiers(const der::Value &value);

} // namespace kiln
