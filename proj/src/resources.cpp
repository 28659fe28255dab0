#include "kiln/resources.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <charconv>
#include <map>
#include <stdexcept>

namespace kiln {

namespace {

std::size_t address_size(AddressFamily f) { return f == AddressFamily::IPv4 ? 4 : 16; }

bool bit_at(const Bytes &addr, unsigned i) { return (addr[i / 8] >> (7 - i % 8)) & 1; }

std::uint32_t parse_u32(std::string_view text) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument("not a 32-bit number: " + std::string(text));
    return v;
}

} // namespace

IpPrefix IpPrefix::parse(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) throw std::invalid_argument("prefix needs /length: " + std::string(text));
    std::string addr(text.substr(0, slash));
    IpPrefix p;
    p.family = addr.find(':') != std::string::npos ? AddressFamily::IPv6 : AddressFamily::IPv4;
    p.address.resize(address_size(p.family));
    int af = p.family == AddressFamily::IPv4 ? AF_INET : AF_INET6;
    if (inet_pton(af, addr.c_str(), p.address.data()) != 1)
        throw std::invalid_argument("bad address: " + addr);
    p.length = parse_u32(text.substr(slash + 1));
    if (p.length > p.address.size() * 8) throw std::invalid_argument("prefix length too long: " + std::string(text));
    for (unsigned i = p.length; i < p.address.size() * 8; ++i)
        if (bit_at(p.address, i)) throw std::invalid_argument("host bits set in " + std::string(text));
    return p;
}

std::string IpPrefix::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    inet_ntop(family == AddressFamily::IPv4 ? AF_INET : AF_INET6, address.data(), buf, sizeof buf);
    return std::string(buf) + "/" + std::to_string(length);
}

bool IpPrefix::contains(const IpPrefix &other) const {
    if (family != other.family || other.length < length) return false;
    for (unsigned i = 0; i < length; ++i)
        if (bit_at(address, i) != bit_at(other.address, i)) return false;
    return true;
}

AsRange AsRange::parse(std::string_view text) {
    auto dash = text.find('-');
    AsRange r;
    r.min = parse_u32(text.substr(0, dash));
    r.max = dash == std::string_view::npos ? r.min : parse_u32(text.substr(dash + 1));
    if (r.min > r.max) throw std::invalid_argument("AS range reversed: " + std::string(text));
    return r;
}

std::string AsRange::to_string() const {
    return min == max ? std::to_string(min) : std::to_string(min) + "-" + std::to_string(max);
}

bool Resources::contains_prefix(const IpPrefix &p) const {
    return std::any_of(prefixes.begin(), prefixes.end(), [&](const IpPrefix &mine) { return mine.contains(p); });
}

bool Resources::contains_asn(std::uint32_t asn) const {
    return std::any_of(asns.begin(), asns.end(), [&](const AsRange &r) { return r.min <= asn && asn <= r.max; });
}

bool Resources::contains(const Resources &other) const {
    for (const auto &p : other.prefixes)
        if (!contains_prefix(p)) return false;
    for (const auto &r : other.asns) {
        bool covered = std::any_of(asns.begin(), asns.end(),
                                   [&](const AsRange &mine) { return mine.min <= r.min && r.max <= mine.max; });
        if (!covered) return false;
    }
    return true;
}

der::Value encode_prefix_bits(const IpPrefix &prefix) {
    der::BitStringValue bits;
    const std::size_t nbytes = (prefix.length + 7) / 8;
    bits.bytes.assign(prefix.address.begin(), prefix.address.begin() + static_cast<std::ptrdiff_t>(nbytes));
    bits.unused_bits = static_cast<std::uint8_t>(nbytes * 8 - prefix.length);
    return der::make_bit_string(bits);
}

IpPrefix decode_prefix_bits(const der::Value &value, AddressFamily family) {
    auto bits = der::decode_bit_string(value, true);
    IpPrefix p;
    p.family = family;
    p.address.assign(address_size(family), 0);
    if (bits.bytes.size() > p.address.size()) throw der::Error(der::Errc::BadUnusedBits, "prefix longer than address");
    std::copy(bits.bytes.begin(), bits.bytes.end(), p.address.begin());
    p.length = static_cast<unsigned>(bits.bytes.size() * 8 - bits.unused_bits);
    return p;
}

der::Value encode_address_family(AddressFamily family) {
    return der::make_octet_string(Bytes{0x00, static_cast<std::uint8_t>(family)});
}

AddressFamily decode_address_family(const der::Value &value) {
    auto afi = der::decode_octet_string(value);
    if (afi.size() != 2 || afi[0] != 0 || (afi[1] != 1 && afi[1] != 2))
        throw der::Error(der::Errc::WrongTag, "unsupported address family");
    return static_cast<AddressFamily>(afi[1]);
}

der::Value encode_ip_blocks(const std::vector<IpPrefix> &prefixes) {
    std::map<AddressFamily, std::vector<IpPrefix>> by_family;
    for (const auto &p : prefixes) by_family[p.family].push_back(p);
    std::vector<der::Value> families;
    for (auto &[family, list] : by_family) {
        std::sort(list.begin(), list.end());
        std::vector<der::Value> addrs;
        for (const auto &p : list) addrs.push_back(encode_prefix_bits(p));
        families.push_back(der::seq({encode_address_family(family), der::seq(addrs)}));
    }
    return der::seq(families);
}

std::vector<IpPrefix> decode_ip_blocks(const der::Value &value) {
    der::expect_tag(value, der::tags::Sequence);
    std::vector<IpPrefix> out;
    for (const auto &fam : der::children(value)) {
        der::Reader r(fam);
        auto family = decode_address_family(r.next(der::tags::OctetString));
        const auto &choice = r.next(der::tags::Sequence);
        r.finish();
        for (const auto &item : der::children(choice)) out.push_back(decode_prefix_bits(item, family));
    }
    return out;
}

der::Value encode_as_identifiers(const std::vector<AsRange> &asns) {
    auto sorted = asns;
    std::sort(sorted.begin(), sorted.end());
    std::vector<der::Value> items;
    for (const auto &r : sorted) {
        if (r.min == r.max)
            items.push_back(der::make_integer(r.min));
        else
            items.push_back(der::seq({der::make_integer(r.min), der::make_integer(r.max)}));
    }
    return der::seq({der::explicit_tag(0, der::seq(items))});
}

std::vector<AsRange> decode_as_identifiers(const der::Value &value) {
    der::Reader outer(value);
    auto asnum = der::decode_exact(outer.next(der::tags::context(0)).content);
    outer.finish();
    der::expect_tag(asnum, der::tags::Sequence);
    auto to_u32 = [](const der::Value &v) {
        auto n = der::decode_int64(v);
        if (n < 0 || n > UINT32_MAX) throw der::Error(der::Errc::BadInteger, "AS number out of range");
        return static_cast<std::uint32_t>(n);
    };
    std::vector<AsRange> out;
    for (const auto &item : der::children(asnum)) {
        if (item.tag == der::tags::Integer) {
            auto n = to_u32(item);
            out.push_back({n, n});
        } else {
            der::Reader r(item);
            AsRange range{to_u32(r.next(der::tags::Integer)), to_u32(r.next(der::tags::Integer))};
            r.finish();
            if (range.min > range.max) throw der::Error(der::Errc::BadInteger, "AS range reversed");
            out.push_back(range);
        }
    }
    return out;
}

} // namespace kiln
