#pragma once

// Seeded random generators shared by the property tests and the acceptance
// runner.

#include "kiln/der.hpp"
#include "kiln/forge.hpp"

#include <random>

namespace gen {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng &rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline kiln::Bytes random_bytes(Rng &rng, std::size_t n) {
    kiln::Bytes out(n);
    for (auto &b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

/// Content lengths biased towards the short/long-form boundaries.
inline std::size_t content_length(Rng &rng) {
    switch (uniform(rng, 0, 9)) {
    case 0: return 0;
    case 1: return uniform(rng, 120, 136);
    case 2: return uniform(rng, 250, 300);
    case 3: return uniform(rng, 65530, 65540);
    default: return uniform(rng, 1, 40);
    }
}

inline kiln::der::Tag random_tag(Rng &rng, bool constructed) {
    using kiln::der::Tag;
    using kiln::der::TagClass;
    Tag t;
    t.constructed = constructed;
    for (;;) {
        t.cls = static_cast<TagClass>(uniform(rng, 0, 3));
        switch (uniform(rng, 0, 2)) {
        case 0: t.number = static_cast<std::uint32_t>(uniform(rng, 0, 30)); break;
        case 1: t.number = static_cast<std::uint32_t>(uniform(rng, 31, 127)); break;
        default: t.number = static_cast<std::uint32_t>(uniform(rng, 128, kiln::der::kMaxTagNumber)); break;
        }
        if (t.cls != TagClass::Universal) return t;
        if (t.number == 0) continue;
        const bool sequence_like = t.number == 16 || t.number == 17;
        const bool primitive_only = (t.number >= 1 && t.number <= 6) || t.number == 12 || t.number == 19 ||
                                    t.number == 22 || t.number == 23 || t.number == 24;
        if (constructed && primitive_only) continue;
        if (!constructed && sequence_like) continue;
        return t;
    }
}

/// Random TLV tree; constructed content is the concatenation of encoded
/// children, so every generated value is valid DER at the TLV layer.
inline kiln::der::Value random_value(Rng &rng, int depth = 0) {
    kiln::der::Value v;
    const bool constructed = depth < 3 && uniform(rng, 0, 2) == 0;
    v.tag = random_tag(rng, constructed);
    if (!constructed) {
        v.content = random_bytes(rng, content_length(rng));
        return v;
    }
    const std::size_t n = uniform(rng, 0, 4);
    for (std::size_t i = 0; i < n; ++i) kiln::der::encode_to(v.content, random_value(rng, depth + 1));
    return v;
}

/// Structure-aware and blind mutations of a seed object.
inline kiln::Bytes mutate(Rng &rng, const kiln::Bytes &seed) {
    kiln::Bytes out = seed;
    const std::size_t rounds = uniform(rng, 1, 4);
    for (std::size_t r = 0; r < rounds; ++r) {
        if (out.empty()) out.push_back(static_cast<std::uint8_t>(rng()));
        const std::size_t pos = uniform(rng, 0, out.size() - 1);
        switch (uniform(rng, 0, 9)) {
        case 0: out[pos] ^= static_cast<std::uint8_t>(1u << uniform(rng, 0, 7)); break;
        case 1: out[pos] = static_cast<std::uint8_t>(rng()); break;
        case 2: out.resize(pos); break; // truncate
        case 3: out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<std::uint8_t>(rng())); break;
        case 4: out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos)); break;
        case 5: out[pos] = 0x80; break; // indefinite length marker
        case 6: // widen a length: 0x81 0x00 style non-minimal encodings
            out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), {0x81, 0x00});
            break;
        case 7: out[pos] = static_cast<std::uint8_t>(0x84 + uniform(rng, 0, 3)); break; // huge length
        case 8: { // duplicate a slice
            const std::size_t len = uniform(rng, 1, std::min<std::size_t>(64, out.size() - pos));
            kiln::Bytes slice(out.begin() + static_cast<std::ptrdiff_t>(pos),
                              out.begin() + static_cast<std::ptrdiff_t>(pos + len));
            out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), slice.begin(), slice.end());
            break;
        }
        default: out[pos] = static_cast<std::uint8_t>(out[pos] + (rng() & 1 ? 1 : -1)); break;
        }
    }
    return out;
}

/// Random crafted-overflow payload between 1 and kMaxPayload bytes.
inline kiln::Bytes random_payload(Rng &rng) {
    return random_bytes(rng, uniform(rng, 1, kiln::forge::kMaxPayload));
}

} // namespace gen
