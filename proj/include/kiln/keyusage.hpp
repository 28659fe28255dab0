#pragma once

// Key-usage extension semantics for RPKI resource certificates: the two
// permitted values, the bounds-checked validator, and the constraint checker
// for crafted (over-long) values.

#include "kiln/bytes.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace kiln::keyusage {

enum class CertKind { CA, EE };

std::string_view to_string(CertKind kind);
std::optional<CertKind> parse_cert_kind(std::string_view text);

enum class Verdict { Accept, Reject };
enum class Reason { None, WrongLength, WrongUnusedBits, WrongBits, DisallowedBits };

std::string_view to_string(Verdict v);
std::string_view to_string(Reason r);

struct Decision {
    Verdict verdict = Verdict::Accept;
    Reason reason = Reason::None;

    bool accepted() const noexcept { return verdict == Verdict::Accept; }
    friend bool operator==(const Decision &, const Decision &) = default;
};

/// BIT STRING content (unused-bits octet, bits octet) the profile requires.
/// CA: 01 06 (keyCertSign, cRLSign). EE: 07 80 (digitalSignature).
constexpr std::array<std::uint8_t, 2> expected_content(CertKind kind) {
    return kind == CertKind::CA ? std::array<std::uint8_t, 2>{0x01, 0x06} : std::array<std::uint8_t, 2>{0x07, 0x80};
}

/// Bits a certificate of this kind may assert at all.
constexpr std::uint8_t permitted_bits(CertKind kind) { return kind == CertKind::CA ? 0x06 : 0x80; }

/// Checks length first, then the unused-bits octet, then the bits octet.
/// Works on anything exposing size() and operator[] so tests can observe
/// exactly which indices are read.
template <typename Content>
Decision validate_safe_with(const Content &content, CertKind kind) {
    constexpr auto reject = [](Reason r) { return Decision{Verdict::Reject, r}; };
    if (content.size() != 2) return reject(Reason::WrongLength);
    const auto expected = expected_content(kind);
    if (content[0] != expected[0]) return reject(Reason::WrongUnusedBits);
    const std::uint8_t bits = content[1];
    if (bits & static_cast<std::uint8_t>(~permitted_bits(kind))) return reject(Reason::DisallowedBits);
    if (bits != expected[1]) return reject(Reason::WrongBits);
    return Decision{};
}

Decision validate_safe(ByteView content, CertKind kind);

// ---------------------------------------------------------------------------
// Crafted values

/// Content always includes the leading unused-bits octet.
struct CraftedKu {
    Bytes content;
    CertKind kind = CertKind::CA;
};

enum class Violation {
    TooShortForOverflow,
    WrongFirstByte,
    WrongBitsByte,
    ThirdByteTooLarge,
    LengthOctetMismatch,
};

std::string_view to_string(Violation v);

/// How the three constrained leading bytes are located in the encoded
/// extension value. ContentOnly counts BIT STRING content bytes;
/// WithLengthOctet counts the DER length octet followed by the content.
enum class PrefixBasis { ContentOnly, WithLengthOctet };
inline constexpr PrefixBasis kPrefixBasis = PrefixBasis::ContentOnly;

/// Exclusive upper bound on the third content byte.
inline constexpr std::uint8_t kThirdByteBound = 0x08;

struct ConstraintReport {
    bool ok = false;
    std::vector<Violation> violations;
};

ConstraintReport check_crafting_constraints(const CraftedKu &crafted, PrefixBasis basis = kPrefixBasis);

} // namespace kiln::keyusage
