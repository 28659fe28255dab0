#include "kiln/keyusage.hpp"

#include <cctype>
#include <string>

namespace kiln::keyusage {

std::string_view to_string(CertKind kind) { return kind == CertKind::CA ? "CA" : "EE"; }

std::optional<CertKind> parse_cert_kind(std::string_view text) {
    std::string lower;
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "ca") return CertKind::CA;
    if (lower == "ee") return CertKind::EE;
    return std::nullopt;
}

std::string_view to_string(Verdict v) { return v == Verdict::Accept ? "Accept" : "Reject"; }

std::string_view to_string(Reason r) {
    switch (r) {
    case Reason::None: return "None";
    case Reason::WrongLength: return "WrongLength";
    case Reason::WrongUnusedBits: return "WrongUnusedBits";
    case Reason::WrongBits: return "WrongBits";
    case Reason::DisallowedBits: return "DisallowedBits";
    }
    return "None";
}

std::string_view to_string(Violation v) {
    switch (v) {
    case Violation::TooShortForOverflow: return "TooShortForOverflow";
    case Violation::WrongFirstByte: return "WrongFirstByte";
    case Violation::WrongBitsByte: return "WrongBitsByte";
    case Violation::ThirdByteTooLarge: return "ThirdByteTooLarge";
    case Violation::LengthOctetMismatch: return "LengthOctetMismatch";
    }
    return "Unknown";
}

Decision validate_safe(ByteView content, CertKind kind) { return validate_safe_with(content, kind); }

ConstraintReport check_crafting_constraints(const CraftedKu &crafted, PrefixBasis basis) {
    ConstraintReport report;
    const auto &c = crafted.content;
    const auto expected = expected_content(crafted.kind);
    auto fail = [&](Violation v) { report.violations.push_back(v); };

    if (c.size() < 3) fail(Violation::TooShortForOverflow);
    if (basis == PrefixBasis::WithLengthOctet && c.size() >= 0x80) fail(Violation::LengthOctetMismatch);
    if (!c.empty() && c[0] != expected[0]) fail(Violation::WrongFirstByte);
    if (c.size() > 1 && c[1] != expected[1]) fail(Violation::WrongBitsByte);
    if (c.size() > 2 && c[2] >= kThirdByteBound) fail(Violation::ThirdByteTooLarge);

    report.ok = report.violations.empty();
    return report;
}

} // namespace kiln::keyusage
