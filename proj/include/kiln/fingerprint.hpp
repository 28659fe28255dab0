#pragma once

// Relying-party identification from HTTP User-Agent strings, version-range
// vulnerability classification, and fetch-log summaries.

#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kiln::fingerprint {

enum class Software { Fort, OtherRp, Unknown };

std::string_view to_string(Software s);
std::optional<Software> parse_software(std::string_view text);

/// Dotted numeric release or a numbered beta. Betas order below every
/// release and among themselves by number; releases compare numerically
/// with missing components read as zero.
class Version {
public:
    static Version release(std::vector<std::uint32_t> parts);
    static Version beta(std::uint32_t number);
    /// "1.6.2", "0.beta1", "beta2", "1.0.0-beta2". Absent when unparseable.
    static std::optional<Version> parse(std::string_view text);

    bool is_beta() const noexcept { return beta_.has_value(); }
    std::string to_string() const;

    friend std::strong_ordering operator<=>(const Version &a, const Version &b);
    friend bool operator==(const Version &a, const Version &b) { return (a <=> b) == 0; }

private:
    std::optional<std::uint32_t> beta_;
    std::vector<std::uint32_t> parts_;
};

struct VersionRange {
    Version low;  // inclusive
    Version high; // inclusive

    bool contains(const Version &v) const { return low <= v && v <= high; }
    /// beta 2 through 1.6.2.
    static VersionRange fort_vulnerable();
};

/// Maps a case-insensitive leading product token to a software family.
struct ProductPattern {
    std::string token;
    Software software;
};

const std::vector<ProductPattern> &default_patterns();

struct Fingerprint {
    Software software = Software::Unknown;
    std::optional<Version> version;
};

Fingerprint fingerprint(std::string_view user_agent,
                        const std::vector<ProductPattern> &patterns = default_patterns());

/// "product/version" for a known family; inverse of fingerprint() on
/// well-formed tokens.
std::string format_user_agent(std::string_view product, const Version &version);

enum class VulnClass { Vulnerable, NotVulnerable, NotApplicable, Unknown };

std::string_view to_string(VulnClass c);
std::optional<VulnClass> parse_vuln_class(std::string_view text);

VulnClass classify(Software software, const std::optional<Version> &version, const VersionRange &range);

using Timestamp = std::chrono::sys_seconds;

struct ClientObservation {
    Timestamp timestamp{};
    std::string source;
    std::string user_agent;
    Software software = Software::Unknown;
    std::optional<Version> version;
    VulnClass vuln_class = VulnClass::Unknown;
};

ClientObservation observe(Timestamp ts, std::string source, std::string user_agent,
                          const VersionRange &range = VersionRange::fort_vulnerable());

/// One JSON object per line with keys ts, src, ua, sw, ver, class.
std::string to_json_line(const ClientObservation &obs);
/// Throws std::invalid_argument on malformed lines.
ClientObservation from_json_line(std::string_view line);

struct Summary {
    std::size_t total_requests = 0;
    std::size_t distinct_sources = 0;
    std::map<VulnClass, std::size_t> requests;
    /// Distinct source addresses seen with each class.
    std::map<VulnClass, std::size_t> sources;

    std::string to_json() const;
};

Summary summarize(const std::vector<ClientObservation> &log);

/// Reads a JSON-lines log; blank lines are skipped.
std::vector<ClientObservation> read_log(std::string_view text);

std::string format_timestamp(Timestamp ts);
/// "YYYY-MM-DDTHH:MM:SSZ" (fractional seconds and offsets rejected).
Timestamp parse_timestamp(std::string_view text);

} // namespace kiln::fingerprint
