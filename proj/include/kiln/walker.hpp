#pragma once

// Bounds-safe relying-party walker. Fetches a repository from a directory
// or an RRDP notification URL, validates every object top-down from the
// trust anchor, and keeps going after rejections.
//
// Per-object checks run in a fixed order and the first failure wins:
//   structure -> signature -> manifest hash -> key usage -> resources

#include "kiln/bytes.hpp"
#include "kiln/keyusage.hpp"
#include "kiln/objects.hpp"
#include "kiln/resources.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kiln::walker {

enum class Verdict { Accept, Reject, Skip };

enum class Reason {
    None,
    // structure
    Truncated,
    NonMinimalLength,
    IndefiniteLength,
    OversizeContent,
    Malformed,
    // signature
    BadSignature,
    // manifest hash
    HashMismatch,
    // key usage
    WrongLength,
    WrongUnusedBits,
    WrongBits,
    DisallowedBits,
    MissingKeyUsage,
    // resources
    ResourceExcess,
    // repository shape
    MissingObject,
    NotOnManifest,
    ParentRejected,
};

std::string_view to_string(Verdict v);
std::string_view to_string(Reason r);
std::optional<Reason> parse_reason(std::string_view text);

enum class Stage { Structure, Signature, Hash, KeyUsage, Resources };

std::string_view to_string(Stage s);
/// The order validate_object runs its stages in.
const std::vector<Stage> &check_order();

enum class ObjectType { Certificate, Manifest, Roa, Crl };

/// Guessed from the URI extension; absent for unknown extensions.
std::optional<ObjectType> object_type_for(const std::string &uri);

struct ObjectContext {
    ObjectType type = ObjectType::Certificate;
    /// SubjectPublicKeyInfo of the issuing CA (the object's own key for the
    /// trust anchor).
    Bytes issuer_public_key_info;
    /// Absent skips the resource stage (trust anchor).
    std::optional<Resources> issuer_resources;
    /// SHA-256 from the issuing manifest; absent skips the hash stage.
    std::optional<Bytes> expected_hash;
    /// Key-usage profile expected of the certificate being checked (the EE
    /// certificate for signed objects).
    keyusage::CertKind expected_kind = keyusage::CertKind::CA;
};

struct ObjectResult {
    Verdict verdict = Verdict::Accept;
    Reason reason = Reason::None;
    std::string detail;
    /// Stages that ran, in order; the last one decided a rejection.
    std::vector<Stage> stages;

    std::optional<objects::ParsedCertificate> certificate; // Certificate
    std::optional<objects::Manifest> manifest;             // Manifest
    std::optional<objects::Roa> roa;                       // Roa

    bool accepted() const noexcept { return verdict == Verdict::Accept; }
};

/// Never throws for any input bytes.
ObjectResult validate_object(ByteView bytes, const ObjectContext &context);

// ---------------------------------------------------------------------------

struct ObjectOutcome {
    std::string uri;
    Verdict verdict = Verdict::Accept;
    Reason reason = Reason::None;
    std::string detail;
};

struct AcceptedRoa {
    std::uint32_t asn = 0;
    IpPrefix prefix;
    unsigned max_length = 0;

    friend bool operator==(const AcceptedRoa &, const AcceptedRoa &) = default;
};

struct RrdpInfo {
    std::string notification_uri;
    std::string session_id;
    std::uint64_t serial = 0;
    std::string snapshot_uri;
    bool snapshot_hash_ok = false;
};

struct ValidationReport {
    std::string source;
    std::vector<ObjectOutcome> outcomes;
    std::vector<AcceptedRoa> accepted_roas;
    std::size_t error_count = 0;
    bool completed = false;
    std::optional<RrdpInfo> rrdp;

    const ObjectOutcome *find(const std::string &uri) const;
    std::string to_json() const;
    std::string to_table() const;
};

enum class WalkErrc { SourceUnreachable, TalMismatch, InvalidSource };

std::string_view to_string(WalkErrc code);

class WalkError : public std::runtime_error {
public:
    WalkError(WalkErrc code, const std::string &detail);
    WalkErrc code() const noexcept { return code_; }

private:
    WalkErrc code_;
};

struct WalkOptions {
    std::size_t max_depth = 32;
    /// Called once per Reject, in walk order.
    std::function<void(const ObjectOutcome &)> on_reject;
    std::string user_agent = "rpki-kiln-walker/1.0";
    int timeout_seconds = 5;
};

/// Walks repository objects keyed by URI.
ValidationReport walk_objects(const std::map<std::string, Bytes> &objects, ByteView tal,
                              const WalkOptions &options = {});

/// `source` is a directory written by forge, or an http(s) URL of an RRDP
/// notification (a bare base URL gets "/notification.xml" appended).
/// Throws WalkError.
ValidationReport walk(const std::string &source, ByteView tal, const WalkOptions &options = {});

/// Fetches and hash-checks an RRDP snapshot. Throws WalkError.
std::map<std::string, Bytes> fetch_rrdp(const std::string &notification_url, const WalkOptions &options,
                                        RrdpInfo &info);

/// Reads every non-TAL file under `dir`, keyed by `base` + relative path.
std::map<std::string, Bytes> load_directory(const std::string &dir, const std::string &base);

} // namespace kiln::walker
