#pragma once

// Builds signature-valid RPKI publication-point repositories, optionally
// carrying crafted key-usage extensions.

#include "kiln/bytes.hpp"
#include "kiln/crypto.hpp"
#include "kiln/der.hpp"
#include "kiln/keyusage.hpp"
#include "kiln/objects.hpp"
#include "kiln/resources.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kiln::forge {

enum class ForgeErrc {
    PayloadEmpty,
    PayloadTooLong,
    ResourceExcess,
    SigningFailure,
    EmptyFileList,
    EmptyPrefixList,
    DanglingReference,
    DuplicateUri,
    InvalidScenario,
};

std::string_view to_string(ForgeErrc code);

class ForgeError : public std::runtime_error {
public:
    ForgeError(ForgeErrc code, const std::string &detail);
    ForgeErrc code() const noexcept { return code_; }

private:
    ForgeErrc code_;
};

/// Longest attacker payload; keeps crafted content within 64 bytes.
inline constexpr std::size_t kMaxPayload = 61;
/// Constant third content byte of crafted values (any value below 0x08
/// satisfies the constraint).
inline constexpr std::uint8_t kCraftedThirdByte = 0x04;

struct MutationSpec {
    enum class Target { None, KeyUsageOverflow };

    Target target = Target::None;
    Bytes payload;
    keyusage::CertKind kind = keyusage::CertKind::CA;
    /// Test hook: replaces the third crafted byte.
    std::optional<std::uint8_t> third_byte_override;

    bool active() const noexcept { return target == Target::KeyUsageOverflow; }
    static MutationSpec overflow(Bytes payload, keyusage::CertKind kind = keyusage::CertKind::CA);
};

/// [expected unused-bits byte, expected bits byte, 0x04, payload...].
/// Throws ForgeError (PayloadEmpty, PayloadTooLong).
keyusage::CraftedKu craft_overflow_ku(ByteView payload, keyusage::CertKind kind);

/// Key-usage content to embed for `kind` under `mutation`.
Bytes key_usage_content(const MutationSpec &mutation, keyusage::CertKind kind);

// ---------------------------------------------------------------------------
// Object builders

struct Validity {
    der::Time not_before{};
    der::Time not_after{};

    static Validity starting(der::Time now, std::chrono::days length = std::chrono::days{30});
};

struct CaParams {
    std::string issuer_name;
    std::string subject_name;
    std::uint64_t serial = 1;
    Validity validity;
    Resources resources;
    objects::CertUris uris;
};

Bytes build_trust_anchor(const crypto::Signer &signer, const CaParams &params);

/// Throws ResourceExcess when `params.resources` exceeds `parent_resources`.
Bytes build_ca_certificate(const crypto::Signer &parent, const Resources &parent_resources,
                           const crypto::Signer &subject, const CaParams &params, const MutationSpec &mutation);

Bytes build_crl(const crypto::Signer &issuer, const std::string &issuer_name, const Validity &validity,
                const std::vector<std::uint64_t> &revoked, std::uint64_t crl_number = 1);

struct ManifestPayload {
    std::uint64_t number = 1;
    std::vector<objects::FileAndHash> files;
};

struct RoaPayload {
    std::uint32_t asn = 0;
    std::vector<objects::RoaPrefix> prefixes;
};

enum class SignedObjectKind { Manifest, Roa };

struct SignedObjectParams {
    SignedObjectKind kind = SignedObjectKind::Roa;
    std::string issuer_name;
    Resources issuer_resources;
    std::string object_uri;
    std::uint64_t ee_serial = 1;
    Validity validity;
    ManifestPayload manifest;
    RoaPayload roa;
    /// Mutation applied to the embedded EE certificate.
    MutationSpec ee_mutation;
};

/// CMS signed object with a one-off EE certificate issued by `issuer`.
Bytes build_signed_object(const crypto::Signer &issuer, const crypto::Signer &ee_key, const SignedObjectParams &params);

// ---------------------------------------------------------------------------
// Keys

/// Named key source. Repeated lookups of a name return the same key.
class KeyRing {
public:
    virtual ~KeyRing() = default;
    virtual std::shared_ptr<const crypto::Signer> key(const std::string &name) = 0;
};

/// Generates keys on first use and keeps them for the object's lifetime.
class MemoryKeyRing final : public KeyRing {
public:
    std::shared_ptr<const crypto::Signer> key(const std::string &name) override;

private:
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const crypto::Signer>> keys_;
};

/// One PEM file per key name under a directory; missing keys are generated
/// and written.
class DirectoryKeyRing final : public KeyRing {
public:
    explicit DirectoryKeyRing(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::shared_ptr<const crypto::Signer> key(const std::string &name) override;

private:
    std::filesystem::path dir_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const crypto::Signer>> keys_;
};

// ---------------------------------------------------------------------------
// Scenarios and snapshots

struct CaSpec {
    std::string name;
    std::string parent = "ta";
    Resources resources;
    MutationSpec mutation;
};

struct RoaSpec {
    std::string name;
    std::string issuer = "ta";
    std::uint32_t asn = 0;
    std::vector<objects::RoaPrefix> prefixes;
    MutationSpec ee_mutation;
};

struct Scenario {
    std::string host = "rpki.kiln.test";
    Resources ta_resources;
    std::vector<CaSpec> cas;
    std::vector<RoaSpec> roas;
    der::Time now{};
    std::chrono::days validity{30};

    /// One TA, one child CA with a crafted key usage (ten 0x41 bytes), one
    /// benign ROA issued directly by the TA.
    static Scenario default_attack(der::Time now);
    /// One TA and one benign ROA.
    static Scenario benign(der::Time now);
};

struct RepoSnapshot {
    std::map<std::string, Bytes> objects;
    Bytes tal;
    std::string ta_uri;
    std::string session_id;
    std::uint64_t serial = 1;
    std::vector<std::string> malicious_uris;

    std::size_t malicious_count() const noexcept { return malicious_uris.size(); }
};

RepoSnapshot assemble_repository(const Scenario &scenario, KeyRing &keys);

/// TAL text: the TA URI, a blank line, base64 SubjectPublicKeyInfo.
Bytes make_tal(const std::string &ta_uri, ByteView public_key_info);

struct Tal {
    std::vector<std::string> uris;
    Bytes public_key_info;
};

Tal parse_tal(ByteView text);

/// "rsync://host/a/b.cer" -> "a/b.cer". Throws std::invalid_argument for
/// URIs without a host part or with "." / ".." segments.
std::filesystem::path uri_to_relative_path(const std::string &uri);
/// "rsync://host/" for a URI.
std::string uri_base(const std::string &uri);

/// Writes every object under `dir` plus `ta.tal`.
void export_repository(const RepoSnapshot &snapshot, const std::filesystem::path &dir);
/// Reads a directory written by export_repository. The session id is
/// derived from the TAL and TA bytes.
RepoSnapshot import_repository(const std::filesystem::path &dir);

/// Stable UUID-formatted identifier derived from `seed`.
std::string derive_session_id(ByteView seed);

} // namespace kiln::forge
