#pragma once

// Encoders and strict parsers for the RPKI object types: resource
// certificates, CRLs, and CMS signed objects carrying manifests or ROAs.

#include "kiln/bytes.hpp"
#include "kiln/crypto.hpp"
#include "kiln/der.hpp"
#include "kiln/resources.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kiln::objects {

namespace oid {
inline const der::Oid kSha256WithRsa{{1, 2, 840, 113549, 1, 1, 11}};
inline const der::Oid kRsaEncryption{{1, 2, 840, 113549, 1, 1, 1}};
inline const der::Oid kSha256{{2, 16, 840, 1, 101, 3, 4, 2, 1}};
inline const der::Oid kCommonName{{2, 5, 4, 3}};
inline const der::Oid kSubjectKeyId{{2, 5, 29, 14}};
inline const der::Oid kKeyUsage{{2, 5, 29, 15}};
inline const der::Oid kBasicConstraints{{2, 5, 29, 19}};
inline const der::Oid kCrlNumber{{2, 5, 29, 20}};
inline const der::Oid kAuthorityKeyId{{2, 5, 29, 35}};
inline const der::Oid kIpAddrBlocks{{1, 3, 6, 1, 5, 5, 7, 1, 7}};
inline const der::Oid kAsIdentifiers{{1, 3, 6, 1, 5, 5, 7, 1, 8}};
inline const der::Oid kSubjectInfoAccess{{1, 3, 6, 1, 5, 5, 7, 1, 11}};
inline const der::Oid kCaRepository{{1, 3, 6, 1, 5, 5, 7, 48, 5}};
inline const der::Oid kRpkiManifest{{1, 3, 6, 1, 5, 5, 7, 48, 10}};
inline const der::Oid kSignedObject{{1, 3, 6, 1, 5, 5, 7, 48, 11}};
inline const der::Oid kSignedData{{1, 2, 840, 113549, 1, 7, 2}};
inline const der::Oid kContentTypeAttr{{1, 2, 840, 113549, 1, 9, 3}};
inline const der::Oid kMessageDigestAttr{{1, 2, 840, 113549, 1, 9, 4}};
inline const der::Oid kManifestContent{{1, 2, 840, 113549, 1, 9, 16, 1, 26}};
inline const der::Oid kRoaContent{{1, 2, 840, 113549, 1, 9, 16, 1, 24}};
} // namespace oid

struct CertUris {
    std::string repository;    // CA only
    std::string manifest;      // CA only
    std::string signed_object; // EE only
};

/// Fields of a resource certificate. `key_usage` is the raw BIT STRING
/// content and may be arbitrarily long.
struct ResourceCert {
    std::uint64_t serial = 1;
    std::string issuer;
    std::string subject;
    der::Time not_before{};
    der::Time not_after{};
    Bytes key_usage;
    Resources resources;
    CertUris uris;
    bool is_ca = false;
    Bytes public_key_info;
    Bytes subject_key_id;
    std::optional<Bytes> authority_key_id;
};

/// Extension { keyUsage, critical, OCTET STRING { BIT STRING content } }.
der::Value key_usage_extension(ByteView bit_string_content);

Bytes encode_certificate(const ResourceCert &cert, const crypto::Signer &issuer);

struct ParsedCertificate {
    ResourceCert fields;
    bool has_key_usage = false;
    bool key_usage_critical = false;
    bool has_basic_constraints = false;
    Bytes tbs;
    Bytes signature;
};

/// Strict structural parse. Key-usage content is kept verbatim (lax); its
/// semantics are left to keyusage::validate_safe. Throws der::Error.
ParsedCertificate parse_certificate(ByteView bytes);

bool verify_certificate_signature(const ParsedCertificate &cert, ByteView issuer_public_key_info);

// ---------------------------------------------------------------------------

struct Crl {
    std::string issuer;
    der::Time this_update{};
    der::Time next_update{};
    std::vector<std::uint64_t> revoked;
    std::uint64_t crl_number = 1;
    Bytes authority_key_id;
};

Bytes encode_crl(const Crl &crl, const crypto::Signer &issuer);

struct ParsedCrl {
    Crl fields;
    Bytes tbs;
    Bytes signature;
};

ParsedCrl parse_crl(ByteView bytes);

// ---------------------------------------------------------------------------

struct FileAndHash {
    std::string file;
    Bytes hash;

    friend bool operator==(const FileAndHash &, const FileAndHash &) = default;
};

struct Manifest {
    std::uint64_t number = 1;
    der::Time this_update{};
    der::Time next_update{};
    std::vector<FileAndHash> files;
};

Bytes encode_manifest_content(const Manifest &manifest);
Manifest parse_manifest_content(ByteView econtent);

struct RoaPrefix {
    IpPrefix prefix;
    std::optional<unsigned> max_length;

    friend bool operator==(const RoaPrefix &, const RoaPrefix &) = default;
};

struct Roa {
    std::uint32_t asn = 0;
    std::vector<RoaPrefix> prefixes;
};

Bytes encode_roa_content(const Roa &roa);
Roa parse_roa_content(ByteView econtent);

/// Wraps `econtent` in CMS SignedData signed by `ee_signer`, embedding the
/// already-encoded EE certificate.
Bytes encode_signed_object(const der::Oid &content_type, ByteView econtent, ByteView ee_certificate,
                           const crypto::Signer &ee_signer);

struct ParsedSignedObject {
    der::Oid content_type;
    Bytes econtent;
    Bytes ee_certificate_der;
    ParsedCertificate ee_certificate;
    Bytes signer_key_id;
    Bytes signed_attrs; // re-tagged as SET, i.e. the signed bytes
    std::optional<der::Oid> content_type_attr;
    std::optional<Bytes> message_digest_attr;
    Bytes signature;
};

ParsedSignedObject parse_signed_object(ByteView bytes);

/// EE signature over the signed attributes, plus the content-type and
/// message-digest attribute bindings.
bool verify_signed_object(const ParsedSignedObject &object);

} // namespace kiln::objects
