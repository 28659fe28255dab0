#pragma once

#include "kiln/bytes.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

namespace kiln::crypto {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(ByteView data);
Bytes sha256_bytes(ByteView data);
Bytes sha1(ByteView data);

class SigningFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Produces RSA-2048 / SHA-256 PKCS#1 v1.5 signatures. Implementations must
/// allow concurrent sign() calls.
class Signer {
public:
    virtual ~Signer() = default;

    /// DER SubjectPublicKeyInfo.
    virtual const Bytes &public_key_info() const = 0;
    virtual Bytes sign(ByteView message) const = 0;

    /// SHA-1 over the subjectPublicKey bits (the RPKI key identifier).
    Bytes key_id() const;
};

class RsaSigner final : public Signer {
public:
    static std::shared_ptr<RsaSigner> generate(int bits = 2048);
    static std::shared_ptr<RsaSigner> from_pem(const std::string &pem);
    static std::shared_ptr<RsaSigner> load_or_generate(const std::filesystem::path &pem_path);

    ~RsaSigner() override;
    RsaSigner(const RsaSigner &) = delete;
    RsaSigner &operator=(const RsaSigner &) = delete;

    const Bytes &public_key_info() const override { return spki_; }
    Bytes sign(ByteView message) const override;
    std::string to_pem() const;

private:
    struct Key;
    explicit RsaSigner(std::unique_ptr<Key> key);

    std::unique_ptr<Key> key_;
    Bytes spki_;
};

/// SHA-256 with RSA PKCS#1 v1.5 over `message`. False on any failure,
/// including an unparseable key.
bool verify_rsa_sha256(ByteView public_key_info, ByteView message, ByteView signature);

/// Extracts the subjectPublicKey bits from a DER SubjectPublicKeyInfo.
Bytes subject_public_key_bits(ByteView public_key_info);

} // namespace kiln::crypto
