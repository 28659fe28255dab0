#include "kiln/crypto.hpp"

#include "kiln/der.hpp"

#include <openssl/bio.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>
#include <openssl/sha.h>
#include <openssl/x509.h>

#include <fstream>
#include <sstream>

namespace kiln::crypto {

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY *p) const { EVP_PKEY_free(p); }
};
struct CtxDeleter {
    void operator()(EVP_MD_CTX *c) const { EVP_MD_CTX_free(c); }
};
struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX *c) const { EVP_PKEY_CTX_free(c); }
};
struct BioDeleter {
    void operator()(BIO *b) const { BIO_free(b); }
};

using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;

Bytes encode_spki(EVP_PKEY *pkey) {
    int len = i2d_PUBKEY(pkey, nullptr);
    if (len <= 0) throw SigningFailure("cannot encode public key");
    Bytes out(static_cast<std::size_t>(len));
    unsigned char *p = out.data();
    i2d_PUBKEY(pkey, &p);
    return out;
}

} // namespace

Sha256Digest sha256(ByteView data) {
    Sha256Digest out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Bytes sha256_bytes(ByteView data) {
    auto d = sha256(data);
    return Bytes(d.begin(), d.end());
}

Bytes sha1(ByteView data) {
    Bytes out(SHA_DIGEST_LENGTH);
    SHA1(data.data(), data.size(), out.data());
    return out;
}

Bytes Signer::key_id() const { return sha1(subject_public_key_bits(public_key_info())); }

struct RsaSigner::Key {
    PkeyPtr pkey;
};

RsaSigner::RsaSigner(std::unique_ptr<Key> key) : key_(std::move(key)), spki_(encode_spki(key_->pkey.get())) {}

RsaSigner::~RsaSigner() = default;

std::shared_ptr<RsaSigner> RsaSigner::generate(int bits) {
    std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter> ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr));
    EVP_PKEY *raw = nullptr;
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 || EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), bits) <= 0 ||
        EVP_PKEY_keygen(ctx.get(), &raw) <= 0)
        throw SigningFailure("RSA key generation failed");
    auto key = std::make_unique<Key>();
    key->pkey.reset(raw);
    return std::shared_ptr<RsaSigner>(new RsaSigner(std::move(key)));
}

std::shared_ptr<RsaSigner> RsaSigner::from_pem(const std::string &pem) {
    std::unique_ptr<BIO, BioDeleter> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    EVP_PKEY *raw = bio ? PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr) : nullptr;
    if (!raw) throw SigningFailure("cannot parse PEM private key");
    auto key = std::make_unique<Key>();
    key->pkey.reset(raw);
    if (EVP_PKEY_base_id(raw) != EVP_PKEY_RSA) throw SigningFailure("private key is not RSA");
    return std::shared_ptr<RsaSigner>(new RsaSigner(std::move(key)));
}

std::shared_ptr<RsaSigner> RsaSigner::load_or_generate(const std::filesystem::path &pem_path) {
    if (std::filesystem::exists(pem_path)) {
        std::ifstream in(pem_path);
        std::stringstream ss;
        ss << in.rdbuf();
        return from_pem(ss.str());
    }
    auto signer = generate();
    if (pem_path.has_parent_path()) std::filesystem::create_directories(pem_path.parent_path());
    std::ofstream out(pem_path);
    out << signer->to_pem();
    if (!out) throw SigningFailure("cannot write key to " + pem_path.string());
    return signer;
}

std::string RsaSigner::to_pem() const {
    std::unique_ptr<BIO, BioDeleter> bio(BIO_new(BIO_s_mem()));
    if (!bio || PEM_write_bio_PrivateKey(bio.get(), key_->pkey.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1)
        throw SigningFailure("cannot serialise private key");
    char *data = nullptr;
    long len = BIO_get_mem_data(bio.get(), &data);
    return std::string(data, static_cast<std::size_t>(len));
}

Bytes RsaSigner::sign(ByteView message) const {
    MdCtxPtr ctx(EVP_MD_CTX_new());
    std::size_t len = 0;
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key_->pkey.get()) != 1 ||
        EVP_DigestSign(ctx.get(), nullptr, &len, message.data(), message.size()) != 1)
        throw SigningFailure("signing setup failed");
    Bytes sig(len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1)
        throw SigningFailure("signing failed");
    sig.resize(len);
    return sig;
}

bool verify_rsa_sha256(ByteView public_key_info, ByteView message, ByteView signature) {
    const unsigned char *p = public_key_info.data();
    PkeyPtr pkey(d2i_PUBKEY(nullptr, &p, static_cast<long>(public_key_info.size())));
    if (!pkey || EVP_PKEY_base_id(pkey.get()) != EVP_PKEY_RSA) return false;
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, pkey.get()) != 1) return false;
    return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(), message.size()) == 1;
}

Bytes subject_public_key_bits(ByteView public_key_info) {
    auto spki = der::decode_exact(public_key_info);
    der::expect_tag(spki, der::tags::Sequence);
    der::Reader r(spki);
    r.next(der::tags::Sequence);
    auto bits = der::decode_bit_string(r.next(der::tags::BitString), true);
    r.finish();
    return bits.bytes;
}

} // namespace kiln::crypto
