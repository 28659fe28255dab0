#include "kiln/objects.hpp"

#include <algorithm>
#include <set>

namespace kiln::objects {

using der::Errc;
using der::Value;
namespace tags = der::tags;

namespace {

[[noreturn]] void malformed(const std::string &what) { throw der::Error(Errc::Malformed, what); }

Value rsa_sha256_alg() { return der::seq({der::make_oid(oid::kSha256WithRsa), der::make_null()}); }

Value sha256_alg() { return der::seq({der::make_oid(oid::kSha256)}); }

void expect_alg(const Value &alg, const der::Oid &expected) {
    der::Reader r(alg);
    if (der::decode_oid(r.next(tags::Oid)) != expected) malformed("unexpected algorithm " + expected.to_string());
    if (auto params = r.next_if(tags::Null)) der::decode_null(*params);
    r.finish();
}

bool printable(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               std::string_view(" '()+,-./:=?").find(c) != std::string_view::npos;
    });
}

Value encode_name(const std::string &cn) {
    const der::Tag string_tag = printable(cn) ? tags::PrintableString : tags::Utf8String;
    return der::seq({der::set_of({der::seq({der::make_oid(oid::kCommonName), der::make_string(string_tag, cn)})})});
}

std::string decode_name(const Value &name) {
    der::expect_tag(name, tags::Sequence);
    std::string cn;
    for (const auto &rdn : der::children(name)) {
        der::expect_tag(rdn, tags::Set);
        for (const auto &atv : der::children(rdn)) {
            der::Reader r(atv);
            auto type = der::decode_oid(r.next(tags::Oid));
            const auto &val = r.next();
            r.finish();
            if (type != oid::kCommonName) continue;
            if (val.tag == tags::PrintableString || val.tag == tags::Utf8String)
                cn = der::decode_string(val, val.tag);
            else
                malformed("unsupported name string type");
        }
    }
    return cn;
}

Value encode_serial(std::uint64_t serial) {
    Bytes mag;
    for (int shift = 56; shift >= 0; shift -= 8) mag.push_back(static_cast<std::uint8_t>((serial >> shift) & 0xFF));
    return der::make_unsigned_integer(mag);
}

std::uint64_t decode_serial(const Value &v) {
    auto bytes = der::decode_integer_bytes(v);
    if (bytes[0] & 0x80) malformed("negative serial");
    if (bytes[0] == 0 && bytes.size() > 1) bytes.erase(bytes.begin());
    if (bytes.size() > 8) malformed("serial wider than 64 bits");
    std::uint64_t out = 0;
    for (auto b : bytes) out = (out << 8) | b;
    return out;
}

Value extension(const der::Oid &id, bool critical, const Value &inner) {
    std::vector<Value> items{der::make_oid(id)};
    if (critical) items.push_back(der::make_boolean(true));
    items.push_back(der::make_octet_string(der::encode(inner)));
    return der::seq(items);
}

Value access_description(const der::Oid &method, const std::string &uri) {
    return der::seq({der::make_oid(method), Value{tags::context(6, false), to_bytes(uri)}});
}

Value key_id_aki(ByteView key_id) { return der::seq({Value{tags::context(0, false), Bytes(key_id.begin(), key_id.end())}}); }

Bytes decode_aki(const Value &v) {
    der::Reader r(v);
    auto id = r.next(tags::context(0, false));
    r.finish();
    return id.content;
}

Bytes sign_and_wrap(const Value &tbs, const crypto::Signer &signer) {
    const Bytes tbs_der = der::encode(tbs);
    const Bytes sig = signer.sign(tbs_der);
    return der::encode(der::seq({tbs, rsa_sha256_alg(), der::make_bit_string({0, sig})}));
}

struct SignedEnvelope {
    Bytes tbs;
    Bytes signature;
    Value tbs_value;
};

SignedEnvelope open_signed(ByteView bytes) {
    auto outer = der::decode_exact(bytes);
    der::expect_tag(outer, tags::Sequence);
    der::Reader r(outer);
    SignedEnvelope env;
    env.tbs_value = r.next(tags::Sequence);
    expect_alg(r.next(tags::Sequence), oid::kSha256WithRsa);
    auto sig = der::decode_bit_string(r.next(tags::BitString), true);
    r.finish();
    if (sig.unused_bits != 0) malformed("signature has padding bits");
    env.tbs = der::encode(env.tbs_value);
    env.signature = std::move(sig.bytes);
    return env;
}

} // namespace

// ---------------------------------------------------------------------------

Value key_usage_extension(ByteView bit_string_content) {
    return extension(oid::kKeyUsage, true, der::make_bit_string_raw(bit_string_content));
}

Bytes encode_certificate(const ResourceCert &cert, const crypto::Signer &issuer) {
    std::vector<Value> exts;
    if (cert.is_ca) exts.push_back(extension(oid::kBasicConstraints, true, der::seq({der::make_boolean(true)})));
    exts.push_back(extension(oid::kSubjectKeyId, false, der::make_octet_string(cert.subject_key_id)));
    if (cert.authority_key_id) exts.push_back(extension(oid::kAuthorityKeyId, false, key_id_aki(*cert.authority_key_id)));
    exts.push_back(key_usage_extension(cert.key_usage));

    std::vector<Value> sia;
    if (cert.is_ca) {
        sia.push_back(access_description(oid::kCaRepository, cert.uris.repository));
        sia.push_back(access_description(oid::kRpkiManifest, cert.uris.manifest));
    } else {
        sia.push_back(access_description(oid::kSignedObject, cert.uris.signed_object));
    }
    exts.push_back(extension(oid::kSubjectInfoAccess, false, der::seq(sia)));
    if (!cert.resources.prefixes.empty())
        exts.push_back(extension(oid::kIpAddrBlocks, true, encode_ip_blocks(cert.resources.prefixes)));
    if (!cert.resources.asns.empty())
        exts.push_back(extension(oid::kAsIdentifiers, true, encode_as_identifiers(cert.resources.asns)));

    Value tbs = der::seq({
        der::explicit_tag(0, der::make_integer(2)),
        encode_serial(cert.serial),
        rsa_sha256_alg(),
        encode_name(cert.issuer),
        der::seq({der::make_time(cert.not_before), der::make_time(cert.not_after)}),
        encode_name(cert.subject),
        der::decode_exact(cert.public_key_info),
        der::explicit_tag(3, der::seq(exts)),
    });
    return sign_and_wrap(tbs, issuer);
}

ParsedCertificate parse_certificate(ByteView bytes) {
    auto env = open_signed(bytes);
    ParsedCertificate out;
    out.tbs = std::move(env.tbs);
    out.signature = std::move(env.signature);
    auto &f = out.fields;

    der::Reader r(env.tbs_value);
    auto version = der::decode_exact(r.next(tags::context(0)).content);
    if (der::decode_int64(version) != 2) malformed("certificate version must be v3");
    f.serial = decode_serial(r.next(tags::Integer));
    expect_alg(r.next(tags::Sequence), oid::kSha256WithRsa);
    f.issuer = decode_name(r.next(tags::Sequence));
    {
        der::Reader validity(r.next(tags::Sequence));
        f.not_before = der::decode_time(validity.next());
        f.not_after = der::decode_time(validity.next());
        validity.finish();
    }
    f.subject = decode_name(r.next(tags::Sequence));
    const auto &spki = r.next(tags::Sequence);
    f.public_key_info = der::encode(spki);
    {
        der::Reader key(spki);
        expect_alg(key.next(tags::Sequence), oid::kRsaEncryption);
        der::decode_bit_string(key.next(tags::BitString), true);
        key.finish();
    }
    auto ext_wrapper = r.next(tags::context(3));
    r.finish();

    auto ext_list = der::decode_exact(ext_wrapper.content);
    der::expect_tag(ext_list, tags::Sequence);
    std::set<der::Oid> seen;
    for (const auto &ext : der::children(ext_list)) {
        der::Reader e(ext);
        auto id = der::decode_oid(e.next(tags::Oid));
        bool critical = false;
        if (auto crit = e.next_if(tags::Boolean)) {
            critical = der::decode_boolean(*crit);
            if (!critical) malformed("DER forbids explicit FALSE criticality");
        }
        auto value = der::decode_exact(der::decode_octet_string(e.next(tags::OctetString)));
        e.finish();
        if (!seen.insert(id).second) malformed("duplicate extension " + id.to_string());

        if (id == oid::kKeyUsage) {
            out.has_key_usage = true;
            out.key_usage_critical = critical;
            f.key_usage = der::decode_bit_string(value, false).content();
        } else if (id == oid::kBasicConstraints) {
            out.has_basic_constraints = true;
            der::Reader bc(value);
            if (auto ca = bc.next_if(tags::Boolean)) f.is_ca = der::decode_boolean(*ca);
            bc.finish();
        } else if (id == oid::kSubjectKeyId) {
            f.subject_key_id = der::decode_octet_string(value);
        } else if (id == oid::kAuthorityKeyId) {
            f.authority_key_id = decode_aki(value);
        } else if (id == oid::kSubjectInfoAccess) {
            der::expect_tag(value, tags::Sequence);
            for (const auto &ad : der::children(value)) {
                der::Reader a(ad);
                auto method = der::decode_oid(a.next(tags::Oid));
                auto uri = to_string(a.next(tags::context(6, false)).content);
                a.finish();
                if (method == oid::kCaRepository) f.uris.repository = uri;
                else if (method == oid::kRpkiManifest) f.uris.manifest = uri;
                else if (method == oid::kSignedObject) f.uris.signed_object = uri;
            }
        } else if (id == oid::kIpAddrBlocks) {
            f.resources.prefixes = decode_ip_blocks(value);
        } else if (id == oid::kAsIdentifiers) {
            f.resources.asns = decode_as_identifiers(value);
        } else if (critical) {
            malformed("unknown critical extension " + id.to_string());
        }
    }
    return out;
}

bool verify_certificate_signature(const ParsedCertificate &cert, ByteView issuer_public_key_info) {
    return crypto::verify_rsa_sha256(issuer_public_key_info, cert.tbs, cert.signature);
}

// ---------------------------------------------------------------------------

Bytes encode_crl(const Crl &crl, const crypto::Signer &issuer) {
    std::vector<Value> items{der::make_integer(1), rsa_sha256_alg(), encode_name(crl.issuer),
                             der::make_time(crl.this_update), der::make_time(crl.next_update)};
    if (!crl.revoked.empty()) {
        std::vector<Value> entries;
        for (auto serial : crl.revoked) entries.push_back(der::seq({encode_serial(serial), der::make_time(crl.this_update)}));
        items.push_back(der::seq(entries));
    }
    items.push_back(der::explicit_tag(0, der::seq({
        extension(oid::kAuthorityKeyId, false, key_id_aki(crl.authority_key_id)),
        extension(oid::kCrlNumber, false, encode_serial(crl.crl_number)),
    })));
    return sign_and_wrap(der::seq(items), issuer);
}

ParsedCrl parse_crl(ByteView bytes) {
    auto env = open_signed(bytes);
    ParsedCrl out;
    out.tbs = std::move(env.tbs);
    out.signature = std::move(env.signature);
    auto &f = out.fields;

    der::Reader r(env.tbs_value);
    if (der::decode_int64(r.next(tags::Integer)) != 1) malformed("CRL version must be v2");
    expect_alg(r.next(tags::Sequence), oid::kSha256WithRsa);
    f.issuer = decode_name(r.next(tags::Sequence));
    f.this_update = der::decode_time(r.next());
    f.next_update = der::decode_time(r.next());
    if (auto revoked = r.next_if(tags::Sequence)) {
        for (const auto &entry : der::children(*revoked)) {
            der::Reader e(entry);
            f.revoked.push_back(decode_serial(e.next(tags::Integer)));
            der::decode_time(e.next());
            e.finish();
        }
    }
    auto ext_wrapper = r.next(tags::context(0));
    r.finish();
    auto ext_list = der::decode_exact(ext_wrapper.content);
    der::expect_tag(ext_list, tags::Sequence);
    for (const auto &ext : der::children(ext_list)) {
        der::Reader e(ext);
        auto id = der::decode_oid(e.next(tags::Oid));
        if (auto crit = e.next_if(tags::Boolean); crit && !der::decode_boolean(*crit))
            malformed("DER forbids explicit FALSE criticality");
        auto value = der::decode_exact(der::decode_octet_string(e.next(tags::OctetString)));
        e.finish();
        if (id == oid::kAuthorityKeyId) f.authority_key_id = decode_aki(value);
        else if (id == oid::kCrlNumber) f.crl_number = decode_serial(value);
    }
    return out;
}

// ---------------------------------------------------------------------------

Bytes encode_manifest_content(const Manifest &manifest) {
    std::vector<Value> files;
    for (const auto &f : manifest.files)
        files.push_back(der::seq({der::make_string(tags::Ia5String, f.file), der::make_bit_string({0, f.hash})}));
    return der::encode(der::seq({
        encode_serial(manifest.number),
        der::make_generalized_time(manifest.this_update),
        der::make_generalized_time(manifest.next_update),
        der::make_oid(oid::kSha256),
        der::seq(files),
    }));
}

Manifest parse_manifest_content(ByteView econtent) {
    auto root = der::decode_exact(econtent);
    der::expect_tag(root, tags::Sequence);
    der::Reader r(root);
    Manifest m;
    m.number = decode_serial(r.next(tags::Integer));
    m.this_update = der::decode_time(r.next(tags::GeneralizedTime));
    m.next_update = der::decode_time(r.next(tags::GeneralizedTime));
    if (der::decode_oid(r.next(tags::Oid)) != oid::kSha256) malformed("manifest hash algorithm must be SHA-256");
    for (const auto &item : der::children(r.next(tags::Sequence))) {
        der::Reader fr(item);
        FileAndHash fh;
        fh.file = der::decode_string(fr.next(tags::Ia5String), tags::Ia5String);
        auto hash = der::decode_bit_string(fr.next(tags::BitString), true);
        fr.finish();
        if (hash.unused_bits != 0 || hash.bytes.size() != 32) malformed("manifest hash must be 256 bits");
        if (fh.file.empty() || fh.file.find('/') != std::string::npos || fh.file == "." || fh.file == "..")
            malformed("bad manifest file name");
        fh.hash = std::move(hash.bytes);
        m.files.push_back(std::move(fh));
    }
    r.finish();
    return m;
}

Bytes encode_roa_content(const Roa &roa) {
    std::vector<AddressFamily> families;
    for (const auto &p : roa.prefixes)
        if (std::find(families.begin(), families.end(), p.prefix.family) == families.end())
            families.push_back(p.prefix.family);
    std::sort(families.begin(), families.end());
    std::vector<Value> blocks;
    for (auto family : families) {
        std::vector<RoaPrefix> list;
        for (const auto &p : roa.prefixes)
            if (p.prefix.family == family) list.push_back(p);
        std::sort(list.begin(), list.end(), [](const RoaPrefix &a, const RoaPrefix &b) { return a.prefix < b.prefix; });
        std::vector<Value> addrs;
        for (const auto &p : list) {
            std::vector<Value> fields{encode_prefix_bits(p.prefix)};
            if (p.max_length) fields.push_back(der::make_integer(*p.max_length));
            addrs.push_back(der::seq(fields));
        }
        blocks.push_back(der::seq({encode_address_family(family), der::seq(addrs)}));
    }
    return der::encode(der::seq({der::make_integer(roa.asn), der::seq(blocks)}));
}

Roa parse_roa_content(ByteView econtent) {
    auto root = der::decode_exact(econtent);
    der::expect_tag(root, tags::Sequence);
    der::Reader r(root);
    Roa roa;
    auto asn = der::decode_int64(r.next(tags::Integer));
    if (asn < 0 || asn > UINT32_MAX) malformed("AS number out of range");
    roa.asn = static_cast<std::uint32_t>(asn);
    for (const auto &block : der::children(r.next(tags::Sequence))) {
        der::Reader b(block);
        auto family = decode_address_family(b.next(tags::OctetString));
        for (const auto &addr : der::children(b.next(tags::Sequence))) {
            der::Reader a(addr);
            RoaPrefix rp{decode_prefix_bits(a.next(tags::BitString), family), std::nullopt};
            if (auto ml = a.next_if(tags::Integer)) {
                auto v = der::decode_int64(*ml);
                const unsigned width = family == AddressFamily::IPv4 ? 32 : 128;
                if (v < rp.prefix.length || v > width) malformed("maxLength out of range");
                rp.max_length = static_cast<unsigned>(v);
            }
            a.finish();
            roa.prefixes.push_back(std::move(rp));
        }
        b.finish();
    }
    r.finish();
    if (roa.prefixes.empty()) malformed("ROA without prefixes");
    return roa;
}

// ---------------------------------------------------------------------------

Bytes encode_signed_object(const der::Oid &content_type, ByteView econtent, ByteView ee_certificate,
                           const crypto::Signer &ee_signer) {
    const auto digest = crypto::sha256(econtent);
    Value signed_attrs = der::set_of({
        der::seq({der::make_oid(oid::kContentTypeAttr), der::set_of({der::make_oid(content_type)})}),
        der::seq({der::make_oid(oid::kMessageDigestAttr), der::set_of({der::make_octet_string(digest)})}),
    });
    const Bytes signature = ee_signer.sign(der::encode(signed_attrs));

    Value signer_info = der::seq({
        der::make_integer(3),
        Value{tags::context(0, false), ee_signer.key_id()},
        sha256_alg(),
        der::implicit_tag(tags::context(0, true), signed_attrs),
        der::seq({der::make_oid(oid::kRsaEncryption), der::make_null()}),
        der::make_octet_string(signature),
    });
    Value signed_data = der::seq({
        der::make_integer(3),
        der::set_of({sha256_alg()}),
        der::seq({der::make_oid(content_type), der::explicit_tag(0, der::make_octet_string(econtent))}),
        Value{tags::context(0, true), Bytes(ee_certificate.begin(), ee_certificate.end())},
        der::set_of({signer_info}),
    });
    return der::encode(der::seq({der::make_oid(oid::kSignedData), der::explicit_tag(0, signed_data)}));
}

ParsedSignedObject parse_signed_object(ByteView bytes) {
    auto root = der::decode_exact(bytes);
    der::expect_tag(root, tags::Sequence);
    der::Reader ci(root);
    if (der::decode_oid(ci.next(tags::Oid)) != oid::kSignedData) malformed("not CMS SignedData");
    auto sd = der::decode_exact(ci.next(tags::context(0)).content);
    ci.finish();
    der::expect_tag(sd, tags::Sequence);

    ParsedSignedObject out;
    der::Reader r(sd);
    if (der::decode_int64(r.next(tags::Integer)) != 3) malformed("SignedData version must be 3");
    {
        auto algs = der::children(r.next(tags::Set));
        if (algs.size() != 1) malformed("exactly one digest algorithm expected");
        expect_alg(algs[0], oid::kSha256);
    }
    {
        der::Reader eci(r.next(tags::Sequence));
        out.content_type = der::decode_oid(eci.next(tags::Oid));
        auto wrapped = der::decode_exact(eci.next(tags::context(0)).content);
        out.econtent = der::decode_octet_string(wrapped);
        eci.finish();
    }
    {
        auto certs = der::decode_all(r.next(tags::context(0)).content);
        if (certs.size() != 1) malformed("exactly one EE certificate expected");
        out.ee_certificate_der = der::encode(certs[0]);
        out.ee_certificate = parse_certificate(out.ee_certificate_der);
    }
    auto infos = der::children(r.next(tags::Set));
    r.finish();
    if (infos.size() != 1) malformed("exactly one SignerInfo expected");

    der::Reader si(infos[0]);
    if (der::decode_int64(si.next(tags::Integer)) != 3) malformed("SignerInfo version must be 3");
    out.signer_key_id = si.next(tags::context(0, false)).content;
    expect_alg(si.next(tags::Sequence), oid::kSha256);
    auto attrs = si.next(tags::context(0, true));
    auto sig_alg = si.next(tags::Sequence);
    {
        der::Reader a(sig_alg);
        auto alg = der::decode_oid(a.next(tags::Oid));
        if (alg != oid::kRsaEncryption && alg != oid::kSha256WithRsa) malformed("unsupported signature algorithm");
        if (auto params = a.next_if(tags::Null)) der::decode_null(*params);
        a.finish();
    }
    out.signature = der::decode_octet_string(si.next(tags::OctetString));
    si.finish();

    Value as_set{tags::Set, attrs.content};
    out.signed_attrs = der::encode(as_set);
    std::set<der::Oid> seen;
    for (const auto &attr : der::children(as_set)) {
        der::Reader a(attr);
        auto type = der::decode_oid(a.next(tags::Oid));
        auto values = der::children(a.next(tags::Set));
        a.finish();
        if (!seen.insert(type).second) malformed("duplicate signed attribute");
        if (type == oid::kContentTypeAttr) {
            if (values.size() != 1) malformed("content-type attribute must be single-valued");
            out.content_type_attr = der::decode_oid(values[0]);
        } else if (type == oid::kMessageDigestAttr) {
            if (values.size() != 1) malformed("message-digest attribute must be single-valued");
            out.message_digest_attr = der::decode_octet_string(values[0]);
        }
    }
    return out;
}

bool verify_signed_object(const ParsedSignedObject &object) {
    if (!object.content_type_attr || *object.content_type_attr != object.content_type) return false;
    if (!object.message_digest_attr || *object.message_digest_attr != crypto::sha256_bytes(object.econtent)) return false;
    if (object.signer_key_id != object.ee_certificate.fields.subject_key_id) return false;
    return crypto::verify_rsa_sha256(object.ee_certificate.fields.public_key_info, object.signed_attrs, object.signature);
}

} // namespace kiln::objects
