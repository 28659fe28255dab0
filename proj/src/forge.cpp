#include "kiln/forge.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace kiln::forge {

using keyusage::CertKind;

std::string_view to_string(ForgeErrc code) {
    switch (code) {
    case ForgeErrc::PayloadEmpty: return "PayloadEmpty";
    case ForgeErrc::PayloadTooLong: return "PayloadTooLong";
    case ForgeErrc::ResourceExcess: return "ResourceExcess";
    case ForgeErrc::SigningFailure: return "SigningFailure";
    case ForgeErrc::EmptyFileList: return "EmptyFileList";
    case ForgeErrc::EmptyPrefixList: return "EmptyPrefixList";
    case ForgeErrc::DanglingReference: return "DanglingReference";
    case ForgeErrc::DuplicateUri: return "DuplicateUri";
    case ForgeErrc::InvalidScenario: return "InvalidScenario";
    }
    return "InvalidScenario";
}

ForgeError::ForgeError(ForgeErrc code, const std::string &detail)
    : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)), code_(code) {}

MutationSpec MutationSpec::overflow(Bytes payload, CertKind kind) {
    MutationSpec m;
    m.target = Target::KeyUsageOverflow;
    m.payload = std::move(payload);
    m.kind = kind;
    return m;
}

keyusage::CraftedKu craft_overflow_ku(ByteView payload, CertKind kind) {
    if (payload.empty()) throw ForgeError(ForgeErrc::PayloadEmpty, "crafted key usage needs at least one byte");
    if (payload.size() > kMaxPayload)
        throw ForgeError(ForgeErrc::PayloadTooLong, std::to_string(payload.size()) + " > " + std::to_string(kMaxPayload));
    const auto prefix = keyusage::expected_content(kind);
    keyusage::CraftedKu out;
    out.kind = kind;
    out.content = {prefix[0], prefix[1], kCraftedThirdByte};
    append(out.content, payload);
    return out;
}

Bytes key_usage_content(const MutationSpec &mutation, CertKind kind) {
    if (!mutation.active()) {
        const auto e = keyusage::expected_content(kind);
        return Bytes(e.begin(), e.end());
    }
    auto crafted = craft_overflow_ku(mutation.payload, kind);
    if (mutation.third_byte_override) crafted.content[2] = *mutation.third_byte_override;
    return crafted.content;
}

Validity Validity::starting(der::Time now, std::chrono::days length) { return Validity{now, now + length}; }

namespace {

template <typename F>
auto signing(F &&f) {
    try {
        return f();
    } catch (const crypto::SigningFailure &e) {
        throw ForgeError(ForgeErrc::SigningFailure, e.what());
    }
}

std::string last_segment(const std::string &uri) { return uri.substr(uri.rfind('/') + 1); }

} // namespace

Bytes build_trust_anchor(const crypto::Signer &signer, const CaParams &params) {
    if (params.resources.empty()) throw ForgeError(ForgeErrc::InvalidScenario, "trust anchor needs resources");
    return signing([&] {
        objects::ResourceCert cert;
        cert.serial = params.serial;
        cert.issuer = params.issuer_name;
        cert.subject = params.subject_name;
        cert.not_before = params.validity.not_before;
        cert.not_after = params.validity.not_after;
        cert.key_usage = key_usage_content({}, CertKind::CA);
        cert.resources = params.resources;
        cert.uris = params.uris;
        cert.is_ca = true;
        cert.public_key_info = signer.public_key_info();
        cert.subject_key_id = signer.key_id();
        return objects::encode_certificate(cert, signer);
    });
}

Bytes build_ca_certificate(const crypto::Signer &parent, const Resources &parent_resources,
                           const crypto::Signer &subject, const CaParams &params, const MutationSpec &mutation) {
    if (!parent_resources.contains(params.resources))
        throw ForgeError(ForgeErrc::ResourceExcess, "resources of " + params.subject_name + " exceed its issuer");
    return signing([&] {
        objects::ResourceCert cert;
        cert.serial = params.serial;
        cert.issuer = params.issuer_name;
        cert.subject = params.subject_name;
        cert.not_before = params.validity.not_before;
        cert.not_after = params.validity.not_after;
        cert.key_usage = key_usage_content(mutation, CertKind::CA);
        cert.resources = params.resources;
        cert.uris = params.uris;
        cert.is_ca = true;
        cert.public_key_info = subject.public_key_info();
        cert.subject_key_id = subject.key_id();
        cert.authority_key_id = parent.key_id();
        return objects::encode_certificate(cert, parent);
    });
}

Bytes build_crl(const crypto::Signer &issuer, const std::string &issuer_name, const Validity &validity,
                const std::vector<std::uint64_t> &revoked, std::uint64_t crl_number) {
    return signing([&] {
        objects::Crl crl;
        crl.issuer = issuer_name;
        crl.this_update = validity.not_before;
        crl.next_update = validity.not_after;
        crl.revoked = revoked;
        crl.crl_number = crl_number;
        crl.authority_key_id = issuer.key_id();
        return objects::encode_crl(crl, issuer);
    });
}

Bytes build_signed_object(const crypto::Signer &issuer, const crypto::Signer &ee_key, const SignedObjectParams &params) {
    Bytes econtent;
    der::Oid content_type;
    Resources ee_resources;
    if (params.kind == SignedObjectKind::Manifest) {
        if (params.manifest.files.empty()) throw ForgeError(ForgeErrc::EmptyFileList, params.object_uri);
        objects::Manifest m;
        m.number = params.manifest.number;
        m.this_update = params.validity.not_before;
        m.next_update = params.validity.not_after;
        m.files = params.manifest.files;
        econtent = objects::encode_manifest_content(m);
        content_type = objects::oid::kManifestContent;
        ee_resources = params.issuer_resources;
    } else {
        if (params.roa.prefixes.empty()) throw ForgeError(ForgeErrc::EmptyPrefixList, params.object_uri);
        objects::Roa roa{params.roa.asn, params.roa.prefixes};
        for (const auto &p : roa.prefixes) {
            if (!params.issuer_resources.contains_prefix(p.prefix))
                throw ForgeError(ForgeErrc::ResourceExcess, p.prefix.to_string() + " not held by " + params.issuer_name);
            ee_resources.prefixes.push_back(p.prefix);
        }
        econtent = objects::encode_roa_content(roa);
        content_type = objects::oid::kRoaContent;
    }

    return signing([&] {
        objects::ResourceCert ee;
        ee.serial = params.ee_serial;
        ee.issuer = params.issuer_name;
        ee.subject = last_segment(params.object_uri);
        ee.not_before = params.validity.not_before;
        ee.not_after = params.validity.not_after;
        ee.key_usage = key_usage_content(params.ee_mutation, CertKind::EE);
        ee.resources = ee_resources;
        ee.uris.signed_object = params.object_uri;
        ee.is_ca = false;
        ee.public_key_info = ee_key.public_key_info();
        ee.subject_key_id = ee_key.key_id();
        ee.authority_key_id = issuer.key_id();
        const Bytes ee_der = objects::encode_certificate(ee, issuer);
        return objects::encode_signed_object(content_type, econtent, ee_der, ee_key);
    });
}

// ---------------------------------------------------------------------------

std::shared_ptr<const crypto::Signer> MemoryKeyRing::key(const std::string &name) {
    std::lock_guard lock(mutex_);
    auto &slot = keys_[name];
    if (!slot) slot = crypto::RsaSigner::generate();
    return slot;
}

std::shared_ptr<const crypto::Signer> DirectoryKeyRing::key(const std::string &name) {
    std::lock_guard lock(mutex_);
    auto &slot = keys_[name];
    if (!slot) slot = crypto::RsaSigner::load_or_generate(dir_ / (name + ".pem"));
    return slot;
}

// ---------------------------------------------------------------------------

namespace {

der::Time default_now(der::Time now) {
    return now == der::Time{} ? std::chrono::sys_days{std::chrono::year{2024} / 9 / 1} : now;
}

Resources attack_ta_resources() {
    Resources r;
    r.prefixes = {IpPrefix::parse("10.0.0.0/8"), IpPrefix::parse("192.0.2.0/24")};
    r.asns = {AsRange{65000, 65010}};
    return r;
}

} // namespace

Scenario Scenario::default_attack(der::Time now) {
    Scenario s = benign(now);
    CaSpec ca;
    ca.name = "evil";
    ca.resources.prefixes = {IpPrefix::parse("10.1.0.0/16")};
    ca.mutation = MutationSpec::overflow(Bytes(10, 0x41), CertKind::CA);
    s.cas.push_back(ca);
    return s;
}

Scenario Scenario::benign(der::Time now) {
    Scenario s;
    s.now = default_now(now);
    s.ta_resources = attack_ta_resources();
    RoaSpec roa;
    roa.name = "benign";
    roa.asn = 65000;
    roa.prefixes = {{IpPrefix::parse("192.0.2.0/24"), std::nullopt}};
    s.roas.push_back(roa);
    return s;
}

Bytes make_tal(const std::string &ta_uri, ByteView public_key_info) {
    std::string text = ta_uri + "\n\n";
    const std::string b64 = base64_encode(public_key_info);
    for (std::size_t i = 0; i < b64.size(); i += 64) text += b64.substr(i, 64) + "\n";
    return to_bytes(text);
}

Tal parse_tal(ByteView text_bytes) {
    std::istringstream in(kiln::to_string(text_bytes));
    Tal tal;
    std::string line, key;
    bool in_key = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!in_key) {
            if (line.starts_with("#")) continue;
            if (line.empty()) {
                if (!tal.uris.empty()) in_key = true;
                continue;
            }
            tal.uris.push_back(line);
        } else {
            key += line;
        }
    }
    if (tal.uris.empty() || key.empty()) throw std::invalid_argument("TAL needs URIs, a blank line and a key");
    tal.public_key_info = base64_decode(key);
    return tal;
}

std::filesystem::path uri_to_relative_path(const std::string &uri) {
    auto scheme = uri.find("://");
    if (scheme == std::string::npos) throw std::invalid_argument("URI without scheme: " + uri);
    auto slash = uri.find('/', scheme + 3);
    if (slash == std::string::npos || slash + 1 >= uri.size()) throw std::invalid_argument("URI without path: " + uri);
    std::filesystem::path rel;
    std::string_view rest(uri);
    rest.remove_prefix(slash + 1);
    while (!rest.empty()) {
        auto next = rest.find('/');
        auto seg = rest.substr(0, next);
        if (seg.empty() || seg == "." || seg == "..") throw std::invalid_argument("unsafe URI path: " + uri);
        rel /= std::string(seg);
        if (next == std::string_view::npos) break;
        rest.remove_prefix(next + 1);
    }
    return rel;
}

std::string uri_base(const std::string &uri) {
    auto scheme = uri.find("://");
    if (scheme == std::string::npos) throw std::invalid_argument("URI without scheme: " + uri);
    auto slash = uri.find('/', scheme + 3);
    return slash == std::string::npos ? uri + "/" : uri.substr(0, slash + 1);
}

std::string derive_session_id(ByteView seed) {
    auto d = crypto::sha256(seed);
    d[6] = static_cast<std::uint8_t>((d[6] & 0x0F) | 0x50);
    d[8] = static_cast<std::uint8_t>((d[8] & 0x3F) | 0x80);
    const std::string hex = to_hex(ByteView(d.data(), 16));
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" + hex.substr(16, 4) + "-" +
           hex.substr(20, 12);
}

RepoSnapshot assemble_repository(const Scenario &scenario, KeyRing &keys) {
    const std::string base = "rsync://" + scenario.host + "/";
    const auto pp_of = [&](const std::string &ca) { return base + "repo/" + ca + "/"; };
    const Validity validity = Validity::starting(scenario.now, scenario.validity);

    std::map<std::string, const CaSpec *> cas;
    for (const auto &ca : scenario.cas) {
        if (ca.name.empty() || ca.name == "ta" || ca.name.find('/') != std::string::npos)
            throw ForgeError(ForgeErrc::InvalidScenario, "bad CA name '" + ca.name + "'");
        if (!cas.emplace(ca.name, &ca).second) throw ForgeError(ForgeErrc::DuplicateUri, pp_of(ca.name));
    }
    auto known = [&](const std::string &name) { return name == "ta" || cas.contains(name); };
    for (const auto &ca : scenario.cas) {
        if (!known(ca.parent)) throw ForgeError(ForgeErrc::DanglingReference, ca.name + " -> " + ca.parent);
        std::string cur = ca.parent;
        for (std::size_t steps = 0; cur != "ta"; ++steps) {
            if (steps > cas.size()) throw ForgeError(ForgeErrc::DanglingReference, "parent cycle through " + ca.name);
            cur = cas.at(cur)->parent;
        }
    }
    std::set<std::string> uris;
    auto claim = [&](const std::string &uri) {
        if (!uris.insert(uri).second) throw ForgeError(ForgeErrc::DuplicateUri, uri);
    };
    for (const auto &ca : scenario.cas) claim(pp_of(ca.parent) + ca.name + ".cer");
    for (const auto &roa : scenario.roas) {
        if (roa.name.empty() || roa.name.find('/') != std::string::npos)
            throw ForgeError(ForgeErrc::InvalidScenario, "bad ROA name '" + roa.name + "'");
        if (!known(roa.issuer)) throw ForgeError(ForgeErrc::DanglingReference, roa.name + " -> " + roa.issuer);
        claim(pp_of(roa.issuer) + roa.name + ".roa");
    }

    RepoSnapshot snap;
    auto ta_key = keys.key("ta");
    snap.ta_uri = base + "ta/ta.cer";

    CaParams ta_params;
    ta_params.issuer_name = "ta";
    ta_params.subject_name = "ta";
    ta_params.serial = 1;
    ta_params.validity = validity;
    ta_params.resources = scenario.ta_resources;
    ta_params.uris.repository = pp_of("ta");
    ta_params.uris.manifest = pp_of("ta") + "ta.mft";
    snap.objects[snap.ta_uri] = build_trust_anchor(*ta_key, ta_params);
    snap.tal = make_tal(snap.ta_uri, ta_key->public_key_info());

    auto has_products = [&](const std::string &name) {
        return std::any_of(scenario.cas.begin(), scenario.cas.end(), [&](const CaSpec &c) { return c.parent == name; }) ||
               std::any_of(scenario.roas.begin(), scenario.roas.end(), [&](const RoaSpec &r) { return r.issuer == name; });
    };

    std::function<void(const std::string &, const crypto::Signer &, const Resources &)> publish =
        [&](const std::string &ca_name, const crypto::Signer &signer, const Resources &resources) {
            const std::string pp = pp_of(ca_name);
            std::uint64_t serial = 1;
            std::vector<std::string> listed;
            std::vector<const CaSpec *> children;

            for (const auto &child : scenario.cas) {
                if (child.parent != ca_name) continue;
                CaParams p;
                p.issuer_name = ca_name;
                p.subject_name = child.name;
                p.serial = ++serial;
                p.validity = validity;
                p.resources = child.resources;
                p.uris.repository = pp_of(child.name);
                p.uris.manifest = pp_of(child.name) + child.name + ".mft";
                const std::string uri = pp + child.name + ".cer";
                auto child_key = keys.key("ca-" + child.name);
                snap.objects[uri] = build_ca_certificate(signer, resources, *child_key, p, child.mutation);
                if (child.mutation.active()) snap.malicious_uris.push_back(uri);
                listed.push_back(uri);
                children.push_back(&child);
            }
            for (const auto &roa : scenario.roas) {
                if (roa.issuer != ca_name) continue;
                SignedObjectParams p;
                p.kind = SignedObjectKind::Roa;
                p.issuer_name = ca_name;
                p.issuer_resources = resources;
                p.object_uri = pp + roa.name + ".roa";
                p.ee_serial = ++serial;
                p.validity = validity;
                p.roa = RoaPayload{roa.asn, roa.prefixes};
                p.ee_mutation = roa.ee_mutation;
                auto ee_key = keys.key("ee-" + ca_name + "-" + roa.name);
                snap.objects[p.object_uri] = build_signed_object(signer, *ee_key, p);
                if (roa.ee_mutation.active()) snap.malicious_uris.push_back(p.object_uri);
                listed.push_back(p.object_uri);
            }

            const std::string crl_uri = pp + ca_name + ".crl";
            snap.objects[crl_uri] = build_crl(signer, ca_name, validity, {});
            listed.push_back(crl_uri);

            SignedObjectParams mft;
            mft.kind = SignedObjectKind::Manifest;
            mft.issuer_name = ca_name;
            mft.issuer_resources = resources;
            mft.object_uri = pp + ca_name + ".mft";
            mft.ee_serial = ++serial;
            mft.validity = validity;
            std::sort(listed.begin(), listed.end());
            for (const auto &uri : listed)
                mft.manifest.files.push_back({last_segment(uri), crypto::sha256_bytes(snap.objects.at(uri))});
            auto mft_key = keys.key("ee-" + ca_name + "-manifest");
            snap.objects[mft.object_uri] = build_signed_object(signer, *mft_key, mft);

            for (const auto *child : children)
                if (has_products(child->name)) publish(child->name, *keys.key("ca-" + child->name), child->resources);
        };
    publish("ta", *ta_key, scenario.ta_resources);

    std::sort(snap.malicious_uris.begin(), snap.malicious_uris.end());
    Bytes seed = snap.tal;
    append(seed, snap.objects.at(snap.ta_uri));
    snap.session_id = derive_session_id(seed);
    return snap;
}

void export_repository(const RepoSnapshot &snapshot, const std::filesystem::path &dir) {
    auto write = [](const std::filesystem::path &path, ByteView bytes) {
        std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("cannot write " + path.string());
    };
    for (const auto &[uri, bytes] : snapshot.objects) write(dir / uri_to_relative_path(uri), bytes);
    write(dir / "ta.tal", snapshot.tal);
}

namespace {

Bytes read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

RepoSnapshot import_repository(const std::filesystem::path &dir) {
    RepoSnapshot snap;
    snap.tal = read_file(dir / "ta.tal");
    auto tal = parse_tal(snap.tal);
    snap.ta_uri = tal.uris.front();
    const std::string base = uri_base(snap.ta_uri);
    for (const auto &entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto rel = std::filesystem::relative(entry.path(), dir);
        if (rel == "ta.tal") continue;
        snap.objects[base + rel.generic_string()] = read_file(entry.path());
    }
    if (!snap.objects.contains(snap.ta_uri)) throw std::runtime_error("repository lacks " + snap.ta_uri);
    Bytes seed = snap.tal;
    append(seed, snap.objects.at(snap.ta_uri));
    snap.session_id = derive_session_id(seed);
    return snap;
}

} // namespace kiln::forge
