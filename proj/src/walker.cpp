#include "kiln/walker.hpp"

#include "kiln/crypto.hpp"
#include "kiln/der.hpp"
#include "kiln/forge.hpp"
#include "kiln/rrdp.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace kiln::walker {

namespace {

constexpr std::string_view kVerdictNames[] = {"Accept", "Reject", "Skip"};
constexpr std::string_view kReasonNames[] = {
    "None",          "Truncated",     "NonMinimalLength", "IndefiniteLength", "OversizeContent", "Malformed",
    "BadSignature",  "HashMismatch",  "WrongLength",      "WrongUnusedBits",  "WrongBits",       "DisallowedBits",
    "MissingKeyUsage", "ResourceExcess", "MissingObject", "NotOnManifest",    "ParentRejected",
};
constexpr std::string_view kStageNames[] = {"structure", "signature", "manifest-hash", "key-usage", "resources"};

Reason structure_reason(der::Errc code) {
    switch (code) {
    case der::Errc::Truncated: return Reason::Truncated;
    case der::Errc::NonMinimalLength: return Reason::NonMinimalLength;
    case der::Errc::IndefiniteLength: return Reason::IndefiniteLength;
    case der::Errc::OversizeContent: return Reason::OversizeContent;
    default: return Reason::Malformed;
    }
}

Reason key_usage_reason(keyusage::Reason r) {
    switch (r) {
    case keyusage::Reason::WrongLength: return Reason::WrongLength;
    case keyusage::Reason::WrongUnusedBits: return Reason::WrongUnusedBits;
    case keyusage::Reason::WrongBits: return Reason::WrongBits;
    case keyusage::Reason::DisallowedBits: return Reason::DisallowedBits;
    case keyusage::Reason::None: break;
    }
    return Reason::None;
}

ObjectResult &reject(ObjectResult &r, Reason reason, std::string detail) {
    r.verdict = Verdict::Reject;
    r.reason = reason;
    r.detail = std::move(detail);
    return r;
}

bool ends_with(const std::string &s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool check_key_usage(ObjectResult &r, const objects::ParsedCertificate &cert, keyusage::CertKind kind) {
    r.stages.push_back(Stage::KeyUsage);
    if (!cert.has_key_usage) {
        reject(r, Reason::MissingKeyUsage, "certificate has no key-usage extension");
        return false;
    }
    auto d = keyusage::validate_safe(cert.fields.key_usage, kind);
    if (!d.accepted()) {
        reject(r, key_usage_reason(d.reason),
               "malformed key-usage extension (" + std::to_string(cert.fields.key_usage.size()) + " content bytes)");
        return false;
    }
    return true;
}

} // namespace

std::string_view to_string(Verdict v) { return kVerdictNames[static_cast<int>(v)]; }
std::string_view to_string(Reason r) { return kReasonNames[static_cast<int>(r)]; }
std::string_view to_string(Stage s) { return kStageNames[static_cast<int>(s)]; }

std::optional<Reason> parse_reason(std::string_view text) {
    for (std::size_t i = 0; i < std::size(kReasonNames); ++i)
        if (kReasonNames[i] == text) return static_cast<Reason>(i);
    return std::nullopt;
}

const std::vector<Stage> &check_order() {
    static const std::vector<Stage> order{Stage::Structure, Stage::Signature, Stage::Hash, Stage::KeyUsage,
                                          Stage::Resources};
    return order;
}

std::optional<ObjectType> object_type_for(const std::string &uri) {
    if (ends_with(uri, ".cer")) return ObjectType::Certificate;
    if (ends_with(uri, ".mft")) return ObjectType::Manifest;
    if (ends_with(uri, ".roa")) return ObjectType::Roa;
    if (ends_with(uri, ".crl")) return ObjectType::Crl;
    return std::nullopt;
}

ObjectResult validate_object(ByteView bytes, const ObjectContext &ctx) {
    ObjectResult r;
    try {
        // structure
        r.stages.push_back(Stage::Structure);
        std::optional<objects::ParsedSignedObject> signed_object;
        std::optional<objects::ParsedCrl> crl;
        try {
            switch (ctx.type) {
            case ObjectType::Certificate: r.certificate = objects::parse_certificate(bytes); break;
            case ObjectType::Crl: crl = objects::parse_crl(bytes); break;
            case ObjectType::Manifest:
            case ObjectType::Roa: {
                signed_object = objects::parse_signed_object(bytes);
                const bool is_manifest = ctx.type == ObjectType::Manifest;
                const auto &want = is_manifest ? objects::oid::kManifestContent : objects::oid::kRoaContent;
                if (signed_object->content_type != want)
                    return reject(r, Reason::Malformed, "unexpected content type " + signed_object->content_type.to_string());
                if (is_manifest)
                    r.manifest = objects::parse_manifest_content(signed_object->econtent);
                else
                    r.roa = objects::parse_roa_content(signed_object->econtent);
                r.certificate = signed_object->ee_certificate;
                break;
            }
            }
        } catch (const der::Error &e) {
            return reject(r, structure_reason(e.code()), e.what());
        } catch (const std::exception &e) {
            return reject(r, Reason::Malformed, e.what());
        }

        // signature
        r.stages.push_back(Stage::Signature);
        try {
            bool ok = false;
            if (crl)
                ok = crypto::verify_rsa_sha256(ctx.issuer_public_key_info, crl->tbs, crl->signature);
            else
                ok = objects::verify_certificate_signature(*r.certificate, ctx.issuer_public_key_info) &&
                     (!signed_object || objects::verify_signed_object(*signed_object));
            if (!ok) return reject(r, Reason::BadSignature, "signature does not verify");
        } catch (const std::exception &e) {
            return reject(r, Reason::BadSignature, e.what());
        }

        // manifest hash
        r.stages.push_back(Stage::Hash);
        if (ctx.expected_hash && crypto::sha256_bytes(bytes) != *ctx.expected_hash)
            return reject(r, Reason::HashMismatch, "bytes do not match the manifest entry");

        // key usage
        if (r.certificate) {
            auto kind = ctx.type == ObjectType::Certificate ? ctx.expected_kind : keyusage::CertKind::EE;
            if (!check_key_usage(r, *r.certificate, kind)) return r;
        }

        // resources
        r.stages.push_back(Stage::Resources);
        if (r.certificate && ctx.issuer_resources && !ctx.issuer_resources->contains(r.certificate->fields.resources))
            return reject(r, Reason::ResourceExcess, "resources exceed the issuer's");
        if (r.roa) {
            for (const auto &p : r.roa->prefixes)
                if (!r.certificate->fields.resources.contains_prefix(p.prefix))
                    return reject(r, Reason::ResourceExcess, "ROA prefix " + p.prefix.to_string() + " not held by its EE");
        }
    } catch (const std::exception &e) {
        return reject(r, Reason::Malformed, e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------

const ObjectOutcome *ValidationReport::find(const std::string &uri) const {
    for (const auto &o : outcomes)
        if (o.uri == uri) return &o;
    return nullptr;
}

std::string ValidationReport::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json order = nlohmann::ordered_json::array();
    for (auto s : check_order()) order.push_back(std::string(to_string(s)));
    j["check_order"] = order;
    j["source"] = source;
    if (rrdp) {
        j["rrdp"] = {{"notification", rrdp->notification_uri},
                     {"session_id", rrdp->session_id},
                     {"serial", rrdp->serial},
                     {"snapshot", rrdp->snapshot_uri},
                     {"snapshot_hash_ok", rrdp->snapshot_hash_ok}};
    }
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto &o : outcomes) {
        nlohmann::ordered_json e;
        e["uri"] = o.uri;
        e["verdict"] = std::string(to_string(o.verdict));
        e["reason"] = std::string(to_string(o.reason));
        if (!o.detail.empty()) e["detail"] = o.detail;
        out.push_back(std::move(e));
    }
    j["outcomes"] = out;
    nlohmann::ordered_json roas = nlohmann::ordered_json::array();
    for (const auto &r : accepted_roas)
        roas.push_back({{"asn", r.asn}, {"prefix", r.prefix.to_string()}, {"max_length", r.max_length}});
    j["accepted_roas"] = roas;
    j["error_count"] = error_count;
    j["completed"] = completed;
    return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string ValidationReport::to_table() const {
    std::ostringstream out;
    out << "check order:";
    for (auto s : check_order()) out << ' ' << to_string(s);
    out << "\nsource: " << source << "\n\n";
    std::size_t width = 3;
    for (const auto &o : outcomes) width = std::max(width, o.uri.size());
    for (const auto &o : outcomes) {
        out << o.uri << std::string(width - o.uri.size() + 2, ' ') << to_string(o.verdict);
        if (o.reason != Reason::None) out << "  " << to_string(o.reason);
        out << '\n';
    }
    out << "\naccepted ROAs: " << accepted_roas.size() << '\n';
    for (const auto &r : accepted_roas)
        out << "  AS" << r.asn << "  " << r.prefix.to_string() << "-" << r.max_length << '\n';
    out << "errors: " << error_count << "  completed: " << (completed ? "yes" : "no") << '\n';
    return out.str();
}

std::string_view to_string(WalkErrc code) {
    switch (code) {
    case WalkErrc::SourceUnreachable: return "SourceUnreachable";
    case WalkErrc::TalMismatch: return "TalMismatch";
    case WalkErrc::InvalidSource: return "InvalidSource";
    }
    return "Unknown";
}

WalkError::WalkError(WalkErrc code, const std::string &detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

// ---------------------------------------------------------------------------

namespace {

class Walk {
public:
    Walk(const std::map<std::string, Bytes> &objects, const WalkOptions &options)
        : objects_(objects), options_(options) {}

    void run(ByteView tal_bytes) {
        forge::Tal tal;
        try {
            tal = forge::parse_tal(tal_bytes);
        } catch (const std::exception &e) {
            throw WalkError(WalkErrc::TalMismatch, std::string("unreadable TAL: ") + e.what());
        }
        const std::string &ta_uri = tal.uris.front();
        auto it = objects_.find(ta_uri);
        if (it == objects_.end()) throw WalkError(WalkErrc::SourceUnreachable, "trust anchor " + ta_uri + " not found");

        ObjectContext ctx;
        ctx.type = ObjectType::Certificate;
        ctx.issuer_public_key_info = tal.public_key_info;
        ctx.expected_kind = keyusage::CertKind::CA;
        // A TA whose key differs from the TAL is a configuration error, not
        // an object verdict.
        try {
            auto ta = objects::parse_certificate(it->second);
            if (ta.fields.public_key_info != tal.public_key_info)
                throw WalkError(WalkErrc::TalMismatch, "trust anchor key differs from the TAL");
        } catch (const WalkError &) {
            throw;
        } catch (const std::exception &) {
            // Left to validate_object for a structural verdict.
        }

        auto result = validate_object(it->second, ctx);
        record(ta_uri, result);
        if (result.accepted()) descend(ta_uri, *result.certificate, 0);
        sweep();
        report_.completed = true;
    }

    ValidationReport take() { return std::move(report_); }

private:
    void record(const std::string &uri, const ObjectResult &r) { emit(uri, r.verdict, r.reason, r.detail); }

    void emit(const std::string &uri, Verdict v, Reason reason, std::string detail = {}) {
        if (!seen_.insert(uri).second) return;
        ObjectOutcome o{uri, v, reason, std::move(detail)};
        if (v == Verdict::Reject) {
            ++report_.error_count;
            if (options_.on_reject) options_.on_reject(o);
        }
        report_.outcomes.push_back(std::move(o));
    }

    std::vector<std::string> under(const std::string &prefix) const {
        std::vector<std::string> out;
        if (prefix.empty()) return out;
        for (auto it = objects_.lower_bound(prefix); it != objects_.end() && it->first.starts_with(prefix); ++it)
            out.push_back(it->first);
        return out;
    }

    void skip_subtree(const std::string &repository) {
        for (const auto &uri : under(repository)) emit(uri, Verdict::Skip, Reason::ParentRejected);
        skipped_prefixes_.push_back(repository);
    }

    void descend(const std::string & /*uri*/, const objects::ParsedCertificate &ca, std::size_t depth) {
        const auto &repo = ca.fields.uris.repository;
        const auto &mft_uri = ca.fields.uris.manifest;
        if (depth >= options_.max_depth) {
            skip_subtree(repo);
            return;
        }
        if (!visited_keys_.insert(ca.fields.public_key_info).second || !visited_repos_.insert(repo).second)
            return; // loop or shared publication point; each object is visited once

        auto mft_it = objects_.find(mft_uri);
        if (mft_it == objects_.end()) {
            if (!under(repo).empty()) {
                emit(mft_uri, Verdict::Reject, Reason::MissingObject, "manifest not published");
                skip_subtree(repo);
            }
            return;
        }

        ObjectContext mctx;
        mctx.type = ObjectType::Manifest;
        mctx.issuer_public_key_info = ca.fields.public_key_info;
        mctx.issuer_resources = ca.fields.resources;
        auto mres = validate_object(mft_it->second, mctx);
        record(mft_uri, mres);
        if (!mres.accepted()) {
            skip_subtree(repo);
            return;
        }

        std::vector<std::pair<std::string, objects::ParsedCertificate>> children;
        for (const auto &entry : mres.manifest->files) {
            const std::string uri = repo + entry.file;
            auto obj = objects_.find(uri);
            if (obj == objects_.end()) {
                emit(uri, Verdict::Reject, Reason::MissingObject, "listed on manifest but not published");
                continue;
            }
            auto type = object_type_for(uri);
            if (!type || *type == ObjectType::Manifest) {
                emit(uri, Verdict::Reject, Reason::Malformed, "unsupported object type");
                continue;
            }
            ObjectContext ctx;
            ctx.type = *type;
            ctx.issuer_public_key_info = ca.fields.public_key_info;
            ctx.issuer_resources = ca.fields.resources;
            ctx.expected_hash = entry.hash;
            ctx.expected_kind = keyusage::CertKind::CA;
            auto res = validate_object(obj->second, ctx);
            record(uri, res);
            if (*type == ObjectType::Certificate) {
                if (res.accepted() && res.certificate->fields.is_ca)
                    children.emplace_back(uri, std::move(*res.certificate));
                else if (!res.accepted() && res.certificate)
                    skip_subtree(res.certificate->fields.uris.repository);
            } else if (*type == ObjectType::Roa && res.accepted()) {
                for (const auto &p : res.roa->prefixes)
                    report_.accepted_roas.push_back({res.roa->asn, p.prefix, p.max_length.value_or(p.prefix.length)});
            }
        }
        for (const auto &[uri, child] : children) descend(uri, child, depth + 1);
    }

    void sweep() {
        for (const auto &[uri, bytes] : objects_) {
            if (seen_.count(uri)) continue;
            bool under_rejected = std::any_of(skipped_prefixes_.begin(), skipped_prefixes_.end(),
                                              [&](const std::string &p) { return !p.empty() && uri.starts_with(p); });
            emit(uri, Verdict::Skip, under_rejected ? Reason::ParentRejected : Reason::NotOnManifest);
        }
    }

    const std::map<std::string, Bytes> &objects_;
    const WalkOptions &options_;
    ValidationReport report_;
    std::set<std::string> seen_;
    std::set<Bytes> visited_keys_;
    std::set<std::string> visited_repos_;
    std::vector<std::string> skipped_prefixes_;
};

struct Url {
    std::string origin; // scheme://authority
    std::string path;
};

Url split_url(const std::string &url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw WalkError(WalkErrc::InvalidSource, "not a URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

Bytes http_get(const std::string &url, const WalkOptions &options) {
    auto u = split_url(url);
    if (!u.origin.starts_with("http://"))
        throw WalkError(WalkErrc::InvalidSource, "only plain http RRDP sources are supported: " + url);
    httplib::Client client(u.origin);
    client.set_connection_timeout(options.timeout_seconds, 0);
    client.set_read_timeout(options.timeout_seconds, 0);
    auto res = client.Get(u.path, httplib::Headers{{"User-Agent", options.user_agent}});
    if (!res) throw WalkError(WalkErrc::SourceUnreachable, url + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw WalkError(WalkErrc::SourceUnreachable, url + ": HTTP " + std::to_string(res->status));
    return to_bytes(res->body);
}

} // namespace

ValidationReport walk_objects(const std::map<std::string, Bytes> &objects, ByteView tal, const WalkOptions &options) {
    Walk w(objects, options);
    w.run(tal);
    return w.take();
}

std::map<std::string, Bytes> fetch_rrdp(const std::string &notification_url, const WalkOptions &options,
                                        RrdpInfo &info) {
    info = RrdpInfo{};
    info.notification_uri = notification_url;
    rrdp::Notification n;
    try {
        n = rrdp::parse_notification(http_get(notification_url, options));
    } catch (const std::invalid_argument &e) {
        throw WalkError(WalkErrc::InvalidSource, e.what());
    }
    info.session_id = n.session_id;
    info.serial = n.serial;
    info.snapshot_uri = n.snapshot_uri;
    Bytes snapshot_xml = http_get(n.snapshot_uri, options);
    info.snapshot_hash_ok = rrdp::hash_matches(snapshot_xml, n.snapshot_hash);
    if (!info.snapshot_hash_ok) throw WalkError(WalkErrc::InvalidSource, "snapshot hash differs from notification");
    try {
        auto doc = rrdp::parse_snapshot(snapshot_xml);
        if (doc.session_id != n.session_id || doc.serial != n.serial)
            throw WalkError(WalkErrc::InvalidSource, "snapshot session or serial differs from notification");
        return std::move(doc.objects);
    } catch (const std::invalid_argument &e) {
        throw WalkError(WalkErrc::InvalidSource, e.what());
    }
}

std::map<std::string, Bytes> load_directory(const std::string &dir, const std::string &base) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw WalkError(WalkErrc::SourceUnreachable, "no such directory: " + dir);
    std::map<std::string, Bytes> out;
    for (const auto &entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() == ".tal") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        if (!in) throw WalkError(WalkErrc::SourceUnreachable, "cannot read " + entry.path().string());
        out[base + fs::relative(entry.path(), dir).generic_string()] =
            Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

ValidationReport walk(const std::string &source, ByteView tal, const WalkOptions &options) {
    ValidationReport report;
    if (source.starts_with("http://") || source.starts_with("https://")) {
        std::string url = source;
        if (!url.ends_with(".xml")) url += url.ends_with("/") ? "notification.xml" : "/notification.xml";
        RrdpInfo info;
        auto objects = fetch_rrdp(url, options, info);
        report = walk_objects(objects, tal, options);
        report.rrdp = info;
    } else {
        std::string base;
        try {
            base = forge::uri_base(forge::parse_tal(tal).uris.front());
        } catch (const std::exception &e) {
            throw WalkError(WalkErrc::TalMismatch, std::string("unreadable TAL: ") + e.what());
        }
        report = walk_objects(load_directory(source, base), tal, options);
    }
    report.source = source;
    return report;
}

} // namespace kiln::walker
