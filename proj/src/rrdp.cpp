#include "kiln/rrdp.hpp"

#include "kiln/crypto.hpp"

#include "httplib.h"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>
#include <stdexcept>

namespace kiln::rrdp {

namespace pt = boost::property_tree;

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::string upper_hash(ByteView bytes) { return to_hex(crypto::sha256_bytes(bytes), true); }

std::string header(const char *element, const std::string &session_id, std::uint64_t serial) {
    return std::string("<") + element + " xmlns=\"" + kNamespace + "\" version=\"1\" session_id=\"" +
           xml_escape(session_id) + "\" serial=\"" + std::to_string(serial) + "\">\n";
}

pt::ptree read_xml(ByteView xml) {
    std::istringstream in(std::string(reinterpret_cast<const char *>(xml.data()), xml.size()));
    pt::ptree tree;
    try {
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error &e) {
        throw std::invalid_argument(std::string("malformed RRDP XML: ") + e.what());
    }
    return tree;
}

std::string attr(const pt::ptree &node, const char *name) {
    auto v = node.get_optional<std::string>(std::string("<xmlattr>.") + name);
    if (!v) throw std::invalid_argument(std::string("missing attribute ") + name);
    return *v;
}

std::optional<std::string> attr_opt(const pt::ptree &node, const char *name) {
    auto v = node.get_optional<std::string>(std::string("<xmlattr>.") + name);
    if (!v) return std::nullopt;
    return *v;
}

std::uint64_t parse_serial(const std::string &s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || v == 0)
        throw std::invalid_argument("bad serial: " + s);
    return v;
}

// Root element with namespace and version checked.
const pt::ptree &root(const pt::ptree &tree, const char *element) {
    if (tree.size() != 1 || tree.front().first != element)
        throw std::invalid_argument(std::string("expected a single <") + element + "> root");
    const auto &node = tree.front().second;
    if (attr(node, "xmlns") != kNamespace) throw std::invalid_argument("wrong RRDP namespace");
    if (attr(node, "version") != "1") throw std::invalid_argument("unsupported RRDP version");
    return node;
}

Bytes decode_element_content(const std::string &text) {
    std::string compact;
    compact.reserve(text.size());
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    return base64_decode(compact);
}

std::string host_for_url(const std::string &host) {
    if (host.find(':') != std::string::npos && host.front() != '[') return "[" + host + "]";
    return host;
}

} // namespace

std::string snapshot_path(const std::string &session_id, std::uint64_t serial) {
    return "/" + session_id + "/" + std::to_string(serial) + "/snapshot.xml";
}

std::string delta_path(const std::string &session_id, std::uint64_t serial) {
    return "/" + session_id + "/" + std::to_string(serial) + "/delta.xml";
}

Bytes build_snapshot_xml(const forge::RepoSnapshot &snapshot) {
    std::string out = header("snapshot", snapshot.session_id, snapshot.serial);
    // std::map iterates in URI order.
    for (const auto &[uri, bytes] : snapshot.objects)
        out += "  <publish uri=\"" + xml_escape(uri) + "\">" + base64_encode(bytes) + "</publish>\n";
    out += "</snapshot>\n";
    return to_bytes(out);
}

Bytes build_delta_xml(const forge::RepoSnapshot &before, const forge::RepoSnapshot &after) {
    std::string out = header("delta", after.session_id, after.serial);
    for (const auto &[uri, bytes] : after.objects) {
        auto old = before.objects.find(uri);
        if (old == before.objects.end()) {
            out += "  <publish uri=\"" + xml_escape(uri) + "\">" + base64_encode(bytes) + "</publish>\n";
        } else if (old->second != bytes) {
            out += "  <publish uri=\"" + xml_escape(uri) + "\" hash=\"" + upper_hash(old->second) + "\">" +
                   base64_encode(bytes) + "</publish>\n";
        }
    }
    for (const auto &[uri, bytes] : before.objects)
        if (!after.objects.count(uri))
            out += "  <withdraw uri=\"" + xml_escape(uri) + "\" hash=\"" + upper_hash(bytes) + "\"/>\n";
    out += "</delta>\n";
    return to_bytes(out);
}

Bytes build_notification(const forge::RepoSnapshot &snapshot, const std::string &base_url, ByteView snapshot_xml,
                         const std::vector<DeltaRef> &deltas) {
    std::string out = header("notification", snapshot.session_id, snapshot.serial);
    out += "  <snapshot uri=\"" + xml_escape(base_url + snapshot_path(snapshot.session_id, snapshot.serial)) +
           "\" hash=\"" + upper_hash(snapshot_xml) + "\"/>\n";
    for (const auto &d : deltas)
        out += "  <delta serial=\"" + std::to_string(d.serial) + "\" uri=\"" + xml_escape(d.uri) + "\" hash=\"" +
               d.hash + "\"/>\n";
    out += "</notification>\n";
    return to_bytes(out);
}

Notification parse_notification(ByteView xml) {
    auto tree = read_xml(xml);
    const auto &node = root(tree, "notification");
    Notification n;
    n.session_id = attr(node, "session_id");
    n.serial = parse_serial(attr(node, "serial"));
    bool have_snapshot = false;
    for (const auto &[name, child] : node) {
        if (name == "<xmlattr>") continue;
        if (name == "snapshot") {
            if (have_snapshot) throw std::invalid_argument("more than one snapshot element");
            have_snapshot = true;
            n.snapshot_uri = attr(child, "uri");
            n.snapshot_hash = attr(child, "hash");
        } else if (name == "delta") {
            n.deltas.push_back({parse_serial(attr(child, "serial")), attr(child, "uri"), attr(child, "hash")});
        } else {
            throw std::invalid_argument("unexpected element <" + name + "> in notification");
        }
    }
    if (!have_snapshot) throw std::invalid_argument("notification lacks a snapshot element");
    return n;
}

SnapshotDocument parse_snapshot(ByteView xml) {
    auto tree = read_xml(xml);
    const auto &node = root(tree, "snapshot");
    SnapshotDocument doc;
    doc.session_id = attr(node, "session_id");
    doc.serial = parse_serial(attr(node, "serial"));
    for (const auto &[name, child] : node) {
        if (name == "<xmlattr>") continue;
        if (name != "publish") throw std::invalid_argument("unexpected element <" + name + "> in snapshot");
        auto uri = attr(child, "uri");
        Bytes content = decode_element_content(child.data());
        if (!doc.objects.emplace(uri, std::move(content)).second)
            throw std::invalid_argument("duplicate publish for " + uri);
    }
    return doc;
}

DeltaDocument parse_delta(ByteView xml) {
    auto tree = read_xml(xml);
    const auto &node = root(tree, "delta");
    DeltaDocument doc;
    doc.session_id = attr(node, "session_id");
    doc.serial = parse_serial(attr(node, "serial"));
    for (const auto &[name, child] : node) {
        if (name == "<xmlattr>") continue;
        if (name == "publish") {
            doc.publishes.push_back({attr(child, "uri"), decode_element_content(child.data()), attr_opt(child, "hash")});
        } else if (name == "withdraw") {
            doc.withdraws.push_back({attr(child, "uri"), attr(child, "hash")});
        } else {
            throw std::invalid_argument("unexpected element <" + name + "> in delta");
        }
    }
    return doc;
}

bool hash_matches(ByteView bytes, const std::string &hex) {
    std::string a = upper_hash(bytes);
    if (a.size() != hex.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != std::toupper(static_cast<unsigned char>(hex[i]))) return false;
    return true;
}

void apply_delta(std::map<std::string, Bytes> &objects, const DeltaDocument &delta) {
    auto next = objects;
    for (const auto &p : delta.publishes) {
        auto it = next.find(p.uri);
        if (p.replaces_hash) {
            if (it == next.end() || !hash_matches(it->second, *p.replaces_hash))
                throw std::invalid_argument("publish hash does not match current " + p.uri);
            it->second = p.content;
        } else {
            if (it != next.end()) throw std::invalid_argument("publish without hash for existing " + p.uri);
            next.emplace(p.uri, p.content);
        }
    }
    for (const auto &w : delta.withdraws) {
        auto it = next.find(w.uri);
        if (it == next.end() || !hash_matches(it->second, w.hash))
            throw std::invalid_argument("withdraw hash does not match current " + w.uri);
        next.erase(it);
    }
    objects = std::move(next);
}

// ---------------------------------------------------------------------------

PublicationServer::PublicationServer(forge::RepoSnapshot snapshot, Options options) : options_(std::move(options)) {
    if (!options_.clock)
        options_.clock = [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
    if (options_.log_path) {
        log_file_.open(*options_.log_path, std::ios::app);
        if (!log_file_) throw std::runtime_error("cannot open log " + options_.log_path->string());
    }
    auto p = std::make_shared<Published>();
    p->repo = std::move(snapshot);
    p->snapshot_xml = build_snapshot_xml(p->repo);
    p->notification = build_notification(p->repo, p->base_url, p->snapshot_xml);
    current_ = std::move(p);
}

PublicationServer::~PublicationServer() { stop(); }

std::shared_ptr<const Published> PublicationServer::current() const {
    std::lock_guard lock(publish_mutex_);
    return current_;
}

void PublicationServer::rebuild(const std::string &base_url) {
    std::lock_guard lock(publish_mutex_);
    auto p = std::make_shared<Published>(*current_);
    p->base_url = base_url;
    std::vector<DeltaRef> deltas;
    if (p->delta)
        deltas.push_back({p->delta->first, base_url + delta_path(p->repo.session_id, p->delta->first),
                          upper_hash(p->delta->second)});
    p->notification = build_notification(p->repo, base_url, p->snapshot_xml, deltas);
    current_ = std::move(p);
}

void PublicationServer::publish(forge::RepoSnapshot next) {
    std::lock_guard lock(publish_mutex_);
    auto p = std::make_shared<Published>();
    const auto &prev = *current_;
    next.session_id = prev.repo.session_id;
    next.serial = prev.repo.serial + 1;
    p->repo = std::move(next);
    p->base_url = prev.base_url;
    p->snapshot_xml = build_snapshot_xml(p->repo);
    Bytes delta = build_delta_xml(prev.repo, p->repo);
    std::vector<DeltaRef> deltas{
        {p->repo.serial, p->base_url + delta_path(p->repo.session_id, p->repo.serial), upper_hash(delta)}};
    p->delta.emplace(p->repo.serial, std::move(delta));
    p->notification = build_notification(p->repo, p->base_url, p->snapshot_xml, deltas);
    current_ = std::move(p);
}

Response PublicationServer::handle(const std::string &path, const std::string &source, const std::string &user_agent) {
    record(fingerprint::observe(options_.clock(), source, user_agent, options_.range));

    auto pub = current();
    Response r;
    if (path == "/notification.xml") {
        r.body = pub->notification;
    } else if (path == snapshot_path(pub->repo.session_id, pub->repo.serial)) {
        r.body = pub->snapshot_xml;
    } else if (pub->delta && path == delta_path(pub->repo.session_id, pub->delta->first)) {
        r.body = pub->delta->second;
    } else {
        r.status = 404;
        r.content_type = "text/plain";
        r.body = to_bytes("not found\n");
    }
    return r;
}

void PublicationServer::record(fingerprint::ClientObservation obs) {
    std::lock_guard lock(log_mutex_);
    if (log_file_.is_open()) {
        log_file_ << fingerprint::to_json_line(obs) << '\n';
        log_file_.flush();
    }
    log_.push_back(std::move(obs));
}

std::vector<fingerprint::ClientObservation> PublicationServer::observations() const {
    std::lock_guard lock(log_mutex_);
    return log_;
}

void PublicationServer::bind(const std::string &host, int port) {
    if (!options_.isolated_ack)
        throw std::runtime_error("refusing to serve: isolated-network acknowledgment not given");
    if (http_) throw std::runtime_error("server already started");
    http_ = std::make_unique<httplib::Server>();
    http_->Get(R"(/.*)", [this](const httplib::Request &req, httplib::Response &res) {
        auto r = handle(req.path, req.remote_addr, req.get_header_value("User-Agent"));
        res.status = r.status;
        res.set_content(std::string(r.body.begin(), r.body.end()), r.content_type);
    });
    int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
    if (bound <= 0) {
        http_.reset();
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = bound;
    rebuild("http://" + host_for_url(host) + ":" + std::to_string(port_));
}

int PublicationServer::start(const std::string &host, int port) {
    bind(host, port);
    worker_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return port_;
}

void PublicationServer::run(const std::string &host, int port) {
    bind(host, port);
    http_->listen_after_bind();
}

void PublicationServer::stop() {
    if (http_) http_->stop();
    if (worker_.joinable()) worker_.join();
}

std::string PublicationServer::notification_url() const { return current()->base_url + "/notification.xml"; }

} // namespace kiln::rrdp
