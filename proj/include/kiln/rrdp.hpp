#pragma once

// RRDP publication: notification, snapshot and delta documents, their
// parsers, and an HTTP publication point that fingerprints every fetch.

#include "kiln/bytes.hpp"
#include "kiln/fingerprint.hpp"
#include "kiln/forge.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace kiln::rrdp {

inline constexpr const char *kNamespace = "http://www.ripe.net/rpki/rrdp";

std::string snapshot_path(const std::string &session_id, std::uint64_t serial);
std::string delta_path(const std::string &session_id, std::uint64_t serial);

/// One publish element per object, URI-sorted, base64 content.
Bytes build_snapshot_xml(const forge::RepoSnapshot &snapshot);

/// Publish/withdraw elements turning `before` into `after`, at after.serial.
Bytes build_delta_xml(const forge::RepoSnapshot &before, const forge::RepoSnapshot &after);

struct DeltaRef {
    std::uint64_t serial = 0;
    std::string uri;
    std::string hash; // uppercase hex SHA-256
};

/// Notification pointing at `base_url` + snapshot_path(), carrying the
/// uppercase hex SHA-256 of `snapshot_xml`.
Bytes build_notification(const forge::RepoSnapshot &snapshot, const std::string &base_url, ByteView snapshot_xml,
                         const std::vector<DeltaRef> &deltas = {});

struct Notification {
    std::string session_id;
    std::uint64_t serial = 0;
    std::string snapshot_uri;
    std::string snapshot_hash;
    std::vector<DeltaRef> deltas;
};

struct SnapshotDocument {
    std::string session_id;
    std::uint64_t serial = 0;
    std::map<std::string, Bytes> objects;
};

struct DeltaDocument {
    struct Publish {
        std::string uri;
        Bytes content;
        std::optional<std::string> replaces_hash;
    };
    struct Withdraw {
        std::string uri;
        std::string hash;
    };
    std::string session_id;
    std::uint64_t serial = 0;
    std::vector<Publish> publishes;
    std::vector<Withdraw> withdraws;
};

/// Parsers throw std::invalid_argument on malformed documents.
Notification parse_notification(ByteView xml);
SnapshotDocument parse_snapshot(ByteView xml);
DeltaDocument parse_delta(ByteView xml);

/// Applies a delta, checking replaced/withdrawn hashes. Throws
/// std::invalid_argument on mismatch.
void apply_delta(std::map<std::string, Bytes> &objects, const DeltaDocument &delta);

bool hash_matches(ByteView bytes, const std::string &hex);

// ---------------------------------------------------------------------------

/// Immutable view of what the server is currently publishing.
struct Published {
    forge::RepoSnapshot repo;
    std::string base_url;
    Bytes snapshot_xml;
    Bytes notification;
    std::optional<std::pair<std::uint64_t, Bytes>> delta; // serial, document
};

struct Response {
    int status = 200;
    std::string content_type = "application/xml";
    Bytes body;
};

class PublicationServer {
public:
    struct Options {
        /// Must be set; the server only runs on networks the operator has
        /// confirmed are isolated.
        bool isolated_ack = false;
        fingerprint::VersionRange range = fingerprint::VersionRange::fort_vulnerable();
        std::optional<std::filesystem::path> log_path;
        std::function<fingerprint::Timestamp()> clock;
    };

    PublicationServer(forge::RepoSnapshot snapshot, Options options);
    ~PublicationServer();

    PublicationServer(const PublicationServer &) = delete;
    PublicationServer &operator=(const PublicationServer &) = delete;

    /// Replaces the published repository. Session id is kept, serial is
    /// incremented and a delta from the previous serial is offered.
    void publish(forge::RepoSnapshot next);

    std::shared_ptr<const Published> current() const;

    /// Transport-independent request handling; logs the fetch.
    Response handle(const std::string &path, const std::string &source, const std::string &user_agent);

    std::vector<fingerprint::ClientObservation> observations() const;

    /// Binds `host:port` (0 picks a free port) and serves on a background
    /// thread. Returns the bound port. Throws std::runtime_error without the
    /// isolation acknowledgment or when binding fails.
    int start(const std::string &host, int port);
    /// Binds and serves on the calling thread until stop().
    void run(const std::string &host, int port);
    void stop();

    std::string notification_url() const;

private:
    void rebuild(const std::string &base_url);
    void bind(const std::string &host, int port);
    void record(fingerprint::ClientObservation obs);

    Options options_;
    mutable std::mutex publish_mutex_;
    std::shared_ptr<const Published> current_;

    mutable std::mutex log_mutex_;
    std::vector<fingerprint::ClientObservation> log_;
    std::ofstream log_file_;

    std::unique_ptr<httplib::Server> http_;
    std::thread worker_;
    int port_ = 0;
};

} // namespace kiln::rrdp
