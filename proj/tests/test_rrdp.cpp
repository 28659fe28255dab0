#include "kiln/rrdp.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include "httplib.h"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

using namespace kiln;
using namespace kiln::rrdp;

namespace {

std::size_t count(const std::string &hay, const std::string &needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

PublicationServer::Options isolated() {
    PublicationServer::Options o;
    o.isolated_ack = true;
    o.clock = [] { return fingerprint::Timestamp{std::chrono::seconds{1'725'148'800}}; };
    return o;
}

} // namespace

TEST(Rrdp, SnapshotHasOnePublishPerObjectInUriOrder) {
    const auto &snap = fixtures::attack_repo();
    const std::string xml = kiln::to_string(build_snapshot_xml(snap));
    EXPECT_EQ(count(xml, "<publish "), 5u);
    auto doc = parse_snapshot(to_bytes(xml));
    EXPECT_EQ(doc.objects, snap.objects);
    EXPECT_EQ(doc.session_id, snap.session_id);
    EXPECT_EQ(doc.serial, 1u);
    std::string last;
    for (auto pos = xml.find("uri=\""); pos != std::string::npos; pos = xml.find("uri=\"", pos + 1)) {
        auto uri = xml.substr(pos + 5, xml.find('"', pos + 5) - pos - 5);
        EXPECT_LT(last, uri);
        last = uri;
    }
}

TEST(Rrdp, EmptySnapshotStillParses) {
    forge::RepoSnapshot empty;
    empty.session_id = "00000000-0000-0000-0000-000000000000";
    auto xml = build_snapshot_xml(empty);
    EXPECT_EQ(count(kiln::to_string(xml), "<publish"), 0u);
    EXPECT_TRUE(parse_snapshot(xml).objects.empty());
}

TEST(Rrdp, NotificationHashMatchesOracle) {
    const auto &snap = fixtures::attack_repo();
    auto xml = build_snapshot_xml(snap);
    auto n = parse_notification(build_notification(snap, "http://x", xml));
    EXPECT_EQ(n.snapshot_hash, oracle::hex_upper(oracle::sha256(xml)));
    EXPECT_EQ(n.snapshot_uri, "http://x" + snapshot_path(snap.session_id, 1));
    EXPECT_EQ(n.session_id, snap.session_id);
    EXPECT_TRUE(hash_matches(xml, n.snapshot_hash));
}

TEST(Rrdp, ParsersRejectMalformedDocuments) {
    EXPECT_THROW(parse_notification(to_bytes("<notification")), std::invalid_argument);
    EXPECT_THROW(parse_notification(to_bytes(R"(<notification xmlns="urn:other" version="1" session_id="a" serial="1"><snapshot uri="u" hash="h"/></notification>)")),
                 std::invalid_argument);
    EXPECT_THROW(parse_notification(to_bytes(R"(<notification xmlns="http://www.ripe.net/rpki/rrdp" version="1" session_id="a" serial="1"></notification>)")),
                 std::invalid_argument);
    EXPECT_THROW(parse_snapshot(to_bytes(R"(<snapshot xmlns="http://www.ripe.net/rpki/rrdp" version="1" session_id="a" serial="0"/>)")),
                 std::invalid_argument);
}

TEST(Rrdp, DeltaTransformsBeforeIntoAfter) {
    auto before = fixtures::attack_repo();
    auto after = fixtures::benign_repo();
    after.session_id = before.session_id;
    after.serial = 2;
    auto delta = parse_delta(build_delta_xml(before, after));
    EXPECT_EQ(delta.serial, 2u);
    auto objects = before.objects;
    apply_delta(objects, delta);
    EXPECT_EQ(objects, after.objects);

    auto stale = before.objects;
    stale.begin()->second.push_back(0);
    EXPECT_THROW(apply_delta(stale, delta), std::invalid_argument);
}

TEST(Rrdp, PublishIncrementsSerialKeepsSession) {
    PublicationServer server(fixtures::attack_repo(), isolated());
    auto first = server.current();
    server.publish(fixtures::benign_repo());
    auto second = server.current();
    EXPECT_EQ(second->repo.serial, first->repo.serial + 1);
    EXPECT_EQ(second->repo.session_id, first->repo.session_id);
    auto n = parse_notification(second->notification);
    ASSERT_EQ(n.deltas.size(), 1u);
    EXPECT_EQ(n.deltas[0].serial, 2u);

    auto r = server.handle(delta_path(n.session_id, 2), "10.0.0.1", "fort/1.6.2");
    ASSERT_EQ(r.status, 200);
    EXPECT_TRUE(hash_matches(r.body, n.deltas[0].hash));
    EXPECT_EQ(server.handle(snapshot_path(n.session_id, 1), "10.0.0.1", "x").status, 404);
}

TEST(Rrdp, RefusesToStartWithoutAcknowledgment) {
    PublicationServer::Options o;
    PublicationServer server(fixtures::attack_repo(), o);
    EXPECT_THROW(server.start("127.0.0.1", 0), std::runtime_error);
}

TEST(Rrdp, HandleLogsAndFingerprints) {
    fixtures::TempDir dir;
    auto opts = isolated();
    opts.log_path = dir.path() / "log.jsonl";
    {
        PublicationServer server(fixtures::attack_repo(), opts);
        EXPECT_EQ(server.handle("/notification.xml", "10.0.0.1", "fort/1.6.2").status, 200);
        EXPECT_EQ(server.handle("/nope", "10.0.0.2", "Routinator/0.13.0").status, 404);
        auto obs = server.observations();
        ASSERT_EQ(obs.size(), 2u);
        EXPECT_EQ(obs[0].vuln_class, fingerprint::VulnClass::Vulnerable);
        EXPECT_EQ(obs[1].vuln_class, fingerprint::VulnClass::NotApplicable);
    }
    std::ifstream in(dir.path() / "log.jsonl");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto log = fingerprint::read_log(text);
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(fingerprint::to_json_line(log[0]),
              R"({"ts":"2024-09-01T00:00:00Z","src":"10.0.0.1","ua":"fort/1.6.2","sw":"Fort","ver":"1.6.2","class":"Vulnerable"})");
}

// Readers racing with republication always see a notification whose hash
// matches the snapshot they fetch next, or get a clean 404 for a serial that
// was just replaced.
TEST(Rrdp, NoTornReadsUnderRepublish) {
    PublicationServer server(fixtures::attack_repo(), isolated());
    int port = server.start("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    std::atomic<bool> done{false};
    std::atomic<int> mismatches{0}, checked{0};

    std::vector<std::thread> readers;
    for (int t = 0; t < 3; ++t) {
        readers.emplace_back([&] {
            httplib::Client cli("127.0.0.1", port);
            while (!done) {
                auto n = cli.Get("/notification.xml");
                if (!n || n->status != 200) continue;
                auto note = parse_notification(to_bytes(n->body));
                auto path = note.snapshot_uri.substr(note.snapshot_uri.find('/', 8));
                auto s = cli.Get(path);
                if (!s || s->status == 404) continue;
                if (!hash_matches(to_bytes(s->body), note.snapshot_hash)) ++mismatches;
                ++checked;
            }
        });
    }
    for (int i = 0; i < 20; ++i) {
        server.publish(i % 2 ? fixtures::attack_repo() : fixtures::benign_repo());
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    done = true;
    for (auto &t : readers) t.join();
    server.stop();
    EXPECT_EQ(mismatches.load(), 0);
    EXPECT_GT(checked.load(), 0);
}
