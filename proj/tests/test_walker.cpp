#include "kiln/overflow_sim.hpp"
#include "kiln/rrdp.hpp"
#include "kiln/walker.hpp"

#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kiln;
using namespace kiln::walker;

namespace {

ObjectContext ca_context(const forge::RepoSnapshot &snap) {
    auto ta = objects::parse_certificate(snap.objects.at(snap.ta_uri));
    ObjectContext ctx;
    ctx.type = ObjectType::Certificate;
    ctx.issuer_public_key_info = ta.fields.public_key_info;
    ctx.issuer_resources = ta.fields.resources;
    return ctx;
}

// Issues a CA certificate under the TA key with arbitrary key-usage content.
Bytes ca_with_key_usage(const Bytes &ku) {
    objects::ResourceCert c;
    c.serial = 77;
    c.issuer = "ta";
    c.subject = "probe";
    c.not_before = fixtures::clock();
    c.not_after = fixtures::clock() + std::chrono::days{30};
    c.key_usage = ku;
    c.resources.prefixes = {IpPrefix::parse("10.9.0.0/16")};
    c.uris.repository = "rsync://rpki.kiln.test/repo/probe/";
    c.uris.manifest = "rsync://rpki.kiln.test/repo/probe/probe.mft";
    c.is_ca = true;
    auto key = fixtures::keys().key("ca-probe");
    c.public_key_info = key->public_key_info();
    c.subject_key_id = key->key_id();
    c.authority_key_id = fixtures::keys().key("ta")->key_id();
    return objects::encode_certificate(c, *fixtures::keys().key("ta"));
}

} // namespace

TEST(Walker, BenignScenario) {
    const auto &snap = fixtures::benign_repo();
    auto r = walk_objects(snap.objects, snap.tal);
    EXPECT_EQ(r.error_count, 0u);
    EXPECT_TRUE(r.completed);
    ASSERT_EQ(r.accepted_roas.size(), 1u);
    EXPECT_EQ(r.accepted_roas[0].asn, 65000u);
    EXPECT_EQ(r.accepted_roas[0].prefix.to_string(), "192.0.2.0/24");
    EXPECT_EQ(r.outcomes.size(), snap.objects.size());
}

TEST(Walker, AttackScenarioIsStealthy) {
    const auto &snap = fixtures::attack_repo();
    std::vector<ObjectOutcome> logged;
    WalkOptions opts;
    opts.on_reject = [&](const ObjectOutcome &o) { logged.push_back(o); };
    auto r = walk_objects(snap.objects, snap.tal, opts);
    EXPECT_EQ(r.error_count, 1u);
    EXPECT_TRUE(r.completed);
    ASSERT_EQ(logged.size(), 1u);
    EXPECT_EQ(logged[0].uri, fixtures::kEvilUri);
    EXPECT_EQ(logged[0].reason, Reason::WrongLength);
    ASSERT_EQ(r.accepted_roas.size(), 1u);
    EXPECT_EQ(r.find(fixtures::kRoaUri)->verdict, Verdict::Accept);
    EXPECT_EQ(r.outcomes.size(), snap.objects.size());
}

TEST(Walker, MutatedCaPassesSignatureBeforeKeyUsageRejection) {
    const auto &snap = fixtures::attack_repo();
    auto ctx = ca_context(snap);
    auto res = validate_object(snap.objects.at(fixtures::kEvilUri), ctx);
    EXPECT_EQ(res.reason, Reason::WrongLength);
    EXPECT_EQ(res.stages, (std::vector<Stage>{Stage::Structure, Stage::Signature, Stage::Hash, Stage::KeyUsage}));
}

TEST(Walker, TruncatedDerStopsBeforeSignature) {
    const auto &snap = fixtures::attack_repo();
    Bytes b = snap.objects.at(fixtures::kEvilUri);
    b.resize(b.size() / 2);
    auto res = validate_object(b, ca_context(snap));
    EXPECT_EQ(res.reason, Reason::Truncated);
    EXPECT_EQ(res.stages, std::vector<Stage>{Stage::Structure});
}

TEST(Walker, ValidRoaYieldsPayload) {
    const auto &snap = fixtures::attack_repo();
    auto ctx = ca_context(snap);
    ctx.type = ObjectType::Roa;
    auto res = validate_object(snap.objects.at(fixtures::kRoaUri), ctx);
    ASSERT_TRUE(res.accepted()) << res.detail;
    EXPECT_EQ(res.roa->asn, 65000u);
    EXPECT_EQ(res.stages, check_order());
}

TEST(Walker, SignatureTamperIsDetected) {
    auto snap = fixtures::benign_repo();
    auto &roa = snap.objects.at(fixtures::kRoaUri);
    roa[roa.size() - 10] ^= 0x01; // inside the CMS signature value
    auto r = walk_objects(snap.objects, snap.tal);
    EXPECT_EQ(r.find(fixtures::kRoaUri)->reason, Reason::BadSignature);
    EXPECT_EQ(r.error_count, 1u);
    EXPECT_TRUE(r.accepted_roas.empty());
}

// Swaps in a ROA that is validly signed by the same keys but differs from
// the bytes the manifest committed to.
TEST(Walker, ManifestHashMismatch) {
    auto scenario = forge::Scenario::benign(fixtures::clock());
    scenario.roas[0].prefixes.push_back({IpPrefix::parse("10.0.0.0/16"), std::nullopt});
    auto other = forge::assemble_repository(scenario, fixtures::keys());

    auto snap = fixtures::benign_repo();
    const Bytes &swapped = other.objects.at(fixtures::kRoaUri);
    ASSERT_NE(swapped, snap.objects.at(fixtures::kRoaUri));
    snap.objects[fixtures::kRoaUri] = swapped;

    auto mft = objects::parse_manifest_content(objects::parse_signed_object(snap.objects.at(fixtures::kMftUri)).econtent);
    auto listed = std::find_if(mft.files.begin(), mft.files.end(), [](auto &f) { return f.file == "benign.roa"; });
    ASSERT_NE(listed, mft.files.end());
    auto actual = oracle::sha256(swapped);
    ASSERT_NE(listed->hash, Bytes(actual.begin(), actual.end()));

    auto r = walk_objects(snap.objects, snap.tal);
    EXPECT_EQ(r.find(fixtures::kRoaUri)->reason, Reason::HashMismatch);
    EXPECT_EQ(r.error_count, 1u);
    EXPECT_TRUE(r.completed);
}

TEST(Walker, MissingAndUnlistedObjects) {
    auto snap = fixtures::attack_repo();
    snap.objects.erase(fixtures::kCrlUri);
    snap.objects["rsync://rpki.kiln.test/repo/ta/stray.roa"] = Bytes{0x30, 0x00};
    auto r = walk_objects(snap.objects, snap.tal);
    EXPECT_EQ(r.find(fixtures::kCrlUri)->reason, Reason::MissingObject);
    auto *stray = r.find("rsync://rpki.kiln.test/repo/ta/stray.roa");
    ASSERT_NE(stray, nullptr);
    EXPECT_EQ(stray->verdict, Verdict::Skip);
    EXPECT_EQ(stray->reason, Reason::NotOnManifest);
    EXPECT_EQ(r.error_count, 2u);
}

TEST(Walker, RejectedCaSkipsItsSubtreeOnly) {
    auto s = forge::Scenario::default_attack(fixtures::clock());
    forge::RoaSpec under_evil;
    under_evil.name = "hidden";
    under_evil.issuer = "evil";
    under_evil.asn = 65001;
    under_evil.prefixes = {{IpPrefix::parse("10.1.0.0/16"), std::nullopt}};
    s.roas.push_back(under_evil);
    auto snap = forge::assemble_repository(s, fixtures::keys());
    auto r = walk_objects(snap.objects, snap.tal);
    EXPECT_EQ(r.error_count, 1u);
    EXPECT_EQ(r.outcomes.size(), snap.objects.size());
    auto *hidden = r.find("rsync://rpki.kiln.test/repo/evil/hidden.roa");
    ASSERT_NE(hidden, nullptr);
    EXPECT_EQ(hidden->verdict, Verdict::Skip);
    EXPECT_EQ(hidden->reason, Reason::ParentRejected);
    ASSERT_EQ(r.accepted_roas.size(), 1u);
    EXPECT_EQ(r.accepted_roas[0].asn, 65000u);
}

TEST(Walker, TalMismatchAndUnreachable) {
    const auto &snap = fixtures::attack_repo();
    auto wrong_tal = forge::make_tal(snap.ta_uri, fixtures::keys().key("ca-evil")->public_key_info());
    try {
        walk_objects(snap.objects, wrong_tal);
        ADD_FAILURE();
    } catch (const WalkError &e) {
        EXPECT_EQ(e.code(), WalkErrc::TalMismatch);
    }
    try {
        walk_objects({}, snap.tal);
        ADD_FAILURE();
    } catch (const WalkError &e) {
        EXPECT_EQ(e.code(), WalkErrc::SourceUnreachable);
    }
    try {
        walk("http://127.0.0.1:1/notification.xml", snap.tal);
        ADD_FAILURE();
    } catch (const WalkError &e) {
        EXPECT_EQ(e.code(), WalkErrc::SourceUnreachable);
    }
    EXPECT_THROW(walk("/nonexistent/dir", snap.tal), WalkError);
}

TEST(Walker, DirectorySourceMatchesInMemoryWalk) {
    fixtures::TempDir dir;
    forge::export_repository(fixtures::attack_repo(), dir.path());
    auto a = walk(dir.path().string(), fixtures::attack_repo().tal);
    auto b = walk_objects(fixtures::attack_repo().objects, fixtures::attack_repo().tal);
    EXPECT_EQ(a.error_count, b.error_count);
    ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) EXPECT_EQ(a.outcomes[i].uri, b.outcomes[i].uri);
}

TEST(Walker, RrdpSourceOverLoopback) {
    rrdp::PublicationServer::Options o;
    o.isolated_ack = true;
    rrdp::PublicationServer server(fixtures::attack_repo(), o);
    const int port = server.start("127.0.0.1", 0);
    auto r = walk("http://127.0.0.1:" + std::to_string(port), fixtures::attack_repo().tal);
    server.stop();
    ASSERT_TRUE(r.rrdp);
    EXPECT_TRUE(r.rrdp->snapshot_hash_ok);
    EXPECT_EQ(r.error_count, 1u);
    EXPECT_TRUE(r.completed);
    ASSERT_EQ(server.observations().size(), 2u);
}

// Wherever the unprotected copy would overflow, the safe path reports
// WrongLength, for structurally valid certificates.
TEST(Walker, DifferentialAgainstOverflowModel) {
    const auto &snap = fixtures::attack_repo();
    const auto ctx = ca_context(snap);
    const sim::CompilerConfig none{};
    gen::Rng rng(5);
    for (int i = 0; i < 60; ++i) {
        Bytes ku = gen::random_bytes(rng, gen::uniform(rng, 1, 20));
        if (!ku.empty() && (rng() & 1)) ku[0] = 0x01;
        auto overflow = sim::simulate(none, sim::FrameLayout{}, ku, keyusage::CertKind::CA).overflow_bytes;
        auto res = validate_object(ca_with_key_usage(ku), ctx);
        ASSERT_NE(res.stages.size(), 1u) << "structurally invalid probe " << to_hex(ku);
        if (overflow > 0) {
            EXPECT_EQ(res.reason, Reason::WrongLength) << to_hex(ku);
        }
        if (ku.size() == 2) {
            EXPECT_NE(res.reason, Reason::WrongLength);
        }
    }
    EXPECT_TRUE(validate_object(ca_with_key_usage(from_hex("0106")), ctx).accepted());
}

TEST(Walker, ReportJsonNamesReasons) {
    auto r = walk_objects(fixtures::attack_repo().objects, fixtures::attack_repo().tal);
    auto json = r.to_json();
    EXPECT_NE(json.find("\"reason\": \"WrongLength\""), std::string::npos);
    EXPECT_NE(json.find("\"check_order\""), std::string::npos);
    EXPECT_NE(json.find("\"completed\": true"), std::string::npos);
    EXPECT_NE(r.to_table().find("WrongLength"), std::string::npos);
}

TEST(Walker, ReasonNamesRoundTrip) {
    for (int i = 0; i <= static_cast<int>(Reason::ParentRejected); ++i) {
        auto r = static_cast<Reason>(i);
        EXPECT_EQ(parse_reason(to_string(r)), r);
    }
}
