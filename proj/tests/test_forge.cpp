#include "kiln/forge.hpp"
#include "kiln/scenario_file.hpp"
#include "kiln/walker.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace kiln;
using namespace kiln::forge;
using fixtures::keys;

namespace {

ForgeErrc forge_error(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const ForgeError &e) {
        return e.code();
    }
    ADD_FAILURE() << "no ForgeError";
    return ForgeErrc::InvalidScenario;
}

std::size_t count_rejects(const RepoSnapshot &snap) {
    return walker::walk_objects(snap.objects, snap.tal).error_count;
}

} // namespace

TEST(Forge, AttackCensus) {
    const auto &snap = fixtures::attack_repo();
    std::vector<std::string> uris;
    for (const auto &[uri, _] : snap.objects) uris.push_back(uri);
    EXPECT_EQ(uris, (std::vector<std::string>{fixtures::kRoaUri, fixtures::kEvilUri, fixtures::kCrlUri,
                                              fixtures::kMftUri, fixtures::kTaUri}));
    EXPECT_EQ(snap.malicious_uris, std::vector<std::string>{fixtures::kEvilUri});
    EXPECT_EQ(snap.ta_uri, fixtures::kTaUri);
}

TEST(Forge, EvilCertificateCarriesCraftedKeyUsage) {
    auto cert = objects::parse_certificate(fixtures::attack_repo().objects.at(fixtures::kEvilUri));
    EXPECT_TRUE(cert.has_key_usage);
    EXPECT_TRUE(cert.key_usage_critical);
    EXPECT_EQ(to_hex(cert.fields.key_usage), "01060441414141414141414141");
    auto ta = objects::parse_certificate(fixtures::attack_repo().objects.at(fixtures::kTaUri));
    EXPECT_TRUE(objects::verify_certificate_signature(cert, ta.fields.public_key_info));
}

TEST(Forge, ManifestHashesMatchOracle) {
    for (const auto *snap : {&fixtures::attack_repo(), &fixtures::benign_repo()}) {
        auto so = objects::parse_signed_object(snap->objects.at(fixtures::kMftUri));
        auto mft = objects::parse_manifest_content(so.econtent);
        ASSERT_FALSE(mft.files.empty());
        for (const auto &f : mft.files) {
            const auto &bytes = snap->objects.at("rsync://rpki.kiln.test/repo/ta/" + f.file);
            auto want = oracle::sha256(bytes);
            EXPECT_EQ(f.hash, Bytes(want.begin(), want.end())) << f.file;
        }
    }
}

TEST(Forge, Sha256OracleKnownVectors) {
    EXPECT_EQ(oracle::hex_upper(oracle::sha256({})),
              "E3B0C44298FC1C149AFBF4C8996FB92427AE41E4649B934CA495991B7852B855");
    EXPECT_EQ(oracle::hex_upper(oracle::sha256(to_bytes("abc"))),
              "BA7816BF8F01CFEA414140DE5DAE2223B00361A396177A9CB410FF61F20015AD");
}

TEST(Forge, DeterministicGivenKeysAndClock) {
    auto a = assemble_repository(Scenario::default_attack(fixtures::clock()), keys());
    auto b = assemble_repository(Scenario::default_attack(fixtures::clock()), keys());
    EXPECT_EQ(a.objects, b.objects);
    EXPECT_EQ(a.tal, b.tal);
    EXPECT_EQ(a.session_id, b.session_id);
}

TEST(Forge, DirectoryKeyRingPersists) {
    fixtures::TempDir dir;
    std::shared_ptr<const crypto::Signer> first;
    {
        DirectoryKeyRing ring(dir.path());
        first = ring.key("ta");
    }
    DirectoryKeyRing again(dir.path());
    EXPECT_EQ(again.key("ta")->public_key_info(), first->public_key_info());
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "ta.pem"));
}

TEST(Forge, EveryScenarioHasExactlyMutatedCountRejects) {
    const Bytes payload(10, 0x41);
    Scenario s = Scenario::benign(fixtures::clock());
    EXPECT_EQ(count_rejects(assemble_repository(s, keys())), 0u);

    // A second mutated CA plus a ROA whose EE certificate carries the value.
    s = Scenario::default_attack(fixtures::clock());
    CaSpec evil2;
    evil2.name = "evil2";
    evil2.resources.prefixes = {IpPrefix::parse("10.2.0.0/16")};
    evil2.mutation = MutationSpec::overflow(payload);
    s.cas.push_back(evil2);
    RoaSpec bad_roa;
    bad_roa.name = "bad";
    bad_roa.asn = 65001;
    bad_roa.prefixes = {{IpPrefix::parse("192.0.2.0/24"), std::nullopt}};
    bad_roa.ee_mutation = MutationSpec::overflow(payload, keyusage::CertKind::EE);
    s.roas.push_back(bad_roa);

    auto snap = assemble_repository(s, keys());
    ASSERT_EQ(snap.malicious_count(), 3u);
    auto report = walker::walk_objects(snap.objects, snap.tal);
    EXPECT_EQ(report.error_count, 3u);
    for (const auto &uri : snap.malicious_uris) {
        auto *o = report.find(uri);
        ASSERT_NE(o, nullptr) << uri;
        EXPECT_EQ(o->reason, walker::Reason::WrongLength) << uri;
    }
    EXPECT_TRUE(report.completed);
}

TEST(Forge, NestedCaPublishesOwnPoint) {
    Scenario s = Scenario::benign(fixtures::clock());
    CaSpec mid;
    mid.name = "mid";
    mid.resources.prefixes = {IpPrefix::parse("10.0.0.0/12")};
    mid.resources.asns = {AsRange::parse("65005")};
    s.cas.push_back(mid);
    RoaSpec roa;
    roa.name = "deep";
    roa.issuer = "mid";
    roa.asn = 65005;
    roa.prefixes = {{IpPrefix::parse("10.1.0.0/16"), 20}};
    s.roas.push_back(roa);
    auto snap = assemble_repository(s, keys());
    EXPECT_TRUE(snap.objects.count("rsync://rpki.kiln.test/repo/mid/mid.mft"));
    EXPECT_TRUE(snap.objects.count("rsync://rpki.kiln.test/repo/mid/deep.roa"));
    auto report = walker::walk_objects(snap.objects, snap.tal);
    EXPECT_EQ(report.error_count, 0u);
    EXPECT_EQ(report.accepted_roas.size(), 2u);
}

TEST(Forge, ScenarioErrors) {
    Scenario s = Scenario::benign(fixtures::clock());
    CaSpec greedy;
    greedy.name = "greedy";
    greedy.resources.prefixes = {IpPrefix::parse("11.0.0.0/8")};
    s.cas.push_back(greedy);
    EXPECT_EQ(forge_error([&] { assemble_repository(s, keys()); }), ForgeErrc::ResourceExcess);

    s = Scenario::benign(fixtures::clock());
    s.roas[0].issuer = "nobody";
    EXPECT_EQ(forge_error([&] { assemble_repository(s, keys()); }), ForgeErrc::DanglingReference);

    s = Scenario::benign(fixtures::clock());
    s.roas[0].prefixes.clear();
    EXPECT_EQ(forge_error([&] { assemble_repository(s, keys()); }), ForgeErrc::EmptyPrefixList);

    s = Scenario::benign(fixtures::clock());
    s.roas.push_back(s.roas[0]);
    EXPECT_EQ(forge_error([&] { assemble_repository(s, keys()); }), ForgeErrc::DuplicateUri);
}

TEST(Forge, ExportImportRoundTrip) {
    fixtures::TempDir dir;
    const auto &snap = fixtures::attack_repo();
    export_repository(snap, dir.path());
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "ta.tal"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "repo/ta/evil.cer"));
    auto back = import_repository(dir.path());
    EXPECT_EQ(back.objects, snap.objects);
    EXPECT_EQ(back.tal, snap.tal);
    EXPECT_EQ(back.session_id, snap.session_id);
}

TEST(Forge, TalRoundTrip) {
    auto tal = parse_tal(fixtures::attack_repo().tal);
    ASSERT_EQ(tal.uris.size(), 1u);
    EXPECT_EQ(tal.uris[0], fixtures::kTaUri);
    EXPECT_EQ(tal.public_key_info, keys().key("ta")->public_key_info());
}

TEST(Forge, UriPaths) {
    EXPECT_EQ(uri_to_relative_path("rsync://h/repo/a.cer").generic_string(), "repo/a.cer");
    EXPECT_EQ(uri_base("rsync://h/repo/a.cer"), "rsync://h/");
    EXPECT_THROW(uri_to_relative_path("rsync://h/../etc/passwd"), std::invalid_argument);
    EXPECT_THROW(uri_to_relative_path("rsync://h/a/./b"), std::invalid_argument);
    EXPECT_THROW(uri_to_relative_path("nohost"), std::invalid_argument);
}

TEST(Forge, SessionIdIsUuidShaped) {
    const auto id = derive_session_id(to_bytes("seed"));
    ASSERT_EQ(id.size(), 36u);
    for (std::size_t i : {8u, 13u, 18u, 23u}) EXPECT_EQ(id[i], '-');
    EXPECT_EQ(id, derive_session_id(to_bytes("seed")));
    EXPECT_NE(id, derive_session_id(to_bytes("other")));
}

// ---------------------------------------------------------------------------

TEST(ScenarioFile, ParsesAttackScenario) {
    auto s = parse_scenario(R"(
# comment
host = "example.test"
validity_days = 10

[ta]
resources = ["10.0.0.0/8", "192.0.2.0/24",
             "AS65000-65010"]

[[ca]]
name = "evil"
resources = ["10.1.0.0/16"]
mutation = "keyusage-overflow payload=41414141414141414141"

[[roa]]
name = "benign"
asn = 65000
prefixes = ["192.0.2.0/24", "10.0.0.0/16-24"]
mutation = "keyusage-overflow payload=4242"
)");
    EXPECT_EQ(s.host, "example.test");
    EXPECT_EQ(s.validity, std::chrono::days{10});
    ASSERT_EQ(s.ta_resources.prefixes.size(), 2u);
    ASSERT_EQ(s.ta_resources.asns.size(), 1u);
    EXPECT_EQ(s.ta_resources.asns[0].max, 65010u);
    ASSERT_EQ(s.cas.size(), 1u);
    EXPECT_EQ(s.cas[0].parent, "ta");
    EXPECT_TRUE(s.cas[0].mutation.active());
    EXPECT_EQ(s.cas[0].mutation.payload, Bytes(10, 0x41));
    ASSERT_EQ(s.roas.size(), 1u);
    EXPECT_EQ(s.roas[0].prefixes[1].max_length, 24u);
    EXPECT_EQ(s.roas[0].ee_mutation.kind, keyusage::CertKind::EE);
}

TEST(ScenarioFile, RejectsUnknownKeysAndTables) {
    EXPECT_EQ(forge_error([] { parse_scenario("bogus = 1\n"); }), ForgeErrc::InvalidScenario);
    EXPECT_EQ(forge_error([] { parse_scenario("[nope]\n"); }), ForgeErrc::InvalidScenario);
    EXPECT_EQ(forge_error([] { parse_scenario("[[ca]]\nname = \"x\"\ncolour = \"red\"\n"); }),
              ForgeErrc::InvalidScenario);
    EXPECT_EQ(forge_error([] { parse_scenario("[[ca]]\nname = \"x\"\nmutation = \"explode\"\n"); }),
              ForgeErrc::InvalidScenario);
    EXPECT_EQ(forge_error([] { parse_scenario("host = \"unterminated\n"); }), ForgeErrc::InvalidScenario);
}

TEST(ScenarioFile, ParseMutation) {
    EXPECT_FALSE(parse_mutation("none", keyusage::CertKind::CA).active());
    auto m = parse_mutation("keyusage-overflow payload=0x4141", keyusage::CertKind::CA);
    EXPECT_TRUE(m.active());
    EXPECT_EQ(m.payload, Bytes(2, 0x41));
}

TEST(ScenarioFile, ShippedAttackFileMatchesPreset) {
    std::ifstream in(std::filesystem::path(KILN_DATA_DIR) / "attack.toml");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto from_file = parse_scenario(text);
    from_file.now = fixtures::clock();
    auto snap = assemble_repository(from_file, fixtures::keys());
    EXPECT_EQ(snap.objects, fixtures::attack_repo().objects);
    EXPECT_EQ(snap.malicious_count(), 1u);
}
