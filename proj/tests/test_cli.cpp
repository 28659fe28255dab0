#include "fixtures.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run run(const std::string &args) {
    const std::string cmd = std::string(KILN_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE *p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (auto n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
    const int raw = pclose(p);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

} // namespace

TEST(Cli, ForgeThenValidateDirectory) {
    fixtures::TempDir dir;
    const auto repo = dir.path() / "repo";
    auto forged = run("forge --preset attack --clock 2024-09-01 --keys " + (dir.path() / "keys").string() + " --out " +
                      repo.string());
    ASSERT_EQ(forged.status, 0);
    auto fj = nlohmann::json::parse(forged.out);
    EXPECT_EQ(fj.at("objects").get<int>(), 5);
    ASSERT_EQ(fj.at("malicious").size(), 1u);
    EXPECT_EQ(fj.at("malicious")[0], fixtures::kEvilUri);

    const auto report = dir.path() / "report.json";
    auto v = run("validate --tal " + (repo / "ta.tal").string() + " --source " + repo.string() + " --report " +
                 report.string());
    EXPECT_EQ(v.status, 0);
    std::ifstream in(report);
    auto rj = nlohmann::json::parse(in);
    EXPECT_EQ(rj.at("error_count").get<int>(), 1);
    EXPECT_TRUE(rj.at("completed").get<bool>());
    EXPECT_EQ(rj.at("accepted_roas").size(), 1u);

    auto strict = run("validate --strict --tal " + (repo / "ta.tal").string() + " --source " + repo.string());
    EXPECT_EQ(strict.status, 2);
}

TEST(Cli, SimulateReportsHijack) {
    auto r = run("simulate --content 01060441414141414141414141");
    ASSERT_EQ(r.status, 0);
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("class"), "ControlFlowHijack");
    EXPECT_EQ(j.at("overflow_bytes"), 11);
    EXPECT_EQ(j.at("ret_bytes_overwritten"), 5);

    r = run("simulate --stack-protector strong --content 01060441414141414141414141");
    EXPECT_EQ(nlohmann::json::parse(r.out).at("class"), "CanaryTrap");
}

TEST(Cli, ScanEmptyLog) {
    fixtures::TempDir dir;
    const auto log = dir.path() / "empty.jsonl";
    std::ofstream(log).flush();
    auto r = run("scan --log " + log.string());
    ASSERT_EQ(r.status, 0);
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("total_requests"), 0);
}

TEST(Cli, UsageAndSafetyErrors) {
    EXPECT_EQ(run("").status, 1);
    EXPECT_EQ(run("simulate").status, 1);
    EXPECT_EQ(run("simulate --content zz").status, 1);
    EXPECT_EQ(run("forge --out /tmp/x --preset attack --scenario y").status, 1);
    EXPECT_EQ(run("validate --tal /nonexistent --source /nonexistent").status, 1);

    fixtures::TempDir dir;
    ASSERT_EQ(run("forge --preset benign --clock 2024-09-01 --keys " + (dir.path() / "k").string() + " --out " +
                  (dir.path() / "r").string())
                  .status,
              0);
    EXPECT_EQ(run("serve --repo " + (dir.path() / "r").string()).status, 2);
    const auto bogus_tal = dir.path() / "bogus.tal";
    std::ofstream(bogus_tal) << "rsync://rpki.kiln.test/ta/ta.cer\n\nAAAA\n";
    EXPECT_EQ(run("validate --tal " + bogus_tal.string() + " --source " + (dir.path() / "r").string()).status, 2);
}
