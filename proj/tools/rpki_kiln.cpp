// rpki-kiln: forge, serve, simulate, validate and scan subcommands.
//
// Exit status: 0 success, 1 usage error, 2 runtime error. `validate` exits 0
// when objects are rejected unless --strict is given.

#include "kiln/fingerprint.hpp"
#include "kiln/forge.hpp"
#include "kiln/overflow_sim.hpp"
#include "kiln/rrdp.hpp"
#include "kiln/scenario_file.hpp"
#include "kiln/walker.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace kiln;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Bytes read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path &path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// "2024-09-01" or "2024-09-01T12:00:00Z".
fingerprint::Timestamp parse_clock(const std::string &text) {
    try {
        if (text.size() == 10) return fingerprint::parse_timestamp(text + "T00:00:00Z");
        return fingerprint::parse_timestamp(text);
    } catch (const std::invalid_argument &e) {
        throw UsageError(std::string("bad clock value: ") + e.what());
    }
}

std::optional<fingerprint::Timestamp> injected_clock(const std::string &flag) {
    if (!flag.empty()) return parse_clock(flag);
    if (const char *env = std::getenv("RPKI_KILN_CLOCK"); env && *env) return parse_clock(env);
    return std::nullopt;
}

fingerprint::Timestamp now_seconds() {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

// ---------------------------------------------------------------------------

struct ForgeArgs {
    std::string scenario;
    std::string preset;
    std::string out;
    std::string keys;
    std::string clock;
    bool pretty = false;
};

int run_forge(const ForgeArgs &a) {
    if (a.scenario.empty() == a.preset.empty()) throw UsageError("give exactly one of --scenario or --preset");
    const auto now = injected_clock(a.clock).value_or(now_seconds());

    forge::Scenario scenario;
    if (!a.scenario.empty()) {
        try {
            scenario = forge::parse_scenario(kiln::to_string(read_file(a.scenario)));
        } catch (const forge::ForgeError &e) {
            throw UsageError(e.what());
        }
        scenario.now = now;
    } else if (a.preset == "attack") {
        scenario = forge::Scenario::default_attack(now);
    } else {
        scenario = forge::Scenario::benign(now);
    }

    std::unique_ptr<forge::KeyRing> keys;
    if (a.keys.empty())
        keys = std::make_unique<forge::MemoryKeyRing>();
    else
        keys = std::make_unique<forge::DirectoryKeyRing>(a.keys);

    auto snap = forge::assemble_repository(scenario, *keys);
    forge::export_repository(snap, a.out);

    if (a.pretty) {
        std::cout << "wrote " << snap.objects.size() << " objects to " << a.out << "\n";
        for (const auto &[uri, bytes] : snap.objects) {
            bool bad = std::find(snap.malicious_uris.begin(), snap.malicious_uris.end(), uri) != snap.malicious_uris.end();
            std::cout << "  " << (bad ? "* " : "  ") << uri << "  (" << bytes.size() << " bytes)\n";
        }
        std::cout << "TAL: " << (fs::path(a.out) / "ta.tal").string() << "\nsession: " << snap.session_id << "\n";
        return 0;
    }
    nlohmann::ordered_json j;
    j["out"] = a.out;
    j["tal"] = (fs::path(a.out) / "ta.tal").string();
    j["session_id"] = snap.session_id;
    j["objects"] = snap.objects.size();
    j["malicious"] = snap.malicious_uris;
    std::cout << j.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    std::string repo;
    std::string listen = "127.0.0.1:8080";
    std::string log;
    bool isolated = false;
    bool pretty = false;
};

std::pair<std::string, int> split_listen(const std::string &listen) {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw UsageError("--listen must be host:port");
    std::string host = listen.substr(0, colon);
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(listen.substr(colon + 1), &used);
        if (used != listen.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("port");
    } catch (const std::exception &) {
        throw UsageError("bad port in --listen " + listen);
    }
    return {host, port};
}

int run_serve(const ServeArgs &a) {
    auto [host, port] = split_listen(a.listen);
    if (!a.isolated)
        throw std::runtime_error("refusing to serve without --i-am-isolated: only run on an isolated test network");

    rrdp::PublicationServer::Options opts;
    opts.isolated_ack = true;
    if (!a.log.empty()) opts.log_path = a.log;
    if (auto fixed = injected_clock("")) opts.clock = [t = *fixed] { return t; };

    rrdp::PublicationServer server(forge::import_repository(a.repo), opts);

    // Signals are taken synchronously on this thread; the HTTP workers
    // inherit the blocked mask.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    int bound = server.start(host, port);
    if (a.pretty)
        std::cout << "serving " << a.repo << " on " << host << ":" << bound << "\nnotification: "
                  << server.notification_url() << std::endl;
    else
        std::cout << nlohmann::json{{"notification", server.notification_url()}, {"port", bound}}.dump() << std::endl;

    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    bool fortify = false;
    bool builtin = false;
    std::string protector = "off";
    std::string layout;
    std::string content;
    std::string kind = "CA";
    bool pretty = false;
};

int run_simulate(const SimulateArgs &a) {
    sim::CompilerConfig cfg;
    sim::FrameLayout layout;
    Bytes content;
    keyusage::CertKind kind{};
    try {
        cfg.fortify = a.fortify;
        cfg.builtin_memcpy = a.builtin;
        cfg.stack_protector = sim::parse_stack_protector(a.protector);
        if (!a.layout.empty()) layout = sim::parse_layout(a.layout);
        content = from_hex(a.content);
        auto k = keyusage::parse_cert_kind(a.kind);
        if (!k) throw std::invalid_argument("--kind must be CA or EE");
        kind = *k;
    } catch (const std::invalid_argument &e) {
        throw UsageError(e.what());
    }
    auto out = sim::simulate(cfg, layout, content, kind);

    if (a.pretty) {
        std::cout << "config:       " << sim::to_string(cfg) << "\nlayout:       " << sim::to_string(layout)
                  << "\ncontent:      " << content.size() << " bytes\nclass:        " << sim::to_string(out.cls)
                  << "\noverflow:     " << out.overflow_bytes << " bytes\nret clobber:  " << out.ret_bytes_overwritten
                  << " bytes (" << to_hex(out.return_address_bytes) << ")\nfn result:    "
                  << sim::to_string(out.fn_result) << "\n";
        return 0;
    }
    nlohmann::ordered_json j;
    j["class"] = std::string(sim::to_string(out.cls));
    j["overflow_bytes"] = out.overflow_bytes;
    j["ret_bytes_overwritten"] = out.ret_bytes_overwritten;
    j["fn_result"] = std::string(sim::to_string(out.fn_result));
    j["return_address_bytes"] = to_hex(out.return_address_bytes);
    j["build"] = std::string(sim::to_string(sim::classify_build(cfg)));
    std::cout << j.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::string tal;
    std::string source;
    std::string report;
    bool strict = false;
    bool pretty = false;
};

int run_validate(const ValidateArgs &a) {
    Bytes tal = read_file(a.tal);
    walker::WalkOptions opts;
    opts.on_reject = [](const walker::ObjectOutcome &o) {
        std::cerr << "rejected " << o.uri << ": " << walker::to_string(o.reason);
        if (!o.detail.empty()) std::cerr << " (" << o.detail << ")";
        std::cerr << "\n";
    };
    auto report = walker::walk(a.source, tal, opts);
    std::string json = report.to_json();
    if (!a.report.empty()) write_file(a.report, json + "\n");

    if (a.pretty)
        std::cout << report.to_table();
    else if (a.report.empty())
        std::cout << json << "\n";
    else
        std::cout << nlohmann::ordered_json{{"report", a.report},
                                            {"error_count", report.error_count},
                                            {"completed", report.completed}}
                         .dump()
                  << "\n";
    return a.strict && report.error_count > 0 ? kExitRuntime : 0;
}

// ---------------------------------------------------------------------------

struct ScanArgs {
    std::string log;
    bool pretty = false;
};

int run_scan(const ScanArgs &a) {
    std::vector<fingerprint::ClientObservation> log;
    try {
        log = fingerprint::read_log(kiln::to_string(read_file(a.log)));
    } catch (const std::invalid_argument &e) {
        throw std::runtime_error(a.log + ": " + e.what());
    }
    auto s = fingerprint::summarize(log);
    if (!a.pretty) {
        std::cout << s.to_json() << "\n";
        return 0;
    }
    std::cout << "requests: " << s.total_requests << "  distinct sources: " << s.distinct_sources << "\n";
    std::cout << "class           sources  requests\n";
    for (const auto &[cls, n] : s.sources) {
        std::string name(fingerprint::to_string(cls));
        std::cout << name << std::string(16 - name.size(), ' ') << n << std::string(9 - std::to_string(n).size(), ' ')
                  << s.requests.at(cls) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"RPKI robustness testbed: crafted repositories, RRDP serving, a bounds-safe walker"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rpki-kiln 0.1.0");

    ForgeArgs fa;
    auto *forge_cmd = app.add_subcommand("forge", "Build a signed repository and TAL");
    forge_cmd->add_option("--scenario", fa.scenario, "Scenario file")->check(CLI::ExistingFile);
    forge_cmd->add_option("--preset", fa.preset, "Built-in scenario")->check(CLI::IsMember({"attack", "benign"}));
    forge_cmd->add_option("--out", fa.out, "Output directory")->required();
    forge_cmd->add_option("--keys", fa.keys, "Key directory (PEM per key; created on demand)");
    forge_cmd->add_option("--clock", fa.clock, "Signing time, ISO-8601 (overrides RPKI_KILN_CLOCK)");
    forge_cmd->add_flag("--pretty", fa.pretty, "Human-readable output");

    ServeArgs sa;
    auto *serve_cmd = app.add_subcommand("serve", "Serve a repository over RRDP and log fetching clients");
    serve_cmd->add_option("--repo", sa.repo, "Repository directory written by forge")->required()->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--listen", sa.listen, "host:port (port 0 picks a free port)")->capture_default_str();
    serve_cmd->add_option("--log", sa.log, "JSON-lines access log");
    serve_cmd->add_flag("--i-am-isolated", sa.isolated, "Confirm the network is an isolated test network");
    serve_cmd->add_flag("--pretty", sa.pretty, "Human-readable output");

    SimulateArgs ma;
    auto *sim_cmd = app.add_subcommand("simulate", "Replay the key-usage copy against a modeled stack frame");
    sim_cmd->add_flag("--fortify", ma.fortify, "Bounds-checked copy");
    sim_cmd->add_flag("--builtin-memcpy", ma.builtin, "Compiler-inlined copy");
    sim_cmd->add_option("--stack-protector", ma.protector, "off | basic | strong")->capture_default_str();
    sim_cmd->add_option("--layout", ma.layout, "pad=N,fp=N,ret=N,canary=N");
    sim_cmd->add_option("--content", ma.content, "Key-usage BIT STRING content, hex")->required();
    sim_cmd->add_option("--kind", ma.kind, "CA | EE")->capture_default_str();
    sim_cmd->add_flag("--pretty", ma.pretty, "Human-readable output");

    ValidateArgs va;
    auto *val_cmd = app.add_subcommand("validate", "Walk a repository from its TAL");
    val_cmd->add_option("--tal", va.tal, "Trust anchor locator")->required()->check(CLI::ExistingFile);
    val_cmd->add_option("--source", va.source, "Repository directory or RRDP notification URL")->required();
    val_cmd->add_option("--report", va.report, "Write the JSON report here");
    val_cmd->add_flag("--strict", va.strict, "Exit 2 when any object is rejected");
    val_cmd->add_flag("--pretty", va.pretty, "Human-readable output");

    ScanArgs ca;
    auto *scan_cmd = app.add_subcommand("scan", "Summarize a serve access log");
    scan_cmd->add_option("--log", ca.log, "JSON-lines access log")->required()->check(CLI::ExistingFile);
    scan_cmd->add_flag("--pretty", ca.pretty, "Human-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*forge_cmd) return run_forge(fa);
        if (*serve_cmd) return run_serve(sa);
        if (*sim_cmd) return run_simulate(ma);
        if (*val_cmd) return run_validate(va);
        if (*scan_cmd) return run_scan(ca);
    } catch (const UsageError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
