#include "kiln/fingerprint.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace kiln::fingerprint {

namespace {

std::string lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

bool parse_u32(std::string_view s, std::uint32_t &out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

std::string_view to_string(Software s) {
    switch (s) {
    case Software::Fort: return "Fort";
    case Software::OtherRp: return "OtherRp";
    case Software::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::optional<Software> parse_software(std::string_view text) {
    for (auto s : {Software::Fort, Software::OtherRp, Software::Unknown})
        if (text == to_string(s)) return s;
    return std::nullopt;
}

Version Version::release(std::vector<std::uint32_t> parts) {
    Version v;
    v.parts_ = std::move(parts);
    return v;
}

Version Version::beta(std::uint32_t number) {
    Version v;
    v.beta_ = number;
    return v;
}

std::optional<Version> Version::parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    const std::string lowered = lower(text);
    if (auto pos = lowered.find("beta"); pos != std::string::npos) {
        // Whatever precedes the marker must be a dotted numeric prefix.
        std::string_view head = std::string_view(lowered).substr(0, pos);
        while (!head.empty() && (head.back() == '.' || head.back() == '-' || head.back() == '_')) head.remove_suffix(1);
        for (char c : head)
            if (!std::isdigit(static_cast<unsigned char>(c)) && c != '.') return std::nullopt;
        std::string_view tail = std::string_view(lowered).substr(pos + 4);
        while (!tail.empty() && (tail.front() == '-' || tail.front() == '.' || tail.front() == '_')) tail.remove_prefix(1);
        std::uint32_t n = 1;
        if (!tail.empty() && !parse_u32(tail, n)) return std::nullopt;
        return beta(n);
    }
    std::vector<std::uint32_t> parts;
    std::string_view rest(lowered);
    while (true) {
        auto dot = rest.find('.');
        std::uint32_t part = 0;
        if (!parse_u32(rest.substr(0, dot), part)) return std::nullopt;
        parts.push_back(part);
        if (dot == std::string_view::npos) break;
        rest.remove_prefix(dot + 1);
    }
    return release(std::move(parts));
}

std::string Version::to_string() const {
    if (beta_) return "beta" + std::to_string(*beta_);
    std::string out;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) out.push_back('.');
        out += std::to_string(parts_[i]);
    }
    return out;
}

std::strong_ordering operator<=>(const Version &a, const Version &b) {
    if (a.beta_ && b.beta_) return *a.beta_ <=> *b.beta_;
    if (a.beta_) return std::strong_ordering::less;
    if (b.beta_) return std::strong_ordering::greater;
    const std::size_t n = std::max(a.parts_.size(), b.parts_.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t x = i < a.parts_.size() ? a.parts_[i] : 0;
        std::uint32_t y = i < b.parts_.size() ? b.parts_[i] : 0;
        if (auto c = x <=> y; c != 0) return c;
    }
    return std::strong_ordering::equal;
}

VersionRange VersionRange::fort_vulnerable() { return VersionRange{Version::beta(2), Version::release({1, 6, 2})}; }

const std::vector<ProductPattern> &default_patterns() {
    static const std::vector<ProductPattern> patterns{
        {"fort", Software::Fort},
        {"routinator", Software::OtherRp},
        {"rpki-client", Software::OtherRp},
        {"octorpki", Software::OtherRp},
        {"rpki-prover", Software::OtherRp},
        {"rpki-validator", Software::OtherRp},
        {"rpki-validator-3", Software::OtherRp},
        {"rpstir", Software::OtherRp},
    };
    return patterns;
}

Fingerprint fingerprint(std::string_view user_agent, const std::vector<ProductPattern> &patterns) {
    while (!user_agent.empty() && std::isspace(static_cast<unsigned char>(user_agent.front()))) user_agent.remove_prefix(1);
    auto end = user_agent.find_first_of(" \t");
    std::string_view token = user_agent.substr(0, end);
    auto slash = token.find('/');
    const std::string product = lower(token.substr(0, slash));

    Fingerprint out;
    auto it = std::find_if(patterns.begin(), patterns.end(), [&](const ProductPattern &p) { return lower(p.token) == product; });
    if (it == patterns.end() || product.empty()) return out;
    out.software = it->software;
    if (slash != std::string_view::npos) out.version = Version::parse(token.substr(slash + 1));
    return out;
}

std::string format_user_agent(std::string_view product, const Version &version) {
    return std::string(product) + "/" + version.to_string();
}

std::string_view to_string(VulnClass c) {
    switch (c) {
    case VulnClass::Vulnerable: return "Vulnerable";
    case VulnClass::NotVulnerable: return "NotVulnerable";
    case VulnClass::NotApplicable: return "NotApplicable";
    case VulnClass::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::optional<VulnClass> parse_vuln_class(std::string_view text) {
    for (auto c : {VulnClass::Vulnerable, VulnClass::NotVulnerable, VulnClass::NotApplicable, VulnClass::Unknown})
        if (text == to_string(c)) return c;
    return std::nullopt;
}

VulnClass classify(Software software, const std::optional<Version> &version, const VersionRange &range) {
    switch (software) {
    case Software::OtherRp: return VulnClass::NotApplicable;
    case Software::Unknown: return VulnClass::Unknown;
    case Software::Fort:
        if (!version) return VulnClass::Unknown;
        return range.contains(*version) ? VulnClass::Vulnerable : VulnClass::NotVulnerable;
    }
    return VulnClass::Unknown;
}

ClientObservation observe(Timestamp ts, std::string source, std::string user_agent, const VersionRange &range) {
    ClientObservation obs;
    obs.timestamp = ts;
    obs.source = std::move(source);
    obs.user_agent = std::move(user_agent);
    auto fp = fingerprint(obs.user_agent);
    obs.software = fp.software;
    obs.version = fp.version;
    obs.vuln_class = classify(fp.software, fp.version, range);
    return obs;
}

std::string format_timestamp(Timestamp ts) {
    auto day = std::chrono::floor<std::chrono::days>(ts);
    std::chrono::year_month_day ymd{day};
    std::chrono::hh_mm_ss hms{ts - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()));
    return buf;
}

Timestamp parse_timestamp(std::string_view text) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char z = 0;
    std::string copy(text);
    int n = std::sscanf(copy.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c", &y, &mo, &d, &h, &mi, &s, &z);
    if (n != 7 || z != 'Z' || copy.size() != 20) throw std::invalid_argument("timestamp must be YYYY-MM-DDTHH:MM:SSZ: " + copy);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw std::invalid_argument("timestamp out of range: " + copy);
    return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

std::string to_json_line(const ClientObservation &obs) {
    nlohmann::ordered_json j;
    j["ts"] = format_timestamp(obs.timestamp);
    j["src"] = obs.source;
    j["ua"] = obs.user_agent;
    j["sw"] = std::string(to_string(obs.software));
    j["ver"] = obs.version ? nlohmann::ordered_json(obs.version->to_string()) : nlohmann::ordered_json(nullptr);
    j["class"] = std::string(to_string(obs.vuln_class));
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ClientObservation from_json_line(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
        throw std::invalid_argument(std::string("malformed log line: ") + e.what());
    }
    auto field = [&](const char *key) -> const nlohmann::json & {
        if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("log line lacks ") + key);
        return j.at(key);
    };
    auto str = [&](const char *key) {
        const auto &v = field(key);
        if (!v.is_string()) throw std::invalid_argument(std::string(key) + " must be a string");
        return v.get<std::string>();
    };
    ClientObservation obs;
    obs.timestamp = parse_timestamp(str("ts"));
    obs.source = str("src");
    obs.user_agent = str("ua");
    auto sw = parse_software(str("sw"));
    if (!sw) throw std::invalid_argument("unknown sw value");
    obs.software = *sw;
    const auto &ver = field("ver");
    if (!ver.is_null()) {
        if (!ver.is_string()) throw std::invalid_argument("ver must be a string or null");
        obs.version = Version::parse(ver.get<std::string>());
    }
    auto cls = parse_vuln_class(str("class"));
    if (!cls) throw std::invalid_argument("unknown class value");
    obs.vuln_class = *cls;
    if (obs.vuln_class == VulnClass::Vulnerable && obs.software != Software::Fort)
        throw std::invalid_argument("Vulnerable entries must be Fort");
    return obs;
}

std::vector<ClientObservation> read_log(std::string_view text) {
    std::vector<ClientObservation> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(from_json_line(line));
        } catch (const std::invalid_argument &e) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

Summary summarize(const std::vector<ClientObservation> &log) {
    Summary s;
    std::map<VulnClass, std::set<std::string>> per_class;
    std::set<std::string> all;
    for (auto c : {VulnClass::Vulnerable, VulnClass::NotVulnerable, VulnClass::NotApplicable, VulnClass::Unknown}) {
        s.requests[c] = 0;
        per_class[c];
    }
    for (const auto &obs : log) {
        ++s.total_requests;
        ++s.requests[obs.vuln_class];
        per_class[obs.vuln_class].insert(obs.source);
        all.insert(obs.source);
    }
    for (const auto &[c, sources] : per_class) s.sources[c] = sources.size();
    s.distinct_sources = all.size();
    return s;
}

std::string Summary::to_json() const {
    nlohmann::ordered_json j;
    j["total_requests"] = total_requests;
    j["distinct_sources"] = distinct_sources;
    nlohmann::ordered_json by_sources, by_requests;
    for (const auto &[c, n] : sources) by_sources[std::string(to_string(c))] = n;
    for (const auto &[c, n] : requests) by_requests[std::string(to_string(c))] = n;
    j["sources_per_class"] = by_sources;
    j["requests_per_class"] = by_requests;
    return j.dump(2);
}

} // namespace kiln::fingerprint
