#include "kiln/scenario_file.hpp"

#include <cctype>
#include <set>
#include <sstream>
#include <variant>

namespace kiln::forge {

namespace {

struct TomlValue;
using TomlArray = std::vector<TomlValue>;

struct TomlValue {
    std::variant<std::string, std::int64_t, bool, TomlArray> v;
};

class Parser {
public:
    Parser(std::string_view text, int line) : text_(text), line_(line) {}

    TomlValue value() {
        skip_ws();
        if (eof()) fail("missing value");
        char c = text_[pos_];
        if (c == '"') return TomlValue{string()};
        if (c == '[') return TomlValue{array()};
        if (text_.substr(pos_).starts_with("true")) {
            pos_ += 4;
            return TomlValue{true};
        }
        if (text_.substr(pos_).starts_with("false")) {
            pos_ += 5;
            return TomlValue{false};
        }
        if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c))) return TomlValue{integer()};
        fail("unsupported value");
    }

    void expect_end() {
        skip_ws();
        if (!eof()) fail("unexpected trailing characters");
    }

    [[noreturn]] void fail(const std::string &what) const {
        throw ForgeError(ForgeErrc::InvalidScenario, "line " + std::to_string(line_) + ": " + what);
    }

private:
    bool eof() const { return pos_ >= text_.size(); }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    std::string string() {
        ++pos_;
        std::string out;
        while (true) {
            if (eof()) fail("unterminated string");
            char c = text_[pos_++];
            if (c == '"') return out;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (eof()) fail("unterminated escape");
            switch (char e = text_[pos_++]) {
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            default: fail(std::string("unsupported escape \\") + e);
            }
        }
    }

    std::int64_t integer() {
        std::string digits;
        if (text_[pos_] == '-' || text_[pos_] == '+') digits.push_back(text_[pos_++]);
        while (!eof() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            if (text_[pos_] != '_') digits.push_back(text_[pos_]);
            ++pos_;
        }
        try {
            std::size_t used = 0;
            auto v = std::stoll(digits, &used);
            if (used != digits.size()) fail("bad integer");
            return v;
        } catch (const std::logic_error &) {
            fail("bad integer '" + digits + "'");
        }
    }

    TomlArray array() {
        ++pos_;
        TomlArray out;
        while (true) {
            skip_ws();
            if (eof()) fail("unterminated array");
            if (text_[pos_] == ']') {
                ++pos_;
                return out;
            }
            out.push_back(value());
            skip_ws();
            if (!eof() && text_[pos_] == ',') ++pos_;
            else if (!eof() && text_[pos_] != ']') fail("expected ',' or ']' in array");
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_;
};

std::string strip_comment(const std::string &line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && in_string) {
            ++i;
            continue;
        }
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

int bracket_balance(const std::string &s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && in_string) {
            ++i;
            continue;
        }
        if (s[i] == '"') in_string = !in_string;
        if (in_string) continue;
        if (s[i] == '[') ++depth;
        if (s[i] == ']') --depth;
    }
    return depth;
}

struct Field {
    std::string key;
    TomlValue value;
    int line;
};

[[noreturn]] void fail_at(int line, const std::string &what) {
    throw ForgeError(ForgeErrc::InvalidScenario, "line " + std::to_string(line) + ": " + what);
}

const std::string &as_string(const Field &f) {
    if (auto *s = std::get_if<std::string>(&f.value.v)) return *s;
    fail_at(f.line, f.key + " must be a string");
}

std::int64_t as_integer(const Field &f) {
    if (auto *i = std::get_if<std::int64_t>(&f.value.v)) return *i;
    fail_at(f.line, f.key + " must be an integer");
}

std::vector<std::string> as_string_list(const Field &f) {
    auto *arr = std::get_if<TomlArray>(&f.value.v);
    if (!arr) fail_at(f.line, f.key + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto &item : *arr) {
        auto *s = std::get_if<std::string>(&item.v);
        if (!s) fail_at(f.line, f.key + " must be an array of strings");
        out.push_back(*s);
    }
    return out;
}

template <typename F>
auto guarded(const Field &f, F &&fn) {
    try {
        return fn();
    } catch (const ForgeError &) {
        throw;
    } catch (const std::exception &e) {
        fail_at(f.line, f.key + ": " + e.what());
    }
}

Resources parse_resources(const Field &f) {
    return guarded(f, [&] {
        Resources r;
        for (const auto &item : as_string_list(f)) {
            if (item.starts_with("AS") || item.starts_with("as"))
                r.asns.push_back(AsRange::parse(std::string_view(item).substr(2)));
            else
                r.prefixes.push_back(IpPrefix::parse(item));
        }
        return r;
    });
}

std::vector<objects::RoaPrefix> parse_roa_prefixes(const Field &f) {
    return guarded(f, [&] {
        std::vector<objects::RoaPrefix> out;
        for (const auto &item : as_string_list(f)) {
            auto slash = item.find('/');
            auto dash = item.find('-', slash == std::string::npos ? 0 : slash);
            objects::RoaPrefix rp{IpPrefix::parse(item.substr(0, dash)), std::nullopt};
            if (dash != std::string::npos) {
                auto max = std::stoul(item.substr(dash + 1));
                const unsigned width = rp.prefix.family == AddressFamily::IPv4 ? 32 : 128;
                if (max < rp.prefix.length || max > width) throw std::invalid_argument("maxLength out of range");
                rp.max_length = static_cast<unsigned>(max);
            }
            out.push_back(rp);
        }
        return out;
    });
}

} // namespace

MutationSpec parse_mutation(std::string_view text, keyusage::CertKind kind) {
    std::istringstream in{std::string(text)};
    std::string word;
    in >> word;
    if (word == "none" || word.empty()) return {};
    if (word != "keyusage-overflow") throw std::invalid_argument("unknown mutation '" + word + "'");
    std::string arg;
    Bytes payload;
    bool have_payload = false;
    while (in >> arg) {
        if (arg.starts_with("payload=")) {
            payload = from_hex(arg.substr(8));
            have_payload = true;
        } else {
            throw std::invalid_argument("unknown mutation argument '" + arg + "'");
        }
    }
    if (!have_payload) throw std::invalid_argument("keyusage-overflow needs payload=<hex>");
    craft_overflow_ku(payload, kind);
    return MutationSpec::overflow(std::move(payload), kind);
}

Scenario parse_scenario(std::string_view text) {
    enum class Section { Root, Ta, Ca, Roa };
    Scenario scenario;
    Section section = Section::Root;
    bool seen_ta = false;
    std::set<std::string> keys_in_table;

    std::vector<std::pair<Section, std::vector<Field>>> tables{{Section::Root, {}}};

    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (line.front() == '[') {
            std::string name;
            if (line.starts_with("[[") && line.ends_with("]]"))
                name = "[[" + trim(line.substr(2, line.size() - 4)) + "]]";
            else if (line.ends_with("]"))
                name = "[" + trim(line.substr(1, line.size() - 2)) + "]";
            if (name == "[ta]") {
                if (seen_ta) fail_at(line_no, "duplicate [ta] table");
                seen_ta = true;
                section = Section::Ta;
            } else if (name == "[[ca]]") {
                section = Section::Ca;
            } else if (name == "[[roa]]") {
                section = Section::Roa;
            } else {
                fail_at(line_no, "unknown table " + line);
            }
            tables.push_back({section, {}});
            keys_in_table.clear();
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos) fail_at(line_no, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value_text = line.substr(eq + 1);
        const int start_line = line_no;
        while (bracket_balance(value_text) > 0 && std::getline(in, raw)) {
            ++line_no;
            value_text += "\n" + strip_comment(raw);
        }
        if (key.empty()) fail_at(start_line, "empty key");
        if (!keys_in_table.insert(key).second) fail_at(start_line, "duplicate key " + key);
        Parser p(value_text, start_line);
        Field f{key, p.value(), start_line};
        p.expect_end();
        tables.back().second.push_back(std::move(f));
    }

    for (const auto &[sec, fields] : tables) {
        switch (sec) {
        case Section::Root:
            for (const auto &f : fields) {
                if (f.key == "host") scenario.host = as_string(f);
                else if (f.key == "validity_days") {
                    auto d = as_integer(f);
                    if (d <= 0 || d > 3650) fail_at(f.line, "validity_days out of range");
                    scenario.validity = std::chrono::days{d};
                } else
                    fail_at(f.line, "unknown key " + f.key);
            }
            break;
        case Section::Ta:
            for (const auto &f : fields) {
                if (f.key == "resources") scenario.ta_resources = parse_resources(f);
                else fail_at(f.line, "unknown key [ta]." + f.key);
            }
            break;
        case Section::Ca: {
            CaSpec ca;
            for (const auto &f : fields) {
                if (f.key == "name") ca.name = as_string(f);
                else if (f.key == "parent") ca.parent = as_string(f);
                else if (f.key == "resources") ca.resources = parse_resources(f);
                else if (f.key == "mutation")
                    ca.mutation = guarded(f, [&] { return parse_mutation(as_string(f), keyusage::CertKind::CA); });
                else fail_at(f.line, "unknown key [[ca]]." + f.key);
            }
            if (ca.name.empty()) throw ForgeError(ForgeErrc::InvalidScenario, "[[ca]] without name");
            scenario.cas.push_back(std::move(ca));
            break;
        }
        case Section::Roa: {
            RoaSpec roa;
            for (const auto &f : fields) {
                if (f.key == "name") roa.name = as_string(f);
                else if (f.key == "issuer") roa.issuer = as_string(f);
                else if (f.key == "asn") {
                    auto asn = as_integer(f);
                    if (asn < 0 || asn > UINT32_MAX) fail_at(f.line, "asn out of range");
                    roa.asn = static_cast<std::uint32_t>(asn);
                } else if (f.key == "prefixes") roa.prefixes = parse_roa_prefixes(f);
                else if (f.key == "mutation")
                    roa.ee_mutation = guarded(f, [&] { return parse_mutation(as_string(f), keyusage::CertKind::EE); });
                else fail_at(f.line, "unknown key [[roa]]." + f.key);
            }
            if (roa.name.empty()) throw ForgeError(ForgeErrc::InvalidScenario, "[[roa]] without name");
            if (roa.prefixes.empty()) throw ForgeError(ForgeErrc::EmptyPrefixList, roa.name);
            scenario.roas.push_back(std::move(roa));
            break;
        }
        }
    }
    if (!seen_ta || scenario.ta_resources.empty())
        throw ForgeError(ForgeErrc::InvalidScenario, "scenario needs a [ta] table with resources");
    return scenario;
}

} // namespace kiln::forge
