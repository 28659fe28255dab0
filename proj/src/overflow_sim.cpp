#include "kiln/overflow_sim.hpp"

#include <algorithm>
#include <charconv>

namespace kiln::sim {

std::string_view to_string(StackProtector p) {
    switch (p) {
    case StackProtector::Off: return "off";
    case StackProtector::Basic: return "basic";
    case StackProtector::Strong: return "strong";
    }
    return "off";
}

StackProtector parse_stack_protector(std::string_view text) {
    if (text == "off") return StackProtector::Off;
    if (text == "basic") return StackProtector::Basic;
    if (text == "strong") return StackProtector::Strong;
    throw std::invalid_argument("stack protector must be off, basic or strong");
}

std::string to_string(const CompilerConfig &config) {
    return std::string("fortify=") + (config.fortify ? "on" : "off") +
           " builtin_memcpy=" + (config.builtin_memcpy ? "on" : "off") +
           " stack_protector=" + std::string(to_string(config.stack_protector));
}

std::array<CompilerConfig, 12> all_configs() {
    std::array<CompilerConfig, 12> out{};
    std::size_t i = 0;
    for (bool fortify : {false, true})
        for (bool builtin : {false, true})
            for (auto sp : {StackProtector::Off, StackProtector::Basic, StackProtector::Strong})
                out[i++] = CompilerConfig{fortify, builtin, sp};
    return out;
}

FrameLayout parse_layout(std::string_view spec) {
    FrameLayout layout;
    while (!spec.empty()) {
        auto comma = spec.find(',');
        auto item = spec.substr(0, comma);
        spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
        auto eq = item.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument("layout entry needs key=value: " + std::string(item));
        auto key = item.substr(0, eq);
        auto val = item.substr(eq + 1);
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), n);
        if (val.empty() || ec != std::errc{} || ptr != val.data() + val.size())
            throw std::invalid_argument("layout value is not a number: " + std::string(item));
        if (key == "pad")
            layout.pad_after_buffer = n;
        else if (key == "fp")
            layout.saved_fp_size = n;
        else if (key == "ret")
            layout.ret_addr_size = n;
        else if (key == "canary")
            layout.canary_size = n;
        else
            throw std::invalid_argument("unknown layout key: " + std::string(key));
    }
    if (layout.ret_addr_size == 0) throw std::invalid_argument("return address size must be positive");
    return layout;
}

std::string to_string(const FrameLayout &layout) {
    return "pad=" + std::to_string(layout.pad_after_buffer) + ",fp=" + std::to_string(layout.saved_fp_size) +
           ",ret=" + std::to_string(layout.ret_addr_size) + ",canary=" + std::to_string(layout.canary_size);
}

std::string_view to_string(Region r) {
    switch (r) {
    case Region::Buffer: return "buffer";
    case Region::Pad: return "pad";
    case Region::Canary: return "canary";
    case Region::SavedFp: return "saved_fp";
    case Region::ReturnAddress: return "return_address";
    }
    return "buffer";
}

std::vector<RegionSpan> regions(const FrameLayout &layout, bool with_canary) {
    std::vector<RegionSpan> out;
    std::size_t offset = 0;
    auto add = [&](Region r, std::size_t size) {
        if (size == 0) return;
        out.push_back({r, offset, size});
        offset += size;
    };
    add(Region::Buffer, FrameLayout::kBufferSize);
    add(Region::Pad, layout.pad_after_buffer);
    if (with_canary) add(Region::Canary, layout.canary_size);
    add(Region::SavedFp, layout.saved_fp_size);
    add(Region::ReturnAddress, layout.ret_addr_size);
    return out;
}

std::size_t frame_end(const FrameLayout &layout, bool with_canary) {
    auto r = regions(layout, with_canary);
    return r.back().offset + r.back().size;
}

std::string_view to_string(OutcomeClass c) {
    switch (c) {
    case OutcomeClass::CodeElided: return "CodeElided";
    case OutcomeClass::NoOverflow: return "NoOverflow";
    case OutcomeClass::SilentPadClobber: return "SilentPadClobber";
    case OutcomeClass::FortifyAbort: return "FortifyAbort";
    case OutcomeClass::CanaryTrap: return "CanaryTrap";
    case OutcomeClass::SavedFpClobber: return "SavedFpClobber";
    case OutcomeClass::ControlFlowHijack: return "ControlFlowHijack";
    }
    return "NoOverflow";
}

std::string_view to_string(FnResult r) {
    switch (r) {
    case FnResult::Ok: return "Ok";
    case FnResult::IllegalFlagError: return "IllegalFlagError";
    case FnResult::Aborted: return "Aborted";
    case FnResult::NotExecuted: return "NotExecuted";
    }
    return "Ok";
}

std::string_view to_string(VulnerabilityClass v) {
    switch (v) {
    case VulnerabilityClass::NotCompiledIn: return "NotCompiledIn";
    case VulnerabilityClass::RuntimeAborts: return "RuntimeAborts";
    case VulnerabilityClass::CanaryDetected: return "CanaryDetected";
    case VulnerabilityClass::Exploitable: return "Exploitable";
    }
    return "Exploitable";
}

namespace {

// The flag comparison that follows the copy. With no content there is no
// first byte to compare, so the model does not run it.
FnResult compare_first_byte(ByteView content, keyusage::CertKind kind) {
    if (content.empty()) return FnResult::NotExecuted;
    return content[0] == keyusage::expected_content(kind)[0] ? FnResult::Ok : FnResult::IllegalFlagError;
}

} // namespace

SimOutcome simulate(const CompilerConfig &config, const FrameLayout &layout, ByteView content,
                    keyusage::CertKind kind) {
    if (content.size() > kMaxContent) throw ContentTooLarge();
    SimOutcome out;
    const std::size_t length = content.size();
    const std::size_t buffer = FrameLayout::kBufferSize;

    // The builtin replacement drops the copy entirely since the buffer is
    // never read; only the comparison on the source survives.
    if (config.builtin_memcpy) {
        out.cls = OutcomeClass::CodeElided;
        out.fn_result = compare_first_byte(content, kind);
        return out;
    }

    if (config.fortify && length > buffer) {
        out.cls = OutcomeClass::FortifyAbort;
        out.fn_result = FnResult::Aborted;
        return out;
    }

    out.overflow_bytes = length > buffer ? length - buffer : 0;
    out.cls = OutcomeClass::NoOverflow;
    out.fn_result = compare_first_byte(content, kind);
    if (out.overflow_bytes == 0) return out;

    const bool with_canary = canary_present(config);
    for (const auto &span : regions(layout, with_canary)) {
        if (span.offset >= length) break;
        const std::size_t touched = std::min(length, span.offset + span.size) - span.offset;
        switch (span.region) {
        case Region::Buffer:
            break;
        case Region::Pad:
            out.cls = OutcomeClass::SilentPadClobber;
            break;
        case Region::Canary:
            // The epilogue check fires before the return address is used.
            out.cls = OutcomeClass::CanaryTrap;
            out.fn_result = FnResult::Aborted;
            return out;
        case Region::SavedFp:
            out.cls = OutcomeClass::SavedFpClobber;
            break;
        case Region::ReturnAddress:
            out.cls = OutcomeClass::ControlFlowHijack;
            out.ret_bytes_overwritten = touched;
            out.return_address_bytes.assign(content.begin() + static_cast<std::ptrdiff_t>(span.offset),
                                            content.begin() + static_cast<std::ptrdiff_t>(span.offset + touched));
            break;
        }
    }
    return out;
}

VulnerabilityClass classify_build(const CompilerConfig &config) {
    if (config.builtin_memcpy) return VulnerabilityClass::NotCompiledIn;
    if (config.fortify) return VulnerabilityClass::RuntimeAborts;
    if (config.stack_protector == StackProtector::Strong) return VulnerabilityClass::CanaryDetected;
    return VulnerabilityClass::Exploitable;
}

} // namespace kiln::sim
