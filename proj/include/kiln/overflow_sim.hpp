#pragma once

// Deterministic model of the unchecked key-usage copy into a two-byte stack
// buffer. The copy is replayed against a parameterised frame and the outcome
// is classified by the furthest frame region it reaches, under a given
// combination of compiler hardening options.
//
// The "13-byte" proof-of-concept length is read as the full BIT STRING
// content (unused-bits octet included). Under the alternative reading (13
// attacker bytes after the three constrained prefix bytes) the same hijack
// is reproduced by a layout with pad_after_buffer = 9.

#include "kiln/bytes.hpp"
#include "kiln/keyusage.hpp"

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kiln::sim {

enum class StackProtector { Off, Basic, Strong };

std::string_view to_string(StackProtector p);
StackProtector parse_stack_protector(std::string_view text);

struct CompilerConfig {
    bool fortify = false;
    bool builtin_memcpy = false;
    StackProtector stack_protector = StackProtector::Off;

    friend bool operator==(const CompilerConfig &, const CompilerConfig &) = default;
};

std::string to_string(const CompilerConfig &config);

/// Every combination of the three options.
std::array<CompilerConfig, 12> all_configs();

/// Only -fstack-protector-strong instruments a frame holding a small local
/// array; plain -fstack-protector leaves it bare.
constexpr bool canary_present(const CompilerConfig &config) {
    return config.stack_protector == StackProtector::Strong;
}

/// Stack geometry above the buffer, growing towards the return address:
/// buffer, padding, [canary], [saved frame pointer], return address.
struct FrameLayout {
    static constexpr std::size_t kBufferSize = 2;

    std::size_t pad_after_buffer = 6;
    std::size_t canary_size = 8;
    std::size_t saved_fp_size = 0;
    std::size_t ret_addr_size = 8;

    friend bool operator==(const FrameLayout &, const FrameLayout &) = default;
};

/// Parses "pad=N,fp=N,ret=N,canary=N" (any subset, any order) over the
/// defaults. `ret` and `canary` are sizes in bytes.
FrameLayout parse_layout(std::string_view spec);
std::string to_string(const FrameLayout &layout);

enum class Region { Buffer, Pad, Canary, SavedFp, ReturnAddress };

std::string_view to_string(Region r);

struct RegionSpan {
    Region region;
    std::size_t offset;
    std::size_t size;
};

/// Non-empty regions in address order, offsets relative to the buffer start.
std::vector<RegionSpan> regions(const FrameLayout &layout, bool with_canary);

/// Offset one past the return address.
std::size_t frame_end(const FrameLayout &layout, bool with_canary);

enum class OutcomeClass {
    CodeElided,
    NoOverflow,
    SilentPadClobber,
    FortifyAbort,
    CanaryTrap,
    SavedFpClobber,
    ControlFlowHijack,
};

std::string_view to_string(OutcomeClass c);

enum class FnResult { Ok, IllegalFlagError, Aborted, NotExecuted };

std::string_view to_string(FnResult r);

struct SimOutcome {
    OutcomeClass cls = OutcomeClass::NoOverflow;
    std::size_t overflow_bytes = 0;
    std::size_t ret_bytes_overwritten = 0;
    FnResult fn_result = FnResult::Ok;
    /// Attacker bytes that landed in the return-address slot, lowest
    /// address first (the low-order bytes on a little-endian target).
    Bytes return_address_bytes;

    friend bool operator==(const SimOutcome &, const SimOutcome &) = default;
};

enum class VulnerabilityClass { NotCompiledIn, RuntimeAborts, CanaryDetected, Exploitable };

std::string_view to_string(VulnerabilityClass v);

class ContentTooLarge : public std::length_error {
public:
    ContentTooLarge() : std::length_error("ContentTooLarge: content exceeds 64 KiB") {}
};

inline constexpr std::size_t kMaxContent = 64 * 1024;

SimOutcome simulate(const CompilerConfig &config, const FrameLayout &layout, ByteView content,
                    keyusage::CertKind kind);

VulnerabilityClass classify_build(const CompilerConfig &config);

} // namespace kiln::sim
