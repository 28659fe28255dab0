#pragma once

#include "kiln/forge.hpp"

#include <chrono>
#include <filesystem>
#include <random>
#include <string>

namespace fixtures {

/// RSA generation dominates test time, so one ring is shared per binary.
inline kiln::forge::MemoryKeyRing &keys() {
    static kiln::forge::MemoryKeyRing ring;
    return ring;
}

inline kiln::der::Time clock() { return std::chrono::sys_days{std::chrono::year{2024} / 9 / 1}; }

inline const kiln::forge::RepoSnapshot &attack_repo() {
    static const auto snap = kiln::forge::assemble_repository(kiln::forge::Scenario::default_attack(clock()), keys());
    return snap;
}

inline const kiln::forge::RepoSnapshot &benign_repo() {
    static const auto snap = kiln::forge::assemble_repository(kiln::forge::Scenario::benign(clock()), keys());
    return snap;
}

inline const std::string kHost = "rsync://rpki.kiln.test/";
inline const std::string kTaUri = kHost + "ta/ta.cer";
inline const std::string kEvilUri = kHost + "repo/ta/evil.cer";
inline const std::string kRoaUri = kHost + "repo/ta/benign.roa";
inline const std::string kMftUri = kHost + "repo/ta/ta.mft";
inline const std::string kCrlUri = kHost + "repo/ta/ta.crl";

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("kiln-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace fixtures
