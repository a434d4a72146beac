#pragma once

// Run manifests: config snapshot, dataset content fingerprint, seed, version,
// wall-clock per phase. Every checkpoint/metrics file a command produces
// references exactly one manifest.

#include <cstdint>
#include <map>
#include <string>

namespace mhyper {

inline constexpr const char* kVersionString = "mhyper-0.1.0";

// FNV-1a 64 over the raw bytes of a file.
std::uint64_t fnv1a_file(const std::string& path);

// Combined fingerprint over the standard dataset files in `dir`.
std::string dataset_fingerprint(const std::string& dir);

struct RunManifest {
    std::map<std::string, std::string> config;
    std::string dataset_fingerprint;
    std::uint64_t seed = 0;
    std::string version = kVersionString;
    std::map<std::string, double> phase_seconds;
    std::map<std::string, std::string> artifacts;
};

void write_manifest(const std::string& path, const RunManifest& manifest);

} // namespace mhyper
