#include "mhyper/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mhyper/errors.hpp"

namespace mhyper {

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file for fingerprint: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string dataset_fingerprint(const std::string& dir) {
    namespace fs = std::filesystem;
    const char* files[] = {"train.tsv", "valid.tsv", "test.tsv", "visual.mhft",
                           "textual.mhft"};
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* name : files) {
        const std::uint64_t fh = fnv1a_file((fs::path(dir) / name).string());
        for (int i = 0; i < 8; ++i) {
            h ^= (fh >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::json j;
    j["version"] = manifest.version;
    j["seed"] = manifest.seed;
    j["dataset_fingerprint"] = manifest.dataset_fingerprint;
    j["config"] = manifest.config;
    j["phase_seconds"] = manifest.phase_seconds;
    j["artifacts"] = manifest.artifacts;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

} // namespace mhyper
