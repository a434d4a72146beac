#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mhyper {

// All randomness in the project flows from one master seed through named
// sub-streams (init, shuffle, noise, corruption, ...). A stream is an
// mt19937_64 whose seed mixes the master seed, the stream name and optional
// counters, so any component can be reproduced in isolation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t mix(std::uint64_t seed, std::string_view name,
                             std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
        auto feed = [&h](std::uint64_t x) {
            for (int i = 0; i < 8; ++i) {
                h ^= (x >> (8 * i)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        };
        feed(seed);
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        feed(a);
        feed(b);
        return h;
    }

    static Rng stream(std::uint64_t seed, std::string_view name,
                      std::uint64_t a = 0, std::uint64_t b = 0) {
        return Rng(mix(seed, name, a, b));
    }

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; independent of the standard library's unspecified
    // normal_distribution so streams replay identically everywhere.
    double gaussian() {
        double u1 = 1.0 - uniform01(); // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    // Uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace mhyper
