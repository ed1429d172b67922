#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "flowlab/tensor.hpp"

namespace flowlab {

// Counter-based generator (splitmix64 core). Streams are derived by hashing a
// label into the master seed, so parallel dataset synthesis and per-stage RNG
// stay reproducible and order-independent.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t hash_label(std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    // Derive an independent stream from (seed, label, index).
    static Rng stream(std::uint64_t master_seed, std::string_view label, std::uint64_t index = 0) {
        std::uint64_t s = mix(master_seed ^ hash_label(label));
        return Rng(mix(s ^ (index * 0x9e3779b97f4a7c15ULL + 1)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; explicit so draws are bit-identical across platforms.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    Tensor normal_tensor(std::vector<std::size_t> shape) {
        Tensor t(std::move(shape));
        for (double& v : t.data) v = normal();
        return t;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace flowlab
