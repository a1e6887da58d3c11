#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace runrace {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Folds an arbitrary list of values into one seed. Used to derive independent
// per-(run, epoch) streams from a master seed so results never depend on the
// order curves are fitted in.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = 0x8f1bbcdcbfa53e0bull;
    for (std::uint64_t p : parts) {
        s ^= p + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    return splitmix64(s);
}

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Deterministic RNG with explicitly-coded distributions. The standard
// distribution adaptors are implementation-defined, so normal/uniform draws
// are spelled out here to keep streams reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // in [0, 1)
    double uniform01() { return std::ldexp(static_cast<double>(gen_() >> 11), -53); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller without the cached spare: one draw consumes two uniforms.
    double normal() {
        double u1 = std::ldexp(static_cast<double>((gen_() >> 11) + 1), -53);  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace runrace
