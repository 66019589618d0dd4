#ifndef EMREC_RNG_HPP
#define EMREC_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace emrec {

// All randomness flows through one seed hierarchy: a global seed is mixed
// with a purpose tag and an index to derive independent streams, so every
// sub-command is reproducible in isolation.

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(base);
    for (char c : purpose) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return splitmix64(h ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view purpose, std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(base, purpose, index));
}

} // namespace emrec

#endif
