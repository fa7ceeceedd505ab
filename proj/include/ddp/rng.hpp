#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ddp {

// Splittable seeding: substream seeds are derived by hashing the base
// seed together with a path of stream identifiers (evaluation point,
// decision, replication, ...).  Draws are therefore independent of the
// order in which substreams are consumed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(base);
    for (std::uint64_t id : path) s = splitmix64(s ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return s;
}

inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace ddp
