#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fedlex {

// Purpose tags for independent random streams derived from one run seed.
enum class Stream : std::uint32_t {
    Model = 1,
    Data = 2,
    Partition = 3,
    Split = 4,
    Explorers = 5,
    Exploration = 6,
    Sampling = 7,
    LocalTraining = 8,
};

// Seeds a 64-bit Mersenne Twister from the run seed, a purpose tag and any
// number of coordinates (round, client, ...), so every stream is
// independent of how many draws other streams consumed.
inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> coords = {}) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                     static_cast<std::uint32_t>(stream)};
    for (auto c : coords) {
        words.push_back(static_cast<std::uint32_t>(c));
        words.push_back(static_cast<std::uint32_t>(c >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

// Fisher-Yates with a fixed draw sequence; std::shuffle's draw pattern is
// implementation-defined.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace fedlex
