#include "ucbqr/rng.hpp"

#include <cmath>

namespace ucbqr {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t root, std::string_view name, std::uint64_t index) {
    // FNV-1a over the stream name, then mixed with root and index.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t state = root ^ h;
    std::uint64_t a = splitmix64(state);
    state ^= index * 0xd1342543de82ef95ULL;
    return a ^ splitmix64(state);
}

Rng make_stream(std::uint64_t root, std::string_view name, std::uint64_t index) {
    return Rng(stream_seed(root, name, index));
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform_open01(Rng& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

double standard_exponential(Rng& rng) { return -std::log(uniform_open01(rng)); }

}  // namespace ucbqr
