#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ucbqr {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t& state);

/// Seed of the named substream `name[index]` of a replication's root seed.
/// Streams with different names or indices are statistically independent,
/// so e.g. changing the routing policy leaves arrival draws untouched.
std::uint64_t stream_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0);

Rng make_stream(std::uint64_t root, std::string_view name, std::uint64_t index = 0);

/// Uniform draw in [0, 1) that does not depend on the standard library's
/// distribution implementation.
double uniform01(Rng& rng);

/// Uniform draw in the open interval (0, 1); safe to take the log of.
double uniform_open01(Rng& rng);

/// Exp(1) variate.
double standard_exponential(Rng& rng);

}  // namespace ucbqr
