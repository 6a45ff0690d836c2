#pragma once

#include <cstdint>
#include <string_view>

#include <boost/random/mersenne_twister.hpp>

namespace qqlab {

// Every stochastic routine draws from this engine. Boost's generators and
// distributions are fixed in source, so a seed reproduces the same stream on
// every platform.
using Rng = boost::random::mt19937_64;

inline constexpr std::string_view kRngAlgorithm = "boost-mt19937_64/binomial-btrd";

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace qqlab
