#pragma once

#include <cstdint>
#include <string_view>

namespace emoinf {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

/// Seed for a named sub-stream: splitmix64(root ^ fnv1a64(label)).
/// Every random consumer derives its own seed this way from the single root
/// seed, so adding a consumer never shifts another's stream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

}  // namespace emoinf
