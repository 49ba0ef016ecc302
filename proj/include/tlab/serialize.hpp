#pragma once

#include <filesystem>

#include "tlab/network.hpp"

namespace tlab {

// Binary network snapshot: "TLABNET1", layer count, then per layer its kind,
// tag, and tensors as little-endian IEEE-754 doubles. Loading restores every
// bit of every parameter.
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace tlab
