#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vdpcn/network.hpp"

namespace vdpcn::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

/// "network" checkpoints carry weights; "oracle" checkpoints carry none and
/// stand for a predictor that returns the ground truth (evaluation plumbing).
struct Checkpoint
{
  std::string kind = "network";
  network::ModelWeights<double> weights;
};

/// Layout: 8-byte magic "VDPCNCKP", u32 format version, u64 header length,
/// JSON header {format_version, kind, config, parameters:[{name, rows, cols, offset}]},
/// then every parameter as little-endian float64 in row-major order.
std::vector<std::uint8_t> serialize(Checkpoint const &ckpt);
Checkpoint deserialize(std::vector<std::uint8_t> const &bytes);

template <typename Scalar> std::vector<std::uint8_t> serialize(network::ModelWeights<Scalar> const &weights)
{
  return serialize(Checkpoint{"network", weights.template cast<double>()});
}

void save(Checkpoint const &ckpt, std::filesystem::path const &path);
template <typename Scalar> void save(network::ModelWeights<Scalar> const &weights, std::filesystem::path const &path)
{
  save(Checkpoint{"network", weights.template cast<double>()}, path);
}

/// Throws std::runtime_error naming the path if the file is missing or malformed.
Checkpoint load(std::filesystem::path const &path);

std::vector<std::uint8_t> read_file(std::filesystem::path const &path);
void write_file(std::filesystem::path const &path, std::vector<std::uint8_t> const &bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::vector<std::uint8_t> const &bytes);
std::string hex(std::uint64_t value);

} // namespace vdpcn::checkpoint
