#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "prbench/model.hpp"

namespace prb {

struct Checkpoint {
  ModelSpec spec;
  ModelParams params;
  std::uint64_t seed = 0;
};

/// Canonical one-line text form of a spec, e.g.
/// "arch=simplecnn;input=1x28x28;classes=10;hidden=;conv=16,32;fc=128".
std::string spec_tag(const ModelSpec& spec);
ModelSpec parse_spec_tag(const std::string& tag);

/// Binary layout (all integers little-endian):
///   "PRBCKPT1"                    8-byte magic
///   u32 tag_len, tag bytes        spec_tag(spec)
///   u64 seed
///   u32 tensor_count
///   per tensor: u32 name_len, name bytes, u32 rank, rank x u64 dims
///   parameter blob: every tensor's values in order, IEEE-754 float64 LE
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace prb
