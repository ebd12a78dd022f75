#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "driftlab/agents/params.hpp"

namespace driftlab::agents {

// Binary layout, all integers little-endian:
//   "SSILCKPT" | version u32 | tensor count u32
//   per tensor: name length u16 | UTF-8 name | rank u8 | dims u32... | f64 values
//   CRC-32 (zlib polynomial) u32 over every byte after the tensor count.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const ParamStore& params);
ParamStore deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

// Copies values from `loaded` into `target`; layouts must match exactly.
void assign_values(ParamStore& target, const ParamStore& loaded);

}  // namespace driftlab::agents
