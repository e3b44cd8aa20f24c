#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//
//   "CRWDLSTM"                       8-byte magic
//   u32 format_version               currently 1
//   u64 header_bytes, header text    "key=value\n" lines: layer dims,
//                                    dropout, optimizer settings, seed and
//                                    the full run configuration
//   u32 block_count
//   per block: u32 name_bytes, name, u64 rows, u64 cols,
//              rows * cols IEEE-754 binary64 values, row-major

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crowdlstm/param_store.hpp"

namespace crowdlstm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::pair<std::string, Matrix>> blocks;

  // Header value for `key`, or throws.
  const std::string& header_value(const std::string& key) const;
};

Checkpoint make_checkpoint(const ParamStore& store,
                           std::vector<std::pair<std::string, std::string>> header);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Rejects bad magic, unknown versions and truncated data.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

// Copies block values into the store. Every parameter must be present with
// the same shape and no unknown blocks may remain.
void apply_checkpoint(const Checkpoint& ckpt, ParamStore& store);

}  // namespace crowdlstm
