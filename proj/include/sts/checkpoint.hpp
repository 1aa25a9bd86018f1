#ifndef STS_CHECKPOINT_HPP
#define STS_CHECKPOINT_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sts/common.hpp"

namespace sts {

// Checkpoint container: magic "STSC", little-endian u32 format version,
// u32-length-prefixed JSON metadata, then a u32 tensor count followed by
// {u32 name length, name, u32 rows, u32 cols, rows*cols f32 column-major}.
// Everything is f32 on disk, so save/load round trips are bit-exact.

constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensorView {
  std::string name;
  const MatF* value;
};

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, MatF> tensors;

  const MatF& tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<NamedTensorView>& tensors);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace sts

#endif  // STS_CHECKPOINT_HPP
