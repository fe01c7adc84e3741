#ifndef ZSLFORGE_CHECKPOINT_HPP
#define ZSLFORGE_CHECKPOINT_HPP

#include "zslforge/common.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace zslforge {

// Model checkpoint container, little-endian:
//   bytes 0-3  magic "ZSLC"
//   u32        version (= 1)
//   u32        header length
//   bytes      header: UTF-8 JSON (config echo, model kind, dims)
//   u32        tensor count
//   per tensor:
//     u32      name length, then name bytes
//     u32      rows, u32 cols
//     f64 LE   rows*cols values, row-major
//   u32        CRC32 over everything after the version field
struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, Mat>> tensors;  // insertion order preserved

  const Mat& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace zslforge

#endif  // ZSLFORGE_CHECKPOINT_HPP
