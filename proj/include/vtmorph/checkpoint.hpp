#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vtmorph/tensor.hpp"

namespace vtmorph {

inline constexpr const char* kCheckpointMagic = "VTMORPH-CKPT-1";

// Container layout (all text lines end in '\n'):
//   VTMORPH-CKPT-1
//   config <n>            followed by n lines of key=value
//   step <k>
//   tensors <m>           followed by m records:
//   <name> <rank> <d0> .. <dr-1>
//   <4 * numel bytes of little-endian float32>
struct Checkpoint {
    std::map<std::string, std::string> config;
    int64_t step = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vtmorph
