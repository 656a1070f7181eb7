#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anchorvote/micronet/tensor.hpp"

namespace anchorvote::micronet {

// Binary weight container, see docs/weights_format.md.
inline constexpr char kCheckpointMagic[4] = {'A', 'V', 'W', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);
// Copies stored values into `params`. Names and shapes must match exactly;
// otherwise SchemaMismatchError and `params` is left untouched.
void load_checkpoint(ParameterSet& params, const std::filesystem::path& path);

}  // namespace anchorvote::micronet
