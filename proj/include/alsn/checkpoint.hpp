#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "alsn/parameters.hpp"
#include "alsn/tensor.hpp"

namespace alsn {

// Little-endian binary: magic "ALSN", u32 version (1), u32 tensor count, then
// per tensor u32 name length, UTF-8 name, u32 ndim, u32 dims..., f32 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

// Parameter values and Adam state ("<name>", "<name>/adam_m", "<name>/adam_v",
// "<name>/adam_t").
std::vector<NamedTensor> export_parameters(const ParameterSet<float>& params, bool with_optimizer_state);
// Overwrites values (and Adam state when present) of every parameter in
// `params`. Throws if a parameter is missing or has a different shape.
void import_parameters(ParameterSet<float>& params, const std::vector<NamedTensor>& tensors);

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace alsn
