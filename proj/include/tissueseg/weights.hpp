#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace tissueseg {

/// Flat name → tensor snapshot of every parameter and buffer of a module.
using StateDict = std::map<std::string, torch::Tensor>;

StateDict snapshot_state(const torch::nn::Module& module);
/// Copies a snapshot back into the module. Throws CheckpointError on any
/// missing key or shape mismatch.
void restore_state(torch::nn::Module& module, const StateDict& state);

/// Writes all parameters and buffers under their dotted names (atomic rename).
void save_weights(const torch::nn::Module& module, const std::filesystem::path& path);
/// Strict counterpart of save_weights.
void load_weights(torch::nn::Module& module, const std::filesystem::path& path);

struct WeightLoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> missing;     // in the module, absent from the file
  std::vector<std::string> mismatched;  // present with a different shape
};

/// Lenient loading for externally obtained weights (e.g. a MiT-b3 backbone).
/// Accepts either an archive written by save_weights or a pickled
/// {name: tensor} dictionary as produced by Python's torch.save(state_dict).
/// Keys are matched after stripping `strip_prefix` from the file's names.
WeightLoadReport load_matching_weights(torch::nn::Module& module,
                                       const std::filesystem::path& path,
                                       const std::string& strip_prefix = {});

}  // namespace tissueseg
