#include "tissueseg/runtime.hpp"

#include <cstdlib>
#include <string>

#include <torch/torch.h>

namespace tissueseg {

bool deterministic_requested() {
  const char* v = std::getenv(kDeterministicEnv);
  return v != nullptr && std::string(v) != "" && std::string(v) != "0";
}

void configure_runtime(std::uint64_t seed, bool deterministic) {
  torch::manual_seed(seed);
  if (deterministic) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, false);
  }
}

}  // namespace tissueseg
