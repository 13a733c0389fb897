#include "tissueseg/weights.hpp"

#include <fstream>
#include <iterator>

#include "tissueseg/errors.hpp"

namespace tissueseg {

StateDict snapshot_state(const torch::nn::Module& module) {
  torch::NoGradGuard guard;
  StateDict out;
  for (const auto& p : module.named_parameters(true)) out[p.key()] = p.value().detach().clone();
  for (const auto& b : module.named_buffers(true)) out[b.key()] = b.value().detach().clone();
  return out;
}

namespace {

template <class Fn>
void for_each_entry(torch::nn::Module& module, Fn&& fn) {
  for (auto& p : module.named_parameters(true)) fn(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) fn(b.key(), b.value());
}

std::map<std::string, torch::Tensor> read_pickled_dict(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::map<std::string, torch::Tensor> out;
  auto value = torch::pickle_load(bytes);
  if (!value.isGenericDict()) return out;
  for (const auto& item : value.toGenericDict()) {
    if (item.key().isString() && item.value().isTensor()) {
      out[item.key().toStringRef()] = item.value().toTensor();
    }
  }
  return out;
}

}  // namespace

void restore_state(torch::nn::Module& module, const StateDict& state) {
  torch::NoGradGuard guard;
  for_each_entry(module, [&](const std::string& name, torch::Tensor& t) {
    auto it = state.find(name);
    if (it == state.end()) throw CheckpointError("state is missing '" + name + "'");
    if (it->second.sizes() != t.sizes()) {
      throw CheckpointError("shape mismatch for '" + name + "'");
    }
    t.copy_(it->second);
  });
}

void save_weights(const torch::nn::Module& module, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  for (const auto& [name, tensor] : snapshot_state(module)) archive.write(name, tensor);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  archive.save_to(tmp.string());
  std::filesystem::rename(tmp, path);
}

void load_weights(torch::nn::Module& module, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CheckpointError("no weights at " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot read weights " + path.string() + ": " + e.what_without_backtrace());
  }
  torch::NoGradGuard guard;
  for_each_entry(module, [&](const std::string& name, torch::Tensor& t) {
    torch::Tensor value;
    if (!archive.try_read(name, value)) {
      throw CheckpointError(path.string() + " has no entry '" + name + "'");
    }
    if (value.sizes() != t.sizes()) {
      throw CheckpointError(path.string() + ": shape mismatch for '" + name + "'");
    }
    t.copy_(value);
  });
}

WeightLoadReport load_matching_weights(torch::nn::Module& module,
                                       const std::filesystem::path& path,
                                       const std::string& strip_prefix) {
  if (!std::filesystem::exists(path)) throw CheckpointError("no weights at " + path.string());
  std::map<std::string, torch::Tensor> source;
  try {
    source = read_pickled_dict(path);
  } catch (const c10::Error&) {
    source.clear();
  }
  std::optional<torch::serialize::InputArchive> archive;
  if (source.empty()) {
    archive.emplace();
    try {
      archive->load_from(path.string());
    } catch (const c10::Error& e) {
      throw CheckpointError("unrecognized weight file " + path.string() + ": " +
                            e.what_without_backtrace());
    }
  } else if (!strip_prefix.empty()) {
    std::map<std::string, torch::Tensor> renamed;
    for (auto& [k, v] : source) {
      renamed[k.rfind(strip_prefix, 0) == 0 ? k.substr(strip_prefix.size()) : k] = v;
    }
    source = std::move(renamed);
  }

  WeightLoadReport report;
  torch::NoGradGuard guard;
  for_each_entry(module, [&](const std::string& name, torch::Tensor& t) {
    torch::Tensor value;
    bool found = false;
    if (archive) {
      found = archive->try_read(strip_prefix + name, value) || archive->try_read(name, value);
    } else if (auto it = source.find(name); it != source.end()) {
      value = it->second;
      found = true;
    }
    if (!found) {
      report.missing.push_back(name);
    } else if (value.sizes() != t.sizes()) {
      report.mismatched.push_back(name);
    } else {
      t.copy_(value.to(t.dtype()));
      report.loaded.push_back(name);
    }
  });
  return report;
}

}  // namespace tissueseg
