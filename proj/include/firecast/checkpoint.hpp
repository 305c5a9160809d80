#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "firecast/model_spec.hpp"
#include "firecast/tensor.hpp"

namespace firecast {

struct NamedTensor {
    std::string name;
    Tensor<float>* tensor = nullptr;
    bool trainable = false;
};

// Versioned binary container: header (magic, version, spec hash, spec JSON),
// then named little-endian float payloads. Round trips are bit-exact.
void save_checkpoint(const std::filesystem::path& file, const ModelSpec& spec,
                     const std::vector<NamedTensor>& tensors);

// Loads into pre-built tensors (names and shapes must match); returns the spec.
ModelSpec load_checkpoint(const std::filesystem::path& file,
                          const std::vector<NamedTensor>& tensors);

ModelSpec peek_checkpoint_spec(const std::filesystem::path& file);

template <typename Model>
std::vector<NamedTensor> checkpoint_tensors(Model& model) {
    std::vector<NamedTensor> out;
    model.visit_params([&out](const std::string& name, Tensor<float>& value, Tensor<float>*,
                              bool trainable) { out.push_back({name, &value, trainable}); });
    return out;
}

} // namespace firecast
