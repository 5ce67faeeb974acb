#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dbcc/model.hpp"

namespace dbcc {

/// Checkpoint file: magic "DBCC", u32 format version, length-prefixed
/// ModelConfig text, named fp32 parameter tensors, FNV-1a 64 payload checksum.
/// Little-endian throughout.
inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  TensorF value;
};

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParamStore<float>& params);

struct Checkpoint {
  ModelConfig config;
  std::vector<NamedTensor> tensors;
};

Checkpoint load_checkpoint(const std::string& path);

/// Builds a model from the checkpoint's embedded config.
ModelF load_model(const std::string& path);

/// Loads tensors into an existing model; every name and shape must match.
void load_into(ModelF& model, const Checkpoint& ckpt);

}  // namespace dbcc
