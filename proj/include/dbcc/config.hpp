#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dbcc/model.hpp"

namespace dbcc {

/// Parses line-oriented `key = value` text. `#` starts a comment; blank lines
/// are ignored. Keys and values are whitespace-trimmed.
std::vector<std::pair<std::string, std::string>> parse_kv_lines(const std::string& text);

int parse_int(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
uint64_t parse_u64(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

/// Full run configuration: architecture, optimization, data and output
/// locations. Every key can come from a config file or a CLI flag; unknown
/// keys are errors.
struct RunConfig {
  ModelConfig model;

  double lr = 5e-4;
  int batch_size = 32;
  int epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 10.0;  // global-norm clip; 0 disables
  int patience = 20;        // early-stop patience in epochs; 0 disables
  uint64_t seed = 42;

  bool augment = true;
  double crop_min = 0.6;  // min crop fraction of the short side
  bool hflip = true;
  bool vflip = true;

  std::string train_manifest;
  std::string val_manifest;
  int val_count = 0;  // when >0 and no val_manifest: last N manifest entries
  int folds = 3;
  std::string run_dir;

  /// Applies one key; throws FormatError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  void load_file(const std::string& path);
  void load_text(const std::string& text);

  /// Canonical echo of the effective configuration.
  std::string serialize() const;
};

}  // namespace dbcc
