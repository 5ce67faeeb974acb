#include "dbcc/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dbcc {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_lines(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                        line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw FormatError("config key '" + key + "': expected integer, got '" + value + "'");
  return static_cast<int>(v);
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw FormatError("config key '" + key + "': expected unsigned integer, got '" + value + "'");
  return static_cast<uint64_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw FormatError("config key '" + key + "': expected number, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  throw FormatError("config key '" + key + "': expected boolean, got '" + value + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "design") {
    model.design = design_from(value);
  } else if (key == "stem_filters") {
    model.stem_filters = parse_int(key, value);
  } else if (key == "blocks") {
    model.num_blocks = parse_int(key, value);
  } else if (key == "dw_kernel") {
    model.dw_kernel = parse_int(key, value);
  } else if (key == "shared_path") {
    if (value == "stride4")
      model.shared_path = SharedPath::Stride4;
    else if (value == "double2")
      model.shared_path = SharedPath::DoubleStride2;
    else
      throw FormatError("config key 'shared_path': expected stride4 or double2, got '" + value + "'");
  } else if (key == "input_height") {
    model.input_h = parse_int(key, value);
  } else if (key == "input_width") {
    model.input_w = parse_int(key, value);
  } else if (key == "lr") {
    lr = parse_double(key, value);
    if (!(lr >= 0)) throw FormatError("config key 'lr': must be >= 0");
  } else if (key == "batch_size") {
    batch_size = parse_int(key, value);
    if (batch_size < 1) throw FormatError("config key 'batch_size': must be >= 1");
  } else if (key == "epochs") {
    epochs = parse_int(key, value);
  } else if (key == "beta1") {
    beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    beta2 = parse_double(key, value);
  } else if (key == "adam_eps") {
    adam_eps = parse_double(key, value);
  } else if (key == "grad_clip") {
    grad_clip = parse_double(key, value);
  } else if (key == "patience") {
    patience = parse_int(key, value);
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "augment") {
    augment = parse_bool(key, value);
  } else if (key == "crop_min") {
    crop_min = parse_double(key, value);
    if (!(crop_min > 0 && crop_min <= 1)) throw FormatError("config key 'crop_min': must be in (0,1]");
  } else if (key == "hflip") {
    hflip = parse_bool(key, value);
  } else if (key == "vflip") {
    vflip = parse_bool(key, value);
  } else if (key == "train_manifest") {
    train_manifest = value;
  } else if (key == "val_manifest") {
    val_manifest = value;
  } else if (key == "val_count") {
    val_count = parse_int(key, value);
  } else if (key == "folds") {
    folds = parse_int(key, value);
  } else if (key == "run_dir") {
    run_dir = value;
  } else {
    throw FormatError("unknown config key '" + key + "'");
  }
}

void RunConfig::load_text(const std::string& text) {
  for (const auto& [k, v] : parse_kv_lines(text)) set(k, v);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str());
}

std::string RunConfig::serialize() const {
  std::ostringstream s;
  s << model.serialize();
  auto num = [&](const char* k, double v) {
    std::ostringstream t;
    t.precision(17);
    t << v;
    s << k << " = " << t.str() << "\n";
  };
  num("lr", lr);
  s << "batch_size = " << batch_size << "\n";
  s << "epochs = " << epochs << "\n";
  num("beta1", beta1);
  num("beta2", beta2);
  num("adam_eps", adam_eps);
  num("grad_clip", grad_clip);
  s << "patience = " << patience << "\n";
  s << "seed = " << seed << "\n";
  s << "augment = " << (augment ? "true" : "false") << "\n";
  num("crop_min", crop_min);
  s << "hflip = " << (hflip ? "true" : "false") << "\n";
  s << "vflip = " << (vflip ? "true" : "false") << "\n";
  if (!train_manifest.empty()) s << "train_manifest = " << train_manifest << "\n";
  if (!val_manifest.empty()) s << "val_manifest = " << val_manifest << "\n";
  s << "val_count = " << val_count << "\n";
  s << "folds = " << folds << "\n";
  if (!run_dir.empty()) s << "run_dir = " << run_dir << "\n";
  return s.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  RunConfig rc;
  rc.load_text(text);
  return rc.model;
}

}  // namespace dbcc
