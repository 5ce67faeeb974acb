#include "dbcc/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace dbcc {

namespace {

constexpr char kMagic[4] = {'D', 'B', 'C', 'C'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size())
      throw FormatError("checkpoint truncated: need " + std::to_string(n) + " bytes at offset " +
                        std::to_string(pos));
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

uint64_t fnv1a64(const char* data, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParamStore<float>& params) {
  std::string payload;
  const std::string cfg_text = cfg.serialize();
  put_u32(payload, static_cast<uint32_t>(cfg_text.size()));
  payload += cfg_text;
  put_u32(payload, static_cast<uint32_t>(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    const auto& e = params[i];
    put_u32(payload, static_cast<uint32_t>(e.name.size()));
    payload += e.name;
    put_u32(payload, static_cast<uint32_t>(e.value.rank()));
    for (int d = 0; d < e.value.rank(); ++d)
      put_u32(payload, static_cast<uint32_t>(e.value.shape()[d]));
    for (long long j = 0; j < e.value.size(); ++j) put_f32(payload, e.value[j]);
  }

  std::string file;
  file.append(kMagic, 4);
  put_u32(file, kCheckpointVersion);
  file += payload;
  put_u64(file, fnv1a64(payload.data(), payload.size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + tmp + "'");
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot move checkpoint into place at '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r{buf};
  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError("not a checkpoint: bad magic in '" + path + "'");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  if (buf.size() < r.pos + 8) throw FormatError("checkpoint truncated: missing checksum");
  const size_t payload_end = buf.size() - 8;
  const uint64_t stored = fnv1a64(buf.data() + r.pos, payload_end - r.pos);
  {
    Reader tail{buf};
    tail.pos = payload_end;
    if (tail.u64() != stored)
      throw FormatError("checkpoint checksum mismatch in '" + path + "'");
  }

  Checkpoint ckpt;
  const uint32_t cfg_len = r.u32();
  ckpt.config = ModelConfig::deserialize(r.bytes(cfg_len));
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.bytes(r.u32());
    const uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) throw FormatError("checkpoint tensor '" + t.name + "': bad rank");
    std::vector<int> dims;
    for (uint32_t d = 0; d < rank; ++d) dims.push_back(static_cast<int>(r.u32()));
    TensorF v{Shape(dims)};
    for (long long j = 0; j < v.size(); ++j) v[j] = r.f32();
    t.value = std::move(v);
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.pos != payload_end)
    throw FormatError("checkpoint has trailing bytes before checksum");
  return ckpt;
}

void load_into(ModelF& model, const Checkpoint& ckpt) {
  ParamStore<float>& store = model.params();
  if (static_cast<int>(ckpt.tensors.size()) != store.size())
    throw FormatError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                      " tensors, model expects " + std::to_string(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    const NamedTensor& t = ckpt.tensors[static_cast<size_t>(i)];
    auto& e = store[i];
    if (t.name != e.name)
      throw FormatError("checkpoint tensor '" + t.name + "' does not match model parameter '" +
                        e.name + "'");
    if (t.value.shape() != e.value.shape())
      throw FormatError("shape mismatch for '" + t.name + "': checkpoint " +
                        t.value.shape().str() + " vs model " + e.value.shape().str());
    e.value = t.value;
  }
}

ModelF load_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  Rng rng(0);
  ModelF model = ModelF::init(ckpt.config, rng);
  load_into(model, ckpt);
  return model;
}

}  // namespace dbcc
