#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dbcc/checkpoint.hpp"

using namespace dbcc;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("dbcc_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

ModelF small_model(uint64_t seed) {
  ModelConfig cfg;
  cfg.stem_filters = 4;
  cfg.num_blocks = 1;
  cfg.input_h = 32;
  cfg.input_w = 32;
  Rng rng(seed);
  return ModelF::init(cfg, rng);
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact and stable") {
  TempDir tmp;
  ModelF model = small_model(9);
  const std::string p1 = tmp.file("a.ckpt");
  save_checkpoint(p1, model.config(), model.params());

  ModelF loaded = load_model(p1);
  REQUIRE(loaded.params().size() == model.params().size());
  for (int i = 0; i < model.params().size(); ++i) {
    CHECK(loaded.params()[i].name == model.params()[i].name);
    CHECK(loaded.params()[i].value == model.params()[i].value);
  }

  const std::string p2 = tmp.file("b.ckpt");
  save_checkpoint(p2, loaded.config(), loaded.params());
  CHECK(read_bytes(p1) == read_bytes(p2));

  // forward outputs are preserved bit-exactly
  Rng rng(10);
  TensorF img = random_init<float>(Shape{32, 32, 3}, 4, rng);
  for (long long i = 0; i < img.size(); ++i) img[i] = std::fabs(img[i]);
  GraphF g1, g2;
  auto f1 = model.forward(g1, g1.input(img));
  auto f2 = loaded.forward(g2, g2.input(img));
  CHECK(g1.value(f1.estimate) == g2.value(f2.estimate));
}

TEST_CASE("corrupted checkpoints fail with clear errors") {
  TempDir tmp;
  ModelF model = small_model(11);
  const std::string p = tmp.file("m.ckpt");
  save_checkpoint(p, model.config(), model.params());
  const std::string bytes = read_bytes(p);

  SUBCASE("bad magic") {
    std::ofstream out(tmp.file("bad.ckpt"), std::ios::binary);
    out << "NOPE" << bytes.substr(4);
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("bad.ckpt")), doctest::Contains("magic"),
                         FormatError);
  }
  SUBCASE("unsupported version") {
    std::string v = bytes;
    v[4] = 99;
    std::ofstream out(tmp.file("v.ckpt"), std::ios::binary);
    out << v;
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("v.ckpt")), doctest::Contains("version"),
                         FormatError);
  }
  SUBCASE("truncation is a checksum or truncation error, not a crash") {
    std::ofstream out(tmp.file("t.ckpt"), std::ios::binary);
    out << bytes.substr(0, bytes.size() - 13);
    out.close();
    CHECK_THROWS_AS(load_checkpoint(tmp.file("t.ckpt")), FormatError);
  }
  SUBCASE("flipped payload byte fails the checksum") {
    std::string v = bytes;
    v[v.size() / 2] = static_cast<char>(v[v.size() / 2] ^ 0x5a);
    std::ofstream out(tmp.file("c.ckpt"), std::ios::binary);
    out << v;
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("c.ckpt")), doctest::Contains("checksum"),
                         FormatError);
  }
}

TEST_CASE("loading into a mismatched model names the offending tensor") {
  TempDir tmp;
  ModelF model = small_model(12);
  const std::string p = tmp.file("m.ckpt");
  save_checkpoint(p, model.config(), model.params());
  Checkpoint ckpt = load_checkpoint(p);

  ModelConfig other = model.config();
  other.stem_filters = 8;
  Rng rng(13);
  ModelF wide = ModelF::init(other, rng);
  CHECK_THROWS_WITH_AS(load_into(wide, ckpt), doctest::Contains("stem.w"), FormatError);
}
