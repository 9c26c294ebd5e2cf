#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "glora/bundle.hpp"
#include "glora/container.hpp"
#include "test_util.hpp"

using namespace glora;
using testutil::random_tensor;

namespace {

ContainerErrc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ContainerError& e) {
    return e.code();
  }
  FAIL("expected a ContainerError");
  return ContainerErrc::bad_magic;
}

SeqModel small_model(uint64_t seed) {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 1;
  cfg.feature_dim = 8;
  cfg.ffn_dim = 8;
  cfg.vocab_size = 8;
  cfg.seed = seed;
  return SeqModel::init(cfg);
}

}  // namespace

TEST_CASE("crc32 known vector") {
  const char* s = "123456789";
  CHECK(crc32(reinterpret_cast<const uint8_t*>(s), 9) == 0xCBF43926u);
  CHECK(crc32(nullptr, 0) == 0u);
}

TEST_CASE("empty bundle round trip") {
  AdapterBundle b;
  b.kind = AdapterKind::Lora;
  b.rank = 2;
  b.fingerprint = 0xdeadbeef;
  auto bytes = serialize_bundle(b);
  AdapterBundle back = deserialize_bundle(bytes);
  CHECK(back.kind == b.kind);
  CHECK(back.rank == 2);
  CHECK(back.fingerprint == 0xdeadbeef);
  CHECK(back.entries.empty());
}

TEST_CASE("adapter bundle round trip is bit-exact") {
  SeqModel model = small_model(3);
  AdapterSpec spec;
  spec.kind = AdapterKind::Glora3;
  spec.rank = 2;
  spec.seed = 5;
  Adapter adapter = attach(model, spec);

  AdapterBundle bundle = bundle_from_adapter(adapter, model.fingerprint());
  auto bytes = serialize_bundle(bundle);
  AdapterBundle back = deserialize_bundle(bytes);
  CHECK(back.kind == bundle.kind);
  CHECK(back.rank == bundle.rank);
  CHECK(back.fingerprint == bundle.fingerprint);
  REQUIRE(back.entries.size() == bundle.entries.size());
  for (const auto& [name, t] : bundle.entries) CHECK(back.entries.at(name).same_values(t));

  // byte-stable: serializing the reread bundle reproduces the bytes
  CHECK(serialize_bundle(back) == bytes);

  // attach points recovered from names
  auto points = bundle.attach_points();
  CHECK(points.size() == default_attach_points(model.config()).size());
}

TEST_CASE("every corruption gets its own error code") {
  SeqModel model = small_model(4);
  AdapterSpec spec;
  spec.rank = 2;
  Adapter adapter = attach(model, spec);
  auto bytes = serialize_bundle(bundle_from_adapter(adapter, 1));

  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK(code_of([&] { deserialize_bundle(bad); }) == ContainerErrc::bad_magic);
  }
  SUBCASE("flipped payload byte fails the crc") {
    auto bad = bytes;
    bad[bytes.size() / 2] ^= 0x40;
    CHECK(code_of([&] { deserialize_bundle(bad); }) == ContainerErrc::bad_crc);
  }
  SUBCASE("version mismatch") {
    auto bad = bytes;
    bad[4] = 9;  // version byte follows the magic
    // refresh the crc so the version check is what fails
    uint32_t crc = crc32(bad.data(), bad.size() - 4);
    for (int i = 0; i < 4; ++i) bad[bad.size() - 4 + static_cast<size_t>(i)] =
        static_cast<uint8_t>(crc >> (8 * i));
    CHECK(code_of([&] { deserialize_bundle(bad); }) == ContainerErrc::bad_version);
  }
  SUBCASE("truncation") {
    std::vector<uint8_t> bad(bytes.begin(), bytes.begin() + 10);
    CHECK(code_of([&] { deserialize_bundle(bad); }) == ContainerErrc::truncated);
  }
  SUBCASE("checkpoint bytes are not a bundle") {
    auto ckpt = serialize_checkpoint(model);
    CHECK(code_of([&] { deserialize_bundle(ckpt); }) == ContainerErrc::kind_mismatch);
  }
}

TEST_CASE("f32 wire precision survives the round trip") {
  SeqModel model = small_model(5);
  AdapterSpec spec;
  spec.rank = 2;
  Adapter adapter = attach(model, spec);
  AdapterBundle b1 = bundle_from_adapter(adapter, model.fingerprint());
  // re-rounding already-rounded values changes nothing
  Adapter again = attach(model, b1);
  AdapterBundle b2 = bundle_from_adapter(again, model.fingerprint());
  CHECK(serialize_bundle(b1) == serialize_bundle(b2));
}

TEST_CASE("checkpoint round trip restores a frozen model") {
  SeqModel model = small_model(6);
  std::string path = "/tmp/glora_test_ckpt.bin";
  save_checkpoint(model, path);
  SeqModel loaded = load_checkpoint(path);
  CHECK(loaded.config().canonical() == model.config().canonical());
  CHECK(loaded.params_hash() == model.params_hash());
  for (const auto& [name, t] : model.params()) {
    CHECK(loaded.param(name).same_values(t));
    CHECK(loaded.frozen(name));
  }
  std::remove(path.c_str());
}

TEST_CASE("file helpers") {
  std::string path = "/tmp/glora_test_file.bin";
  std::vector<uint8_t> payload = {1, 2, 3, 4, 5};
  write_file_atomic(path, payload);
  CHECK(read_file(path) == payload);
  CHECK_THROWS_AS(read_file("/tmp/glora_does_not_exist_xyz"), std::runtime_error);
  std::remove(path.c_str());
}
