#include <filesystem>

#include "doctest.h"
#include "latgen/checkpoint.hpp"

using namespace latgen;

namespace {

Checkpoint sample(Structure s) {
  ModelConfig c;
  c.family = Family::Latent;
  c.structure = s;
  c.d_word = 3;
  c.d_hidden = 4;
  c.d_label = 2;
  c.d_latent = 2;
  c.num_latent = 3;
  c.num_labels = 2;
  const std::string texts[] = {"the cat sat", "the dog sat on the mat"};
  Vocabulary v = build_vocab(texts, 1);
  c.vocab_size = static_cast<int>(v.size());
  Model m(c, 17);
  m.set_label_prior(estimate_label_prior(std::vector<int>{1, 3}));
  return {std::move(m), std::move(v)};
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit exact for every structure") {
    for (Structure s : {Structure::Auxiliary, Structure::Joint, Structure::Middle, Structure::Hierarchical}) {
      Checkpoint ck = sample(s);
      ck.model.params.at("output.bias").value(0, 1) = -0.0;
      ck.model.params.at("output.bias").value(0, 2) = 1e-310;
      const auto path = std::filesystem::temp_directory_path() / ("latgen_ck_" + to_string(s) + ".bin");
      save_checkpoint(path, ck.model, ck.vocab);
      Checkpoint back = load_checkpoint(path);
      CHECK(back.model.config == ck.model.config);
      CHECK(back.vocab == ck.vocab);
      CHECK(back.model.params.identical_to(ck.model.params));
      CHECK(std::signbit(back.model.params.at("output.bias").value(0, 1)));
      CHECK(serialize_checkpoint(back.model, back.vocab) == serialize_checkpoint(ck.model, ck.vocab));
      std::filesystem::remove(path);
    }
  }

  TEST_CASE("header layout") {
    Checkpoint ck = sample(Structure::Auxiliary);
    const std::string bytes = serialize_checkpoint(ck.model, ck.vocab);
    CHECK(bytes.substr(0, 8) == "LATGENCK");
    CHECK(bytes[8] == 1);
    CHECK(bytes[9] == 0);
  }

  TEST_CASE("corrupt files are rejected") {
    Checkpoint ck = sample(Structure::Middle);
    std::string bytes = serialize_checkpoint(ck.model, ck.vocab);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), CheckpointError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CheckpointError);
    std::string bad_version = bytes;
    bad_version[8] = 9;
    CHECK_THROWS_AS(deserialize_checkpoint(bad_version), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/model.bin"), CheckpointError);
  }

  TEST_CASE("parameters inconsistent with the config are rejected") {
    Checkpoint ck = sample(Structure::Joint);
    ModelConfig other = ck.model.config;
    other.structure = Structure::Hierarchical;
    Model mismatched(ck.model.config, std::move(ck.model.params));
    mismatched.config = other;
    CHECK_THROWS_AS(deserialize_checkpoint(serialize_checkpoint(mismatched, ck.vocab)), CheckpointError);
  }
}
