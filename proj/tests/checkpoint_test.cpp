#include "demote/checkpoint.hpp"

#include <filesystem>

#include "demote/errors.hpp"
#include "demote/hash.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace demote {
namespace {

Checkpoint sample() {
  Checkpoint c;
  ModelDims dims = testing::tiny_dims(2);
  Dataset ds;
  ds.examples.push_back(Example{{"a", "b", "c", "d", "e", "f", "g"}, 0, 0, {}});
  c.vocab = build_vocab(ds, 1);
  dims.vocab_size = c.vocab.size();
  c.params = init_params(dims, 99);
  c.params.encoder.attn_bias(0) = 1.0 / 3.0;  // not exactly representable in decimal
  c.vocab_hash = c.vocab.hash();
  c.max_len = 12;
  c.config = {{"alpha", "0.05"}, {"seed", "1"}};
  c.info = {{"selected_epoch", "7"}};
  return c;
}

TEST(Checkpoint, SerializeDeserializeSerializeIsIdempotent) {
  const std::string bytes = serialize_checkpoint(sample());
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(params_hash(back.params), params_hash(sample().params));
  EXPECT_EQ(back.params.dims, sample().params.dims);
  EXPECT_EQ(back.vocab.tokens(), sample().vocab.tokens());
  EXPECT_EQ(back.max_len, 12);
  EXPECT_EQ(back.config.at("alpha"), "0.05");
  EXPECT_EQ(back.info.at("selected_epoch"), "7");
}

TEST(Checkpoint, FileRoundTripIsByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "demote_checkpoint_test";
  std::filesystem::create_directories(dir);
  const std::string a = (dir / "a.bin").string();
  const std::string b = (dir / "b.bin").string();
  save_checkpoint(sample(), a);
  save_checkpoint(load_checkpoint(a), b);
  EXPECT_EQ(sha256_file(a), sha256_file(b));
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::string bytes = serialize_checkpoint(sample());
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 8)), ValidationError);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bytes), ValidationError);
  EXPECT_THROW(load_checkpoint("/nonexistent/checkpoint.bin"), ValidationError);
}

}  // namespace
}  // namespace demote
