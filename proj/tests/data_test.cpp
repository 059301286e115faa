#include "demote/data.hpp"

#include <filesystem>
#include <fstream>

#include "demote/errors.hpp"
#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace demote {
namespace {

using ::testing::ElementsAre;

Dataset tiny(std::initializer_list<const char*> texts) {
  Dataset ds;
  ds.name = "tiny";
  for (const char* t : texts) ds.examples.push_back(Example{tokenize(t), 0, 0, {}});
  return ds;
}

TEST(Tokenize, WhitespaceSplit) {
  EXPECT_EQ(tokenize("I am hungry"), (std::vector<std::string>{"i", "am", "hungry"}));
  EXPECT_EQ(tokenize("need dat shower"), (std::vector<std::string>{"need", "dat", "shower"}));
}

TEST(Tokenize, PunctuationIsSeparated) {
  EXPECT_EQ(tokenize("hatin on someone,"),
            (std::vector<std::string>{"hatin", "on", "someone", ","}));
  EXPECT_EQ(tokenize("better....a"),
            (std::vector<std::string>{"better", ".", ".", ".", ".", "a"}));
}

TEST(Tokenize, EmptyAndWhitespaceOnly) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t\n ").empty());
}

TEST(Tokenize, Deterministic) {
  EXPECT_EQ(tokenize("So Much ENERGY!"), tokenize("So Much ENERGY!"));
}

TEST(BuildVocab, TinyCorpus) {
  const Vocabulary v = build_vocab(tiny({"a a b"}), 1);
  EXPECT_EQ(v.size(), 4);
  EXPECT_EQ(v.token(v.pad_id()), "<pad>");
  EXPECT_EQ(v.token(v.unk_id()), "<unk>");
  EXPECT_EQ(v.id("a"), 2);
  EXPECT_EQ(v.id("b"), 3);
}

TEST(BuildVocab, FrequencyCutoff) {
  const Vocabulary v = build_vocab(tiny({"a a b"}), 2);
  EXPECT_EQ(v.size(), 3);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.id("b"), v.unk_id());
}

TEST(BuildVocab, TiesBrokenLexicographically) {
  const Vocabulary v = build_vocab(tiny({"c b a", "c"}), 1);
  EXPECT_THAT(v.tokens(), ElementsAre("<pad>", "<unk>", "c", "a", "b"));
}

TEST(BuildVocab, RejectsEmptyDatasetAndBadMinFreq) {
  EXPECT_THROW(build_vocab(Dataset{}, 1), ValidationError);
  EXPECT_THROW(build_vocab(tiny({"a"}), 0), ValidationError);
}

TEST(Encode, PadsTruncatesAndSubstitutesUnk) {
  const Vocabulary v = build_vocab(tiny({"a b"}), 1);
  const std::vector<std::string> ab{"a", "b"};
  EncodedSequence e = encode(ab, v, 4);
  EXPECT_THAT(e.ids, ElementsAre(v.id("a"), v.id("b"), v.pad_id(), v.pad_id()));
  EXPECT_EQ(e.length, 2);

  const std::vector<std::string> az{"a", "zzz"};
  e = encode(az, v, 4);
  EXPECT_EQ(e.ids[1], v.unk_id());
  EXPECT_EQ(e.length, 2);

  const std::vector<std::string> long_input(50, "a");
  e = encode(long_input, v, 32);
  EXPECT_EQ(e.ids.size(), 32u);
  EXPECT_EQ(e.length, 32);
}

TEST(Encode, RoundTripForInVocabularyTokens) {
  const Dataset ds = tiny({"the quick brown fox", "jumps over the lazy dog"});
  const Vocabulary v = build_vocab(ds, 1);
  for (const Example& ex : ds.examples) {
    const EncodedSequence e = encode(ex.tokens, v, 16);
    EXPECT_EQ(decode(e.ids, e.length, v), ex.tokens);
  }
}

TEST(Vocabulary, FromTokensRoundTripsHash) {
  const Vocabulary v = build_vocab(tiny({"x y y z"}), 1);
  const Vocabulary w = Vocabulary::from_tokens(v.tokens());
  EXPECT_EQ(v.hash(), w.hash());
  EXPECT_THROW(Vocabulary::from_tokens({"a", "b"}), ValidationError);
}

class JsonlTest : public ::testing::Test {
 protected:
  Dataset parse(const std::string& text, double threshold = 0.8) {
    return parse_jsonl(text, "t", 2, 2, threshold);
  }
};

TEST_F(JsonlTest, PosteriorThresholdIsInclusive) {
  Dataset ds = parse(
      "{\"text\":\"x\",\"target\":0,\"protected_posterior\":0.85}\n"
      "{\"text\":\"x\",\"target\":0,\"protected_posterior\":0.80}\n"
      "{\"text\":\"x\",\"target\":0,\"protected_posterior\":0.79}\n");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.examples[0].protected_label, 1);
  EXPECT_EQ(ds.examples[1].protected_label, 1);
  EXPECT_EQ(ds.examples[2].protected_label, 0);
  EXPECT_DOUBLE_EQ(*ds.examples[1].protected_posterior, 0.80);
}

TEST_F(JsonlTest, ExplicitLabelsAndMetaRecord) {
  Dataset ds = parse(
      "{\"_meta\":{\"seed\":\"1\"}}\n"
      "{\"text\":\"Hello, world\",\"target\":1,\"protected\":1}\n\n");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.examples[0].tokens, (std::vector<std::string>{"hello", ",", "world"}));
  EXPECT_EQ(ds.examples[0].target, 1);
  EXPECT_FALSE(ds.examples[0].protected_posterior.has_value());
}

TEST_F(JsonlTest, ErrorsNameTheLine) {
  try {
    parse("{\"text\":\"a\",\"target\":0,\"protected\":0}\n{\"text\":\"a\",\"target\":5,\"protected\":0}\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("{\"text\":\"a\",\"target\":0}\n"), ValidationError);
  EXPECT_THROW(parse("{\"text\":\"a\",\"target\":0,\"protected\":0,\"protected_posterior\":0.9}\n"),
               ValidationError);
  EXPECT_THROW(parse("not json\n"), ValidationError);
  EXPECT_THROW(parse("{\"text\":\"  \",\"target\":0,\"protected\":0}\n"), ValidationError);
  EXPECT_THROW(parse("{\"text\":\"a\",\"target\":0,\"protected\":2}\n"), ValidationError);
}

TEST_F(JsonlTest, MissingFile) {
  EXPECT_THROW(load_jsonl("/nonexistent/file.jsonl", 2, 2), ValidationError);
}

TEST_F(JsonlTest, RecordRoundTrip) {
  Example ex{{"a", "b"}, 1, 0, 0.3};
  Dataset ds = parse(to_jsonl_record(ex) + "\n");
  EXPECT_EQ(ds.examples[0], ex);
}

TEST(Validate, RejectsBadExamples) {
  Dataset ds = tiny({"a"});
  EXPECT_NO_THROW(validate(ds));
  ds.examples[0].target = 2;
  EXPECT_THROW(validate(ds), ValidationError);
  EXPECT_THROW(validate(Dataset{}), ValidationError);
}

}  // namespace
}  // namespace demote
