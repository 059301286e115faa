#include "demote/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "demote/errors.hpp"
#include "gtest/gtest.h"

namespace demote {
namespace {

int count_if_tokens(const Example& ex, bool (*pred)(const std::string&)) {
  return static_cast<int>(std::count_if(ex.tokens.begin(), ex.tokens.end(), pred));
}

TEST(Synthetic, IndependentWhenConfoundIsZero) {
  SyntheticSpec spec;
  spec.n_examples = 10000;
  spec.q1 = 0.5;
  spec.q0 = 0.5;
  const Dataset ds = generate_synthetic(spec);
  double sy = 0, sz = 0, syz = 0, syy = 0, szz = 0;
  const double n = static_cast<double>(ds.size());
  for (const Example& ex : ds.examples) {
    sy += ex.target;
    sz += ex.protected_label;
    syz += ex.target * ex.protected_label;
    syy += ex.target * ex.target;
    szz += ex.protected_label * ex.protected_label;
  }
  const double cov = syz / n - (sy / n) * (sz / n);
  const double corr =
      cov / std::sqrt((syy / n - (sy / n) * (sy / n)) * (szz / n - (sz / n) * (sz / n)));
  EXPECT_LT(std::abs(corr), 0.03);
}

TEST(Synthetic, ConditionalRateMatchesConfound) {
  SyntheticSpec spec;
  spec.n_examples = 10000;
  const Dataset ds = generate_synthetic(spec);
  long z1 = 0, y1z1 = 0;
  for (const Example& ex : ds.examples) {
    if (ex.protected_label == 1) {
      ++z1;
      y1z1 += ex.target;
    }
  }
  const double rate = static_cast<double>(y1z1) / static_cast<double>(z1);
  EXPECT_GE(rate, 0.88);
  EXPECT_LE(rate, 0.92);
}

TEST(Synthetic, NoNoisePlantsExactMarkerCounts) {
  SyntheticSpec spec;
  spec.marker_noise = 0.0;
  spec.k_tox = 2;
  spec.k_dial = 3;
  const Dataset ds = generate_synthetic(spec);
  for (const Example& ex : ds.examples) {
    ASSERT_EQ(static_cast<int>(ex.tokens.size()), spec.length);
    EXPECT_EQ(count_if_tokens(ex, is_toxicity_marker), ex.target == 1 ? 2 : 0);
    EXPECT_EQ(count_if_tokens(ex, is_dialect_marker), ex.protected_label == 1 ? 3 : 0);
  }
}

TEST(Synthetic, MarkerRulesRecoverBothLabelsWithoutNoise) {
  SyntheticSpec spec;
  spec.marker_noise = 0.0;
  spec.n_examples = 2000;
  const Dataset ds = generate_synthetic(spec);
  for (const Example& ex : ds.examples) {
    EXPECT_EQ(count_if_tokens(ex, is_toxicity_marker) > 0, ex.target == 1);
    EXPECT_EQ(count_if_tokens(ex, is_dialect_marker) > 0, ex.protected_label == 1);
  }
}

TEST(Synthetic, MarkerFamiliesAreDisjoint) {
  for (int i = 0; i < 10; ++i) {
    EXPECT_TRUE(is_toxicity_marker(toxicity_marker(i)));
    EXPECT_FALSE(is_dialect_marker(toxicity_marker(i)));
    EXPECT_TRUE(is_dialect_marker(dialect_marker(i)));
    EXPECT_FALSE(is_toxicity_marker(dialect_marker(i)));
    EXPECT_FALSE(is_toxicity_marker(neutral_token(i)));
    EXPECT_FALSE(is_dialect_marker(neutral_token(i)));
  }
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec spec;
  EXPECT_EQ(generate_synthetic(spec), generate_synthetic(spec));
  EXPECT_EQ(synthetic_to_jsonl(spec, generate_synthetic(spec)),
            synthetic_to_jsonl(spec, generate_synthetic(spec)));
  SyntheticSpec other = spec;
  other.seed = 2;
  EXPECT_NE(dataset_hash(generate_synthetic(spec)), dataset_hash(generate_synthetic(other)));
}

TEST(Synthetic, EveryMarkerSurvivesVocabularyCutoff) {
  SyntheticSpec spec;
  const Dataset ds = generate_synthetic(spec);
  // Independent frequency count over the raw tokens.
  std::map<std::string, int> freq;
  for (const Example& ex : ds.examples) {
    for (const std::string& t : ex.tokens) ++freq[t];
  }
  const Vocabulary vocab = build_vocab(ds, 2);
  for (int i = 0; i < spec.n_toxmark; ++i) {
    EXPECT_GE(freq[toxicity_marker(i)], 2);
    EXPECT_TRUE(vocab.contains(toxicity_marker(i)));
  }
  for (int i = 0; i < spec.n_dialmark; ++i) {
    EXPECT_GE(freq[dialect_marker(i)], 2);
    EXPECT_TRUE(vocab.contains(dialect_marker(i)));
  }
}

TEST(Synthetic, ValidationNamesTheField) {
  SyntheticSpec spec;
  spec.q1 = 1.5;
  try {
    spec.validate();
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("q1"), std::string::npos) << e.what();
  }
  spec = SyntheticSpec{};
  spec.k_tox = 10;
  spec.k_dial = 10;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec = SyntheticSpec{};
  spec.marker_noise = -0.1;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Synthetic, ConfigRoundTrip) {
  SyntheticSpec spec;
  spec.q1 = 0.75;
  spec.seed = 42;
  spec.n_examples = 123;
  const SyntheticSpec back = SyntheticSpec::from_config(spec.to_config());
  EXPECT_EQ(back.q1, 0.75);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.n_examples, 123);
}

TEST(Synthetic, JsonlLoadsBack) {
  SyntheticSpec spec;
  spec.n_examples = 50;
  const Dataset ds = generate_synthetic(spec);
  const std::string text = synthetic_to_jsonl(spec, ds);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 51);
  const Dataset back = parse_jsonl(text, "synthetic", 2, 2);
  EXPECT_EQ(dataset_hash(back), dataset_hash(ds));
}

}  // namespace
}  // namespace demote
