#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace demote {

// One (text, target, protected) triplet.
struct Example {
  std::vector<std::string> tokens;
  int target = 0;
  int protected_label = 0;
  std::optional<double> protected_posterior;

  bool operator==(const Example&) const = default;
};

struct Dataset {
  std::string name;
  int num_target_classes = 2;     // K_y
  int num_protected_classes = 2;  // K_z
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool operator==(const Dataset&) const = default;
};

// Throws ValidationError if any example violates the class counts or is empty,
// or if the dataset has no examples.
void validate(const Dataset& dataset);

// Content hash over tokens and labels; the name is not part of it.
std::string dataset_hash(const Dataset& dataset);

// Lowercases, splits on whitespace, and emits every ASCII punctuation
// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(std::span<const std::string> tokens);

class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  // Rebuilds from an id-ordered token list whose first two entries are the
  // reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> id_to_token);

  int pad_id() const { return kPadId; }
  int unk_id() const { return kUnkId; }
  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }
  const std::string& token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  std::string hash() const;

 private:
  void add(const std::string& token);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Keeps tokens with frequency >= min_freq, ordered by descending frequency
// and then lexicographically.
Vocabulary build_vocab(const Dataset& dataset, int min_freq);

struct EncodedSequence {
  std::vector<int> ids;  // always max_len entries
  int length = 0;        // tokens before padding, capped at max_len
};

EncodedSequence encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                       int max_len);
std::vector<std::string> decode(std::span<const int> ids, int length,
                                const Vocabulary& vocab);

// Dense row-major id matrix for a whole dataset.
struct EncodedDataset {
  int max_len = 0;
  std::vector<int> ids;  // size() * max_len
  std::vector<int> lengths;
  std::vector<int> targets;
  std::vector<int> protected_labels;
  int num_target_classes = 2;
  int num_protected_classes = 2;

  std::size_t size() const { return lengths.size(); }
  std::span<const int> row(std::size_t i) const {
    return {ids.data() + i * static_cast<std::size_t>(max_len),
            static_cast<std::size_t>(max_len)};
  }
};

EncodedDataset encode_dataset(const Dataset& dataset, const Vocabulary& vocab, int max_len);

inline constexpr double kDefaultPosteriorThreshold = 0.8;

// Reads one record per line: {"text", "target", and exactly one of
// "protected" / "protected_posterior"}. Records carrying "_meta" are skipped.
Dataset load_jsonl(const std::string& path, int num_target_classes,
                   int num_protected_classes,
                   double posterior_threshold = kDefaultPosteriorThreshold);
Dataset parse_jsonl(std::string_view content, const std::string& name,
                    int num_target_classes, int num_protected_classes,
                    double posterior_threshold = kDefaultPosteriorThreshold);

std::string to_jsonl_record(const Example& example);

}  // namespace demote
