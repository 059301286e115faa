#include "demote/data.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "demote/errors.hpp"
#include "demote/hash.hpp"

namespace demote {

void validate(const Dataset& dataset) {
  if (dataset.examples.empty()) {
    throw ValidationError("dataset '" + dataset.name + "' is empty");
  }
  if (dataset.num_target_classes < 2 || dataset.num_protected_classes < 2) {
    throw ValidationError("class counts must be at least 2");
  }
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    const Example& ex = dataset.examples[i];
    const std::string where = "dataset '" + dataset.name + "' example " + std::to_string(i);
    if (ex.tokens.empty()) throw ValidationError(where + ": no tokens");
    if (ex.target < 0 || ex.target >= dataset.num_target_classes) {
      throw ValidationError(where + ": target out of range");
    }
    if (ex.protected_label < 0 || ex.protected_label >= dataset.num_protected_classes) {
      throw ValidationError(where + ": protected label out of range");
    }
  }
}

std::string dataset_hash(const Dataset& dataset) {
  Sha256 h;
  h.update("K=" + std::to_string(dataset.num_target_classes) + "," +
           std::to_string(dataset.num_protected_classes) + "\n");
  for (const Example& ex : dataset.examples) {
    h.update(join_tokens(ex.tokens));
    h.update("\t" + std::to_string(ex.target) + "\t" + std::to_string(ex.protected_label) + "\n");
  }
  return h.hex_digest();
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> id_to_token) {
  if (id_to_token.size() < 2 || id_to_token[kPadId] != kPadToken ||
      id_to_token[kUnkId] != kUnkToken) {
    throw ValidationError("vocabulary must start with the reserved pad and unk tokens");
  }
  Vocabulary vocab;
  for (std::size_t i = 2; i < id_to_token.size(); ++i) {
    if (vocab.contains(id_to_token[i])) {
      throw ValidationError("duplicate vocabulary token '" + id_to_token[i] + "'");
    }
    vocab.add(id_to_token[i]);
  }
  return vocab;
}

void Vocabulary::add(const std::string& token) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

std::string Vocabulary::hash() const {
  Sha256 h;
  for (const std::string& t : id_to_token_) {
    h.update(t);
    h.update("\n");
  }
  return h.hex_digest();
}

Vocabulary build_vocab(const Dataset& dataset, int min_freq) {
  if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
  if (dataset.examples.empty()) throw ValidationError("cannot build a vocabulary from an empty dataset");
  std::map<std::string, long> counts;
  for (const Example& ex : dataset.examples) {
    for (const std::string& t : ex.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_freq) kept.emplace_back(token, count);
  }
  // counts is already lexicographic, so a stable sort on frequency breaks
  // ties lexicographically.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> ordered{std::string(Vocabulary::kPadToken),
                                   std::string(Vocabulary::kUnkToken)};
  for (auto& [token, count] : kept) ordered.push_back(token);
  return Vocabulary::from_tokens(std::move(ordered));
}

EncodedSequence encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                       int max_len) {
  if (max_len < 1) throw ValidationError("max_len must be >= 1");
  EncodedSequence out;
  out.ids.assign(static_cast<std::size_t>(max_len), vocab.pad_id());
  out.length = static_cast<int>(std::min<std::size_t>(tokens.size(), max_len));
  for (int i = 0; i < out.length; ++i) out.ids[i] = vocab.id(tokens[i]);
  return out;
}

std::vector<std::string> decode(std::span<const int> ids, int length, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int i = 0; i < length; ++i) out.push_back(vocab.token(ids[i]));
  return out;
}

EncodedDataset encode_dataset(const Dataset& dataset, const Vocabulary& vocab, int max_len) {
  EncodedDataset out;
  out.max_len = max_len;
  out.num_target_classes = dataset.num_target_classes;
  out.num_protected_classes = dataset.num_protected_classes;
  out.ids.reserve(dataset.size() * static_cast<std::size_t>(max_len));
  for (const Example& ex : dataset.examples) {
    EncodedSequence seq = encode(ex.tokens, vocab, max_len);
    if (seq.length == 0) throw ValidationError("cannot encode an empty example");
    out.ids.insert(out.ids.end(), seq.ids.begin(), seq.ids.end());
    out.lengths.push_back(seq.length);
    out.targets.push_back(ex.target);
    out.protected_labels.push_back(ex.protected_label);
  }
  return out;
}

namespace {

int read_label(const nlohmann::json& record, const char* field, int num_classes,
               const std::string& where) {
  const auto& v = record.at(field);
  if (!v.is_number_integer()) throw ValidationError(where + ": '" + field + "' must be an integer");
  const auto label = v.get<long long>();
  if (label < 0 || label >= num_classes) {
    throw ValidationError(where + ": '" + field + "' = " + std::to_string(label) +
                          " out of range [0, " + std::to_string(num_classes) + ")");
  }
  return static_cast<int>(label);
}

}  // namespace

Dataset parse_jsonl(std::string_view content, const std::string& name, int num_target_classes,
                    int num_protected_classes, double posterior_threshold) {
  Dataset ds;
  ds.name = name;
  ds.num_target_classes = num_target_classes;
  ds.num_protected_classes = num_protected_classes;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = name + " line " + std::to_string(line_no);

    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object()) throw ValidationError(where + ": record must be a JSON object");
    if (record.contains("_meta")) continue;
    if (!record.contains("text") || !record["text"].is_string()) {
      throw ValidationError(where + ": missing string field 'text'");
    }
    if (!record.contains("target")) throw ValidationError(where + ": missing field 'target'");

    Example ex;
    ex.tokens = tokenize(record["text"].get<std::string>());
    if (ex.tokens.empty()) throw ValidationError(where + ": text has no tokens");
    ex.target = read_label(record, "target", num_target_classes, where);

    const bool has_label = record.contains("protected");
    const bool has_posterior = record.contains("protected_posterior");
    if (has_label == has_posterior) {
      throw ValidationError(where + ": exactly one of 'protected' and 'protected_posterior' is required");
    }
    if (has_label) {
      ex.protected_label = read_label(record, "protected", num_protected_classes, where);
    } else {
      if (num_protected_classes != 2) {
        throw ValidationError(where + ": 'protected_posterior' requires a binary protected attribute");
      }
      const auto& v = record["protected_posterior"];
      if (!v.is_number()) throw ValidationError(where + ": 'protected_posterior' must be a number");
      const double p = v.get<double>();
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError(where + ": 'protected_posterior' outside [0, 1]");
      }
      ex.protected_posterior = p;
      ex.protected_label = p >= posterior_threshold ? 1 : 0;
    }
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty()) throw ValidationError(name + ": no records");
  return ds;
}

Dataset load_jsonl(const std::string& path, int num_target_classes, int num_protected_classes,
                   double posterior_threshold) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_jsonl(ss.str(), std::filesystem::path(path).stem().string(), num_target_classes,
                     num_protected_classes, posterior_threshold);
}

std::string to_jsonl_record(const Example& example) {
  nlohmann::ordered_json record;
  record["text"] = join_tokens(example.tokens);
  record["target"] = example.target;
  if (example.protected_posterior) {
    record["protected_posterior"] = *example.protected_posterior;
  } else {
    record["protected"] = example.protected_label;
  }
  return record.dump();
}

}  // namespace demote
