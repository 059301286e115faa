#include "demote/synthetic.hpp"

#include <json.hpp>

#include "demote/errors.hpp"
#include "demote/rng.hpp"

namespace demote {
namespace {

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ValidationError(field + ": " + msg);
}

}  // namespace

void SyntheticSpec::validate() const {
  require(n_examples >= 1, "n_examples", "must be >= 1");
  require(length >= 1, "length", "must be >= 1");
  require(n_neutral >= 1, "n_neutral", "must be >= 1");
  require(n_toxmark >= 1, "n_toxmark", "must be >= 1");
  require(n_dialmark >= 1, "n_dialmark", "must be >= 1");
  require(k_tox >= 0, "k_tox", "must be >= 0");
  require(k_dial >= 0, "k_dial", "must be >= 0");
  require(k_tox + k_dial <= length, "k_tox", "k_tox + k_dial must not exceed length");
  require(p_z >= 0.0 && p_z <= 1.0, "p_z", "must lie in [0, 1]");
  require(q1 >= 0.0 && q1 <= 1.0, "q1", "must lie in [0, 1]");
  require(q0 >= 0.0 && q0 <= 1.0, "q0", "must lie in [0, 1]");
  require(marker_noise >= 0.0 && marker_noise < 1.0, "marker_noise", "must lie in [0, 1)");
}

SyntheticSpec SyntheticSpec::from_config(const KvConfig& cfg) {
  SyntheticSpec s;
  auto int_field = [&](const char* key, int& field) {
    if (auto v = cfg.get_int(key)) field = static_cast<int>(*v);
  };
  auto real_field = [&](const char* key, double& field) {
    if (auto v = cfg.get_double(key)) field = *v;
  };
  int_field("n_examples", s.n_examples);
  int_field("length", s.length);
  int_field("n_neutral", s.n_neutral);
  int_field("n_toxmark", s.n_toxmark);
  int_field("n_dialmark", s.n_dialmark);
  int_field("k_tox", s.k_tox);
  int_field("k_dial", s.k_dial);
  real_field("p_z", s.p_z);
  real_field("q1", s.q1);
  real_field("q0", s.q0);
  real_field("marker_noise", s.marker_noise);
  if (auto v = cfg.get_int("seed")) s.seed = static_cast<std::uint64_t>(*v);
  return s;
}

KvConfig SyntheticSpec::to_config() const {
  KvConfig c;
  c.set("n_examples", std::to_string(n_examples));
  c.set("length", std::to_string(length));
  c.set("n_neutral", std::to_string(n_neutral));
  c.set("n_toxmark", std::to_string(n_toxmark));
  c.set("n_dialmark", std::to_string(n_dialmark));
  c.set("k_tox", std::to_string(k_tox));
  c.set("k_dial", std::to_string(k_dial));
  c.set("p_z", format_double(p_z));
  c.set("q1", format_double(q1));
  c.set("q0", format_double(q0));
  c.set("marker_noise", format_double(marker_noise));
  c.set("seed", std::to_string(seed));
  return c;
}

std::string neutral_token(int i) { return "w" + std::to_string(i); }
std::string toxicity_marker(int i) { return "tox" + std::to_string(i); }
std::string dialect_marker(int i) { return "dia" + std::to_string(i); }
bool is_toxicity_marker(const std::string& token) { return token.rfind("tox", 0) == 0; }
bool is_dialect_marker(const std::string& token) { return token.rfind("dia", 0) == 0; }

Dataset generate_synthetic(const SyntheticSpec& spec, const std::string& name) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset ds;
  ds.name = name;
  ds.num_target_classes = 2;
  ds.num_protected_classes = 2;
  ds.examples.reserve(static_cast<std::size_t>(spec.n_examples));
  for (int n = 0; n < spec.n_examples; ++n) {
    Example ex;
    ex.protected_label = rng.bernoulli(spec.p_z) ? 1 : 0;
    ex.target = rng.bernoulli(ex.protected_label == 1 ? spec.q1 : spec.q0) ? 1 : 0;
    ex.tokens.reserve(static_cast<std::size_t>(spec.length));
    if (ex.target == 1) {
      for (int k = 0; k < spec.k_tox; ++k) {
        const auto marker = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_toxmark)));
        if (!rng.bernoulli(spec.marker_noise)) ex.tokens.push_back(toxicity_marker(marker));
      }
    }
    if (ex.protected_label == 1) {
      for (int k = 0; k < spec.k_dial; ++k) {
        const auto marker = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_dialmark)));
        if (!rng.bernoulli(spec.marker_noise)) ex.tokens.push_back(dialect_marker(marker));
      }
    }
    while (static_cast<int>(ex.tokens.size()) < spec.length) {
      ex.tokens.push_back(
          neutral_token(static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_neutral)))));
    }
    rng.shuffle(ex.tokens);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

std::string synthetic_to_jsonl(const SyntheticSpec& spec, const Dataset& dataset) {
  nlohmann::ordered_json meta;
  const KvConfig echo = spec.to_config();
  for (const auto& [key, value] : echo.entries()) meta[key] = value;
  meta["dataset_hash"] = dataset_hash(dataset);
  nlohmann::ordered_json head;
  head["_meta"] = meta;
  std::string out = head.dump() + "\n";
  for (const Example& ex : dataset.examples) out += to_jsonl_record(ex) + "\n";
  return out;
}

}  // namespace demote
