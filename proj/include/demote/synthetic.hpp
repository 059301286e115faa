#pragma once

#include <cstdint>
#include <string>

#include "demote/data.hpp"
#include "demote/kv_config.hpp"

namespace demote {

// Parameters of the confounded-corpus generator. The protected attribute z is
// drawn first, then the target y with P(y=1 | z) = q1 or q0, so q1 - q0 is the
// confound strength. Toxicity markers are planted for y=1, dialect markers
// for z=1, and neutral filler completes each document.
struct SyntheticSpec {
  int n_examples = 1000;
  int length = 16;
  int n_neutral = 200;
  int n_toxmark = 10;
  int n_dialmark = 10;
  int k_tox = 1;
  int k_dial = 2;
  double p_z = 0.5;
  double q1 = 0.9;
  double q0 = 0.1;
  double marker_noise = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
  // Reads known keys; missing keys keep their defaults.
  static SyntheticSpec from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

// Marker token spellings; the three families are disjoint.
std::string neutral_token(int i);
std::string toxicity_marker(int i);
std::string dialect_marker(int i);
bool is_toxicity_marker(const std::string& token);
bool is_dialect_marker(const std::string& token);

Dataset generate_synthetic(const SyntheticSpec& spec, const std::string& name = "synthetic");

// JSONL text: a {"_meta": {...}} record echoing the spec, then one record per
// example.
std::string synthetic_to_jsonl(const SyntheticSpec& spec, const Dataset& dataset);

}  // namespace demote
