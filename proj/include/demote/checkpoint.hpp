#pragma once

#include <map>
#include <string>

#include "demote/data.hpp"
#include "demote/model.hpp"

namespace demote {

// Binary container: 8-byte magic, u32 version, u64 header length, a JSON
// header (dims, vocabulary, vocabulary hash, config echo, tensor table),
// then every tensor as little-endian float64 in visit order.
struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
  std::string vocab_hash;
  int max_len = 64;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> info;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace demote
