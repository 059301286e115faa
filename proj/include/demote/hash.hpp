#pragma once

#include <span>
#include <string>
#include <string_view>

namespace demote {

// Incremental SHA-256; digests are reported as lowercase hex.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const unsigned char> bytes);
  Sha256& update(std::string_view text);
  Sha256& update(std::span<const double> values);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::string& path);

}  // namespace demote
