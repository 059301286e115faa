#include "demote/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "demote/errors.hpp"

namespace demote {
namespace {

constexpr char kMagic[8] = {'D', 'E', 'M', 'O', 'T', 'E', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ValidationError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  const ModelDims& d = ckpt.params.dims;
  header["dims"] = {{"vocab_size", d.vocab_size},
                    {"d_emb", d.d_emb},
                    {"d_h", d.d_h},
                    {"d_mlp", d.d_mlp},
                    {"num_target_classes", d.num_target_classes},
                    {"num_protected_classes", d.num_protected_classes},
                    {"n_adversaries", d.n_adversaries}};
  header["max_len"] = ckpt.max_len;
  header["vocab"] = ckpt.vocab.tokens();
  header["vocab_hash"] = ckpt.vocab_hash;
  header["config"] = ckpt.config;
  header["info"] = ckpt.info;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  ckpt.params.for_each_tensor([&](const std::string& name, const auto& t) {
    tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  header["tensors"] = tensors;

  const std::string head = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, head.size());
  out += head;
  ckpt.params.for_each_tensor([&](const std::string&, const auto& t) {
    out.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(double));
  });
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("not a checkpoint file");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  const auto head_len = take<std::uint64_t>(bytes, pos);
  if (pos + head_len > bytes.size()) throw ValidationError("checkpoint truncated");

  Checkpoint ckpt;
  try {
    const nlohmann::json header = nlohmann::json::parse(bytes.substr(pos, head_len));
    pos += head_len;
    const auto& d = header.at("dims");
    ModelDims dims;
    dims.vocab_size = d.at("vocab_size").get<int>();
    dims.d_emb = d.at("d_emb").get<int>();
    dims.d_h = d.at("d_h").get<int>();
    dims.d_mlp = d.at("d_mlp").get<int>();
    dims.num_target_classes = d.at("num_target_classes").get<int>();
    dims.num_protected_classes = d.at("num_protected_classes").get<int>();
    dims.n_adversaries = d.at("n_adversaries").get<int>();
    dims.validate();
    ckpt.max_len = header.at("max_len").get<int>();
    ckpt.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    ckpt.vocab_hash = header.at("vocab_hash").get<std::string>();
    ckpt.config = header.at("config").get<std::map<std::string, std::string>>();
    ckpt.info = header.at("info").get<std::map<std::string, std::string>>();

    // Shape the parameter structure, then fill it from the tensor table.
    ckpt.params = init_params(dims, 0);
    const auto& table = header.at("tensors");
    std::size_t index = 0;
    ckpt.params.for_each_tensor([&](const std::string& name, auto& t) {
      if (index >= table.size()) throw ValidationError("checkpoint tensor table too short");
      const auto& entry = table[index++];
      if (entry.at("name").get<std::string>() != name || entry.at("rows").get<long>() != t.rows() ||
          entry.at("cols").get<long>() != t.cols()) {
        throw ValidationError("checkpoint tensor '" + name + "' does not match its dims");
      }
      const std::size_t n = static_cast<std::size_t>(t.size()) * sizeof(double);
      if (pos + n > bytes.size()) throw ValidationError("checkpoint truncated");
      std::memcpy(t.data(), bytes.data() + pos, n);
      pos += n;
    });
    if (index != table.size()) throw ValidationError("checkpoint tensor table too long");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (pos != bytes.size()) throw ValidationError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace demote
