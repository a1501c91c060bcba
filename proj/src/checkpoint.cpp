#include "tdaug/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

namespace tdaug::nn {

namespace {
using json = nlohmann::json;

constexpr char kMagic[8] = {'T', 'D', 'C', 'K', 'P', 'T', '1', '\0'};
}  // namespace

std::uint64_t Checkpoint::content_hash() const {
  // FNV-1a over all tensor bytes; used by tests to compare states cheaply.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& t : tensors) {
    mix(reinterpret_cast<const unsigned char*>(t.name.data()), t.name.size());
    mix(reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  return h;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["model_kind"] = ckpt.model_kind;
  header["spec"] = json::parse(ckpt.spec_json.empty() ? "{}" : ckpt.spec_json);
  header["dtype"] = "float32";
  json tensors = json::array();
  for (const auto& t : ckpt.tensors)
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  header["tensors"] = tensors;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& t : ckpt.tensors)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  const json header = json::parse(hs);

  Checkpoint ckpt;
  ckpt.model_kind = header.at("model_kind").get<std::string>();
  ckpt.spec_json = header.at("spec").dump();
  for (const auto& tj : header.at("tensors")) {
    CheckpointTensor t;
    t.name = tj.at("name").get<std::string>();
    t.rows = tj.at("rows").get<Eigen::Index>();
    t.cols = tj.at("cols").get<Eigen::Index>();
    t.data.resize(static_cast<std::size_t>(t.rows * t.cols));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    ckpt.tensors.push_back(std::move(t));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return ckpt;
}

}  // namespace tdaug::nn
