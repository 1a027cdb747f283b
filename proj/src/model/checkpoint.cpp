#include "samlab/model/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "samlab/common.hpp"

namespace samlab {

namespace {
constexpr char kMagic[8] = {'S', 'L', 'C', 'K', 'P', 'T', '0', '1'};
}

void save_checkpoint(const std::string& path, const ParamRegistry& params, const nlohmann::json& metadata) {
  nlohmann::json meta = metadata;
  nlohmann::json manifest = nlohmann::json::array();
  uint64_t offset = 0;
  for (const Param* p : params.all()) {
    manifest.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"offset", offset}});
    offset += static_cast<uint64_t>(p->value.size()) * sizeof(double);
  }
  meta["tensors"] = manifest;
  const std::string meta_str = meta.dump();

  std::ofstream out(path, std::ios::binary);
  check(out.good(), "save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint64_t meta_len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const Param* p : params.all())
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  check(out.good(), "save_checkpoint: write failed for " + path);
}

namespace {

nlohmann::json read_meta(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  check(in.good() && std::memcmp(magic, kMagic, sizeof(magic)) == 0, "checkpoint: bad magic in " + path);
  uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  check(in.good(), "checkpoint: truncated metadata in " + path);
  return nlohmann::json::parse(meta_str);
}

}  // namespace

nlohmann::json load_checkpoint(const std::string& path, ParamRegistry& params) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "load_checkpoint: cannot open " + path);
  nlohmann::json meta = read_meta(in, path);
  const std::streampos data_start = in.tellg();

  for (Param* p : params.all()) {
    bool found = false;
    for (const auto& entry : meta.at("tensors")) {
      if (entry.at("name") != p->name) continue;
      found = true;
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      check(rows == p->value.rows() && cols == p->value.cols(),
            "load_checkpoint: shape mismatch for " + p->name + " (checkpoint " + std::to_string(rows) + "x" +
                std::to_string(cols) + ", model " + std::to_string(p->value.rows()) + "x" +
                std::to_string(p->value.cols()) + ")");
      in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<uint64_t>()));
      in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
      check(in.good(), "load_checkpoint: truncated tensor data for " + p->name);
      break;
    }
    check(found, "load_checkpoint: tensor missing from checkpoint: " + p->name);
  }
  meta.erase("tensors");
  return meta;
}

nlohmann::json peek_checkpoint_metadata(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "peek_checkpoint_metadata: cannot open " + path);
  nlohmann::json meta = read_meta(in, path);
  meta.erase("tensors");
  return meta;
}

}  // namespace samlab
