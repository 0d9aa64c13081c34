#include "d3as/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace d3as::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blob layout assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', '3', 'A', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

struct Header {
  char magic[8];
  std::uint32_t version;
  std::uint32_t reserved;
  std::uint64_t manifest_bytes;
};

nlohmann::json parse_manifest(std::ifstream& in, const std::string& path) {
  Header header{};
  in.read(reinterpret_cast<char*>(&header), sizeof(header));
  if (!in || std::memcmp(header.magic, kMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  if (header.version != kVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version");
  }
  std::string text(header.manifest_bytes, '\0');
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  if (!in) throw std::runtime_error(path + ": truncated manifest");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad manifest: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::map<std::string, std::string>& meta) {
  nlohmann::json manifest;
  manifest["meta"] = meta;
  auto& tensors = manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < store.count(); ++i) {
    const Tensor& t = store.at(i);
    tensors.push_back({{"name", t.name},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"offset", offset}});
    offset += t.size() * sizeof(double);
  }
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  Header header{};
  std::memcpy(header.magic, kMagic, 8);
  header.version = kVersion;
  header.manifest_bytes = text.size();
  out.write(reinterpret_cast<const char*>(&header), sizeof(header));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::vector<double> row_major;
  for (std::size_t i = 0; i < store.count(); ++i) {
    const Tensor& t = store.at(i);
    row_major.resize(t.size());
    for (int r = 0; r < t.rows(); ++r) {
      for (int c = 0; c < t.cols(); ++c) {
        row_major[static_cast<std::size_t>(r) * t.cols() + c] = t.value(r, c);
      }
    }
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(row_major.size() * sizeof(double)));
  }
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  const nlohmann::json manifest = parse_manifest(in, path);

  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != store.count()) {
    throw std::runtime_error(path + ": checkpoint tensor count mismatch");
  }
  const std::streampos blob_start = in.tellg();
  for (const auto& jt : tensors) {
    const std::string name = jt.at("name").get<std::string>();
    Tensor* t = store.find(name);
    if (t == nullptr) {
      throw std::runtime_error(path + ": unknown tensor " + name);
    }
    if (jt.at("rows").get<int>() != t->rows() ||
        jt.at("cols").get<int>() != t->cols()) {
      throw std::runtime_error(path + ": shape mismatch for " + name);
    }
    in.seekg(blob_start +
             static_cast<std::streamoff>(jt.at("offset").get<std::uint64_t>()));
    std::vector<double> row_major(t->size());
    in.read(reinterpret_cast<char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated blob at " + name);
    for (int r = 0; r < t->rows(); ++r) {
      for (int c = 0; c < t->cols(); ++c) {
        t->value(r, c) = row_major[static_cast<std::size_t>(r) * t->cols() + c];
      }
    }
  }

  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : manifest.at("meta").items()) {
    meta[k] = v.get<std::string>();
  }
  return meta;
}

std::map<std::string, std::string> read_checkpoint_meta(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  const nlohmann::json manifest = parse_manifest(in, path);
  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : manifest.at("meta").items()) {
    meta[k] = v.get<std::string>();
  }
  return meta;
}

}  // namespace d3as::nn
