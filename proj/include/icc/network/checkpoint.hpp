#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "icc/data/io.hpp"
#include "icc/network/probe.hpp"
#include "json.hpp"

// Checkpoint container:
//   8 bytes  magic "ICCCKPT\0"
//   uint32   format version
//   uint64   header length H
//   H bytes  JSON header: configs, seed lineage, tensor directory
//   payload  float64 little endian, tensors in directory order, row-major

namespace icc::net {

inline constexpr char kCheckpointMagic[8] = {'I', 'C', 'C', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"input_dim", c.input_dim},
       {"num_decoder_layers", c.num_decoder_layers},
       {"base_channels", c.base_channels},
       {"latent_dim_per_layer", c.latent_dim_per_layer},
       {"conv_kernel", c.conv_kernel}};
}

inline void from_json(const nlohmann::json& j, BackboneConfig& c) {
  c.input_dim = j.at("input_dim").get<int>();
  c.num_decoder_layers = j.value("num_decoder_layers", kDecoderLayers);
  c.base_channels = j.at("base_channels").get<int>();
  c.latent_dim_per_layer = j.at("latent_dim_per_layer").get<std::array<int, kDecoderLayers>>();
  c.conv_kernel = j.value("conv_kernel", 3);
}

struct Checkpoint {
  Backbone backbone;
  std::optional<ClassifierHeads> heads;
  std::optional<LinearProbe> probe;
  /// Free-form metadata: seed lineage, training ids, iteration, ...
  nlohmann::json meta = nlohmann::json::object();
};

namespace detail {

inline void append_matrix(std::string& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = data::detail::to_little_endian(m(i, j));
      out.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

}  // namespace detail

/// Writes to a sibling temp file and renames it into place, so readers see
/// either the old or the new checkpoint, never a torn one.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

inline std::string encode_checkpoint(const Backbone& backbone, const ClassifierHeads* heads, const LinearProbe* probe,
                                     const nlohmann::json& meta) {
  nlohmann::json header;
  header["format"] = "icc-checkpoint";
  header["version"] = kCheckpointVersion;
  header["backbone"] = backbone.config();
  header["meta"] = meta;
  std::string payload;
  nlohmann::json dir = nlohmann::json::array();
  auto add = [&](const std::string& name, const Matrix& m) {
    dir.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    detail::append_matrix(payload, m);
  };
  for (const auto& [name, v] : backbone.named_parameters()) add(name, v.value());
  if (heads) {
    header["heads"] = {{"num_actions", heads->num_actions}, {"alpha", heads->alpha}};
    for (const auto& [name, v] : heads->named_parameters()) add(name, v.value());
  }
  if (probe && !probe->empty()) {
    header["probe"] = true;
    add("probe.weight", probe->weight);
    add("probe.bias", Matrix(probe->bias));
  }
  header["tensors"] = dir;
  const std::string text = header.dump();

  std::string bytes(kCheckpointMagic, 8);
  const std::uint32_t version = data::detail::to_little_endian(kCheckpointVersion);
  bytes.append(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t hlen = data::detail::to_little_endian(static_cast<std::uint64_t>(text.size()));
  bytes.append(reinterpret_cast<const char*>(&hlen), 8);
  bytes += text;
  bytes += payload;
  return bytes;
}

inline void save_checkpoint(const std::filesystem::path& path, const Backbone& backbone, const ClassifierHeads* heads,
                            const LinearProbe* probe, const nlohmann::json& meta = nlohmann::json::object()) {
  write_file_atomic(path, encode_checkpoint(backbone, heads, probe, meta));
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw MalformedFile(what + ": not a checkpoint file");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 8, 4);
  version = data::detail::from_little_endian(version);
  if (version != kCheckpointVersion)
    throw CheckpointVersionMismatch(what + ": format version " + std::to_string(version) + ", expected " +
                                    std::to_string(kCheckpointVersion));
  std::uint64_t hlen;
  std::memcpy(&hlen, bytes.data() + 12, 8);
  hlen = data::detail::from_little_endian(hlen);
  if (20 + hlen > bytes.size()) throw MalformedFile(what + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(20, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(what + ": bad header: " + e.what());
  }
  if (header.value("format", "") != "icc-checkpoint") throw MalformedFile(what + ": unexpected format tag");

  Checkpoint ck;
  Rng dummy(0);
  ck.backbone = Backbone(header.at("backbone").get<BackboneConfig>(), dummy);
  ck.meta = header.value("meta", nlohmann::json::object());
  if (header.contains("heads")) {
    ck.heads = ClassifierHeads(ck.backbone.config(), header["heads"].at("num_actions").get<int>(), dummy);
    ck.heads->alpha = header["heads"].at("alpha").get<std::array<double, kDecoderLayers>>();
  }
  std::map<std::string, nn::Var> by_name;
  for (auto& [n, v] : ck.backbone.named_parameters()) by_name.emplace(n, v);
  if (ck.heads)
    for (auto& [n, v] : ck.heads->named_parameters()) by_name.emplace(n, v);
  Matrix probe_w, probe_b;

  std::size_t offset = 20 + hlen;
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const Index rows = t.at("rows").get<Index>(), cols = t.at("cols").get<Index>();
    const std::size_t n = static_cast<std::size_t>(rows * cols);
    if (offset + n * 8 > bytes.size()) throw MalformedFile(what + ": truncated payload at '" + name + "'");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) {
        double v;
        std::memcpy(&v, bytes.data() + offset, 8);
        offset += 8;
        m(i, j) = data::detail::from_little_endian(v);
      }
    if (name == "probe.weight") {
      probe_w = std::move(m);
    } else if (name == "probe.bias") {
      probe_b = std::move(m);
    } else {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw MalformedFile(what + ": unknown tensor '" + name + "'");
      if (it->second.rows() != rows || it->second.cols() != cols)
        throw MalformedFile(what + ": shape mismatch for '" + name + "'");
      it->second.mutable_value() = std::move(m);
    }
  }
  if (offset != bytes.size()) throw MalformedFile(what + ": trailing bytes after payload");
  if (probe_w.size() != 0) ck.probe = LinearProbe{probe_w, RowVector(probe_b.row(0))};
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(data::detail::read_text(path), path.string());
}

}  // namespace icc::net
