#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "icc/data/types.hpp"

// File formats:
//   features  : 8-byte magic "ICCFEAT1", uint64 T, uint64 F (little endian),
//               then T*F float32 little endian, row-major.
//   labels    : UTF-8 text, one action name per line.
//   mapping   : lines "<index> <name>".
//   split     : one video id per line.

namespace icc::data {

inline constexpr char kFeatureMagic[8] = {'I', 'C', 'C', 'F', 'E', 'A', 'T', '1'};

namespace detail {

template <typename T>
T from_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
T to_little_endian(T v) {
  return from_little_endian(v);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::vector<char> encode_feature_file(const Matrix& data) {
  const std::uint64_t rows = static_cast<std::uint64_t>(data.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(data.cols());
  std::vector<char> bytes(8 + 16 + rows * cols * 4);
  std::memcpy(bytes.data(), kFeatureMagic, 8);
  const std::uint64_t hdr[2] = {detail::to_little_endian(rows), detail::to_little_endian(cols)};
  std::memcpy(bytes.data() + 8, hdr, 16);
  char* out = bytes.data() + 24;
  for (Index t = 0; t < data.rows(); ++t) {
    for (Index c = 0; c < data.cols(); ++c) {
      const float v = detail::to_little_endian(static_cast<float>(data(t, c)));
      std::memcpy(out, &v, 4);
      out += 4;
    }
  }
  return bytes;
}

inline void save_feature_file(const std::filesystem::path& path, const Matrix& data) {
  const auto bytes = encode_feature_file(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

inline Matrix decode_feature_file(const std::string& bytes, const std::string& what) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kFeatureMagic, 8) != 0)
    throw MalformedFile(what + ": missing feature-file header");
  std::uint64_t hdr[2];
  std::memcpy(hdr, bytes.data() + 8, 16);
  const std::uint64_t rows = detail::from_little_endian(hdr[0]);
  const std::uint64_t cols = detail::from_little_endian(hdr[1]);
  if (rows == 0 || cols == 0) throw MalformedFile(what + ": empty shape in header");
  if (rows > (1ULL << 32) || cols > (1ULL << 32) || bytes.size() - 24 != rows * cols * 4)
    throw MalformedFile(what + ": payload is " + std::to_string(bytes.size() - 24) + " bytes, header implies " +
                        std::to_string(rows * cols * 4));
  Matrix data(static_cast<Index>(rows), static_cast<Index>(cols));
  const char* in = bytes.data() + 24;
  for (Index t = 0; t < data.rows(); ++t) {
    for (Index c = 0; c < data.cols(); ++c) {
      float v;
      std::memcpy(&v, in, 4);
      in += 4;
      v = detail::from_little_endian(v);
      if (!std::isfinite(v))
        throw NonFiniteData(what + ": non-finite value at frame " + std::to_string(t) + ", dim " + std::to_string(c));
      data(t, c) = v;
    }
  }
  return data;
}

inline FeatureSequence load_feature_sequence(const std::filesystem::path& path, const std::string& video_id,
                                             std::optional<int> activity = std::nullopt) {
  return {video_id, decode_feature_file(detail::read_text(path), path.string()), activity};
}

inline LabelSequence load_labels(const std::filesystem::path& path, const ActionVocabulary& vocab,
                                 const std::string& video_id = "") {
  LabelSequence seq{video_id, {}, LabelSource::kGroundTruth};
  for (const auto& raw : detail::read_lines(path)) {
    const auto name = detail::trim(raw);
    if (name.empty()) continue;
    auto idx = vocab.action(name);
    if (!idx) throw UnknownAction("'" + name + "' in " + path.string());
    seq.labels.push_back(*idx);
  }
  return seq;
}

inline void save_labels(const std::filesystem::path& path, const LabelSequence& labels, const ActionVocabulary& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (int l : labels.labels) out << vocab.action_name(l) << '\n';
}

/// Parses "<index> <name>" lines into names ordered by index.
inline std::vector<std::string> load_mapping(const std::filesystem::path& path) {
  std::map<int, std::string> by_index;
  for (const auto& raw : detail::read_lines(path)) {
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    std::istringstream ls(line);
    int idx;
    std::string name;
    if (!(ls >> idx >> name)) throw MalformedFile(path.string() + ": bad mapping line '" + line + "'");
    if (!by_index.emplace(idx, name).second) throw MalformedFile(path.string() + ": duplicate index " + std::to_string(idx));
  }
  std::vector<std::string> names;
  int expect = 0;
  for (auto& [idx, name] : by_index) {
    if (idx != expect++) throw MalformedFile(path.string() + ": indices must be contiguous from 0");
    names.push_back(name);
  }
  return names;
}

inline void save_mapping(const std::filesystem::path& path, const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < names.size(); ++i) out << i << ' ' << names[i] << '\n';
}

inline std::vector<std::string> load_id_list(const std::filesystem::path& path) {
  std::vector<std::string> ids;
  for (const auto& raw : detail::read_lines(path)) {
    auto id = detail::trim(raw);
    if (!id.empty()) ids.push_back(id);
  }
  return ids;
}

template <typename Range>
void save_id_list(const std::filesystem::path& path, const Range& ids) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& id : ids) out << id << '\n';
}

/// Dataset directory layout written by `synth-gen` and read by every command:
///   mapping.txt, activities.txt (optional), video_activity.txt (optional),
///   features/<id>.bin, groundTruth/<id>.txt,
///   splits/labeled.txt, splits/unlabeled.txt, splits/test.txt
struct DatasetLayout {
  std::filesystem::path root;

  std::filesystem::path mapping() const { return root / "mapping.txt"; }
  std::filesystem::path activities() const { return root / "activities.txt"; }
  std::filesystem::path video_activity() const { return root / "video_activity.txt"; }
  std::filesystem::path features(const std::string& id) const { return root / "features" / (id + ".bin"); }
  std::filesystem::path labels(const std::string& id) const { return root / "groundTruth" / (id + ".txt"); }
  std::filesystem::path split(const std::string& role) const { return root / "splits" / (role + ".txt"); }
};

inline Dataset load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  DatasetLayout layout{root};
  if (!fs::is_directory(root)) throw IoError("dataset directory '" + root.string() + "' does not exist");
  std::vector<std::string> activities;
  if (fs::exists(layout.activities())) activities = load_mapping(layout.activities());
  Dataset ds;
  ds.vocab = ActionVocabulary(load_mapping(layout.mapping()), activities);

  std::map<std::string, int> activity_of;
  if (fs::exists(layout.video_activity())) {
    for (const auto& raw : detail::read_lines(layout.video_activity())) {
      const auto line = detail::trim(raw);
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string id, name;
      if (!(ls >> id >> name)) throw MalformedFile(layout.video_activity().string() + ": bad line '" + line + "'");
      auto c = ds.vocab.activity(name);
      if (!c) throw MalformedFile(layout.video_activity().string() + ": unknown activity '" + name + "'");
      activity_of[id] = *c;
    }
  }

  auto labeled = load_id_list(layout.split("labeled"));
  auto unlabeled = fs::exists(layout.split("unlabeled")) ? load_id_list(layout.split("unlabeled")) : std::vector<std::string>{};
  ds.test_ids = load_id_list(layout.split("test"));
  ds.split.labeled_ids = {labeled.begin(), labeled.end()};
  ds.split.unlabeled_ids = {unlabeled.begin(), unlabeled.end()};
  ds.train_ids = labeled;
  ds.train_ids.insert(ds.train_ids.end(), unlabeled.begin(), unlabeled.end());

  std::vector<std::string> all = ds.train_ids;
  all.insert(all.end(), ds.test_ids.begin(), ds.test_ids.end());
  for (const auto& id : all) {
    if (ds.find(id)) throw MalformedFile("video '" + id + "' listed in more than one split");
    std::optional<int> act;
    if (auto it = activity_of.find(id); it != activity_of.end()) act = it->second;
    auto feats = load_feature_sequence(layout.features(id), id, act);
    std::optional<LabelSequence> gt;
    if (fs::exists(layout.labels(id))) {
      gt = load_labels(layout.labels(id), ds.vocab, id);
      check_pair(feats, *gt, ds.vocab.num_actions());
    }
    ds.videos.push_back(std::move(feats));
    ds.ground_truth.push_back(std::move(gt));
  }
  return ds;
}

inline void save_dataset(const std::filesystem::path& root, const Dataset& ds) {
  namespace fs = std::filesystem;
  DatasetLayout layout{root};
  std::error_code ec;
  fs::create_directories(root / "features", ec);
  fs::create_directories(root / "groundTruth", ec);
  fs::create_directories(root / "splits", ec);
  if (ec) throw IoError("cannot create '" + root.string() + "': " + ec.message());
  save_mapping(layout.mapping(), ds.vocab.actions());
  if (ds.vocab.num_activities() > 0) {
    save_mapping(layout.activities(), ds.vocab.activities());
    std::ofstream out(layout.video_activity(), std::ios::trunc);
    for (const auto& v : ds.videos)
      if (v.activity) out << v.video_id << ' ' << ds.vocab.activities()[static_cast<std::size_t>(*v.activity)] << '\n';
  }
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    save_feature_file(layout.features(ds.videos[i].video_id), ds.videos[i].data);
    if (ds.ground_truth[i]) save_labels(layout.labels(ds.videos[i].video_id), *ds.ground_truth[i], ds.vocab);
  }
  save_id_list(layout.split("labeled"), ds.split.labeled_ids);
  save_id_list(layout.split("unlabeled"), ds.split.unlabeled_ids);
  save_id_list(layout.split("test"), ds.test_ids);
}

}  // namespace icc::data
