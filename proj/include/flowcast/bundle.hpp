#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "json.hpp"

#include "flowcast/clustering.hpp"
#include "flowcast/encoding.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/gru.hpp"

namespace flowcast {

// Model file layout (all integers little-endian):
//   magic "FLOWCAST" | u32 version | u64 header length | JSON header
//   | u32 tensor count | tensors | u32 CRC-32 of every preceding byte
// Each tensor is: u32 name length | name | u32 rows | u32 cols | rows*cols
// IEEE-754 doubles, row-major.
inline constexpr std::array<char, 8> kBundleMagic{'F', 'L', 'O', 'W', 'C', 'A', 'S', 'T'};
inline constexpr std::uint32_t kBundleVersion = 1;

struct BundleMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string created;  // ISO-8601 UTC
  std::string dataset;

  bool operator==(const BundleMetadata&) const = default;
};

struct ModelBundle {
  std::uint32_t version = kBundleVersion;
  AttributeSchema schema;
  FeatureMode mode;
  std::optional<ClusterModel> clusters;
  GruNetwork network;
  BundleMetadata metadata;

  Encoder encoder() const { return Encoder(schema, mode, clusters); }

  // The encoder rebuilt from schema + clusters must feed the network exactly.
  void check_consistency() const {
    Encoder enc = encoder();
    if (enc.width() != network.input_dim())
      throw BundleError("model: encoder width " + std::to_string(enc.width()) + " does not match network input " +
                        std::to_string(network.input_dim()));
    if (enc.class_count() != network.output_dim())
      throw BundleError("model: " + std::to_string(enc.class_count()) + " classes but network has " +
                        std::to_string(network.output_dim()) + " outputs");
  }

  bool operator==(const ModelBundle&) const = default;
};

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void little_endian(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u32(std::uint32_t v) { little_endian(v); }
  void u64(std::uint64_t v) { little_endian(v); }
  void f64(double v) { little_endian(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}

  const char* take(std::size_t n) {
    if (n > size_ - pos_) throw BundleError("model: truncated file");
    const char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T little_endian() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(T)));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
  }
  std::uint32_t u32() { return little_endian<std::uint32_t>(); }
  std::uint64_t u64() { return little_endian<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    auto n = u32();
    const char* p = take(n);
    return std::string(p, n);
  }
  bool done() const { return pos_ == size_; }

 private:
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32(const char* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

inline void write_tensor(ByteWriter& w, const std::string& name, const Eigen::MatrixXd& m) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

inline std::pair<std::string, Eigen::MatrixXd> read_tensor(ByteReader& r) {
  std::string name = r.str();
  auto rows = r.u32(), cols = r.u32();
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  return {std::move(name), std::move(m)};
}

inline nlohmann::json vocab_to_json(const AttributeVocab& v) {
  auto out = nlohmann::json::array();
  for (std::size_t a = 0; a < v.names.size(); ++a)
    out.push_back({{"name", v.names[a]}, {"values", v.universes[a].values()}});
  return out;
}

inline AttributeVocab vocab_from_json(const nlohmann::json& j) {
  AttributeVocab v;
  for (const auto& a : j) {
    v.names.push_back(a.at("name").get<std::string>());
    v.universes.emplace_back(a.at("values").get<std::vector<std::string>>());
  }
  return v;
}

}  // namespace detail

inline std::vector<char> serialize_bundle(const ModelBundle& b) {
  b.check_consistency();
  nlohmann::json header;
  header["schema"] = {{"activities", b.schema.activities},
                      {"attributes", b.schema.attributes},
                      {"vocab", b.schema.vocab}};
  header["mode"] = b.mode.label();
  header["network"] = {{"input_dim", b.network.input_dim()},
                       {"hidden_dim", b.network.hidden_dim()},
                       {"output_dim", b.network.output_dim()}};
  header["metadata"] = {{"seed", b.metadata.seed},
                        {"config_hash", b.metadata.config_hash},
                        {"created", b.metadata.created},
                        {"dataset", b.metadata.dataset}};
  if (b.clusters) {
    auto buckets = nlohmann::json::array();
    for (const auto& [activity, bc] : b.clusters->per_activity)
      buckets.push_back({{"activity", activity}, {"k", bc.k()}, {"vocab", detail::vocab_to_json(bc.vocab())}});
    header["clusters"] = {{"max_cc", b.clusters->max_cc}, {"label_count", b.clusters->label_count}, {"buckets", buckets}};
  }
  const std::string header_text = header.dump();

  detail::ByteWriter w;
  w.bytes(kBundleMagic.data(), kBundleMagic.size());
  w.u32(b.version);
  w.u64(header_text.size());
  w.bytes(header_text.data(), header_text.size());

  std::uint32_t tensors = GruParameters::size() + (b.clusters ? static_cast<std::uint32_t>(b.clusters->per_activity.size()) : 0);
  w.u32(tensors);
  for (std::size_t i = 0; i < GruParameters::size(); ++i)
    detail::write_tensor(w, std::string("gru/") + GruParameters::kNames[i], b.network.params()[i]);
  if (b.clusters) {
    std::size_t index = 0;
    for (const auto& [_, bc] : b.clusters->per_activity)
      detail::write_tensor(w, "clusters/" + std::to_string(index++) + "/centroids", bc.centroids());
  }
  const auto crc = detail::crc32(w.data().data(), w.data().size());
  w.u32(crc);
  return w.data();
}

inline ModelBundle deserialize_bundle(const std::vector<char>& bytes) {
  if (bytes.size() < kBundleMagic.size() + 4 + 8 + 4 + 4) throw BundleError("model: file too short");
  {
    detail::ByteReader tail(bytes.data() + bytes.size() - 4, 4);
    if (tail.u32() != detail::crc32(bytes.data(), bytes.size() - 4))
      throw BundleError("model: checksum mismatch (file is corrupted)");
  }
  detail::ByteReader r(bytes.data(), bytes.size() - 4);
  if (!std::equal(kBundleMagic.begin(), kBundleMagic.end(), r.take(kBundleMagic.size())))
    throw BundleError("model: not a flowcast model file");
  ModelBundle b;
  b.version = r.u32();
  if (b.version != kBundleVersion) throw BundleError("model: unsupported format version " + std::to_string(b.version));
  auto header_len = r.u64();
  if (header_len > bytes.size()) throw BundleError("model: truncated header");
  const char* header_text = r.take(static_cast<std::size_t>(header_len));
  try {
    auto header = nlohmann::json::parse(header_text, header_text + header_len);
    const auto& s = header.at("schema");
    b.schema.activities = s.at("activities").get<std::vector<std::string>>();
    b.schema.attributes = s.at("attributes").get<std::vector<std::string>>();
    b.schema.vocab = s.at("vocab").get<std::map<std::string, std::vector<std::string>>>();
    b.mode = FeatureMode::parse(header.at("mode").get<std::string>());
    const auto& n = header.at("network");
    b.network = GruNetwork(n.at("input_dim").get<std::size_t>(), n.at("hidden_dim").get<std::size_t>(),
                           n.at("output_dim").get<std::size_t>());
    const auto& m = header.at("metadata");
    b.metadata = {m.at("seed").get<std::uint64_t>(), m.at("config_hash").get<std::string>(),
                  m.at("created").get<std::string>(), m.at("dataset").get<std::string>()};

    std::vector<std::pair<std::string, AttributeVocab>> buckets;
    if (header.contains("clusters")) {
      ClusterModel cm;
      cm.max_cc = header["clusters"].at("max_cc").get<std::size_t>();
      cm.label_count = header["clusters"].at("label_count").get<std::size_t>();
      for (const auto& bj : header["clusters"].at("buckets"))
        buckets.emplace_back(bj.at("activity").get<std::string>(), detail::vocab_from_json(bj.at("vocab")));
      b.clusters = std::move(cm);
    }

    auto count = r.u32();
    if (count != GruParameters::size() + buckets.size()) throw BundleError("model: unexpected tensor count");
    for (std::size_t i = 0; i < GruParameters::size(); ++i) {
      auto [name, tensor] = detail::read_tensor(r);
      auto& target = b.network.params()[i];
      if (name != std::string("gru/") + GruParameters::kNames[i] || tensor.rows() != target.rows() ||
          tensor.cols() != target.cols())
        throw BundleError("model: tensor '" + name + "' does not match the network shape");
      target = std::move(tensor);
    }
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      auto [name, tensor] = detail::read_tensor(r);
      if (name != "clusters/" + std::to_string(i) + "/centroids" ||
          tensor.cols() != static_cast<Eigen::Index>(buckets[i].second.width()))
        throw BundleError("model: tensor '" + name + "' does not match its bucket vocabulary");
      auto activity = buckets[i].first;
      b.clusters->per_activity.emplace(activity,
                                       BucketClustering(activity, std::move(buckets[i].second), std::move(tensor)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw BundleError(std::string("model: malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw BundleError(std::string("model: ") + e.what());
  }
  if (!r.done()) throw BundleError("model: trailing bytes after tensors");
  b.check_consistency();
  return b;
}

inline void save_bundle(const ModelBundle& b, const std::string& path) {
  auto bytes = serialize_bundle(b);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing model file '" + path + "'");
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("cannot open model file '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

}  // namespace flowcast
