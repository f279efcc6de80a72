#pragma once

// Binary carrier for embedding vectors.
//
// Layout (all integers little-endian):
//   char[4]  magic "IDFV"
//   u32      version (1)
//   u32      dim
//   u64      count
//   count x { u32 byte_length, UTF-8 bytes }   vector ids
//   count x dim x f32                          payload, row-major

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "insdet/error.hpp"

namespace insdet {

inline constexpr char kFeatureMagic[4] = {'I', 'D', 'F', 'V'};
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureFile {
  std::uint32_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> values;  // ids.size() * dim entries

  std::size_t count() const { return ids.size(); }

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }

  void append(std::string id, std::span<const float> vec) {
    if (dim == 0 && ids.empty()) dim = static_cast<std::uint32_t>(vec.size());
    if (vec.size() != dim) {
      fail(ErrorCode::kDimMismatch, "vector '" + id + "' has dim " +
                                        std::to_string(vec.size()) +
                                        ", expected " + std::to_string(dim));
    }
    ids.push_back(std::move(id));
    values.insert(values.end(), vec.begin(), vec.end());
  }

  friend bool operator==(const FeatureFile& a, const FeatureFile& b) {
    // Bitwise payload comparison, so -0.0 and 0.0 differ.
    return a.dim == b.dim && a.ids == b.ids &&
           a.values.size() == b.values.size() &&
           std::memcmp(a.values.data(), b.values.data(),
                       a.values.size() * sizeof(float)) == 0;
  }
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  bool read_u32(std::uint32_t& v) {
    if (remaining() < 4) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return true;
  }

  bool read_u64(std::uint64_t& v) {
    if (remaining() < 8) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return true;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_feature_file(const FeatureFile& file) {
  if (file.ids.empty()) fail(ErrorCode::kEmptyInput, "feature file has no vectors");
  if (file.dim == 0) fail(ErrorCode::kDimMismatch, "feature dim must be > 0");
  if (file.values.size() != file.ids.size() * file.dim) {
    fail(ErrorCode::kDimMismatch, "feature payload size != count * dim");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : file.ids) {
    if (!seen.insert(id).second) fail(ErrorCode::kDuplicateId, "duplicate vector id '" + id + "'");
  }
  for (float v : file.values) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValue, "non-finite feature value");
  }

  std::vector<std::uint8_t> out(kFeatureMagic, kFeatureMagic + 4);
  detail::put_u32(out, kFeatureVersion);
  detail::put_u32(out, file.dim);
  detail::put_u64(out, file.ids.size());
  for (const auto& id : file.ids) {
    detail::put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
  }
  for (float v : file.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    detail::put_u32(out, bits);
  }
  return out;
}

inline FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  if (in.remaining() < 4) fail(ErrorCode::kTruncatedHeader, "truncated header");
  const auto magic = in.take(4);
  if (std::memcmp(magic.data(), kFeatureMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "bad magic: not a feature file");
  }
  std::uint32_t version = 0, dim = 0;
  std::uint64_t count = 0;
  if (!in.read_u32(version)) fail(ErrorCode::kTruncatedHeader, "truncated header");
  if (version != kFeatureVersion) {
    fail(ErrorCode::kUnsupportedVersion,
         "unsupported feature file version " + std::to_string(version));
  }
  if (!in.read_u32(dim) || !in.read_u64(count)) {
    fail(ErrorCode::kTruncatedHeader, "truncated header");
  }
  if (dim == 0) fail(ErrorCode::kDimMismatch, "feature dim must be > 0");

  FeatureFile file;
  file.dim = dim;
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    if (!in.read_u32(len) || in.remaining() < len) {
      fail(ErrorCode::kTruncatedHeader, "truncated id table");
    }
    auto raw = in.take(len);
    std::string id(raw.begin(), raw.end());
    if (!seen.insert(id).second) fail(ErrorCode::kDuplicateId, "duplicate vector id '" + id + "'");
    file.ids.push_back(std::move(id));
  }

  const std::uint64_t expected_floats = count * dim;
  if (dim != 0 && expected_floats / dim != count) {
    fail(ErrorCode::kPayloadLengthMismatch, "payload length mismatch");
  }
  if (in.remaining() % 4 != 0 || in.remaining() / 4 != expected_floats) {
    fail(ErrorCode::kPayloadLengthMismatch,
         "payload length mismatch: expected " +
             std::to_string(expected_floats * 4) + " bytes, found " +
             std::to_string(in.remaining()));
  }
  file.values.resize(static_cast<std::size_t>(expected_floats));
  for (auto& v : file.values) {
    std::uint32_t bits = 0;
    in.read_u32(bits);
    std::memcpy(&v, &bits, 4);
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValue, "non-finite feature value");
  }
  return file;
}

inline void write_feature_file(const std::filesystem::path& path,
                               const FeatureFile& file) {
  const auto bytes = encode_feature_file(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline FeatureFile read_feature_file(const std::filesystem::path& path) {
  return decode_feature_file(read_file_bytes(path));
}

}  // namespace insdet
