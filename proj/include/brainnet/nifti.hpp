#pragma once

// Minimal single-file NIfTI-1 codec: 3D volumes of uint8, int16, int32 or
// float32. Parsing works on an in-memory byte span so it can be fuzzed
// without touching the filesystem; every size derived from the header is
// checked against the number of bytes actually present before anything is
// allocated.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"

namespace brainnet::nifti {

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kWriteOffset = 352;
inline constexpr char kMagic[4] = {'n', '+', '1', '\0'};

enum class DataType : std::int16_t { UInt8 = 2, Int16 = 4, Int32 = 8, Float32 = 16 };

constexpr std::size_t byte_size(DataType t) noexcept {
  switch (t) {
    case DataType::UInt8: return 1;
    case DataType::Int16: return 2;
    case DataType::Int32: return 4;
    case DataType::Float32: return 4;
  }
  return 1;
}

constexpr std::string_view to_string(DataType t) noexcept {
  switch (t) {
    case DataType::UInt8: return "uint8";
    case DataType::Int16: return "int16";
    case DataType::Int32: return "int32";
    case DataType::Float32: return "float32";
  }
  return "uint8";
}

inline DataType parse_datatype(std::string_view s) {
  for (auto t : {DataType::UInt8, DataType::Int16, DataType::Int32, DataType::Float32})
    if (s == to_string(t)) return t;
  fail(ErrorCode::UnsupportedDatatype, "unknown dtype '" + std::string(s) + "'");
}

inline bool is_supported_code(std::int16_t code) noexcept { return code == 2 || code == 4 || code == 8 || code == 16; }

template <class T>
constexpr DataType natural_datatype() noexcept {
  if constexpr (std::is_same_v<T, Label> || std::is_same_v<T, std::uint8_t>) return DataType::UInt8;
  else if constexpr (std::is_same_v<T, std::int16_t>) return DataType::Int16;
  else if constexpr (std::is_same_v<T, std::int32_t>) return DataType::Int32;
  else return DataType::Float32;
}

struct Header {
  Dims dims{};
  Spacing spacing{};
  DataType datatype = DataType::Float32;
  std::size_t vox_offset = kWriteOffset;
  bool big_endian = false;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::string descrip;
  std::string aux_file;
  std::vector<std::string> warnings;

  std::size_t data_bytes() const noexcept { return dims.voxel_count() * byte_size(datatype); }
};

namespace detail {

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> bytes, bool big_endian) : bytes_(bytes), big_(big_endian) {}

  template <class U>
  U get(std::size_t off) const {
    static_assert(std::is_trivially_copyable_v<U>);
    std::array<std::byte, sizeof(U)> raw{};
    std::memcpy(raw.data(), bytes_.data() + off, sizeof(U));
    if (big_ != (std::endian::native == std::endian::big)) std::reverse(raw.begin(), raw.end());
    U out;
    std::memcpy(&out, raw.data(), sizeof(U));
    return out;
  }

  std::string text(std::size_t off, std::size_t len) const {
    std::string s(reinterpret_cast<const char*>(bytes_.data() + off), len);
    return s.substr(0, s.find('\0'));
  }

 private:
  std::span<const std::byte> bytes_;
  bool big_;
};

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

  template <class U>
  void put(std::size_t off, U value) {
    std::array<std::byte, sizeof(U)> raw{};
    std::memcpy(raw.data(), &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    std::memcpy(out_.data() + off, raw.data(), sizeof(U));
  }

  void text(std::size_t off, std::size_t len, std::string_view s) {
    const std::size_t n = std::min(s.size(), len - 1);
    std::memcpy(out_.data() + off, s.data(), n);
  }

 private:
  std::vector<std::byte>& out_;
};

inline bool plausible_ndim(std::int16_t d) noexcept { return d >= 1 && d <= 7; }

}  // namespace detail

/// Parses and validates the 348-byte header. `file_size` is the total number
/// of bytes available (header + data) and bounds everything the header claims.
inline Header parse_header(std::span<const std::byte> bytes, std::size_t file_size) {
  if (bytes.size() < kHeaderSize) fail(ErrorCode::TruncatedFile, "file shorter than the 348-byte header");
  if (std::memcmp(bytes.data() + 344, kMagic, 4) != 0) fail(ErrorCode::BadMagic, "magic is not \"n+1\"");

  // dim[0] in [1,7] identifies the byte order.
  bool big = false;
  if (!detail::plausible_ndim(detail::ByteReader(bytes, false).get<std::int16_t>(40))) {
    big = true;
    if (!detail::plausible_ndim(detail::ByteReader(bytes, true).get<std::int16_t>(40)))
      fail(ErrorCode::BadHeader, "dim[0] out of range in either byte order");
  }
  const detail::ByteReader r(bytes, big);

  Header h;
  h.big_endian = big;
  if (r.get<std::int32_t>(0) != static_cast<std::int32_t>(kHeaderSize))
    fail(ErrorCode::BadHeader, "sizeof_hdr is not 348");

  const auto ndim = r.get<std::int16_t>(40);
  std::array<std::size_t, 3> extent{1, 1, 1};
  for (int i = 1; i <= ndim; ++i) {
    const auto d = r.get<std::int16_t>(40 + 2 * i);
    if (d < 1) fail(ErrorCode::BadHeader, "dim[" + std::to_string(i) + "] is not positive");
    if (i <= 3) extent[i - 1] = static_cast<std::size_t>(d);
    else if (d != 1) fail(ErrorCode::BadHeader, "only 3D volumes are supported");
  }
  h.dims = {extent[0], extent[1], extent[2]};

  const auto code = r.get<std::int16_t>(70);
  if (!is_supported_code(code)) fail(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(code));
  h.datatype = static_cast<DataType>(code);
  const auto bitpix = r.get<std::int16_t>(72);
  if (bitpix != static_cast<std::int16_t>(8 * byte_size(h.datatype)))
    fail(ErrorCode::BadHeader, "bitpix " + std::to_string(bitpix) + " inconsistent with datatype");

  std::array<double, 3> sp{};
  for (int i = 0; i < 3; ++i) {
    const float p = r.get<float>(80 + 4 * i);
    if (std::isfinite(p) && p != 0.0f) {
      sp[i] = std::fabs(static_cast<double>(p));
    } else {
      sp[i] = 1.0;
      h.warnings.push_back("pixdim[" + std::to_string(i + 1) + "] unusable, spacing set to 1");
    }
  }
  h.spacing = {sp[0], sp[1], sp[2]};

  const float off = r.get<float>(108);
  if (!std::isfinite(off) || off < static_cast<float>(kHeaderSize) || off != std::floor(off) ||
      off > static_cast<float>(std::numeric_limits<std::uint32_t>::max()))
    fail(ErrorCode::BadHeader, "vox_offset invalid");
  h.vox_offset = static_cast<std::size_t>(off);

  h.scl_slope = r.get<float>(112);
  h.scl_inter = r.get<float>(116);
  if ((h.scl_slope != 0.0f && h.scl_slope != 1.0f) || (h.scl_inter != 0.0f && h.scl_slope != 0.0f))
    h.warnings.push_back("scl_slope/scl_inter ignored");

  const auto qform = r.get<std::int16_t>(252);
  const auto sform = r.get<std::int16_t>(254);
  bool rotated = false;
  if (qform > 0)
    for (int i = 0; i < 3; ++i) rotated |= r.get<float>(256 + 4 * i) != 0.0f;
  if (sform > 0)
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col)
        if (row != col) rotated |= r.get<float>(280 + 16 * row + 4 * col) != 0.0f;
  if (rotated) h.warnings.push_back("non-identity orientation ignored");

  h.descrip = r.text(148, 80);
  h.aux_file = r.text(228, 24);

  // dims are each < 2^15, so the byte count cannot overflow 64 bits.
  const std::size_t needed = h.vox_offset + h.data_bytes();
  if (needed > file_size)
    fail(ErrorCode::TruncatedFile, "data needs " + std::to_string(needed) + " bytes, file has " +
                                       std::to_string(file_size));
  return h;
}

namespace detail {

template <class F>
void for_each_value(std::span<const std::byte> data, DataType t, bool big, std::size_t count, F&& fn) {
  const ByteReader r(data, big);
  const std::size_t step = byte_size(t);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = i * step;
    switch (t) {
      case DataType::UInt8: fn(i, static_cast<double>(std::to_integer<std::uint8_t>(data[off]))); break;
      case DataType::Int16: fn(i, static_cast<double>(r.get<std::int16_t>(off))); break;
      case DataType::Int32: fn(i, static_cast<double>(r.get<std::int32_t>(off))); break;
      case DataType::Float32: fn(i, static_cast<double>(r.get<float>(off))); break;
    }
  }
}

template <class T>
T convert_value(double v) {
  if constexpr (std::is_same_v<T, Label>) {
    if (!(v >= 0.0 && v <= 4.0) || v != std::floor(v) || !is_valid_label(static_cast<long long>(v)))
      fail(ErrorCode::BadLabel, "label value " + std::to_string(v) + " not in {0,1,2,4}");
    return static_cast<Label>(static_cast<int>(v));
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "non-finite voxel value");
    return static_cast<T>(v);
  } else {
    if (!std::isfinite(v) || v != std::floor(v) || v < static_cast<double>(std::numeric_limits<T>::lowest()) ||
        v > static_cast<double>(std::numeric_limits<T>::max()))
      fail(ErrorCode::RangeError, "voxel value " + std::to_string(v) + " not representable");
    return static_cast<T>(v);
  }
}

}  // namespace detail

/// Decodes voxel data that follows an already-parsed header.
template <class T>
Grid<T> decode_data(const Header& h, std::span<const std::byte> file_bytes) {
  if (h.vox_offset + h.data_bytes() > file_bytes.size()) fail(ErrorCode::TruncatedFile, "voxel data truncated");
  Grid<T> out(h.dims, h.spacing);
  detail::for_each_value(file_bytes.subspan(h.vox_offset), h.datatype, h.big_endian, h.dims.voxel_count(),
                         [&](std::size_t i, double v) { out[i] = detail::convert_value<T>(v); });
  out.source = h.descrip;
  if (!h.aux_file.empty()) {
    for (auto m : {Modality::T1, Modality::T1GD, Modality::T2, Modality::FLAIR})
      if (h.aux_file == to_string(m)) out.modality = m;
  }
  return out;
}

template <class T>
Grid<T> decode(std::span<const std::byte> file_bytes) {
  return decode_data<T>(parse_header(file_bytes, file_bytes.size()), file_bytes);
}

/// Converts a voxel value to the on-disk type, refusing lossy conversions.
template <class Raw, class T>
Raw exact_cast(T value) {
  const double v = static_cast<double>(value);
  if constexpr (std::is_same_v<Raw, float>) {
    if (static_cast<double>(static_cast<float>(v)) != v && std::isfinite(v))
      fail(ErrorCode::RangeError, "value " + std::to_string(v) + " not representable as float32");
    return static_cast<float>(v);
  } else {
    if (!(v >= static_cast<double>(std::numeric_limits<Raw>::lowest()) &&
          v <= static_cast<double>(std::numeric_limits<Raw>::max())) ||
        v != std::floor(v))
      fail(ErrorCode::RangeError, "value " + std::to_string(v) + " not representable as " +
                                      std::string(to_string(natural_datatype<Raw>())));
    return static_cast<Raw>(v);
  }
}

template <class T>
std::vector<std::byte> encode(const Grid<T>& g, DataType t = natural_datatype<T>()) {
  const auto& d = g.dims();
  for (std::size_t a = 0; a < 3; ++a)
    if (d[a] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
      fail(ErrorCode::InvalidArgument, "dimension exceeds NIfTI-1 limit of 32767");

  std::vector<std::byte> out(kWriteOffset + g.size() * byte_size(t), std::byte{0});
  detail::ByteWriter w(out);
  w.put<std::int32_t>(0, static_cast<std::int32_t>(kHeaderSize));
  w.put<char>(38, 'r');
  w.put<std::int16_t>(40, 3);
  for (std::size_t a = 0; a < 3; ++a) w.put<std::int16_t>(42 + 2 * a, static_cast<std::int16_t>(d[a]));
  for (std::size_t a = 3; a < 7; ++a) w.put<std::int16_t>(42 + 2 * a, 1);
  w.put<std::int16_t>(70, static_cast<std::int16_t>(t));
  w.put<std::int16_t>(72, static_cast<std::int16_t>(8 * byte_size(t)));
  w.put<float>(76, 1.0f);
  for (std::size_t a = 0; a < 3; ++a) w.put<float>(80 + 4 * a, static_cast<float>(g.spacing()[a]));
  w.put<float>(108, static_cast<float>(kWriteOffset));
  w.put<float>(112, 1.0f);
  w.put<char>(123, 2);  // xyzt_units: mm
  w.text(148, 80, g.source);
  if (g.modality != Modality::Other) w.text(228, 24, to_string(g.modality));
  w.put<std::int16_t>(254, 1);  // sform: scaled identity
  for (std::size_t a = 0; a < 3; ++a) w.put<float>(280 + 16 * a + 4 * a, static_cast<float>(g.spacing()[a]));
  std::memcpy(out.data() + 344, kMagic, 4);

  const std::size_t step = byte_size(t);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t off = kWriteOffset + i * step;
    const auto value = static_cast<std::conditional_t<std::is_enum_v<T>, int, T>>(g[i]);
    switch (t) {
      case DataType::UInt8: w.put<std::uint8_t>(off, exact_cast<std::uint8_t>(value)); break;
      case DataType::Int16: w.put<std::int16_t>(off, exact_cast<std::int16_t>(value)); break;
      case DataType::Int32: w.put<std::int32_t>(off, exact_cast<std::int32_t>(value)); break;
      case DataType::Float32: w.put<float>(off, exact_cast<float>(value)); break;
    }
  }
  return out;
}

}  // namespace brainnet::nifti
