#pragma once

// File-level volume I/O. The extension selects the format:
//   .nii      uncompressed single-file NIfTI-1
//   .nii.gz   gzip-compressed single-file NIfTI-1
//   .mvol     logical name for the pair <stem>.json + <stem>.raw
//
// .mvol JSON document:
//   {"format": "mvol", "version": 1,
//    "dims": [nx, ny, nz], "spacing": [sx, sy, sz],
//    "dtype": "uint8" | "int16" | "int32" | "float32",
//    "kind": "intensity" | "label",
//    "modality": "T1" | "T1GD" | "T2" | "FLAIR" | "Other",
//    "source": "<free text>"}
// The .raw file holds nx*ny*nz little-endian values, x fastest.

#include <zlib.h>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"
#include "brainnet/nifti.hpp"

namespace brainnet {

enum class VolumeFormat { Nifti, NiftiGz, Mvol };

inline VolumeFormat format_for(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".nii.gz")) return VolumeFormat::NiftiGz;
  if (ends_with(".nii")) return VolumeFormat::Nifti;
  if (ends_with(".mvol")) return VolumeFormat::Mvol;
  fail(ErrorCode::InvalidArgument, "unrecognised volume extension: " + name);
}

namespace io_detail {

inline std::vector<std::byte> read_exact(const std::filesystem::path& path, std::size_t offset, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  in.seekg(static_cast<std::streamoff>(offset));
  std::vector<std::byte> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) fail(ErrorCode::TruncatedFile, path.string());
  return buf;
}

inline std::size_t byte_count(const std::filesystem::path& path) {
  std::error_code ec;
  const auto n = std::filesystem::file_size(path, ec);
  if (ec) fail(ErrorCode::IoError, "cannot stat " + path.string() + ": " + ec.message());
  return static_cast<std::size_t>(n);
}

inline void write_all(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

struct GzFile {
  gzFile handle = nullptr;
  GzFile(const std::filesystem::path& path, const char* mode) : handle(gzopen(path.string().c_str(), mode)) {
    if (!handle) fail(ErrorCode::IoError, "cannot open " + path.string());
  }
  ~GzFile() {
    if (handle) gzclose(handle);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
};

/// Reads up to `limit` decompressed bytes, growing the buffer only as data
/// actually arrives so a lying header cannot force a large allocation.
inline void gz_read_into(GzFile& f, std::vector<std::byte>& buf, std::size_t limit, const std::filesystem::path& path) {
  constexpr std::size_t kChunk = 1 << 20;
  while (buf.size() < limit) {
    const std::size_t want = std::min(kChunk, limit - buf.size());
    const std::size_t old = buf.size();
    buf.resize(old + want);
    const int got = gzread(f.handle, buf.data() + old, static_cast<unsigned>(want));
    if (got < 0) fail(ErrorCode::IoError, "gzip stream error in " + path.string());
    buf.resize(old + static_cast<std::size_t>(got));
    if (static_cast<std::size_t>(got) < want) break;
  }
}

template <class T>
Grid<T> read_nifti_file(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::vector<std::byte> bytes;
  nifti::Header header;
  if (format_for(path) == VolumeFormat::NiftiGz) {
    GzFile f(path, "rb");
    gz_read_into(f, bytes, nifti::kHeaderSize, path);
    if (bytes.size() < nifti::kHeaderSize) fail(ErrorCode::TruncatedFile, "header truncated in " + path.string());
    // Decompressed length is unknown up front; bound the claim, then read.
    constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1) / 2;
    header = nifti::parse_header(bytes, kUnbounded);
    gz_read_into(f, bytes, header.vox_offset + header.data_bytes(), path);
    if (bytes.size() < header.vox_offset + header.data_bytes())
      fail(ErrorCode::TruncatedFile, "voxel data truncated in " + path.string());
  } else {
    const std::size_t total = byte_count(path);
    if (total < nifti::kHeaderSize) fail(ErrorCode::TruncatedFile, "header truncated in " + path.string());
    bytes = read_exact(path, 0, nifti::kHeaderSize);
    header = nifti::parse_header(bytes, total);
    bytes = read_exact(path, 0, header.vox_offset + header.data_bytes());
  }
  if (warnings) warnings->insert(warnings->end(), header.warnings.begin(), header.warnings.end());
  return nifti::decode_data<T>(header, bytes);
}

inline std::filesystem::path mvol_json(const std::filesystem::path& p) {
  auto q = p;
  return q.replace_extension(".json");
}
inline std::filesystem::path mvol_raw(const std::filesystem::path& p) {
  auto q = p;
  return q.replace_extension(".raw");
}

template <class T>
Grid<T> read_mvol(const std::filesystem::path& path) {
  const auto json_path = mvol_json(path);
  std::ifstream in(json_path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + json_path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadHeader, json_path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "mvol") fail(ErrorCode::BadMagic, json_path.string() + " is not an mvol header");

  Dims dims;
  Spacing spacing;
  nifti::DataType dtype{};
  try {
    const auto d = doc.at("dims").get<std::vector<long long>>();
    const auto s = doc.value("spacing", std::vector<double>{1.0, 1.0, 1.0});
    if (d.size() != 3 || s.size() != 3) fail(ErrorCode::BadHeader, "dims and spacing need three entries");
    for (auto v : d)
      if (v < 1 || v > (1LL << 20)) fail(ErrorCode::BadHeader, "dimension out of range");
    dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
    spacing = {s[0], s[1], s[2]};
    dtype = nifti::parse_datatype(doc.at("dtype").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadHeader, json_path.string() + ": " + e.what());
  }

  const auto raw_path = mvol_raw(path);
  const std::size_t need = dims.voxel_count() * nifti::byte_size(dtype);
  const std::size_t have = byte_count(raw_path);
  if (have < need) fail(ErrorCode::TruncatedFile, raw_path.string() + " shorter than dims imply");
  if (have > need) fail(ErrorCode::BadHeader, raw_path.string() + " longer than dims imply");
  const auto bytes = read_exact(raw_path, 0, need);

  Grid<T> out(dims, spacing);
  nifti::detail::for_each_value(bytes, dtype, false, dims.voxel_count(),
                                [&](std::size_t i, double v) { out[i] = nifti::detail::convert_value<T>(v); });
  out.modality = parse_modality(doc.value("modality", "Other"));
  out.source = doc.value("source", "");
  return out;
}

template <class T>
void write_mvol(const Grid<T>& g, const std::filesystem::path& path, nifti::DataType dtype) {
  // Reuse the NIfTI encoder for the voxel payload, it is already little-endian.
  const auto encoded = nifti::encode(g, dtype);
  const std::span<const std::byte> payload(encoded.data() + nifti::kWriteOffset, encoded.size() - nifti::kWriteOffset);
  nlohmann::json doc = {
      {"format", "mvol"},
      {"version", 1},
      {"dims", {g.dims().nx, g.dims().ny, g.dims().nz}},
      {"spacing", {g.spacing().sx, g.spacing().sy, g.spacing().sz}},
      {"dtype", std::string(nifti::to_string(dtype))},
      {"kind", std::is_same_v<T, Label> ? "label" : "intensity"},
      {"modality", std::string(to_string(g.modality))},
      {"source", g.source},
  };
  const std::string text = doc.dump(2) + "\n";
  write_all(mvol_json(path), std::as_bytes(std::span(text.data(), text.size())));
  write_all(mvol_raw(path), payload);
}

}  // namespace io_detail

/// Reads any supported file into a grid of `T`, converting values exactly
/// (labels are validated against {0,1,2,4}).
template <class T>
Grid<T> read_grid(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  switch (format_for(path)) {
    case VolumeFormat::Nifti:
    case VolumeFormat::NiftiGz: return io_detail::read_nifti_file<T>(path, warnings);
    case VolumeFormat::Mvol: return io_detail::read_mvol<T>(path);
  }
  fail(ErrorCode::InvalidArgument, "unreachable");
}

inline Volume read_volume(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  return read_grid<float>(path, warnings);
}

inline LabelVolume read_label_volume(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  auto lv = read_grid<Label>(path, warnings);
  return lv;
}

template <class T>
void write_grid(const Grid<T>& g, const std::filesystem::path& path,
                nifti::DataType dtype = nifti::natural_datatype<T>()) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    fail(ErrorCode::IoError, "parent directory does not exist: " + parent.string());
  switch (format_for(path)) {
    case VolumeFormat::Nifti: io_detail::write_all(path, nifti::encode(g, dtype)); return;
    case VolumeFormat::NiftiGz: {
      const auto bytes = nifti::encode(g, dtype);
      io_detail::GzFile f(path, "wb6");
      if (gzwrite(f.handle, bytes.data(), static_cast<unsigned>(bytes.size())) != static_cast<int>(bytes.size()))
        fail(ErrorCode::IoError, "gzip write failed: " + path.string());
      return;
    }
    case VolumeFormat::Mvol: io_detail::write_mvol(g, path, dtype); return;
  }
}

inline void write_volume(const Volume& v, const std::filesystem::path& path,
                         nifti::DataType dtype = nifti::DataType::Float32) {
  write_grid(v, path, dtype);
}

inline void write_volume(const LabelVolume& v, const std::filesystem::path& path) {
  write_grid(v, path, nifti::DataType::UInt8);
}

}  // namespace brainnet
