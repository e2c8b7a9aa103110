#pragma once

// Minimal single-file NIfTI-1 ("n+1") reader and writer, with transparent
// gzip support, plus truth/prediction case discovery on disk.
//
// Only the fields needed for axis-aligned scalar volumes are interpreted:
// dim, datatype, pixdim, vox_offset, scl_slope/scl_inter and magic.
// qform/sform orientation is ignored.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demri/core.hpp"
#include "demri/diagnostics.hpp"
#include "demri/errors.hpp"

namespace demri::nifti {

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kSingleFileOffset = 352;

enum class DataType : std::int16_t {
  uint8 = 2,
  int16 = 4,
  int32 = 8,
  float32 = 16,
  float64 = 64,
};

inline std::optional<DataType> datatype_from_code(std::int16_t code) {
  switch (code) {
    case 2: return DataType::uint8;
    case 4: return DataType::int16;
    case 8: return DataType::int32;
    case 16: return DataType::float32;
    case 64: return DataType::float64;
    default: return std::nullopt;
  }
}

inline std::size_t bytes_per_voxel(DataType t) {
  switch (t) {
    case DataType::uint8: return 1;
    case DataType::int16: return 2;
    case DataType::int32: return 4;
    case DataType::float32: return 4;
    case DataType::float64: return 8;
  }
  return 0;
}

struct NiftiHeader {
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 0.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::array<char, 4> magic{};
  bool byte_swapped = false;

  Extents extents() const {
    return {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
            dim[0] >= 3 ? static_cast<std::size_t>(dim[3]) : std::size_t{1}};
  }
};

namespace detail {

using Bytes = std::vector<std::uint8_t>;

template <class T>
T load(std::span<const std::uint8_t> buf, std::size_t offset, bool swap) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), buf.data() + offset, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

template <class T>
void store(Bytes& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

inline bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

inline Bytes gunzip(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw CorruptFileError("cannot initialise gzip decoder");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  Bytes out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw CorruptFileError("gzip stream is corrupt or truncated");
    }
    const std::size_t produced = chunk.size() - zs.avail_out;
    out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(produced));
    if (rc == Z_OK && produced == 0 && zs.avail_in == 0) {
      inflateEnd(&zs);
      throw CorruptFileError("gzip stream is truncated");
    }
  }
  inflateEnd(&zs);
  return out;
}

inline Bytes gzip(std::span<const std::uint8_t> in) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip wrapper; the header carries mtime 0
  // so output is byte-identical across runs.
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("cannot initialise gzip encoder");
  Bytes out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline bool has_gz_extension(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  return name.size() > 3 && name.compare(name.size() - 3, 3, ".gz") == 0;
}

}  // namespace detail

// Parses and validates the 348-byte header. Byte order is detected from
// dim[0], which must lie in 1..7 in the file's native order.
inline NiftiHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw CorruptFileError("file shorter than the 348-byte NIfTI-1 header");

  NiftiHeader h;
  const auto dim0 = detail::load<std::int16_t>(bytes, 40, false);
  if (dim0 >= 1 && dim0 <= 7) {
    h.byte_swapped = false;
  } else {
    const auto swapped = detail::load<std::int16_t>(bytes, 40, true);
    if (swapped < 1 || swapped > 7) throw FormatError("dim[0] out of range in either byte order");
    h.byte_swapped = true;
  }
  const bool sw = h.byte_swapped;

  if (detail::load<std::int32_t>(bytes, 0, sw) != static_cast<std::int32_t>(kHeaderSize))
    throw FormatError("sizeof_hdr is not 348");
  std::memcpy(h.magic.data(), bytes.data() + 344, 4);
  if (std::memcmp(h.magic.data(), "ni1\0", 4) == 0)
    throw FormatError("header/image pairs (ni1) are not supported; use single-file n+1");
  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) throw FormatError("bad NIfTI-1 magic");

  for (std::size_t i = 0; i < 8; ++i) {
    h.dim[i] = detail::load<std::int16_t>(bytes, 40 + 2 * i, sw);
    h.pixdim[i] = detail::load<float>(bytes, 76 + 4 * i, sw);
  }
  h.datatype = detail::load<std::int16_t>(bytes, 70, sw);
  h.bitpix = detail::load<std::int16_t>(bytes, 72, sw);
  h.vox_offset = detail::load<float>(bytes, 108, sw);
  h.scl_slope = detail::load<float>(bytes, 112, sw);
  h.scl_inter = detail::load<float>(bytes, 116, sw);

  if (h.dim[0] != 2 && h.dim[0] != 3)
    throw FormatError("only 2D and 3D images are supported (dim[0]=" + std::to_string(h.dim[0]) + ")");
  for (int i = 1; i <= h.dim[0]; ++i)
    if (h.dim[i] < 1) throw FormatError("non-positive extent in dim[" + std::to_string(i) + "]");

  const auto type = datatype_from_code(h.datatype);
  if (!type) throw UnsupportedTypeError("unsupported NIfTI datatype " + std::to_string(h.datatype));
  if (h.bitpix != static_cast<std::int16_t>(8 * bytes_per_voxel(*type)))
    throw CorruptFileError("bitpix " + std::to_string(h.bitpix) + " does not match datatype " +
                           std::to_string(h.datatype));
  if (!std::isfinite(h.vox_offset) || h.vox_offset < static_cast<float>(kHeaderSize) ||
      h.vox_offset > static_cast<float>(std::numeric_limits<std::int32_t>::max()))
    throw CorruptFileError("invalid vox_offset");
  return h;
}

inline Spacing header_spacing(const NiftiHeader& h) {
  Spacing s;
  s.x = h.pixdim[1];
  s.y = h.pixdim[2];
  const bool has_z = h.dim[0] >= 3 && std::isfinite(h.pixdim[3]) && h.pixdim[3] > 0.0f;
  s.z = has_z ? static_cast<double>(h.pixdim[3]) : kDefaultSliceSpacingMm;
  if (h.dim[0] >= 3 && !has_z) throw CorruptFileError("non-positive slice spacing in pixdim[3]");
  if (!(std::isfinite(s.x) && std::isfinite(s.y) && s.x > 0.0 && s.y > 0.0))
    throw CorruptFileError("non-positive in-plane spacing in pixdim");
  return s;
}

// Decodes an in-memory NIfTI-1 image (optionally gzip-wrapped).
inline Volume3D decode_volume(std::span<const std::uint8_t> raw) {
  detail::Bytes inflated;
  std::span<const std::uint8_t> bytes = raw;
  if (detail::is_gzip(raw)) {
    inflated = detail::gunzip(raw);
    bytes = inflated;
  }
  const NiftiHeader h = parse_header(bytes);
  const Extents extents = h.extents();
  const Spacing spacing = header_spacing(h);
  const DataType type = *datatype_from_code(h.datatype);
  const std::size_t width = bytes_per_voxel(type);

  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t count = extents.voxels();
  if (offset > bytes.size() || (bytes.size() - offset) / width < count)
    throw CorruptFileError("payload truncated: need " + std::to_string(count) + " voxels of " +
                           std::to_string(width) + " bytes");

  const bool sw = h.byte_swapped;
  const bool scaled = h.scl_slope != 0.0f && std::isfinite(h.scl_slope) && std::isfinite(h.scl_inter);
  const double slope = scaled ? h.scl_slope : 1.0;
  const double inter = scaled ? h.scl_inter : 0.0;

  std::vector<double> data(count);
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = offset + i * width;
    double v = 0.0;
    switch (type) {
      case DataType::uint8: v = p[i]; break;
      case DataType::int16: v = detail::load<std::int16_t>(bytes, at, sw); break;
      case DataType::int32: v = detail::load<std::int32_t>(bytes, at, sw); break;
      case DataType::float32: v = detail::load<float>(bytes, at, sw); break;
      case DataType::float64: v = detail::load<double>(bytes, at, sw); break;
    }
    data[i] = v * slope + inter;
  }
  return Volume3D(extents, spacing, std::move(data));
}

inline Volume3D read_volume(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return decode_volume(bytes);
}

inline LabelMap to_labelmap(const Volume3D& v) {
  std::vector<Tissue> labels(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double value = v[i];
    if (!std::isfinite(value)) throw FormatError("non-finite label value at voxel " + std::to_string(i));
    const double rounded = std::nearbyint(value);
    if (rounded < 0.0 || rounded >= kTissueCount) {
      const long long code = std::abs(rounded) < 9e18 ? static_cast<long long>(rounded) : -1;
      throw InvalidLabelError(code, i);
    }
    labels[i] = static_cast<Tissue>(static_cast<int>(rounded));
  }
  return LabelMap(v.extents(), v.spacing(), std::move(labels));
}

inline LabelMap decode_labelmap(std::span<const std::uint8_t> raw) { return to_labelmap(decode_volume(raw)); }

inline LabelMap read_labelmap(const std::filesystem::path& path) { return to_labelmap(read_volume(path)); }

namespace detail {

inline Bytes encode_header(const Extents& e, const Spacing& s, DataType type) {
  Bytes buf(kSingleFileOffset, 0);
  for (auto d : {e.nx, e.ny, e.nz})
    if (d > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
      throw ArgumentError("extent too large for NIfTI-1");
  store<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
  buf[38] = 'r';  // regular
  const std::array<std::int16_t, 8> dim = {3,
                                           static_cast<std::int16_t>(e.nx),
                                           static_cast<std::int16_t>(e.ny),
                                           static_cast<std::int16_t>(e.nz),
                                           1, 1, 1, 1};
  const std::array<float, 8> pixdim = {1.0f, static_cast<float>(s.x), static_cast<float>(s.y),
                                       static_cast<float>(s.z), 1.0f, 1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < 8; ++i) {
    store(buf, 40 + 2 * i, dim[i]);
    store(buf, 76 + 4 * i, pixdim[i]);
  }
  store<std::int16_t>(buf, 70, static_cast<std::int16_t>(type));
  store<std::int16_t>(buf, 72, static_cast<std::int16_t>(8 * bytes_per_voxel(type)));
  store<float>(buf, 108, static_cast<float>(kSingleFileOffset));
  store<float>(buf, 112, 1.0f);
  store<float>(buf, 116, 0.0f);
  buf[123] = 2;  // xyzt_units: mm
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  return buf;
}

inline void emit(const std::filesystem::path& path, const Bytes& image) {
  if (has_gz_extension(path)) {
    write_file(path, gzip(image));
  } else {
    write_file(path, image);
  }
}

}  // namespace detail

// Encodes a label map as an uncompressed single-file NIfTI-1 image, uint8.
inline std::vector<std::uint8_t> encode_labelmap(const LabelMap& m) {
  auto bytes = detail::encode_header(m.extents(), m.spacing(), DataType::uint8);
  bytes.reserve(bytes.size() + m.size());
  for (Tissue t : m.values()) bytes.push_back(static_cast<std::uint8_t>(t));
  return bytes;
}

inline std::vector<std::uint8_t> encode_volume(const Volume3D& v) {
  auto bytes = detail::encode_header(v.extents(), v.spacing(), DataType::float32);
  const std::size_t base = bytes.size();
  bytes.resize(base + 4 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    detail::store<float>(bytes, base + 4 * i, static_cast<float>(v[i]));
  return bytes;
}

// Writes gzip-compressed output when the path ends in ".gz".
inline void write_labelmap(const LabelMap& m, const std::filesystem::path& path) {
  detail::emit(path, encode_labelmap(m));
}

inline void write_volume(const Volume3D& v, const std::filesystem::path& path) {
  detail::emit(path, encode_volume(v));
}

// ---------------------------------------------------------------------------
// Case discovery

struct CasePair {
  std::string case_id;
  std::filesystem::path truth_path;
  // Empty when the prediction directory has no file with the same stem.
  std::optional<std::filesystem::path> prediction_path;

  bool missing_prediction() const noexcept { return !prediction_path.has_value(); }
};

// "Case_001.nii.gz" and "Case_001.nii" both have stem "Case_001". Returns
// nullopt for files that are not NIfTI by name.
inline std::optional<std::string> nifti_stem(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  for (const std::string ext : {".nii.gz", ".nii"}) {
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
      return name.substr(0, name.size() - ext.size());
  }
  return std::nullopt;
}

namespace detail {

inline std::map<std::string, std::filesystem::path> index_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && nifti_stem(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, std::filesystem::path> by_stem;
  for (const auto& f : files) {
    auto [it, inserted] = by_stem.emplace(*nifti_stem(f), f);
    if (!inserted)
      warn("duplicate case '" + it->first + "' in " + dir.string() + "; using " + it->second.filename().string());
  }
  return by_stem;
}

}  // namespace detail

inline std::vector<CasePair> discover_cases(const std::filesystem::path& truth_dir,
                                            const std::filesystem::path& pred_dir) {
  const auto truths = detail::index_directory(truth_dir);
  if (truths.empty()) throw EmptyDatasetError("no NIfTI files in " + truth_dir.string());
  const auto preds = detail::index_directory(pred_dir);

  std::vector<CasePair> pairs;
  pairs.reserve(truths.size());
  for (const auto& [stem, truth_path] : truths) {
    CasePair pair{stem, truth_path, std::nullopt};
    if (auto it = preds.find(stem); it != preds.end()) pair.prediction_path = it->second;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace demri::nifti
