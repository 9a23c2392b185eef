#include "bodyreg/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace bodyreg {

namespace {

using nlohmann::json;

template <typename Scalar>
const char* dtype_name();

template <>
const char* dtype_name<std::uint8_t>() {
  return "u8";
}
template <>
const char* dtype_name<float>() {
  return "f32";
}

std::filesystem::path header_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".vol.json";
  return p;
}

std::filesystem::path raw_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".vol.raw";
  return p;
}

// Buffers are memcpy'd on little-endian hosts; byte-swapped otherwise.
template <typename Scalar>
void to_little_endian(std::vector<char>& bytes, const Scalar* src, std::size_t n) {
  bytes.resize(n * sizeof(Scalar));
  std::memcpy(bytes.data(), src, bytes.size());
  if constexpr (std::endian::native == std::endian::big && sizeof(Scalar) > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      char* p = bytes.data() + i * sizeof(Scalar);
      for (std::size_t a = 0, b = sizeof(Scalar) - 1; a < b; ++a, --b) std::swap(p[a], p[b]);
    }
  }
}

template <typename Scalar>
void from_little_endian(Scalar* dst, const std::vector<char>& bytes, std::size_t n) {
  if constexpr (std::endian::native == std::endian::big && sizeof(Scalar) > 1) {
    std::vector<char> tmp = bytes;
    for (std::size_t i = 0; i < n; ++i) {
      char* p = tmp.data() + i * sizeof(Scalar);
      for (std::size_t a = 0, b = sizeof(Scalar) - 1; a < b; ++a, --b) std::swap(p[a], p[b]);
    }
    std::memcpy(dst, tmp.data(), n * sizeof(Scalar));
  } else {
    std::memcpy(dst, bytes.data(), n * sizeof(Scalar));
  }
}

template <typename Scalar>
void write_volume_impl(const VolumeT<Scalar>& v, const std::filesystem::path& stem) {
  validate_volume(v);

  json header;
  header["shape"] = {v.shape.nz, v.shape.ny, v.shape.nx};
  header["spacing_mm"] = {v.spacing_mm.z, v.spacing_mm.y, v.spacing_mm.x};
  header["dtype"] = dtype_name<Scalar>();
  header["semantic"] = to_string(v.semantic);

  std::ofstream hf(header_path(stem), std::ios::binary | std::ios::trunc);
  if (!hf) throw IoError("cannot write " + header_path(stem).string());
  hf << header.dump(2) << "\n";
  if (!hf.good()) throw IoError("write failed for " + header_path(stem).string());
  hf.close();

  std::vector<char> bytes;
  to_little_endian(bytes, v.data.data(), static_cast<std::size_t>(v.data.size()));
  std::ofstream rf(raw_path(stem), std::ios::binary | std::ios::trunc);
  if (!rf) throw IoError("cannot write " + raw_path(stem).string());
  rf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!rf.good()) throw IoError("write failed for " + raw_path(stem).string());
}

struct ParsedHeader {
  Shape3 shape;
  Spacing3 spacing;
  std::string dtype;
  Semantic semantic;
};

ParsedHeader read_header(const std::filesystem::path& stem) {
  const auto hp = header_path(stem);
  std::ifstream hf(hp, std::ios::binary);
  if (!hf) throw IoError("missing header file " + hp.string());
  json header;
  try {
    hf >> header;
  } catch (const json::exception& e) {
    throw IoError("corrupt header " + hp.string() + ": " + e.what());
  }

  ParsedHeader out;
  try {
    const auto& sh = header.at("shape");
    const auto& sp = header.at("spacing_mm");
    if (sh.size() != 3 || sp.size() != 3) throw IoError("header arrays must have length 3");
    out.shape = {sh[0].get<Index>(), sh[1].get<Index>(), sh[2].get<Index>()};
    out.spacing = {sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
    out.dtype = header.at("dtype").get<std::string>();
    out.semantic = semantic_from_string(header.at("semantic").get<std::string>());
  } catch (const json::exception& e) {
    throw IoError("corrupt header " + hp.string() + ": " + e.what());
  }
  if (out.dtype != "u8" && out.dtype != "f32") {
    throw IoError("unknown dtype '" + out.dtype + "' in " + hp.string());
  }
  return out;
}

template <typename Scalar>
VolumeT<Scalar> read_volume_impl(const std::filesystem::path& stem, const ParsedHeader& h) {
  VolumeT<Scalar> v;
  v.shape = h.shape;
  v.spacing_mm = h.spacing;
  v.semantic = h.semantic;

  const auto rp = raw_path(stem);
  std::ifstream rf(rp, std::ios::binary | std::ios::ate);
  if (!rf) throw IoError("missing raw file " + rp.string());
  const auto file_size = static_cast<std::size_t>(rf.tellg());
  const auto expected = static_cast<std::size_t>(h.shape.total()) * sizeof(Scalar);
  if (file_size != expected) {
    throw IoError("raw file " + rp.string() + " holds " + std::to_string(file_size) +
                  " bytes, header expects " + std::to_string(expected));
  }
  rf.seekg(0);
  std::vector<char> bytes(file_size);
  rf.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!rf.good()) throw IoError("read failed for " + rp.string());

  v.data.resize(h.shape.total());
  from_little_endian(v.data.data(), bytes, static_cast<std::size_t>(v.data.size()));
  validate_volume(v);
  return v;
}

}  // namespace

void write_volume(const VolumeF& v, const std::filesystem::path& stem) {
  write_volume_impl(v, stem);
}

void write_volume(const VolumeU8& v, const std::filesystem::path& stem) {
  write_volume_impl(v, stem);
}

AnyVolume read_volume(const std::filesystem::path& stem) {
  const auto h = read_header(stem);
  if (h.shape.nz <= 0 || h.shape.ny <= 0 || h.shape.nx <= 0) {
    throw ValidationError("header shape must be positive in " + header_path(stem).string());
  }
  if (h.dtype == "u8") return read_volume_impl<std::uint8_t>(stem, h);
  return read_volume_impl<float>(stem, h);
}

VolumeF read_volume_f32(const std::filesystem::path& stem) {
  auto v = read_volume(stem);
  if (auto* p = std::get_if<VolumeF>(&v)) return std::move(*p);
  throw ValidationError("expected f32 volume at " + stem.string());
}

VolumeU8 read_volume_u8(const std::filesystem::path& stem) {
  auto v = read_volume(stem);
  if (auto* p = std::get_if<VolumeU8>(&v)) return std::move(*p);
  throw ValidationError("expected u8 volume at " + stem.string());
}

bool volume_exists(const std::filesystem::path& stem) {
  return std::filesystem::exists(header_path(stem)) && std::filesystem::exists(raw_path(stem));
}

}  // namespace bodyreg
