#include "rectnet/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include "json.hpp"
#include <sstream>

namespace rectnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Header {
  Dims dims;
  Spacing spacing;
  std::string dtype;
  fs::path raw;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Header read_header(const fs::path& header_path, std::string_view expected_dtype) {
  json j;
  try {
    j = json::parse(read_text(header_path));
  } catch (const json::parse_error& e) {
    throw FormatError("bad header " + header_path.string() + ": " + e.what());
  }
  Header h;
  try {
    const auto& d = j.at("dims");
    const auto& s = j.at("spacing");
    if (d.size() != 3 || s.size() != 3) throw FormatError("dims and spacing need 3 entries");
    for (const auto& v : d) {
      if (!v.is_number_integer() || v.get<long long>() <= 0) throw FormatError("dims must be positive integers");
    }
    h.dims = {d[0].get<std::size_t>(), d[1].get<std::size_t>(), d[2].get<std::size_t>()};
    h.spacing = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    if (!(h.spacing.sx > 0) || !(h.spacing.sy > 0) || !(h.spacing.sz > 0)) {
      throw FormatError("spacing must be positive");
    }
    h.dtype = j.at("dtype").get<std::string>();
    h.raw = header_path.parent_path() / j.at("raw").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("bad header " + header_path.string() + ": " + e.what());
  }
  if (h.dtype != expected_dtype) {
    throw FormatError("expected dtype " + std::string(expected_dtype) + ", got " + h.dtype);
  }
  return h;
}

void write_header(const fs::path& header_path, const Dims& dims, const Spacing& spacing, std::string_view dtype) {
  const auto raw_name = header_path.stem().string() + ".raw";
  json j;
  j["dims"] = {dims.nx, dims.ny, dims.nz};
  j["spacing"] = {spacing.sx, spacing.sy, spacing.sz};
  j["dtype"] = dtype;
  j["raw"] = raw_name;
  write_bytes(header_path, j.dump() + "\n");
}

fs::path raw_path_for(const fs::path& header_path) {
  return header_path.parent_path() / (header_path.stem().string() + ".raw");
}

}  // namespace

Volume read_volume(const fs::path& header_path) {
  const auto h = read_header(header_path, "i16");
  const auto bytes = read_text(h.raw);
  const auto n = h.dims.count();
  if (bytes.size() != n * 2) {
    throw FormatError("payload " + h.raw.string() + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(n * 2));
  }
  std::vector<std::int16_t> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i]));
    const auto hi = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i + 1]));
    data[i] = std::bit_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
  }
  try {
    return Volume(h.dims, h.spacing, std::move(data));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid volume payload: ") + e.what());
  }
}

void write_volume(const Volume& volume, const fs::path& header_path) {
  if (volume.dims().empty()) throw InvalidArgument("refusing to write a volume with zero-sized dims");
  const auto src = volume.data();
  std::string bytes(src.size() * 2, '\0');
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto u = std::bit_cast<std::uint16_t>(src[i]);
    bytes[2 * i] = static_cast<char>(u & 0xFF);
    bytes[2 * i + 1] = static_cast<char>(u >> 8);
  }
  write_bytes(raw_path_for(header_path), bytes);
  write_header(header_path, volume.dims(), volume.spacing(), "i16");
}

BinaryMask read_mask(const fs::path& header_path) {
  const auto h = read_header(header_path, "u8");
  const auto bytes = read_text(h.raw);
  if (bytes.size() != h.dims.count()) throw FormatError("mask payload size mismatch in " + h.raw.string());
  std::vector<std::uint8_t> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto b = static_cast<std::uint8_t>(bytes[i]);
    if (b > 1) throw FormatError("mask values must be 0 or 1");
    data[i] = b;
  }
  return BinaryMask(h.dims, h.spacing, std::move(data));
}

void write_mask(const BinaryMask& mask, const fs::path& header_path) {
  if (mask.dims().empty()) throw InvalidArgument("refusing to write a mask with zero-sized dims");
  const auto src = mask.data();
  std::string bytes(src.size(), '\0');
  std::transform(src.begin(), src.end(), bytes.begin(), [](std::uint8_t v) { return static_cast<char>(v ? 1 : 0); });
  write_bytes(raw_path_for(header_path), bytes);
  write_header(header_path, mask.dims(), mask.spacing(), "u8");
}

std::vector<std::pair<std::size_t, std::size_t>> encode_runs(const std::vector<Voxel>& voxels, const Dims& dims) {
  std::vector<std::size_t> idx;
  idx.reserve(voxels.size());
  for (const auto& v : voxels) {
    idx.push_back((static_cast<std::size_t>(v.z) * dims.ny + static_cast<std::size_t>(v.y)) * dims.nx +
                  static_cast<std::size_t>(v.x));
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (const auto i : idx) {
    if (!runs.empty() && runs.back().first + runs.back().second == i) {
      ++runs.back().second;
    } else {
      runs.emplace_back(i, 1);
    }
  }
  return runs;
}

std::vector<Voxel> decode_runs(const std::vector<std::pair<std::size_t, std::size_t>>& runs, const Dims& dims) {
  std::vector<Voxel> out;
  const auto total = dims.count();
  for (const auto& [start, len] : runs) {
    if (len == 0 || start + len > total) throw FormatError("run outside volume bounds");
    for (std::size_t i = start; i < start + len; ++i) {
      out.push_back({static_cast<int>(i % dims.nx), static_cast<int>((i / dims.nx) % dims.ny),
                     static_cast<int>(i / dims.slice_count())});
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

AnnotationFile read_annotations(const fs::path& path) {
  AnnotationFile file;
  try {
    const auto j = json::parse(read_text(path));
    const auto& d = j.at("dims");
    file.dims = {d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>(), d.at(2).get<std::size_t>()};
    if (file.dims.empty()) throw FormatError("annotation dims must be positive");
    for (const auto& n : j.at("nodules")) {
      NoduleAnnotation a;
      a.id = n.at("id").get<int>();
      a.voxels = decode_runs(n.at("runs").get<std::vector<std::pair<std::size_t, std::size_t>>>(), file.dims);
      a.subtlety = n.at("subtlety").get<std::vector<double>>();
      a.malignancy = n.at("malignancy").get<std::vector<double>>();
      a.agreement = n.at("agreement").get<int>();
      validate_annotation(a, file.dims);
      file.nodules.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw FormatError("bad annotation file " + path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError("bad annotation file " + path.string() + ": " + e.what());
  }
  return file;
}

void write_annotations(const AnnotationFile& file, const fs::path& path) {
  json nodules = json::array();
  for (const auto& a : file.nodules) {
    validate_annotation(a, file.dims);
    json n;
    n["id"] = a.id;
    n["agreement"] = a.agreement;
    n["subtlety"] = a.subtlety;
    n["malignancy"] = a.malignancy;
    n["runs"] = encode_runs(a.voxels, file.dims);
    nodules.push_back(std::move(n));
  }
  json j;
  j["dims"] = {file.dims.nx, file.dims.ny, file.dims.nz};
  j["nodules"] = std::move(nodules);
  write_bytes(path, j.dump() + "\n");
}

}  // namespace rectnet
