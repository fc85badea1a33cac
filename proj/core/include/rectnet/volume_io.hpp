#pragma once

#include <filesystem>
#include <vector>

#include "rectnet/annotation.hpp"
#include "rectnet/volume.hpp"

namespace rectnet {

// On-disk layout: `<name>.json` header
//   {"dims":[nx,ny,nz],"spacing":[sx,sy,sz],"dtype":"i16"|"u8","raw":"<name>.raw"}
// next to a headerless little-endian payload, x fastest, then y, then z.

/// Reads a `<name>.json` header and its raw int16 payload.
[[nodiscard]] Volume read_volume(const std::filesystem::path& header_path);

/// Writes `<name>.json` and `<name>.raw`. Output bytes depend only on the volume.
void write_volume(const Volume& volume, const std::filesystem::path& header_path);

[[nodiscard]] BinaryMask read_mask(const std::filesystem::path& header_path);
void write_mask(const BinaryMask& mask, const std::filesystem::path& header_path);

/// Nodule list with run-length encoded voxel sets (`<name>.nodules.json`).
struct AnnotationFile {
  Dims dims;
  std::vector<NoduleAnnotation> nodules;
  bool operator==(const AnnotationFile&) const = default;
};

[[nodiscard]] AnnotationFile read_annotations(const std::filesystem::path& path);
void write_annotations(const AnnotationFile& file, const std::filesystem::path& path);

/// Runs of consecutive linear indices as (start, length) pairs.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> encode_runs(const std::vector<Voxel>& voxels,
                                                                           const Dims& dims);
[[nodiscard]] std::vector<Voxel> decode_runs(const std::vector<std::pair<std::size_t, std::size_t>>& runs,
                                             const Dims& dims);

}  // namespace rectnet
