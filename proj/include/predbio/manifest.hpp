#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace predbio {

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestRow {
  std::string sample_id;
  std::string image_path;  // relative to the manifest's base directory unless absolute
  double x_prog = 0.0;
  double x_pred = 0.0;
  Split split = Split::train;

  bool operator==(const ManifestRow&) const = default;
};

/// Rows of (sample_id, image_path, x_prog, x_pred, split).
struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
  std::vector<std::size_t> indices(Split split) const;
  std::filesystem::path resolve_image(const ManifestRow& row) const;

  /// Unique ids and finite biomarker values.
  void validate() const;
  /// Copy with the prognostic and predictive columns exchanged.
  DatasetManifest swapped_roles() const;
};

/// CSV header: sample_id,image_path,x_prog,x_pred,split
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path, bool require_images = true);

}  // namespace predbio
