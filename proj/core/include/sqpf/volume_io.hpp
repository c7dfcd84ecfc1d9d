#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "sqpf/grid.hpp"

namespace sqpf {

// One 3D scan: the raw intensity volume plus one binary mask per class.
struct VolumeRecord {
  std::string case_id;
  Volume3D<float> voxels;
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};  // mm
  std::map<std::string, Volume3D<std::uint8_t>> class_masks;
};

// Maps integer label values to class names. Value 0 is always background and
// must not appear as a key. Mapping a value to "" discards it (treated as
// background); values present in the label volume but absent from the map are
// rejected.
using LabelMap = std::map<int, std::string>;

// Minimal NIfTI-1 support: single-file .nii, plus .nii.gz via zlib. Handled
// datatypes: uint8, int8, int16, uint16, int32, float32, float64.
// scl_slope/scl_inter are applied when set.
Volume3D<float> read_nifti(const std::filesystem::path& path,
                           std::array<double, 3>* spacing = nullptr);

void write_nifti(const std::filesystem::path& path, const Volume3D<float>& vol,
                 const std::array<double, 3>& spacing = {1.0, 1.0, 1.0});

// Label volumes are written as uint16.
void write_nifti_labels(const std::filesystem::path& path, const Volume3D<std::uint16_t>& vol,
                        const std::array<double, 3>& spacing = {1.0, 1.0, 1.0});

// Loads an image volume and its aligned label volume, splitting labels into
// per-class binary masks. The single-path form expects the label volume next
// to the image with an "_label" stem suffix (case01.nii.gz ->
// case01_label.nii.gz); case_id is the image stem.
VolumeRecord load_volume(const std::filesystem::path& image_path, const LabelMap& label_map);
VolumeRecord load_volume(const std::filesystem::path& image_path,
                         const std::filesystem::path& label_path, const LabelMap& label_map);

// Reads a {"1": "liver", ...} JSON sidecar.
LabelMap read_label_map(const std::filesystem::path& json_path);

}  // namespace sqpf
