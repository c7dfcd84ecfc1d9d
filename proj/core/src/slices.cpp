#include "sqpf/slices.hpp"

#include <algorithm>
#include <cmath>

#include "sqpf/image_ops.hpp"

namespace sqpf {

namespace {

RealGrid extract_slice(const Volume3D<float>& vol, int z) {
  RealGrid img(vol.ny(), vol.nx());
  for (int y = 0; y < vol.ny(); ++y)
    for (int x = 0; x < vol.nx(); ++x) img(y, x) = vol.at(x, y, z);
  return img;
}

MaskGrid extract_mask_slice(const Volume3D<std::uint8_t>& vol, int z) {
  MaskGrid m(vol.ny(), vol.nx());
  for (int y = 0; y < vol.ny(); ++y)
    for (int x = 0; x < vol.nx(); ++x) m(y, x) = vol.at(x, y, z) ? 1 : 0;
  return m;
}

}  // namespace

std::vector<SliceSample> slice_and_resize(const VolumeRecord& volume, SlicePlane plane,
                                          int out_size, IntensityWindow window) {
  (void)plane;  // both planes slice along the stored stack axis; the tag is
                // validated against the dataset kind at the CLI layer
  if (out_size < 32) throw DataError("slice_and_resize: out_size must be >= 32");
  for (const auto& [name, mask] : volume.class_masks)
    if (!mask.same_shape(volume.voxels))
      throw DataError("class mask '" + name + "' shape differs from voxels for case " +
                      volume.case_id);

  std::vector<SliceSample> out;
  for (int z = 0; z < volume.voxels.nz(); ++z) {
    RealGrid img;  // windowed/resized/normalized lazily, shared across classes
    bool img_ready = false;
    for (const auto& [name, mask3d] : volume.class_masks) {
      MaskGrid mask = extract_mask_slice(mask3d, z);
      if (mask_area(mask) == 0) continue;
      MaskGrid mask_rs = resize_nearest(mask, out_size, out_size);
      if (mask_area(mask_rs) == 0) continue;  // foreground vanished under resampling
      if (!img_ready) {
        img = extract_slice(volume.voxels, z);
        switch (window) {
          case IntensityWindow::kNone: break;
          case IntensityWindow::kCtSoftTissue: window_clip(img, -125.0, 275.0); break;
          case IntensityWindow::kPercentile: window_percentile_upper(img, 99.5); break;
        }
        img = resize_bilinear(img, out_size, out_size);
        normalize_slice(img);
        img_ready = true;
      }
      SliceSample s;
      s.case_id = volume.case_id;
      s.slice_index = z;
      s.image = img;
      s.mask = std::move(mask_rs);
      s.class_label = name;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace sqpf
