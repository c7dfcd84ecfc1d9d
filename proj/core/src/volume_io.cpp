#include "sqpf/volume_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <vector>

namespace sqpf {

namespace {

// NIfTI-1 datatype codes
enum : std::int16_t {
  DT_UINT8 = 2,
  DT_INT16 = 4,
  DT_INT32 = 8,
  DT_FLOAT32 = 16,
  DT_FLOAT64 = 64,
  DT_INT8 = 256,
  DT_UINT16 = 512,
};

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration, toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open volume file: " + path.string());
  in.seekg(0, std::ios::end);
  const auto len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<size_t>(len));
  in.read(bytes.data(), len);
  if (!in) throw DataError("read failed: " + path.string());
  return bytes;
}

std::vector<char> gunzip(const std::vector<char>& compressed, const std::string& name) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw DataError("zlib init failed for " + name);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::vector<char> out;
  std::vector<char> buf(1 << 20);
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("gzip decompression failed for " + name);
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

bool is_gzip(const std::vector<char>& bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

template <typename T>
void convert_raster(const char* src, size_t count, std::vector<float>& dst, double slope,
                    double inter) {
  for (size_t i = 0; i < count; ++i) {
    T v;
    std::memcpy(&v, src + i * sizeof(T), sizeof(T));
    dst[i] = static_cast<float>(v * slope + inter);
  }
}

}  // namespace

Volume3D<float> read_nifti(const std::filesystem::path& path, std::array<double, 3>* spacing) {
  auto bytes = read_file_bytes(path);
  if (is_gzip(bytes)) bytes = gunzip(bytes, path.string());
  if (bytes.size() < sizeof(Nifti1Header))
    throw DataError("file too small for a NIfTI header: " + path.string());

  Nifti1Header hdr;
  std::memcpy(&hdr, bytes.data(), sizeof(hdr));
  if (hdr.sizeof_hdr != 348 || std::strncmp(hdr.magic, "n+1", 3) != 0)
    throw DataError("not a single-file NIfTI-1 volume: " + path.string());

  const int rank = hdr.dim[0];
  if (rank < 3 || rank > 4 || (rank == 4 && hdr.dim[4] > 1))
    throw DataError("expected a 3D volume in " + path.string());
  const int nx = hdr.dim[1], ny = hdr.dim[2], nz = hdr.dim[3];
  if (nx <= 0 || ny <= 0 || nz <= 0)
    throw DataError("degenerate volume dims in " + path.string());

  const size_t count = static_cast<size_t>(nx) * ny * nz;
  const size_t offset = static_cast<size_t>(hdr.vox_offset);
  const size_t elem = static_cast<size_t>(hdr.bitpix) / 8;
  if (offset + count * elem > bytes.size())
    throw DataError("truncated NIfTI raster in " + path.string());

  const double slope = (hdr.scl_slope != 0.0f) ? hdr.scl_slope : 1.0;
  const double inter = (hdr.scl_slope != 0.0f) ? hdr.scl_inter : 0.0;

  Volume3D<float> vol(nx, ny, nz);
  const char* raster = bytes.data() + offset;
  switch (hdr.datatype) {
    case DT_UINT8:   convert_raster<std::uint8_t>(raster, count, vol.raw(), slope, inter); break;
    case DT_INT8:    convert_raster<std::int8_t>(raster, count, vol.raw(), slope, inter); break;
    case DT_INT16:   convert_raster<std::int16_t>(raster, count, vol.raw(), slope, inter); break;
    case DT_UINT16:  convert_raster<std::uint16_t>(raster, count, vol.raw(), slope, inter); break;
    case DT_INT32:   convert_raster<std::int32_t>(raster, count, vol.raw(), slope, inter); break;
    case DT_FLOAT32: convert_raster<float>(raster, count, vol.raw(), slope, inter); break;
    case DT_FLOAT64: convert_raster<double>(raster, count, vol.raw(), slope, inter); break;
    default:
      throw DataError("unsupported NIfTI datatype " + std::to_string(hdr.datatype) + " in " +
                      path.string());
  }
  if (spacing) {
    (*spacing) = {hdr.pixdim[1] != 0 ? hdr.pixdim[1] : 1.0,
                  hdr.pixdim[2] != 0 ? hdr.pixdim[2] : 1.0,
                  hdr.pixdim[3] != 0 ? hdr.pixdim[3] : 1.0};
  }
  return vol;
}

namespace {

Nifti1Header make_header(int nx, int ny, int nz, std::int16_t datatype, std::int16_t bitpix,
                         const std::array<double, 3>& spacing) {
  Nifti1Header hdr{};
  hdr.sizeof_hdr = 348;
  hdr.regular = 'r';
  hdr.dim[0] = 3;
  hdr.dim[1] = static_cast<std::int16_t>(nx);
  hdr.dim[2] = static_cast<std::int16_t>(ny);
  hdr.dim[3] = static_cast<std::int16_t>(nz);
  for (int i = 4; i < 8; ++i) hdr.dim[i] = 1;
  hdr.datatype = datatype;
  hdr.bitpix = bitpix;
  hdr.pixdim[0] = 1.0f;
  hdr.pixdim[1] = static_cast<float>(spacing[0]);
  hdr.pixdim[2] = static_cast<float>(spacing[1]);
  hdr.pixdim[3] = static_cast<float>(spacing[2]);
  hdr.vox_offset = 352.0f;
  hdr.scl_slope = 1.0f;
  hdr.scl_inter = 0.0f;
  std::memcpy(hdr.magic, "n+1", 4);
  return hdr;
}

void write_nifti_bytes(const std::filesystem::path& path, const Nifti1Header& hdr,
                       const char* raster, size_t raster_bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
  const char pad[4] = {0, 0, 0, 0};
  out.write(pad, 4);  // align data to vox_offset 352
  out.write(raster, static_cast<std::streamsize>(raster_bytes));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

void write_nifti(const std::filesystem::path& path, const Volume3D<float>& vol,
                 const std::array<double, 3>& spacing) {
  const auto hdr = make_header(vol.nx(), vol.ny(), vol.nz(), DT_FLOAT32, 32, spacing);
  write_nifti_bytes(path, hdr, reinterpret_cast<const char*>(vol.data()),
                    vol.size() * sizeof(float));
}

void write_nifti_labels(const std::filesystem::path& path, const Volume3D<std::uint16_t>& vol,
                        const std::array<double, 3>& spacing) {
  const auto hdr = make_header(vol.nx(), vol.ny(), vol.nz(), DT_UINT16, 16, spacing);
  write_nifti_bytes(path, hdr, reinterpret_cast<const char*>(vol.data()),
                    vol.size() * sizeof(std::uint16_t));
}

VolumeRecord load_volume(const std::filesystem::path& image_path, const LabelMap& label_map) {
  std::string stem = image_path.filename().string();
  std::string ext;
  if (stem.size() > 7 && stem.substr(stem.size() - 7) == ".nii.gz") {
    ext = ".nii.gz";
    stem = stem.substr(0, stem.size() - 7);
  } else if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".nii") {
    ext = ".nii";
    stem = stem.substr(0, stem.size() - 4);
  } else {
    throw DataError("unsupported volume extension (expected .nii or .nii.gz): " +
                    image_path.string());
  }
  const auto label_path = image_path.parent_path() / (stem + "_label" + ext);
  return load_volume(image_path, label_path, label_map);
}

VolumeRecord load_volume(const std::filesystem::path& image_path,
                         const std::filesystem::path& label_path, const LabelMap& label_map) {
  if (label_map.count(0))
    throw DataError("label_map must not map value 0 (reserved for background)");

  VolumeRecord rec;
  std::string stem = image_path.filename().string();
  for (const char* suffix : {".nii.gz", ".nii"}) {
    const size_t len = std::strlen(suffix);
    if (stem.size() > len && stem.substr(stem.size() - len) == suffix) {
      stem = stem.substr(0, stem.size() - len);
      break;
    }
  }
  rec.case_id = stem;
  rec.voxels = read_nifti(image_path, &rec.spacing);
  const auto labels = read_nifti(label_path);
  if (!labels.same_shape(rec.voxels))
    throw DataError("shape mismatch between image " + rec.voxels.shape_str() + " and labels " +
                    labels.shape_str() + " for case " + rec.case_id);

  // One pass to validate values, a second to fill per-class masks.
  std::set<int> present;
  for (float v : labels.raw()) {
    const int iv = static_cast<int>(std::lround(v));
    if (iv == 0) continue;
    if (!label_map.count(iv))
      throw DataError("unknown label value " + std::to_string(iv) + " in " +
                      label_path.string());
    present.insert(iv);
  }
  for (const auto& [value, name] : label_map) {
    if (name.empty()) continue;  // explicitly discarded
    auto& mask = rec.class_masks[name];
    if (mask.size() == 0)
      mask = Volume3D<std::uint8_t>(labels.nx(), labels.ny(), labels.nz(), 0);
  }
  for (size_t i = 0; i < labels.raw().size(); ++i) {
    const int iv = static_cast<int>(std::lround(labels.raw()[i]));
    if (iv == 0) continue;
    const auto& name = label_map.at(iv);
    if (name.empty()) continue;
    rec.class_masks[name].raw()[i] = 1;
  }
  return rec;
}

LabelMap read_label_map(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw DataError("cannot open label map: " + json_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed label map JSON " + json_path.string() + ": " + e.what());
  }
  LabelMap map;
  for (const auto& [key, val] : j.items()) map[std::stoi(key)] = val.get<std::string>();
  return map;
}

}  // namespace sqpf
