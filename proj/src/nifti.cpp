#include "tdaug/io/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace tdaug {

namespace {

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
  float slice_duration;
  float toffset;
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

enum NiftiType : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kUInt16 = 512,
};

// gzread handles plain files transparently, so one path covers .nii and .nii.gz.
std::vector<unsigned char> read_all(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open NIfTI file: " + path);
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof(buf))) > 0)
    bytes.insert(bytes.end(), buf, buf + got);
  gzclose(f);
  if (got < 0) throw std::runtime_error("error reading NIfTI file: " + path);
  return bytes;
}

template <typename Raw>
float voxel_value(const unsigned char* base, std::size_t index) {
  Raw v;
  std::memcpy(&v, base + index * sizeof(Raw), sizeof(Raw));
  return static_cast<float>(v);
}

struct RawVolume {
  int nx, ny, nz;
  float sx, sy, sz;
  std::vector<float> voxels;  // x fastest, then y, then z
};

RawVolume read_raw(const std::string& path) {
  const auto bytes = read_all(path);
  if (bytes.size() < sizeof(Nifti1Header))
    throw std::runtime_error("truncated NIfTI header: " + path);
  Nifti1Header hdr;
  std::memcpy(&hdr, bytes.data(), sizeof(hdr));
  if (hdr.sizeof_hdr != 348)
    throw std::runtime_error("unsupported NIfTI byte order or format: " + path);
  if (std::strncmp(hdr.magic, "n+1", 3) != 0 && std::strncmp(hdr.magic, "ni1", 3) != 0)
    throw std::runtime_error("missing NIfTI magic: " + path);
  if (hdr.dim[0] < 3) throw std::runtime_error("NIfTI volume must be 3D: " + path);
  for (int d = 4; d <= hdr.dim[0]; ++d)
    if (hdr.dim[d] > 1)
      throw std::runtime_error("NIfTI volume has a non-singleton dimension > 3: " + path);

  RawVolume v;
  v.nx = hdr.dim[1];
  v.ny = hdr.dim[2];
  v.nz = hdr.dim[3];
  v.sx = hdr.pixdim[1];
  v.sy = hdr.pixdim[2];
  v.sz = hdr.pixdim[3];
  const std::size_t count = static_cast<std::size_t>(v.nx) * v.ny * v.nz;
  const std::size_t offset = static_cast<std::size_t>(hdr.vox_offset);
  const std::size_t elem = static_cast<std::size_t>(hdr.bitpix) / 8;
  if (bytes.size() < offset + count * elem)
    throw std::runtime_error("truncated NIfTI data: " + path);

  v.voxels.resize(count);
  const unsigned char* base = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    float val;
    switch (hdr.datatype) {
      case kUInt8: val = voxel_value<std::uint8_t>(base, i); break;
      case kInt16: val = voxel_value<std::int16_t>(base, i); break;
      case kInt32: val = voxel_value<std::int32_t>(base, i); break;
      case kUInt16: val = voxel_value<std::uint16_t>(base, i); break;
      case kFloat32: val = voxel_value<float>(base, i); break;
      case kFloat64: val = voxel_value<double>(base, i); break;
      default:
        throw std::runtime_error("unsupported NIfTI datatype " + std::to_string(hdr.datatype) +
                                 ": " + path);
    }
    if (hdr.scl_slope != 0.f) val = val * hdr.scl_slope + hdr.scl_inter;
    v.voxels[i] = val;
  }
  return v;
}

void write_raw(const std::string& path, int nx, int ny, int nz, float sx, float sy, float sz,
               std::int16_t datatype, const void* data, std::size_t bytes) {
  Nifti1Header hdr;
  std::memset(&hdr, 0, sizeof(hdr));
  hdr.sizeof_hdr = 348;
  hdr.dim[0] = 3;
  hdr.dim[1] = static_cast<std::int16_t>(nx);
  hdr.dim[2] = static_cast<std::int16_t>(ny);
  hdr.dim[3] = static_cast<std::int16_t>(nz);
  for (int d = 4; d < 8; ++d) hdr.dim[d] = 1;
  hdr.datatype = datatype;
  hdr.bitpix = datatype == kUInt8 ? 8 : 32;
  hdr.pixdim[0] = 1.f;
  hdr.pixdim[1] = sx;
  hdr.pixdim[2] = sy;
  hdr.pixdim[3] = sz;
  hdr.vox_offset = 352.f;
  hdr.scl_slope = 1.f;
  hdr.xyzt_units = 2;  // mm
  std::memcpy(hdr.magic, "n+1", 4);

  const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  gzFile f = gzopen(path.c_str(), gz ? "wb" : "wbT");  // T = no compression wrapper
  if (!f) throw std::runtime_error("cannot write NIfTI file: " + path);
  const char pad[4] = {0, 0, 0, 0};
  bool ok = gzwrite(f, &hdr, sizeof(hdr)) == static_cast<int>(sizeof(hdr));
  ok = ok && gzwrite(f, pad, 4) == 4;
  ok = ok && gzwrite(f, data, static_cast<unsigned>(bytes)) == static_cast<int>(bytes);
  gzclose(f);
  if (!ok) throw std::runtime_error("short write on NIfTI file: " + path);
}

}  // namespace

ImageVolume read_nifti_image(const std::string& path) {
  const RawVolume raw = read_raw(path);
  ImageVolume vol;
  vol.spacing = {raw.sy, raw.sx, raw.sz};
  vol.slices.reserve(raw.nz);
  for (int z = 0; z < raw.nz; ++z) {
    Eigen::MatrixXf sl(raw.ny, raw.nx);
    for (int y = 0; y < raw.ny; ++y)
      for (int x = 0; x < raw.nx; ++x)
        sl(y, x) = raw.voxels[static_cast<std::size_t>(z) * raw.ny * raw.nx +
                              static_cast<std::size_t>(y) * raw.nx + x];
    vol.slices.push_back(std::move(sl));
  }
  vol.validate();
  return vol;
}

LabelVolume read_nifti_labels(const std::string& path, int num_classes) {
  const RawVolume raw = read_raw(path);
  LabelVolume vol;
  vol.num_classes = num_classes;
  vol.slices.reserve(raw.nz);
  int max_label = 0;
  for (int z = 0; z < raw.nz; ++z) {
    LabelMat sl(raw.ny, raw.nx);
    for (int y = 0; y < raw.ny; ++y)
      for (int x = 0; x < raw.nx; ++x) {
        const float v = raw.voxels[static_cast<std::size_t>(z) * raw.ny * raw.nx +
                                   static_cast<std::size_t>(y) * raw.nx + x];
        sl(y, x) = static_cast<int>(std::lround(v));
        max_label = std::max(max_label, sl(y, x));
      }
    vol.slices.push_back(std::move(sl));
  }
  if (vol.num_classes <= 0) vol.num_classes = max_label + 1;
  vol.validate();
  return vol;
}

void write_nifti_image(const ImageVolume& volume, const std::string& path) {
  volume.validate();
  const int ny = volume.height(), nx = volume.width(), nz = volume.depth();
  std::vector<float> flat(static_cast<std::size_t>(nx) * ny * nz);
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        flat[static_cast<std::size_t>(z) * ny * nx + static_cast<std::size_t>(y) * nx + x] =
            volume.slices[z](y, x);
  write_raw(path, nx, ny, nz, volume.spacing[1], volume.spacing[0], volume.spacing[2], kFloat32,
            flat.data(), flat.size() * sizeof(float));
}

void write_nifti_labels(const LabelVolume& labels, const std::array<float, 3>& spacing,
                        const std::string& path) {
  labels.validate();
  const int nz = labels.depth();
  const int ny = static_cast<int>(labels.slices[0].rows());
  const int nx = static_cast<int>(labels.slices[0].cols());
  std::vector<std::uint8_t> flat(static_cast<std::size_t>(nx) * ny * nz);
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        flat[static_cast<std::size_t>(z) * ny * nx + static_cast<std::size_t>(y) * nx + x] =
            static_cast<std::uint8_t>(labels.slices[z](y, x));
  write_raw(path, nx, ny, nz, spacing[1], spacing[0], spacing[2], kUInt8, flat.data(),
            flat.size());
}

}  // namespace tdaug
