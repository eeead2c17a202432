#pragma once

#include <cstdint>
#include <filesystem>

#include "shiftnet/volume.hpp"

namespace shiftnet::nifti {

// Single-file NIfTI-1 (.nii), little-endian, uncompressed.
// Scalars are written with dim[0] = 3; multi-channel volumes as vector
// fields with dim[0] = 5, dim[4] = 1, dim[5] = channels, intent code 1007.

enum class DataType : std::int16_t { UInt8 = 2, Float32 = 16 };

inline constexpr std::int16_t kIntentVector = 1007;
inline constexpr std::int32_t kHeaderSize = 348;
inline constexpr float kVoxOffset = 352.0f;

#pragma pack(push, 1)
struct Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
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
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Header) == 348, "NIfTI-1 header must be 348 bytes");

// Header describing `vol` as it would be written.
Header make_header(const Volume& vol, DataType dtype);

// Decode geometry/channel layout from a header; throws on malformed fields.
Geometry geometry_from_header(const Header& hdr, int* channels);

Volume read(const std::filesystem::path& path);
void write(const Volume& vol, const std::filesystem::path& path,
           DataType dtype = DataType::Float32);

// Raw header of an existing file (validates magic and size only).
Header read_header(const std::filesystem::path& path);

}  // namespace shiftnet::nifti
