#include "shiftnet/nifti.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "shiftnet/error.hpp"

namespace shiftnet::nifti {

namespace {

constexpr char kMagic[4] = {'n', '+', '1', '\0'};

Mat3 nearest_rotation_or_reflection(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case static_cast<std::int16_t>(DataType::UInt8): return 1;
    case static_cast<std::int16_t>(DataType::Float32): return 4;
    default: return 0;
  }
}

}  // namespace

Header make_header(const Volume& vol, DataType dtype) {
  Header h;
  std::memset(&h, 0, sizeof(h));
  const Geometry& g = vol.geometry();
  h.sizeof_hdr = kHeaderSize;
  h.regular = 'r';
  if (vol.channels() == 1) {
    h.dim[0] = 3;
  } else {
    h.dim[0] = 5;
    h.dim[4] = 1;
    h.dim[5] = static_cast<std::int16_t>(vol.channels());
    h.intent_code = kIntentVector;
  }
  for (int a = 0; a < 3; ++a) h.dim[a + 1] = static_cast<std::int16_t>(g.dims[a]);
  for (int a = 4; a < 8; ++a) {
    if (h.dim[a] == 0) h.dim[a] = 1;
  }
  h.datatype = static_cast<std::int16_t>(dtype);
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(h.datatype));
  for (int a = 0; a < 8; ++a) h.pixdim[a] = 1.0f;
  for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(g.spacing[a]);
  h.vox_offset = kVoxOffset;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2 | 8;  // mm, s

  Mat3 rot = g.direction;
  float qfac = 1.0f;
  if (rot.determinant() < 0) {
    qfac = -1.0f;
    rot.col(2) *= -1.0;
  }
  h.pixdim[0] = qfac;
  Eigen::Quaterniond q(rot);
  if (q.w() < 0) q.coeffs() *= -1.0;
  h.qform_code = 1;
  h.quatern_b = static_cast<float>(q.x());
  h.quatern_c = static_cast<float>(q.y());
  h.quatern_d = static_cast<float>(q.z());
  h.qoffset_x = static_cast<float>(g.origin[0]);
  h.qoffset_y = static_cast<float>(g.origin[1]);
  h.qoffset_z = static_cast<float>(g.origin[2]);

  h.sform_code = 1;
  const Mat3 affine = g.direction * g.spacing.asDiagonal();
  float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rows[r][c] = static_cast<float>(affine(r, c));
    rows[r][3] = static_cast<float>(g.origin[r]);
  }
  std::memcpy(h.magic, kMagic, 4);
  return h;
}

Geometry geometry_from_header(const Header& h, int* channels) {
  if (h.sizeof_hdr != kHeaderSize) {
    throw Error(ErrorCode::NiftiMagic, "sizeof_hdr",
                "expected 348, got " + std::to_string(h.sizeof_hdr) +
                    " (big-endian or not NIfTI-1)");
  }
  if (std::memcmp(h.magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::NiftiMagic, "magic", "expected \"n+1\\0\" single-file NIfTI-1");
  }
  if (bytes_per_voxel(h.datatype) == 0) {
    throw Error(ErrorCode::NiftiDtype, "datatype",
                "unsupported datatype code " + std::to_string(h.datatype) +
                    " (only uint8=2 and float32=16)");
  }
  if (h.bitpix != static_cast<std::int16_t>(8 * bytes_per_voxel(h.datatype))) {
    throw Error(ErrorCode::NiftiDtype, "bitpix", "inconsistent with datatype");
  }
  const int ndim = h.dim[0];
  if (ndim < 1 || ndim > 7) {
    throw Error(ErrorCode::NiftiDims, "dim[0]", "must be in 1..7, got " + std::to_string(ndim));
  }
  Geometry g;
  for (int a = 0; a < 3; ++a) {
    const int n = a < ndim ? h.dim[a + 1] : 1;
    if (n < 1) {
      throw Error(ErrorCode::NiftiDims, "dim[" + std::to_string(a + 1) + "]", "must be >= 1");
    }
    g.dims[a] = n;
  }
  int nchan = 1;
  if (ndim >= 4 && h.dim[4] > 1) {
    throw Error(ErrorCode::NiftiDims, "dim[4]", "time series are not supported");
  }
  if (ndim >= 5) {
    nchan = h.dim[5];
    if (nchan < 1) throw Error(ErrorCode::NiftiDims, "dim[5]", "must be >= 1");
    for (int a = 6; a <= ndim; ++a) {
      if (h.dim[a] > 1) {
        throw Error(ErrorCode::NiftiDims, "dim[" + std::to_string(a) + "]", "must be 1");
      }
    }
  }
  if (nchan > 1 && h.intent_code != kIntentVector) {
    throw Error(ErrorCode::NiftiDims, "intent_code",
                "multi-component data requires intent code 1007 (vector)");
  }
  *channels = nchan;

  if (h.sform_code > 0) {
    Mat3 affine;
    const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) affine(r, c) = rows[r][c];
      g.origin[r] = rows[r][3];
    }
    for (int c = 0; c < 3; ++c) {
      g.spacing[c] = affine.col(c).norm();
      if (!(g.spacing[c] > 0)) {
        throw Error(ErrorCode::NiftiDims, "srow", "degenerate sform column");
      }
      affine.col(c) /= g.spacing[c];
    }
    g.direction = nearest_rotation_or_reflection(affine);
  } else {
    for (int a = 0; a < 3; ++a) {
      g.spacing[a] = std::fabs(h.pixdim[a + 1]);
      if (!(g.spacing[a] > 0)) {
        throw Error(ErrorCode::NiftiDims, "pixdim[" + std::to_string(a + 1) + "]",
                    "spacing must be positive");
      }
    }
    if (h.qform_code > 0) {
      const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
      const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
      Mat3 rot = Eigen::Quaterniond(a, b, c, d).normalized().toRotationMatrix();
      if (h.pixdim[0] < 0) rot.col(2) *= -1.0;
      g.direction = rot;
      g.origin = Vec3(h.qoffset_x, h.qoffset_y, h.qoffset_z);
    }
  }
  return g;
}

Header read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, path.string(), "cannot open for reading");
  Header h;
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(h))) {
    throw Error(ErrorCode::NiftiMagic, "sizeof_hdr", "file shorter than a NIfTI-1 header");
  }
  return h;
}

Volume read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, path.string(), "cannot open for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(Header)) {
    throw Error(ErrorCode::NiftiMagic, "sizeof_hdr", "file shorter than a NIfTI-1 header");
  }
  Header h;
  std::memcpy(&h, bytes.data(), sizeof(h));
  int channels = 1;
  const Geometry g = geometry_from_header(h, &channels);

  const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  if (h.vox_offset < static_cast<float>(kHeaderSize)) {
    throw Error(ErrorCode::NiftiDims, "vox_offset", "must be >= 348");
  }
  const std::size_t count = g.voxel_count() * channels;
  const std::size_t bpv = bytes_per_voxel(h.datatype);
  if (bytes.size() < offset + count * bpv) {
    throw Error(ErrorCode::NiftiDims, "dim",
                "file holds " + std::to_string(bytes.size() - std::min(bytes.size(), offset)) +
                    " data bytes, header implies " + std::to_string(count * bpv));
  }
  const bool scaled = h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
  std::vector<double> data(count);
  const char* src = bytes.data() + offset;
  if (h.datatype == static_cast<std::int16_t>(DataType::Float32)) {
    for (std::size_t n = 0; n < count; ++n) {
      float f;
      std::memcpy(&f, src + 4 * n, 4);
      data[n] = f;
    }
  } else {
    for (std::size_t n = 0; n < count; ++n) data[n] = static_cast<unsigned char>(src[n]);
  }
  if (scaled) {
    for (double& v : data) v = v * h.scl_slope + h.scl_inter;
  }
  return Volume(g, channels, std::move(data));
}

void write(const Volume& vol, const std::filesystem::path& path, DataType dtype) {
  const Header h = make_header(vol, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  const char extension[4] = {0, 0, 0, 0};
  out.write(extension, 4);
  const auto data = vol.data();
  if (dtype == DataType::Float32) {
    std::vector<float> buf(data.size());
    for (std::size_t n = 0; n < data.size(); ++n) buf[n] = static_cast<float>(data[n]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    std::vector<unsigned char> buf(data.size());
    for (std::size_t n = 0; n < data.size(); ++n) {
      buf[n] = static_cast<unsigned char>(std::clamp(std::lround(data[n]), 0L, 255L));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw Error(ErrorCode::Io, path.string(), "write failed");
}

}  // namespace shiftnet::nifti
