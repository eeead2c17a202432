#include "shiftnet/geometry.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <json.hpp>

#include "shiftnet/error.hpp"

namespace shiftnet {

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform out;
  out.rotation = rotation * inner.rotation;
  out.translation = rotation * inner.translation + translation;
  return out;
}

bool RigidTransform::is_valid(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::fabs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

LandmarkSet::LandmarkSet(std::vector<Landmark> entries) {
  for (auto& e : entries) {
    if (contains(e.name)) {
      throw Error(ErrorCode::InvalidArgument, e.name, "duplicate landmark name");
    }
    if (!e.position.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, e.name, "landmark position is not finite");
    }
    entries_.push_back(std::move(e));
  }
}

std::optional<Vec3> LandmarkSet::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.position;
  }
  return std::nullopt;
}

Vec3 LandmarkSet::at(const std::string& name) const {
  if (auto p = find(name)) return *p;
  throw Error(ErrorCode::MissingLandmark, name, "landmark not present");
}

void LandmarkSet::set(const std::string& name, const Vec3& position) {
  if (!position.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, name, "landmark position is not finite");
  }
  for (auto& e : entries_) {
    if (e.name == name) {
      e.position = position;
      return;
    }
  }
  entries_.push_back({name, position});
}

LandmarkSet LandmarkSet::transformed(const RigidTransform& t) const {
  LandmarkSet out;
  for (const auto& e : entries_) out.entries_.push_back({e.name, t.apply(e.position)});
  return out;
}

const std::vector<std::string>& known_landmark_names() {
  static const std::vector<std::string> names = {"AC",  "PC",  "IH", "P1L", "P1R", "P2L", "P2R",
                                                 "P3",  "P4L", "P4R", "P5", "P6L", "P6R"};
  return names;
}

RigidTransform acpc_frame(const Vec3& ac, const Vec3& pc, const Vec3& ih) {
  const Vec3 ap = ac - pc;
  const double len = ap.norm();
  if (!(len > 1e-6)) {
    throw Error(ErrorCode::CollinearLandmarks, "PC", "AC and PC coincide");
  }
  const Vec3 y = ap / len;
  const Vec3 up = ih - ac;
  const Vec3 up_ortho = up - up.dot(y) * y;
  const double h = up_ortho.norm();
  if (!(h >= 1e-6)) {
    throw Error(ErrorCode::CollinearLandmarks, "IH", "AC, PC and IH are collinear");
  }
  const Vec3 z = up_ortho / h;
  const Vec3 x = y.cross(z);

  RigidTransform t;
  t.rotation.row(0) = x.transpose();
  t.rotation.row(1) = y.transpose();
  t.rotation.row(2) = z.transpose();
  t.translation = -(t.rotation * ac);
  return t;
}

RigidTransform fit_rigid(const LandmarkSet& src, const LandmarkSet& dst) {
  std::vector<Vec3> a, b;
  for (const auto& e : src.entries()) {
    if (auto q = dst.find(e.name)) {
      a.push_back(e.position);
      b.push_back(*q);
    }
  }
  if (a.size() < 3) {
    throw Error(ErrorCode::InsufficientCorrespondences, "landmarks",
                "need >= 3 shared names, have " + std::to_string(a.size()));
  }
  const double n = static_cast<double>(a.size());
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= n;
  cb /= n;

  Mat3 cov = Mat3::Zero();
  double spread = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ca) * (b[i] - cb).transpose();
    spread += (a[i] - ca).squaredNorm();
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  // Rank < 2 means the source points are collinear (or coincide).
  if (!(sv[1] > 1e-9 * std::max(1.0, sv[0])) || !(spread > 1e-12)) {
    throw Error(ErrorCode::DegenerateConfiguration, "landmarks",
                "correspondences are collinear or coincident");
  }
  Mat3 v = svd.matrixV();
  const Mat3 u = svd.matrixU();
  if ((v * u.transpose()).determinant() < 0) v.col(2) *= -1.0;

  RigidTransform t;
  t.rotation = v * u.transpose();
  t.translation = cb - t.rotation * ca;
  return t;
}

double rigid_rmsd(const RigidTransform& t, const LandmarkSet& src, const LandmarkSet& dst) {
  double sum = 0.0;
  int n = 0;
  for (const auto& e : src.entries()) {
    if (auto q = dst.find(e.name)) {
      sum += (t.apply(e.position) - *q).squaredNorm();
      ++n;
    }
  }
  return n == 0 ? 0.0 : std::sqrt(sum / n);
}

Volume resample(const Volume& vol, const RigidTransform& t, const Geometry& target) {
  const RigidTransform inv = t.inverse();
  Volume out(target, vol.channels());
  const auto& d = target.dims;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Vec3 src = vol.geometry().world_to_voxel(inv.apply(target.voxel_to_world(i, j, k)));
        for (int c = 0; c < vol.channels(); ++c) out.at(i, j, k, c) = vol.sample_voxel(src, c);
      }
  return out;
}

LandmarkSet read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, path.string(), "cannot open landmark file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, path.string(), std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::Io, path.string(), "expected a JSON array");
  std::vector<Landmark> entries;
  for (const auto& item : j) {
    if (!item.contains("name") || !item.contains("pos_mm") || !item["pos_mm"].is_array() ||
        item["pos_mm"].size() != 3) {
      throw Error(ErrorCode::Io, path.string(), "entries need \"name\" and 3-element \"pos_mm\"");
    }
    const auto& p = item["pos_mm"];
    entries.push_back({item["name"].get<std::string>(),
                       Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>())});
  }
  return LandmarkSet(std::move(entries));
}

void write_landmarks(const LandmarkSet& set, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : set.entries()) {
    j.push_back({{"name", e.name}, {"pos_mm", {e.position[0], e.position[1], e.position[2]}}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, path.string(), "cannot open for writing");
  out << j.dump(2) << '\n';
}

}  // namespace shiftnet
