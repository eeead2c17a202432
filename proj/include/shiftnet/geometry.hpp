#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shiftnet/volume.hpp"

namespace shiftnet {

// x -> rotation * x + translation, world mm.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  // (this ∘ inner)(x) = this(inner(x))
  RigidTransform compose(const RigidTransform& inner) const;
  bool is_valid(double tol = 1e-9) const;
};

struct Landmark {
  std::string name;
  Vec3 position;
};

// Named world points (mm). Names are unique.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<Landmark> entries);

  const std::vector<Landmark>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& name) const { return find(name).has_value(); }
  std::optional<Vec3> find(const std::string& name) const;
  // Throws MissingLandmark naming the absentee.
  Vec3 at(const std::string& name) const;

  // Adds or replaces.
  void set(const std::string& name, const Vec3& position);

  LandmarkSet transformed(const RigidTransform& t) const;

 private:
  std::vector<Landmark> entries_;
};

// Names recognised by the anatomical scheme (AC, PC, IH, P1L ... P6R).
const std::vector<std::string>& known_landmark_names();

// World -> AC-PC-IH frame. Origin at AC, +y along PC->AC, +z toward IH
// (orthogonalised against y), +x = y × z.
RigidTransform acpc_frame(const Vec3& ac, const Vec3& pc, const Vec3& ih);

// Least-squares rigid map src -> dst over shared names (Kabsch with
// reflection guard).
RigidTransform fit_rigid(const LandmarkSet& src, const LandmarkSet& dst);

// Root-mean-square residual of t(src) vs dst over shared names.
double rigid_rmsd(const RigidTransform& t, const LandmarkSet& src, const LandmarkSet& dst);

// Pull-resample `vol` onto `target` where t maps source world to target world:
// out(v) = vol.sample(t^-1(world_target(v))).
Volume resample(const Volume& vol, const RigidTransform& t, const Geometry& target);

// JSON array of {"name": string, "pos_mm": [x, y, z]}.
LandmarkSet read_landmarks(const std::filesystem::path& path);
void write_landmarks(const LandmarkSet& set, const std::filesystem::path& path);

}  // namespace shiftnet
