#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftnet/synth.hpp"

namespace shiftnet {

void to_json(nlohmann::json& j, const PhantomParams& p);
void from_json(const nlohmann::json& j, PhantomParams& p);

struct CohortSpec {
  std::uint64_t seed = 1;
  int n_cases = 27;
  Index3 dims{32, 32, 32};
  PhantomParams phantom;
};

struct CohortEntry {
  std::string id;
  std::uint64_t seed;
  Side side;
};

// Per-case seeds and sides; sides alternate right/left starting at right.
std::vector<CohortEntry> plan_cohort(const CohortSpec& spec);
std::vector<Case> generate_cohort(const CohortSpec& spec, int threads = 1);

// Case directory: pmri, half_mask, mask_pre, gt_disp, gt_mask_intra, gt_sdf,
// imri (.nii), gt_cpp.nii, landmarks_pre.json, landmarks_intra.json, case.json.
void write_case(const Case& c, const std::string& id, const std::filesystem::path& dir);
Case read_case(const std::filesystem::path& dir);
// Only what inference needs: pmri, half_mask, mask_pre and, when listed,
// the preoperative landmarks.
Case read_case_inputs(const std::filesystem::path& dir);

// Cohort directory: manifest.json plus one subdirectory per case.
void write_cohort(const std::vector<Case>& cases, const CohortSpec& spec, const std::filesystem::path& dir);
struct Cohort {
  std::vector<std::string> ids;
  std::vector<Case> cases;
  nlohmann::json manifest;
};
Cohort read_cohort(const std::filesystem::path& dir);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace shiftnet
