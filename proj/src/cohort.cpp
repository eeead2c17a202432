#include "shiftnet/cohort.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include "shiftnet/error.hpp"
#include "shiftnet/nifti.hpp"

namespace shiftnet {

namespace fs = std::filesystem;

namespace {

struct FileRole {
  const char* role;
  Volume Case::*member;
  nifti::DataType dtype;
};

const std::vector<FileRole>& file_roles() {
  static const std::vector<FileRole> roles = {
      {"pmri", &Case::pmri, nifti::DataType::Float32},
      {"half_mask", &Case::half_mask, nifti::DataType::UInt8},
      {"mask_pre", &Case::mask_pre, nifti::DataType::UInt8},
      {"gt_disp", &Case::gt_disp, nifti::DataType::Float32},
      {"gt_mask_intra", &Case::gt_mask_intra, nifti::DataType::UInt8},
      {"gt_sdf", &Case::gt_sdf, nifti::DataType::Float32},
      {"imri", &Case::imri, nifti::DataType::Float32},
  };
  return roles;
}

std::string case_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%03d", i);
  return buf;
}

}  // namespace

void to_json(nlohmann::json& j, const PhantomParams& p) {
  j = {{"amplitude_mm", p.amplitude_mm},       {"sag_mm", p.sag_mm},
       {"deformation_scale", p.deformation_scale}, {"cp_spacing_mm", p.cp_spacing_mm},
       {"cavity_radius_frac", p.cavity_radius_frac}, {"noise_mm", p.noise_mm},
       {"bias_amplitude", p.bias_amplitude},   {"spacing_mm", p.spacing_mm}};
}

void from_json(const nlohmann::json& j, PhantomParams& p) {
  p.amplitude_mm = j.value("amplitude_mm", p.amplitude_mm);
  p.sag_mm = j.value("sag_mm", p.sag_mm);
  p.deformation_scale = j.value("deformation_scale", p.deformation_scale);
  p.cp_spacing_mm = j.value("cp_spacing_mm", p.cp_spacing_mm);
  p.cavity_radius_frac = j.value("cavity_radius_frac", p.cavity_radius_frac);
  p.noise_mm = j.value("noise_mm", p.noise_mm);
  p.bias_amplitude = j.value("bias_amplitude", p.bias_amplitude);
  p.spacing_mm = j.value("spacing_mm", p.spacing_mm);
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, path.string(), "cannot open for writing");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, path.string(), "cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, path.string(), std::string("invalid JSON: ") + e.what());
  }
}

std::vector<CohortEntry> plan_cohort(const CohortSpec& spec) {
  std::vector<CohortEntry> out;
  for (int i = 0; i < spec.n_cases; ++i) {
    out.push_back({case_id(i), spec.seed * 1000003ULL + static_cast<std::uint64_t>(i),
                   i % 2 == 0 ? Side::Right : Side::Left});
  }
  return out;
}

std::vector<Case> generate_cohort(const CohortSpec& spec, int threads) {
  if (spec.n_cases < 1) throw Error(ErrorCode::InvalidArgument, "n", "cohort needs at least one case");
  const auto plan = plan_cohort(spec);
  std::vector<Case> cases(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      cases[i] = gen_phantom(plan[i].seed, spec.dims, plan[i].side, spec.phantom);
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(plan.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  return cases;
}

void write_case(const Case& c, const std::string& id, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json files;
  for (const auto& r : file_roles()) {
    const std::string name = std::string(r.role) + ".nii";
    nifti::write(c.*(r.member), dir / name, r.dtype);
    files[r.role] = name;
  }
  write_cpp(c.ffd, dir / "gt_cpp.nii");
  files["gt_cpp"] = "gt_cpp.nii";
  write_landmarks(c.landmarks_pre, dir / "landmarks_pre.json");
  write_landmarks(c.landmarks_intra, dir / "landmarks_intra.json");
  nlohmann::json meta = {{"id", id},
                         {"side", to_string(c.side)},
                         {"seed", c.seed},
                         {"files", files},
                         {"landmarks", {{"pre", "landmarks_pre.json"}, {"intra", "landmarks_intra.json"}}}};
  write_json(meta, dir / "case.json");
}

Case read_case(const fs::path& dir) {
  const nlohmann::json meta = read_json(dir / "case.json");
  Case c;
  try {
    c.side = side_from_string(meta.at("side").get<std::string>());
    c.seed = meta.at("seed").get<std::uint64_t>();
    const auto& files = meta.at("files");
    for (const auto& r : file_roles()) c.*(r.member) = nifti::read(dir / files.at(r.role).get<std::string>());
    if (files.contains("gt_cpp")) c.ffd = read_cpp(dir / files.at("gt_cpp").get<std::string>());
    c.landmarks_pre = read_landmarks(dir / meta.at("landmarks").at("pre").get<std::string>());
    c.landmarks_intra = read_landmarks(dir / meta.at("landmarks").at("intra").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, (dir / "case.json").string(), std::string("malformed case file: ") + e.what());
  }
  return c;
}

Case read_case_inputs(const fs::path& dir) {
  const nlohmann::json meta = read_json(dir / "case.json");
  Case c;
  try {
    c.side = side_from_string(meta.at("side").get<std::string>());
    c.seed = meta.value("seed", std::uint64_t{0});
    const auto& files = meta.at("files");
    c.pmri = nifti::read(dir / files.at("pmri").get<std::string>());
    c.half_mask = nifti::read(dir / files.at("half_mask").get<std::string>());
    c.mask_pre = nifti::read(dir / files.at("mask_pre").get<std::string>());
    if (meta.contains("landmarks") && meta["landmarks"].contains("pre")) {
      c.landmarks_pre = read_landmarks(dir / meta["landmarks"]["pre"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, (dir / "case.json").string(), std::string("malformed case file: ") + e.what());
  }
  return c;
}

void write_cohort(const std::vector<Case>& cases, const CohortSpec& spec, const fs::path& dir) {
  fs::create_directories(dir);
  const auto plan = plan_cohort(spec);
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string id = i < plan.size() ? plan[i].id : case_id(static_cast<int>(i));
    write_case(cases[i], id, dir / id);
    entries.push_back({{"id", id}, {"dir", id}, {"seed", cases[i].seed}, {"side", to_string(cases[i].side)}});
  }
  nlohmann::json manifest = {{"seed", spec.seed},
                             {"n_cases", cases.size()},
                             {"dims", spec.dims},
                             {"phantom", spec.phantom},
                             {"cases", entries}};
  write_json(manifest, dir / "manifest.json");
}

Cohort read_cohort(const fs::path& dir) {
  Cohort co;
  co.manifest = read_json(dir / "manifest.json");
  try {
    for (const auto& e : co.manifest.at("cases")) {
      co.ids.push_back(e.at("id").get<std::string>());
      co.cases.push_back(read_case(dir / e.at("dir").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, (dir / "manifest.json").string(), std::string("malformed manifest: ") + e.what());
  }
  if (co.cases.empty()) throw Error(ErrorCode::Io, (dir / "manifest.json").string(), "cohort has no cases");
  return co;
}

}  // namespace shiftnet
