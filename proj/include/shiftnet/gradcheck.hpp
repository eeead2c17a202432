#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace shiftnet {

struct GradcheckResult {
  std::string name;
  int checked = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  // Draws rejected because a probe crossed a non-differentiable switch.
  int skipped = 0;
  int required = 0;
  bool passed() const { return checked >= required && max_rel_err < tolerance; }
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-7);

// Every loss term and the weighted total on random 5^3 inputs, all entries,
// central differences with h = 1e-5.
std::vector<GradcheckResult> gradcheck_losses(std::uint64_t seed, double tolerance = 1e-4);

// Whole network on a 4^3 input under a random linear read-out of the three
// heads; `n_params` random parameters, h = 1e-4. Parameters whose probes
// change any ReLU sign or pooling argmax are redrawn.
GradcheckResult gradcheck_network(std::uint64_t seed, int n_params = 50, double tolerance = 1e-3);

}  // namespace shiftnet
