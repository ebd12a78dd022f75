#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace driftlab::exp {

struct GradcheckCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

// Finite-difference check of every differentiable op and of the full
// sender+receiver Gumbel pipeline (through the frozen straight-through
// surrogate), `probes` coordinates each.
std::vector<GradcheckCase> gradcheck_suite(std::uint64_t seed = 7, std::size_t probes = 20);

}  // namespace driftlab::exp
