#pragma once

#include <array>
#include <cstdint>

#include "demote/data.hpp"

namespace demote {

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct SplitResult {
  Dataset train;
  Dataset dev;
  Dataset test;
  // False when some (target, protected) cell could not be represented in
  // every split and the split fell back to an unstratified shuffle.
  bool stratified = true;
};

// Sizes are fixed by largest-remainder rounding of ratio * N. Within each
// (target, protected) cell, members are shuffled with the seed and dealt out
// proportionally; cells with at least three members get at least one example
// in every split.
SplitResult split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed);

// Largest-remainder apportionment of total across weights (ties go to the
// earlier slot).
std::array<int, 3> largest_remainder(int total, const std::array<double, 3>& weights);

}  // namespace demote
