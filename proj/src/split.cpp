#include "demote/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "demote/errors.hpp"
#include "demote/rng.hpp"

namespace demote {

std::array<int, 3> largest_remainder(int total, const std::array<double, 3>& weights) {
  std::array<int, 3> out{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = weights[s] * total;
    out[s] = static_cast<int>(std::floor(exact));
    frac[s] = exact - out[s];
    assigned += out[s];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int k = 0; assigned < total; ++k, ++assigned) ++out[order[k % 3]];
  return out;
}

namespace {

Dataset subset(const Dataset& source, std::vector<std::size_t> indices, const char* suffix) {
  std::sort(indices.begin(), indices.end());
  Dataset out;
  out.name = source.name + suffix;
  out.num_target_classes = source.num_target_classes;
  out.num_protected_classes = source.num_protected_classes;
  out.examples.reserve(indices.size());
  for (std::size_t i : indices) out.examples.push_back(source.examples[i]);
  return out;
}

}  // namespace

SplitResult split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.dev, ratios.test};
  if (std::any_of(r.begin(), r.end(), [](double x) { return !(x > 0.0); }) ||
      std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw ValidationError("split ratios must be positive and sum to 1");
  }
  if (dataset.examples.empty()) throw ValidationError("cannot split an empty dataset");

  const int n = static_cast<int>(dataset.size());
  const std::array<int, 3> target = largest_remainder(n, r);
  Rng rng(seed);

  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    cells[{dataset.examples[i].target, dataset.examples[i].protected_label}].push_back(i);
  }
  std::vector<std::vector<std::size_t>> members;
  for (auto& [key, idx] : cells) {
    rng.shuffle(idx);
    members.push_back(idx);
  }

  const std::size_t num_cells = members.size();
  std::vector<std::array<int, 3>> quota(num_cells);
  std::vector<int> floor_of(num_cells);
  bool stratified = true;
  for (std::size_t c = 0; c < num_cells; ++c) {
    const int nc = static_cast<int>(members[c].size());
    floor_of[c] = nc >= 3 ? 1 : 0;
    quota[c] = largest_remainder(nc, r);
    if (nc >= 3) {
      for (int s = 0; s < 3; ++s) {
        if (quota[c][s] == 0) {
          const auto donor = std::max_element(quota[c].begin(), quota[c].end()) - quota[c].begin();
          --quota[c][donor];
          ++quota[c][s];
        }
      }
    }
  }

  // Move single units between splits until column totals hit the global sizes.
  auto column = [&](int s) {
    int sum = 0;
    for (const auto& q : quota) sum += q[s];
    return sum;
  };
  for (int guard = 0; stratified && guard < 4 * n + 8; ++guard) {
    int over = -1;
    int under = -1;
    for (int s = 0; s < 3; ++s) {
      const int col = column(s);
      if (col > target[s] && over < 0) over = s;
      if (col < target[s] && under < 0) under = s;
    }
    if (over < 0) break;
    std::ptrdiff_t best = -1;
    double best_excess = -1e300;
    for (std::size_t c = 0; c < num_cells; ++c) {
      if (quota[c][over] <= floor_of[c]) continue;
      const double excess = quota[c][over] - r[over] * static_cast<double>(members[c].size());
      if (excess > best_excess) {
        best_excess = excess;
        best = static_cast<std::ptrdiff_t>(c);
      }
    }
    if (best < 0) {
      stratified = false;
      break;
    }
    --quota[best][over];
    ++quota[best][under];
  }
  for (int s = 0; s < 3 && stratified; ++s) stratified = column(s) == target[s];

  std::array<std::vector<std::size_t>, 3> parts;
  if (stratified) {
    for (std::size_t c = 0; c < num_cells; ++c) {
      std::size_t pos = 0;
      for (int s = 0; s < 3; ++s) {
        for (int k = 0; k < quota[c][s]; ++k) parts[s].push_back(members[c][pos++]);
      }
    }
  } else {
    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    Rng fallback(derive_seed(seed, 1));
    fallback.shuffle(all);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (int k = 0; k < target[s]; ++k) parts[s].push_back(all[pos++]);
    }
  }

  SplitResult out;
  out.train = subset(dataset, std::move(parts[0]), "-train");
  out.dev = subset(dataset, std::move(parts[1]), "-dev");
  out.test = subset(dataset, std::move(parts[2]), "-test");
  out.stratified = stratified;
  return out;
}

}  // namespace demote
