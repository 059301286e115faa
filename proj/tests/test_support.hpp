#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "demote/model.hpp"
#include "demote/rng.hpp"

namespace demote::testing {

inline ModelDims tiny_dims(int n_adversaries = 2) {
  ModelDims d;
  d.vocab_size = 9;
  d.d_emb = 4;
  d.d_h = 4;
  d.d_mlp = 4;
  d.num_target_classes = 3;
  d.num_protected_classes = 2;
  d.n_adversaries = n_adversaries;
  return d;
}

// Random sequences of mixed lengths (including length 1) over ids >= 2.
inline EncodedDataset random_encoded(const ModelDims& dims, int n, int max_len,
                                     std::uint64_t seed) {
  Rng rng(seed);
  EncodedDataset data;
  data.max_len = max_len;
  data.num_target_classes = dims.num_target_classes;
  data.num_protected_classes = dims.num_protected_classes;
  for (int i = 0; i < n; ++i) {
    const int len = i == 0 ? 1 : 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_len)));
    for (int t = 0; t < max_len; ++t) {
      data.ids.push_back(t < len ? 2 + static_cast<int>(rng.index(
                                           static_cast<std::size_t>(dims.vocab_size - 2)))
                                 : 0);
    }
    data.lengths.push_back(len);
    data.targets.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(dims.num_target_classes))));
    data.protected_labels.push_back(
        static_cast<int>(rng.index(static_cast<std::size_t>(dims.num_protected_classes))));
  }
  return data;
}

// Flat views of every tensor entry, in visit order, tagged with the group
// ("encoder", "classifier", "adversary<k>") the tensor belongs to.
struct TensorView {
  std::string name;
  std::string group;
  double* data;
  long size;
};

template <typename P>
std::vector<TensorView> tensor_views(P& params) {
  std::vector<TensorView> out;
  P::visit(params, [&](const std::string& name, auto& t) {
    out.push_back({name, name.substr(0, name.find('.')), t.data(), static_cast<long>(t.size())});
  });
  return out;
}

// Materializes optional gradient groups as a full-shape parameter set with
// zeros where a group is absent.
inline ModelParams dense_grads(const ModelParams& params, const ModelGrads& g) {
  ModelParams out = params;
  out.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
  if (g.encoder) out.encoder = *g.encoder;
  if (g.classifier) out.classifier = *g.classifier;
  for (std::size_t k = 0; k < g.adversaries.size(); ++k) {
    if (g.adversaries[k]) out.adversaries[k] = *g.adversaries[k];
  }
  return out;
}

inline bool group_present(const ModelGrads& g, const std::string& group) {
  if (group == "encoder") return g.encoder.has_value();
  if (group == "classifier") return g.classifier.has_value();
  const std::size_t k = std::stoul(group.substr(std::string("adversary").size()));
  return k < g.adversaries.size() && g.adversaries[k].has_value();
}

struct GradCheck {
  // Largest per-tensor relative error ||a - n|| / max(||a||, ||n||, floor).
  double max_rel_error = 0.0;
  std::string worst;
  // Largest per-entry |a - n| / max(|a|, |n|, floor), for diagnostics only:
  // on entries whose gradient is tiny it is dominated by the O(step^2)
  // truncation error of the difference quotient.
  double max_entry_rel_error = 0.0;
  std::string worst_entry;
  long entries = 0;
  std::vector<std::string> present_groups;
};

// Central differences on evaluate_loss(...).total against the analytic
// gradient for every entry of every group the objective returns.
inline GradCheck check_gradients(ModelParams params, const Batch& batch, const LossSpec& spec,
                                 double step = 1e-3, double floor = 1e-12) {
  const GradientResult res = backward(params, batch, spec);
  ModelParams analytic = dense_grads(params, res.grads);
  GradCheck out;
  auto p_views = tensor_views(params);
  auto a_views = tensor_views(analytic);
  for (std::size_t v = 0; v < p_views.size(); ++v) {
    if (!group_present(res.grads, p_views[v].group)) continue;
    if (out.present_groups.empty() || out.present_groups.back() != p_views[v].group) {
      out.present_groups.push_back(p_views[v].group);
    }
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (long i = 0; i < p_views[v].size; ++i) {
      double& x = p_views[v].data[i];
      const double saved = x;
      x = saved + step;
      const double up = evaluate_loss(params, batch, spec).total;
      x = saved - step;
      const double down = evaluate_loss(params, batch, spec).total;
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = a_views[v].data[i];
      diff_sq += (a - numeric) * (a - numeric);
      a_sq += a * a;
      n_sq += numeric * numeric;
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.entries;
      if (rel > out.max_entry_rel_error) {
        out.max_entry_rel_error = rel;
        out.worst_entry = p_views[v].name + "[" + std::to_string(i) + "]";
      }
    }
    const double rel = std::sqrt(diff_sq) / std::max({std::sqrt(a_sq), std::sqrt(n_sq), floor});
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = p_views[v].name;
    }
  }
  return out;
}

}  // namespace demote::testing
