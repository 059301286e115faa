#include "demote/metrics.hpp"

#include <algorithm>

#include "demote/errors.hpp"

namespace demote {

void PredictionSet::validate() const {
  if (gold.empty()) throw ValidationError("prediction set is empty");
  if (predicted.size() != gold.size() || groups.size() != gold.size()) {
    throw ValidationError("prediction set sequences differ in length");
  }
  auto in_range = [](int v, int n) { return v >= 0 && v < n; };
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!in_range(gold[i], num_target_classes) || !in_range(predicted[i], num_target_classes)) {
      throw ValidationError("prediction set: target label out of range at " + std::to_string(i));
    }
    if (!in_range(groups[i], num_protected_classes)) {
      throw ValidationError("prediction set: group out of range at " + std::to_string(i));
    }
  }
  if (toxic_classes.empty()) throw ValidationError("toxic_classes must be non-empty");
  if (!in_range(none_class, num_target_classes)) throw ValidationError("none_class out of range");
  for (int c : toxic_classes) {
    if (!in_range(c, num_target_classes)) throw ValidationError("toxic class out of range");
    if (c == none_class) throw ValidationError("toxic_classes must exclude the none class");
  }
}

double accuracy(const PredictionSet& p) {
  p.validate();
  long correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += p.gold[i] == p.predicted[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(p.size());
}

MacroF1 macro_f1(const PredictionSet& p) {
  p.validate();
  const auto k = static_cast<std::size_t>(p.num_target_classes);
  std::vector<long> tp(k, 0), fp(k, 0), fn(k, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto g = static_cast<std::size_t>(p.gold[i]);
    const auto y = static_cast<std::size_t>(p.predicted[i]);
    if (g == y) {
      ++tp[g];
    } else {
      ++fp[y];
      ++fn[g];
    }
  }
  MacroF1 out;
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const long denom = 2 * tp[c] + fp[c] + fn[c];
    double f1 = 0.0;
    if (denom == 0) {
      out.absent_classes.push_back(static_cast<int>(c));
    } else {
      f1 = 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    }
    out.per_class.push_back(f1);
    sum += f1;
  }
  out.value = sum / static_cast<double>(k);
  return out;
}

namespace {

Rate finish(Rate r) {
  r.value = r.support > 0 ? static_cast<double>(r.hits) / static_cast<double>(r.support) : 0.0;
  return r;
}

}  // namespace

std::map<ClassGroup, Rate> fpr_by_group(const PredictionSet& p) {
  p.validate();
  std::map<ClassGroup, Rate> out;
  for (int c : p.toxic_classes) {
    for (int g = 0; g < p.num_protected_classes; ++g) out[{c, g}] = Rate{};
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (int c : p.toxic_classes) {
      if (p.gold[i] == c) continue;
      Rate& r = out[{c, p.groups[i]}];
      ++r.support;
      if (p.predicted[i] == c) ++r.hits;
    }
  }
  for (auto& [key, r] : out) r = finish(r);
  return out;
}

std::map<ClassGroup, Rate> tpr_by_group(const PredictionSet& p) {
  p.validate();
  std::map<ClassGroup, Rate> out;
  for (int c : p.toxic_classes) {
    for (int g = 0; g < p.num_protected_classes; ++g) out[{c, g}] = Rate{};
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (int c : p.toxic_classes) {
      if (p.gold[i] != c) continue;
      Rate& r = out[{c, p.groups[i]}];
      ++r.support;
      if (p.predicted[i] == c) ++r.hits;
    }
  }
  for (auto& [key, r] : out) r = finish(r);
  return out;
}

namespace {

std::map<int, std::optional<double>> gaps(const std::map<ClassGroup, Rate>& rates,
                                          const std::vector<int>& classes) {
  std::map<int, std::optional<double>> out;
  for (int c : classes) {
    const Rate& g1 = rates.at({c, 1});
    const Rate& g0 = rates.at({c, 0});
    out[c] = g1.defined() && g0.defined() ? std::optional<double>(g1.value - g0.value) : std::nullopt;
  }
  return out;
}

}  // namespace

FairnessGaps fairness_gaps(const PredictionSet& p) {
  FairnessGaps out;
  out.fpr_gap = gaps(fpr_by_group(p), p.toxic_classes);
  out.eoo_gap = gaps(tpr_by_group(p), p.toxic_classes);
  return out;
}

AuditReport audit(const PredictionSet& p) {
  p.validate();
  AuditReport r;
  r.num_target_classes = p.num_target_classes;
  r.num_protected_classes = p.num_protected_classes;
  r.toxic_classes = p.toxic_classes;
  std::sort(r.toxic_classes.begin(), r.toxic_classes.end());
  r.none_class = p.none_class;
  r.n = static_cast<long>(p.size());
  r.accuracy = accuracy(p);
  MacroF1 f1 = macro_f1(p);
  r.macro_f1 = f1.value;
  r.per_class_f1 = std::move(f1.per_class);
  r.absent_classes = std::move(f1.absent_classes);
  r.fpr = fpr_by_group(p);
  r.tpr = tpr_by_group(p);
  r.fpr_gap = gaps(r.fpr, r.toxic_classes);
  r.eoo_gap = gaps(r.tpr, r.toxic_classes);
  for (int c = 0; c < p.num_target_classes; ++c) {
    for (int g = 0; g < p.num_protected_classes; ++g) r.support[{c, g}] = 0;
  }
  for (std::size_t i = 0; i < p.size(); ++i) ++r.support[{p.gold[i], p.groups[i]}];
  return r;
}

std::optional<double> mean_group_fpr(const std::map<ClassGroup, Rate>& fpr,
                                     const std::vector<int>& toxic_classes, int group) {
  double sum = 0.0;
  int count = 0;
  for (int c : toxic_classes) {
    auto it = fpr.find({c, group});
    if (it == fpr.end() || !it->second.defined()) continue;
    sum += it->second.value;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

Leakage adversary_leakage_from_reps(const ModelParams& params, const Matrix& reps,
                                    std::span<const int> protected_labels) {
  Leakage out;
  for (const HeadParams& adv : params.adversaries) {
    const std::vector<int> pred = argmax_columns(head_forward(adv, reps).probs);
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == protected_labels[i] ? 1 : 0;
    out.per_adversary.push_back(static_cast<double>(correct) / static_cast<double>(pred.size()));
  }
  double sum = 0.0;
  for (double a : out.per_adversary) sum += a;
  out.mean = out.per_adversary.empty() ? 0.0 : sum / static_cast<double>(out.per_adversary.size());
  return out;
}

Leakage adversary_leakage(const ModelParams& params, const EncodedDataset& data) {
  return adversary_leakage_from_reps(params, encode_dataset_reps(params.encoder, data),
                                     data.protected_labels);
}

std::vector<int> predict_targets(const ModelParams& params, const EncodedDataset& data) {
  return argmax_columns(head_forward(params.classifier, encode_dataset_reps(params.encoder, data)).probs);
}

PredictionSet make_prediction_set(const EncodedDataset& data, std::vector<int> predicted,
                                  std::vector<int> toxic_classes, int none_class) {
  PredictionSet p;
  p.gold = data.targets;
  p.predicted = std::move(predicted);
  p.groups = data.protected_labels;
  p.num_target_classes = data.num_target_classes;
  p.num_protected_classes = data.num_protected_classes;
  p.toxic_classes = std::move(toxic_classes);
  p.none_class = none_class;
  return p;
}

}  // namespace demote
