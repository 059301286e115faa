#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "demote/data.hpp"
#include "demote/model.hpp"

namespace demote {

// Parallel label sequences for one evaluation. Group ids are protected labels.
struct PredictionSet {
  std::vector<int> gold;
  std::vector<int> predicted;
  std::vector<int> groups;
  int num_target_classes = 2;
  int num_protected_classes = 2;
  std::vector<int> toxic_classes{1};
  int none_class = 0;

  std::size_t size() const { return gold.size(); }
  void validate() const;
};

// A rate with its denominator. Zero support means undefined; value is then 0
// and must not be read as a measurement.
struct Rate {
  long hits = 0;
  long support = 0;
  double value = 0.0;

  bool defined() const { return support > 0; }
  bool operator==(const Rate&) const = default;
};

using ClassGroup = std::pair<int, int>;

double accuracy(const PredictionSet& p);

struct MacroF1 {
  double value = 0.0;
  std::vector<double> per_class;
  // Classes with no gold and no predicted instances; they count as F1 = 0.
  std::vector<int> absent_classes;
};
MacroF1 macro_f1(const PredictionSet& p);

// One-vs-rest FPR per toxic class c and group g: among examples of group g
// whose gold label is not c, the fraction predicted c.
std::map<ClassGroup, Rate> fpr_by_group(const PredictionSet& p);
// Recall of toxic class c within group g.
std::map<ClassGroup, Rate> tpr_by_group(const PredictionSet& p);

struct FairnessGaps {
  // Signed group-1 minus group-0 differences; nullopt when a cell is undefined.
  std::map<int, std::optional<double>> fpr_gap;
  std::map<int, std::optional<double>> eoo_gap;
};
FairnessGaps fairness_gaps(const PredictionSet& p);

struct AuditReport {
  int num_target_classes = 2;
  int num_protected_classes = 2;
  std::vector<int> toxic_classes;
  int none_class = 0;
  long n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<int> absent_classes;
  std::map<ClassGroup, Rate> fpr;
  std::map<ClassGroup, Rate> tpr;
  std::map<int, std::optional<double>> fpr_gap;
  std::map<int, std::optional<double>> eoo_gap;
  // Count of examples per (gold target class, group).
  std::map<ClassGroup, long> support;
  std::optional<double> adversary_accuracy;
  std::vector<double> adversary_accuracies;

  bool operator==(const AuditReport&) const = default;
};

AuditReport audit(const PredictionSet& p);

// Mean FPR of the given group over the toxic classes with defined cells;
// nullopt if none are defined.
std::optional<double> mean_group_fpr(const std::map<ClassGroup, Rate>& fpr,
                                     const std::vector<int>& toxic_classes, int group);

struct Leakage {
  std::vector<double> per_adversary;
  double mean = 0.0;
};

// Accuracy of argmax D_k(H(x)) against the protected labels.
Leakage adversary_leakage(const ModelParams& params, const EncodedDataset& data);
Leakage adversary_leakage_from_reps(const ModelParams& params, const Matrix& reps,
                                    std::span<const int> protected_labels);

// Classifier predictions for every example, in order.
std::vector<int> predict_targets(const ModelParams& params, const EncodedDataset& data);

PredictionSet make_prediction_set(const EncodedDataset& data, std::vector<int> predicted,
                                  std::vector<int> toxic_classes, int none_class = 0);

}  // namespace demote
