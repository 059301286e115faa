#pragma once

#include <string>

#include "demote/data.hpp"
#include "demote/metrics.hpp"
#include "demote/training.hpp"

namespace demote {

struct ExperimentData {
  Dataset train;
  Dataset dev;
  Dataset test;
};

struct TrainedModel {
  ModelParams params;
  int selected_epoch = 0;
  TrainingLog log;
  AuditReport test_report;
  // Adversary dev accuracy after refitting against this model's encoder.
  Leakage dev_leakage;
};

struct ExperimentResult {
  Vocabulary vocab;
  std::string test_hash;
  TrainedModel baseline;
  TrainedModel demoted;
  // Mean adversary dev accuracy after the first adversary block, against
  // the pre-trained encoder.
  double leakage_after_pretrain = 0.0;
};

// Trains the baseline (pre-training only, checkpoint per cfg rule) and the
// demoted model (pre-training, then alternation from the best-accuracy
// pre-training checkpoint) on the same data and seeds; the shared
// pre-training run is performed once. Both are audited on the test split.
ExperimentResult run_experiment(const ExperimentData& data, const RunConfig& cfg);

AuditReport evaluate_model(const ModelParams& params, const EncodedDataset& data,
                           const TrainingConfig& cfg);

}  // namespace demote
