#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "demote/data.hpp"
#include "demote/kv_config.hpp"
#include "demote/metrics.hpp"
#include "demote/model.hpp"
#include "demote/optimizer.hpp"
#include "demote/rng.hpp"

namespace demote {

enum class CheckpointRule { kLowestDevFpr, kBestDevAccuracy };

std::string to_string(CheckpointRule rule);
CheckpointRule checkpoint_rule_from_string(const std::string& name);

struct TrainingConfig {
  double alpha = 0.05;
  int rounds = 10;
  int epochs_per_phase_per_round = 2;
  int pretrain_max_epochs = 20;
  int pretrain_patience = 5;
  int batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdaptiveMoment;
  std::optional<double> grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  int n_adversaries = 1;
  CheckpointRule checkpoint_rule = CheckpointRule::kLowestDevFpr;
  // Target classes counted as positive ("toxic") by the FPR rule, and the
  // protected group whose FPR the checkpoint rule minimizes.
  std::vector<int> toxic_classes{1};
  int none_class = 0;
  int protected_group = 1;

  void validate() const;
  OptimizerSettings optimizer_settings() const;
};

struct ModelConfig {
  int d_emb = 64;
  int d_h = 64;
  int d_mlp = 64;
  int max_len = 64;
  int min_freq = 2;

  void validate() const;
};

struct DataConfig {
  int num_target_classes = 2;
  int num_protected_classes = 2;
  double posterior_threshold = kDefaultPosteriorThreshold;
  double split_train = 0.8;
  double split_dev = 0.1;
  double split_test = 0.1;

  void validate() const;
};

// Everything a flat key=value config file can set. Keys are the field names.
struct RunConfig {
  TrainingConfig training;
  ModelConfig model;
  DataConfig data;

  void validate() const;
  // Unknown keys are a ValidationError; omitted keys keep their defaults.
  static RunConfig from_config(const KvConfig& cfg);
  // Every key with its effective value.
  KvConfig to_config() const;
};

enum class Phase { kPretrain, kAdversary, kDemotion };
std::string to_string(Phase phase);

struct DevEvaluation {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<ClassGroup, Rate> fpr;
  std::optional<double> selection_fpr;  // mean protected-group FPR over toxic classes
  Leakage leakage;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, monotone over the whole run
  Phase phase = Phase::kPretrain;
  int round = 0;  // 0 during pre-training
  std::optional<double> ce_target;
  std::optional<double> demotion_term;
  std::optional<double> adv_ce;
  DevEvaluation dev;
  long optimizer_steps = 0;
  // Parameter hashes around the epoch, used to audit phase isolation.
  std::string encoder_hash_before, encoder_hash_after;
  std::string classifier_hash_before, classifier_hash_after;
  std::vector<std::string> adversary_hash_before, adversary_hash_after;
};

struct TrainingLog {
  std::vector<int> toxic_classes;
  int num_protected_classes = 2;
  int n_adversaries = 1;
  std::vector<EpochRecord> records;

  // Columns: epoch, phase, ce_target, demotion_term, adv_ce, dev_acc,
  // dev_macro_f1, dev_fpr_<class>_<group> for every toxic class and group,
  // adv_dev_acc (mean over adversaries), and adv_dev_acc_<k> per adversary
  // when there is more than one. Absent loss terms are empty fields.
  std::string to_csv() const;
  std::string csv_header() const;
  std::string csv_row(const EpochRecord& r) const;
};

// Holds the data, optimizer, and shuffling stream for one training run.
// Parameters are mutated only through this object.
class Trainer {
 public:
  Trainer(const EncodedDataset& train, const EncodedDataset& dev, TrainingConfig cfg);

  struct Selected {
    ModelParams params;
    int epoch = 0;
    double accuracy = 0.0;
    std::optional<double> fpr;
  };

  struct PretrainResult {
    Selected best_accuracy;  // the checkpoint the adversarial phase starts from
    Selected by_rule;        // per cfg.checkpoint_rule
  };

  // Supervised phase over H and C. Appends one record per epoch to log; on
  // a non-finite loss throws NumericError with the log left intact.
  PretrainResult pretrain(ModelParams params, TrainingLog& log);

  struct AlternateResult {
    ModelParams final_params;
    Selected selected;
    // Mean adversary dev accuracy after the first adversary block, i.e. fit
    // against the pre-trained encoder.
    double leakage_after_pretrain = 0.0;
  };

  // cfg.rounds rounds of (adversary epochs, then demotion epochs).
  AlternateResult alternate(ModelParams params, TrainingLog& log);

  // One optimizer step on adversary k against CE(D_k(H(x)), z).
  double adversary_step(ModelParams& params, const Batch& batch, int adversary_index);
  // One step over H and C on alpha * CE + (1 - alpha) * uniform(D(H(x))).
  LossBreakdown demotion_step(ModelParams& params, const Batch& batch);
  LossBreakdown pretrain_step(ModelParams& params, const Batch& batch);

  // Refits the adversaries for epochs_per_phase_per_round epochs against the
  // frozen encoder (fresh optimizer state) and returns dev leakage.
  Leakage probe_leakage(ModelParams params);

  DevEvaluation evaluate_dev(const ModelParams& params) const;

  Optimizer& optimizer() { return *optimizer_; }
  void reset_optimizer(const ModelParams& params);

 private:
  std::vector<std::vector<std::size_t>> epoch_batches();
  EpochRecord begin_record(const ModelParams& params, Phase phase, int round, TrainingLog& log) const;
  void end_record(const ModelParams& params, EpochRecord& rec, TrainingLog& log) const;
  // Adversary-only epoch over precomputed train representations.
  double adversary_epoch(ModelParams& params, const Matrix& train_reps, long& steps);
  bool better(const Selected& current, const DevEvaluation& eval, CheckpointRule rule) const;

  const EncodedDataset& train_;
  const EncodedDataset& dev_;
  TrainingConfig cfg_;
  Rng order_rng_;
  std::optional<Optimizer> optimizer_;
};

}  // namespace demote
