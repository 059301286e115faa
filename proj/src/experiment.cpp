#include "demote/experiment.hpp"

#include "demote/errors.hpp"

namespace demote {

AuditReport evaluate_model(const ModelParams& params, const EncodedDataset& data,
                           const TrainingConfig& cfg) {
  return audit(make_prediction_set(data, predict_targets(params, data), cfg.toxic_classes,
                                   cfg.none_class));
}

ExperimentResult run_experiment(const ExperimentData& data, const RunConfig& cfg) {
  cfg.validate();
  validate(data.train);
  validate(data.dev);
  validate(data.test);

  ExperimentResult out;
  out.vocab = build_vocab(data.train, cfg.model.min_freq);
  out.test_hash = dataset_hash(data.test);
  const EncodedDataset train = encode_dataset(data.train, out.vocab, cfg.model.max_len);
  const EncodedDataset dev = encode_dataset(data.dev, out.vocab, cfg.model.max_len);
  const EncodedDataset test = encode_dataset(data.test, out.vocab, cfg.model.max_len);

  ModelDims dims;
  dims.vocab_size = out.vocab.size();
  dims.d_emb = cfg.model.d_emb;
  dims.d_h = cfg.model.d_h;
  dims.d_mlp = cfg.model.d_mlp;
  dims.num_target_classes = data.train.num_target_classes;
  dims.num_protected_classes = data.train.num_protected_classes;
  dims.n_adversaries = cfg.training.n_adversaries;

  Trainer trainer(train, dev, cfg.training);
  TrainingLog pretrain_log;
  Trainer::PretrainResult pre = trainer.pretrain(init_params(dims, cfg.training.seed), pretrain_log);

  TrainingLog demote_log = pretrain_log;
  Trainer::AlternateResult alt = trainer.alternate(pre.best_accuracy.params, demote_log);
  out.leakage_after_pretrain = alt.leakage_after_pretrain;

  out.baseline.params = std::move(pre.by_rule.params);
  out.baseline.selected_epoch = pre.by_rule.epoch;
  out.baseline.log = std::move(pretrain_log);
  out.demoted.params = std::move(alt.selected.params);
  out.demoted.selected_epoch = alt.selected.epoch;
  out.demoted.log = std::move(demote_log);

  for (TrainedModel* m : {&out.baseline, &out.demoted}) {
    m->test_report = evaluate_model(m->params, test, cfg.training);
    m->dev_leakage = trainer.probe_leakage(m->params);
    m->test_report.adversary_accuracy = m->dev_leakage.mean;
    m->test_report.adversary_accuracies = m->dev_leakage.per_adversary;
  }
  return out;
}

}  // namespace demote
