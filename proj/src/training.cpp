#include "demote/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "demote/errors.hpp"

namespace demote {

std::string to_string(CheckpointRule rule) {
  return rule == CheckpointRule::kLowestDevFpr ? "lowest-dev-fpr" : "best-dev-accuracy";
}

CheckpointRule checkpoint_rule_from_string(const std::string& name) {
  if (name == "lowest-dev-fpr") return CheckpointRule::kLowestDevFpr;
  if (name == "best-dev-accuracy") return CheckpointRule::kBestDevAccuracy;
  throw ValidationError("checkpoint_rule: expected lowest-dev-fpr or best-dev-accuracy, got '" +
                        name + "'");
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kPretrain: return "pretrain";
    case Phase::kAdversary: return "adversary";
    case Phase::kDemotion: return "demotion";
  }
  return "?";
}

void TrainingConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha: must lie in (0, 1]");
  if (rounds < 1) throw ValidationError("rounds: must be >= 1");
  if (epochs_per_phase_per_round < 1) throw ValidationError("epochs_per_phase_per_round: must be >= 1");
  if (pretrain_max_epochs < 1) throw ValidationError("pretrain_max_epochs: must be >= 1");
  if (pretrain_patience < 1) throw ValidationError("pretrain_patience: must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size: must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate: must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw ValidationError("grad_clip_norm: must be positive or none");
  if (n_adversaries < 1) throw ValidationError("n_adversaries: must be >= 1");
  if (toxic_classes.empty()) throw ValidationError("toxic_classes: must be non-empty");
  for (int c : toxic_classes) {
    if (c == none_class) throw ValidationError("toxic_classes: must not contain none_class");
  }
  if (protected_group < 0) throw ValidationError("protected_group: must be >= 0");
}

OptimizerSettings TrainingConfig::optimizer_settings() const {
  OptimizerSettings s;
  s.kind = optimizer;
  s.learning_rate = learning_rate;
  s.grad_clip_norm = grad_clip_norm;
  return s;
}

void ModelConfig::validate() const {
  if (d_emb < 1) throw ValidationError("d_emb: must be >= 1");
  if (d_h < 1) throw ValidationError("d_h: must be >= 1");
  if (d_mlp < 1) throw ValidationError("d_mlp: must be >= 1");
  if (max_len < 1) throw ValidationError("max_len: must be >= 1");
  if (min_freq < 1) throw ValidationError("min_freq: must be >= 1");
}

void DataConfig::validate() const {
  if (num_target_classes < 2) throw ValidationError("num_target_classes: must be >= 2");
  if (num_protected_classes < 2) throw ValidationError("num_protected_classes: must be >= 2");
  if (!(posterior_threshold >= 0.0 && posterior_threshold <= 1.0)) {
    throw ValidationError("posterior_threshold: must lie in [0, 1]");
  }
  if (!(split_train > 0 && split_dev > 0 && split_test > 0) ||
      std::abs(split_train + split_dev + split_test - 1.0) > 1e-9) {
    throw ValidationError("split_train, split_dev, split_test: must be positive and sum to 1");
  }
}

void RunConfig::validate() const {
  training.validate();
  model.validate();
  data.validate();
  for (int c : training.toxic_classes) {
    if (c < 0 || c >= data.num_target_classes) throw ValidationError("toxic_classes: class out of range");
  }
  if (training.none_class < 0 || training.none_class >= data.num_target_classes) {
    throw ValidationError("none_class: out of range");
  }
  if (training.protected_group >= data.num_protected_classes) {
    throw ValidationError("protected_group: out of range");
  }
}

RunConfig RunConfig::from_config(const KvConfig& cfg) {
  RunConfig r;
  TrainingConfig& t = r.training;
  auto i32 = [&](const char* key, int& field) {
    if (auto v = cfg.get_int(key)) field = static_cast<int>(*v);
  };
  auto real = [&](const char* key, double& field) {
    if (auto v = cfg.get_double(key)) field = *v;
  };
  real("alpha", t.alpha);
  i32("rounds", t.rounds);
  i32("epochs_per_phase_per_round", t.epochs_per_phase_per_round);
  i32("pretrain_max_epochs", t.pretrain_max_epochs);
  i32("pretrain_patience", t.pretrain_patience);
  i32("batch_size", t.batch_size);
  real("learning_rate", t.learning_rate);
  if (auto v = cfg.get_string("optimizer")) t.optimizer = optimizer_from_string(*v);
  if (auto v = cfg.get_string("grad_clip_norm")) {
    if (*v == "none") {
      t.grad_clip_norm.reset();
    } else {
      KvConfig one;
      one.set("grad_clip_norm", *v);
      t.grad_clip_norm = one.get_double("grad_clip_norm");
    }
  }
  if (auto v = cfg.get_int("seed")) t.seed = static_cast<std::uint64_t>(*v);
  i32("n_adversaries", t.n_adversaries);
  if (auto v = cfg.get_string("checkpoint_rule")) t.checkpoint_rule = checkpoint_rule_from_string(*v);
  if (auto v = cfg.get_int_list("toxic_classes")) t.toxic_classes = *v;
  i32("none_class", t.none_class);
  i32("protected_group", t.protected_group);

  i32("d_emb", r.model.d_emb);
  i32("d_h", r.model.d_h);
  i32("d_mlp", r.model.d_mlp);
  i32("max_len", r.model.max_len);
  i32("min_freq", r.model.min_freq);

  i32("num_target_classes", r.data.num_target_classes);
  i32("num_protected_classes", r.data.num_protected_classes);
  real("posterior_threshold", r.data.posterior_threshold);
  real("split_train", r.data.split_train);
  real("split_dev", r.data.split_dev);
  real("split_test", r.data.split_test);

  cfg.reject_unconsumed();
  r.validate();
  return r;
}

KvConfig RunConfig::to_config() const {
  KvConfig c;
  const TrainingConfig& t = training;
  c.set("alpha", format_double(t.alpha));
  c.set("rounds", std::to_string(t.rounds));
  c.set("epochs_per_phase_per_round", std::to_string(t.epochs_per_phase_per_round));
  c.set("pretrain_max_epochs", std::to_string(t.pretrain_max_epochs));
  c.set("pretrain_patience", std::to_string(t.pretrain_patience));
  c.set("batch_size", std::to_string(t.batch_size));
  c.set("learning_rate", format_double(t.learning_rate));
  c.set("optimizer", to_string(t.optimizer));
  c.set("grad_clip_norm", t.grad_clip_norm ? format_double(*t.grad_clip_norm) : "none");
  c.set("seed", std::to_string(t.seed));
  c.set("n_adversaries", std::to_string(t.n_adversaries));
  c.set("checkpoint_rule", to_string(t.checkpoint_rule));
  std::string toxic;
  for (std::size_t i = 0; i < t.toxic_classes.size(); ++i) {
    toxic += (i ? "," : "") + std::to_string(t.toxic_classes[i]);
  }
  c.set("toxic_classes", toxic);
  c.set("none_class", std::to_string(t.none_class));
  c.set("protected_group", std::to_string(t.protected_group));
  c.set("d_emb", std::to_string(model.d_emb));
  c.set("d_h", std::to_string(model.d_h));
  c.set("d_mlp", std::to_string(model.d_mlp));
  c.set("max_len", std::to_string(model.max_len));
  c.set("min_freq", std::to_string(model.min_freq));
  c.set("num_target_classes", std::to_string(data.num_target_classes));
  c.set("num_protected_classes", std::to_string(data.num_protected_classes));
  c.set("posterior_threshold", format_double(data.posterior_threshold));
  c.set("split_train", format_double(data.split_train));
  c.set("split_dev", format_double(data.split_dev));
  c.set("split_test", format_double(data.split_test));
  return c;
}

std::string TrainingLog::csv_header() const {
  std::ostringstream out;
  out << "epoch,phase,ce_target,demotion_term,adv_ce,dev_acc,dev_macro_f1";
  for (int c : toxic_classes) {
    for (int g = 0; g < num_protected_classes; ++g) out << ",dev_fpr_" << c << "_" << g;
  }
  out << ",adv_dev_acc";
  if (n_adversaries > 1) {
    for (int k = 0; k < n_adversaries; ++k) out << ",adv_dev_acc_" << k;
  }
  return out.str();
}

std::string TrainingLog::csv_row(const EpochRecord& r) const {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream out;
  out << r.epoch << "," << to_string(r.phase) << "," << opt(r.ce_target) << ","
      << opt(r.demotion_term) << "," << opt(r.adv_ce) << "," << format_double(r.dev.accuracy) << ","
      << format_double(r.dev.macro_f1);
  for (int c : toxic_classes) {
    for (int g = 0; g < num_protected_classes; ++g) {
      const Rate& rate = r.dev.fpr.at({c, g});
      out << "," << (rate.defined() ? format_double(rate.value) : "");
    }
  }
  out << "," << format_double(r.dev.leakage.mean);
  if (n_adversaries > 1) {
    for (double a : r.dev.leakage.per_adversary) out << "," << format_double(a);
  }
  return out.str();
}

std::string TrainingLog::to_csv() const {
  std::string out = csv_header() + "\n";
  for (const EpochRecord& r : records) out += csv_row(r) + "\n";
  return out;
}

Trainer::Trainer(const EncodedDataset& train, const EncodedDataset& dev, TrainingConfig cfg)
    : train_(train), dev_(dev), cfg_(std::move(cfg)), order_rng_(derive_seed(cfg_.seed, 7)) {
  cfg_.validate();
  if (train_.size() == 0 || dev_.size() == 0) throw ValidationError("training and dev sets must be non-empty");
}

void Trainer::reset_optimizer(const ModelParams& params) {
  optimizer_.emplace(params, cfg_.optimizer_settings());
}

std::vector<std::vector<std::size_t>> Trainer::epoch_batches() {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng_.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
  }
  return batches;
}

DevEvaluation Trainer::evaluate_dev(const ModelParams& params) const {
  DevEvaluation out;
  const Matrix reps = encode_dataset_reps(params.encoder, dev_);
  PredictionSet p = make_prediction_set(dev_, argmax_columns(head_forward(params.classifier, reps).probs),
                                        cfg_.toxic_classes, cfg_.none_class);
  out.accuracy = accuracy(p);
  out.macro_f1 = macro_f1(p).value;
  out.fpr = fpr_by_group(p);
  out.selection_fpr = mean_group_fpr(out.fpr, cfg_.toxic_classes, cfg_.protected_group);
  out.leakage = adversary_leakage_from_reps(params, reps, dev_.protected_labels);
  return out;
}

EpochRecord Trainer::begin_record(const ModelParams& params, Phase phase, int round,
                                  TrainingLog& log) const {
  EpochRecord rec;
  rec.epoch = log.records.empty() ? 1 : log.records.back().epoch + 1;
  rec.phase = phase;
  rec.round = round;
  rec.encoder_hash_before = encoder_hash(params.encoder);
  rec.classifier_hash_before = head_hash(params.classifier);
  for (const HeadParams& adv : params.adversaries) rec.adversary_hash_before.push_back(head_hash(adv));
  return rec;
}

void Trainer::end_record(const ModelParams& params, EpochRecord& rec, TrainingLog& log) const {
  rec.encoder_hash_after = encoder_hash(params.encoder);
  rec.classifier_hash_after = head_hash(params.classifier);
  for (const HeadParams& adv : params.adversaries) rec.adversary_hash_after.push_back(head_hash(adv));
  if (!all_finite(params)) {
    log.records.push_back(rec);
    throw NumericError("epoch " + std::to_string(rec.epoch) + ": parameters became non-finite");
  }
  rec.dev = evaluate_dev(params);
  log.records.push_back(std::move(rec));
}

namespace {

void check_finite(double loss, int epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) +
                       ": non-finite loss");
  }
}

void init_log(TrainingLog& log, const TrainingConfig& cfg, const EncodedDataset& data,
              const ModelParams& params) {
  if (log.records.empty()) {
    log.toxic_classes = cfg.toxic_classes;
    log.num_protected_classes = data.num_protected_classes;
    log.n_adversaries = static_cast<int>(params.adversaries.size());
  }
}

}  // namespace

LossBreakdown Trainer::pretrain_step(ModelParams& params, const Batch& batch) {
  if (!optimizer_) reset_optimizer(params);
  GradientResult g = backward(params, batch, LossSpec{Objective::kPretrain, 0, 1.0});
  if (!std::isfinite(g.loss.total)) throw NumericError("non-finite pre-training loss");
  optimizer_->step(params, g.grads);
  return g.loss;
}

LossBreakdown Trainer::demotion_step(ModelParams& params, const Batch& batch) {
  if (!optimizer_) reset_optimizer(params);
  GradientResult g = backward(params, batch, LossSpec{Objective::kDemotion, 0, cfg_.alpha});
  if (!std::isfinite(g.loss.total)) throw NumericError("non-finite demotion loss");
  optimizer_->step(params, g.grads);
  return g.loss;
}

double Trainer::adversary_step(ModelParams& params, const Batch& batch, int adversary_index) {
  if (!optimizer_) reset_optimizer(params);
  const EncoderTrace enc = encoder_forward(params.encoder, batch);
  HeadGradient g = head_cross_entropy_gradient(
      params.adversaries.at(static_cast<std::size_t>(adversary_index)), enc.representation,
      batch.protected_labels);
  if (!std::isfinite(g.loss)) throw NumericError("non-finite adversary loss");
  optimizer_->step_adversary(params, adversary_index, g.grad);
  return g.loss;
}

double Trainer::adversary_epoch(ModelParams& params, const Matrix& train_reps, long& steps) {
  double sum = 0.0;
  long count = 0;
  const auto batches = epoch_batches();
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& idx = batches[b];
    Matrix reps(train_reps.rows(), static_cast<Eigen::Index>(idx.size()));
    std::vector<int> labels(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      reps.col(static_cast<Eigen::Index>(j)) = train_reps.col(static_cast<Eigen::Index>(idx[j]));
      labels[j] = train_.protected_labels[idx[j]];
    }
    for (std::size_t k = 0; k < params.adversaries.size(); ++k) {
      HeadGradient g = head_cross_entropy_gradient(params.adversaries[k], reps, labels);
      check_finite(g.loss, 0, b);
      optimizer_->step_adversary(params, static_cast<int>(k), g.grad);
      sum += g.loss * static_cast<double>(idx.size());
      count += static_cast<long>(idx.size());
      ++steps;
    }
  }
  return sum / static_cast<double>(count);
}

bool Trainer::better(const Selected& current, const DevEvaluation& eval, CheckpointRule rule) const {
  if (current.epoch == 0) return true;
  if (rule == CheckpointRule::kBestDevAccuracy) return eval.accuracy > current.accuracy;
  const double inf = std::numeric_limits<double>::infinity();
  const double cand = eval.selection_fpr.value_or(inf);
  const double cur = current.fpr.value_or(inf);
  if (cand != cur) return cand < cur;
  return eval.accuracy > current.accuracy;
}

Trainer::PretrainResult Trainer::pretrain(ModelParams params, TrainingLog& log) {
  init_log(log, cfg_, dev_, params);
  reset_optimizer(params);
  PretrainResult result;
  int since_best = 0;
  for (int e = 0; e < cfg_.pretrain_max_epochs; ++e) {
    EpochRecord rec = begin_record(params, Phase::kPretrain, 0, log);
    double sum = 0.0;
    const auto batches = epoch_batches();
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Batch batch = make_batch(train_, batches[b]);
      GradientResult g = backward(params, batch, LossSpec{Objective::kPretrain, 0, 1.0});
      check_finite(g.loss.total, rec.epoch, b);
      optimizer_->step(params, g.grads);
      sum += *g.loss.target_ce * batch.size();
      ++rec.optimizer_steps;
    }
    rec.ce_target = sum / static_cast<double>(train_.size());
    end_record(params, rec, log);
    const EpochRecord& done = log.records.back();

    const bool improved = better(result.best_accuracy, done.dev, CheckpointRule::kBestDevAccuracy);
    if (improved) {
      result.best_accuracy = Selected{params, done.epoch, done.dev.accuracy, done.dev.selection_fpr};
      since_best = 0;
    } else {
      ++since_best;
    }
    if (better(result.by_rule, done.dev, cfg_.checkpoint_rule)) {
      result.by_rule = Selected{params, done.epoch, done.dev.accuracy, done.dev.selection_fpr};
    }
    if (since_best >= cfg_.pretrain_patience) break;
  }
  return result;
}

Trainer::AlternateResult Trainer::alternate(ModelParams params, TrainingLog& log) {
  init_log(log, cfg_, dev_, params);
  reset_optimizer(params);
  AlternateResult result;
  for (int round = 1; round <= cfg_.rounds; ++round) {
    // The encoder is frozen for the whole adversary block.
    const Matrix train_reps = encode_dataset_reps(params.encoder, train_);
    for (int e = 0; e < cfg_.epochs_per_phase_per_round; ++e) {
      EpochRecord rec = begin_record(params, Phase::kAdversary, round, log);
      rec.adv_ce = adversary_epoch(params, train_reps, rec.optimizer_steps);
      end_record(params, rec, log);
      const EpochRecord& done = log.records.back();
      if (better(result.selected, done.dev, cfg_.checkpoint_rule)) {
        result.selected = Selected{params, done.epoch, done.dev.accuracy, done.dev.selection_fpr};
      }
    }
    if (round == 1) result.leakage_after_pretrain = log.records.back().dev.leakage.mean;

    for (int e = 0; e < cfg_.epochs_per_phase_per_round; ++e) {
      EpochRecord rec = begin_record(params, Phase::kDemotion, round, log);
      double ce = 0.0;
      double term = 0.0;
      const auto batches = epoch_batches();
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const Batch batch = make_batch(train_, batches[b]);
        GradientResult g = backward(params, batch, LossSpec{Objective::kDemotion, 0, cfg_.alpha});
        check_finite(g.loss.total, rec.epoch, b);
        optimizer_->step(params, g.grads);
        ce += *g.loss.target_ce * batch.size();
        term += *g.loss.demotion_term * batch.size();
        ++rec.optimizer_steps;
      }
      rec.ce_target = ce / static_cast<double>(train_.size());
      rec.demotion_term = term / static_cast<double>(train_.size());
      end_record(params, rec, log);
      const EpochRecord& done = log.records.back();
      if (better(result.selected, done.dev, cfg_.checkpoint_rule)) {
        result.selected = Selected{params, done.epoch, done.dev.accuracy, done.dev.selection_fpr};
      }
    }
  }
  result.final_params = std::move(params);
  return result;
}

Leakage Trainer::probe_leakage(ModelParams params) {
  std::optional<Optimizer> saved = std::move(optimizer_);
  optimizer_.emplace(params, cfg_.optimizer_settings());
  const Matrix train_reps = encode_dataset_reps(params.encoder, train_);
  long steps = 0;
  for (int e = 0; e < cfg_.epochs_per_phase_per_round; ++e) adversary_epoch(params, train_reps, steps);
  optimizer_ = std::move(saved);
  return adversary_leakage(params, dev_);
}

}  // namespace demote
