// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "demote/experiment.hpp"
#include "demote/metrics.hpp"
#include "demote/synthetic.hpp"
#include "demote/training.hpp"
#include "metrics_oracle.hpp"
#include "test_support.hpp"

namespace demote {
namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-3;
constexpr double kGradTimeLimitSec = 60.0;
constexpr double kUniformEqualityTol = 1e-9;
constexpr double kMinBaselineGap = 0.08;
constexpr double kMinGapReduction = 0.30;
constexpr double kAccuracyTolerance = 0.03;
constexpr double kMinLeakageDrop = 0.10;
constexpr double kChanceTolerance = 0.10;
constexpr double kMultiAdversarySlack = 0.05;
constexpr int kOracleSets = 100;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentData headline_data(std::uint64_t seed) {
  SyntheticSpec s;
  s.q1 = 0.9;
  s.q0 = 0.1;
  s.marker_noise = 0.3;
  ExperimentData d;
  s.n_examples = 8000;
  s.seed = derive_seed(seed, 1);
  d.train = generate_synthetic(s, "train");
  s.n_examples = 1000;
  s.seed = derive_seed(seed, 2);
  d.dev = generate_synthetic(s, "dev");
  s.q1 = s.q0 = 0.5;
  s.seed = derive_seed(seed, 3);
  d.test = generate_synthetic(s, "test");
  return d;
}

RunConfig headline_config(std::uint64_t seed, int n_adversaries) {
  RunConfig cfg;
  cfg.training.seed = seed;
  cfg.training.n_adversaries = n_adversaries;
  return cfg;
}

const EpochRecord& selected_record(const TrainedModel& m) {
  for (const EpochRecord& r : m.log.records) {
    if (r.epoch == m.selected_epoch) return r;
  }
  throw std::runtime_error("selected epoch missing from log");
}

// Counts hash changes in groups an epoch must not touch.
int isolation_violations(const TrainingLog& log) {
  int violations = 0;
  for (const EpochRecord& r : log.records) {
    if (r.phase == Phase::kAdversary) {
      violations += r.encoder_hash_before != r.encoder_hash_after;
      violations += r.classifier_hash_before != r.classifier_hash_after;
    } else {
      for (std::size_t k = 0; k < r.adversary_hash_before.size(); ++k) {
        violations += r.adversary_hash_before[k] != r.adversary_hash_after[k];
      }
    }
  }
  return violations;
}

Outcome gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelDims dims = testing::tiny_dims(2);
  const ModelParams params = init_params(dims, 11);
  const Batch batch = make_batch(testing::random_encoded(dims, 5, 6, 12));
  std::vector<LossSpec> specs{{Objective::kPretrain, 0, 1.0},
                              {Objective::kDemotion, 0, 0.05}};
  for (int k = 0; k < dims.n_adversaries; ++k) specs.push_back({Objective::kAdversary, k, 1.0});
  double worst = 0.0, worst_entry = 0.0;
  long entries = 0;
  std::string where, where_entry;
  for (const LossSpec& spec : specs) {
    const testing::GradCheck r = testing::check_gradients(params, batch, spec, kGradStep);
    entries += r.entries;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = r.worst;
    }
    if (r.max_entry_rel_error > worst_entry) {
      worst_entry = r.max_entry_rel_error;
      where_entry = r.worst_entry;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kGradRelTol && secs < kGradTimeLimitSec,
          std::to_string(entries) + " entries, max per-tensor rel err " + fmt("%.2e", worst) + " (" +
              where + "), max per-entry " + fmt("%.2e", worst_entry) + " (" + where_entry + "), " +
              fmt("%.1f", secs) + " s"};
}

Outcome demotion_floor() {
  Rng rng(21);
  int below = 0;
  double min_excess = 1e300;
  for (int i = 0; i < 10000; ++i) {
    const int k = 2 + static_cast<int>(rng.index(3));
    std::vector<double> p(static_cast<std::size_t>(k));
    double s = 0.0;
    for (double& x : p) s += (x = -std::log(1.0 - rng.uniform()));
    for (double& x : p) x /= s;
    const double excess = uniform_target_loss(p) - std::log(static_cast<double>(k));
    min_excess = std::min(min_excess, excess);
    below += excess < 0.0;
  }
  double worst_uniform = 0.0;
  for (int k = 2; k <= 4; ++k) {
    const std::vector<double> u(static_cast<std::size_t>(k), 1.0 / k);
    worst_uniform = std::max(worst_uniform,
                             std::abs(uniform_target_loss(u) - std::log(static_cast<double>(k))));
  }
  return {below == 0 && worst_uniform <= kUniformEqualityTol,
          std::to_string(below) + " of 10000 below ln K (min excess " + fmt("%.2e", min_excess) +
              "), |loss - ln K| at uniform " + fmt("%.1e", worst_uniform)};
}

Outcome alpha_degeneration() {
  const ExperimentData d = headline_data(1);
  const Vocabulary vocab = build_vocab(d.train, 2);
  const EncodedDataset train = encode_dataset(d.train, vocab, 64);
  const EncodedDataset dev = encode_dataset(d.dev, vocab, 64);
  ModelDims dims;
  dims.vocab_size = vocab.size();
  const ModelParams start = init_params(dims, 1);
  std::vector<std::size_t> idx(32);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i * 7;
  const Batch batch = make_batch(train, idx);

  TrainingConfig cfg;
  cfg.alpha = 1.0;
  Trainer a(train, dev, cfg), b(train, dev, cfg);
  ModelParams pa = start, pb = start;
  const LossBreakdown la = a.demotion_step(pa, batch);
  const LossBreakdown lb = b.pretrain_step(pb, batch);
  const bool same = params_hash(pa) == params_hash(pb) && la.total == lb.total;
  return {same && params_hash(pa) != params_hash(start),
          std::string("parameter hashes ") + (params_hash(pa) == params_hash(pb) ? "equal" : "differ") +
              ", losses " + (la.total == lb.total ? "equal" : "differ")};
}

Outcome metric_oracle() {
  Rng rng(77);
  int mismatches = 0;
  for (int t = 0; t < kOracleSets; ++t) {
    const PredictionSet p = testing::random_prediction_set(rng);
    const testing::Confusion o(p);
    const AuditReport r = audit(p);
    mismatches += r.accuracy != o.accuracy();
    mismatches += r.macro_f1 != o.macro_f1();
    for (int c : p.toxic_classes) {
      for (int g = 0; g < 2; ++g) {
        const auto [h, s] = o.fpr(c, g);
        const Rate& rate = r.fpr.at({c, g});
        mismatches += rate.hits != h || rate.support != s;
        if (s > 0) mismatches += rate.value != static_cast<double>(h) / static_cast<double>(s);
      }
      mismatches += r.fpr_gap.at(c) != o.fpr_gap(c);
      mismatches += r.eoo_gap.at(c) != o.eoo_gap(c);
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over " +
                               std::to_string(kOracleSets) + " prediction sets"};
}

int report(int id, const std::string& name, const Outcome& o) {
  std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  return o.pass ? 0 : 1;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

int run() {
  int failures = 0;
  failures += report(1, "gradient oracle", gradient_oracle());
  failures += report(2, "demotion-loss floor", demotion_floor());

  // Headline runs, shared by criteria 3, 5, 7 and 8.
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ExperimentResult> single;
  for (std::uint64_t seed : kSeeds) single.push_back(run_experiment(headline_data(seed), headline_config(seed, 1)));
  const double headline_secs = seconds_since(t0);

  {
    int violations = 0;
    bool schedule_ok = true;
    for (const ExperimentResult& r : single) {
      violations += isolation_violations(r.demoted.log);
      violations += isolation_violations(r.baseline.log);
      int alternation = 0;
      for (const EpochRecord& rec : r.demoted.log.records) alternation += rec.phase != Phase::kPretrain;
      schedule_ok = schedule_ok && alternation == 40;
    }
    failures += report(3, "phase isolation",
                       {violations == 0 && schedule_ok,
                        std::to_string(violations) + " violations over " + std::to_string(kSeeds.size()) +
                            " default runs (10 rounds x 2+2 epochs" +
                            (schedule_ok ? "" : ", schedule mismatch") + ")"});
  }

  failures += report(4, "alpha degeneration", alpha_degeneration());

  {
    std::vector<double> base_gap, dem_gap, base_acc, dem_acc, leak_pre, leak_post, leak_probe;
    for (const ExperimentResult& r : single) {
      base_gap.push_back(r.baseline.test_report.fpr_gap.at(1).value_or(NAN));
      dem_gap.push_back(r.demoted.test_report.fpr_gap.at(1).value_or(NAN));
      base_acc.push_back(r.baseline.test_report.accuracy);
      dem_acc.push_back(r.demoted.test_report.accuracy);
      leak_pre.push_back(r.leakage_after_pretrain);
      leak_post.push_back(selected_record(r.demoted).dev.leakage.mean);
      leak_probe.push_back(r.demoted.dev_leakage.mean);
    }
    const double bg = mean(base_gap), dg = mean(dem_gap), ba = mean(base_acc), da = mean(dem_acc);
    const double lpre = mean(leak_pre), lpost = mean(leak_post);
    const double reduction = (bg - dg) / bg;
    const bool a = bg >= kMinBaselineGap;
    const bool b = reduction >= kMinGapReduction;
    const bool c = da >= ba - kAccuracyTolerance;
    const bool d = lpre - lpost >= kMinLeakageDrop && std::abs(lpost - 0.5) <= kChanceTolerance;
    std::string detail = "(a) baseline gap " + fmt("%.4f", bg) + (a ? " ok" : " LOW") +
                         "; (b) demoted gap " + fmt("%.4f", dg) + ", reduction " +
                         fmt("%.1f%%", 100 * reduction) + (b ? " ok" : " LOW") +
                         "; (c) accuracy baseline " + fmt("%.4f", ba) + " demoted " + fmt("%.4f", da) +
                         " (delta " + fmt("%+.4f", da - ba) + ")" + (c ? " ok" : " DROP") +
                         "; (d) adversary dev acc after pretrain " + fmt("%.4f", lpre) +
                         ", after demotion " + fmt("%.4f", lpost) + (d ? " ok" : " HIGH") +
                         " [refit probe " + fmt("%.4f", mean(leak_probe)) + "]; " +
                         fmt("%.0f", headline_secs) + " s for 3 seeds";
    failures += report(5, "synthetic headline experiment", {a && b && c && d, detail});
  }

  failures += report(6, "metric oracle equivalence", metric_oracle());

  {
    int bad = 0;
    std::string detail;
    for (const ExperimentResult& r : single) {
      double min_fpr = INFINITY;
      for (const EpochRecord& rec : r.demoted.log.records) {
        if (rec.phase != Phase::kPretrain) min_fpr = std::min(min_fpr, rec.dev.selection_fpr.value_or(INFINITY));
      }
      const double chosen = selected_record(r.demoted).dev.selection_fpr.value_or(INFINITY);
      double base_min = INFINITY;
      for (const EpochRecord& rec : r.baseline.log.records) {
        base_min = std::min(base_min, rec.dev.selection_fpr.value_or(INFINITY));
      }
      const double base_chosen = selected_record(r.baseline).dev.selection_fpr.value_or(INFINITY);
      bad += chosen != min_fpr || base_chosen != base_min;
      detail += (detail.empty() ? "" : ", ") + fmt("%.4f", chosen) + "=" + fmt("%.4f", min_fpr);
    }
    failures += report(7, "checkpoint selection",
                       {bad == 0, "selected dev FPR = minimum logged, per seed: " + detail});
  }

  {
    int differing = 0;
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      const ExperimentResult again = run_experiment(headline_data(kSeeds[i]), headline_config(kSeeds[i], 1));
      differing += again.demoted.log.to_csv() != single[i].demoted.log.to_csv();
      differing += again.baseline.log.to_csv() != single[i].baseline.log.to_csv();
    }
    failures += report(8, "determinism",
                       {differing == 0, std::to_string(differing) + " of " + std::to_string(2 * kSeeds.size()) +
                                            " TrainingLog CSVs differ on rerun"});
  }

  {
    int violations = 0;
    std::vector<double> multi, base;
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      const ExperimentResult r = run_experiment(headline_data(kSeeds[i]), headline_config(kSeeds[i], 3));
      violations += isolation_violations(r.demoted.log);
      for (const EpochRecord& rec : r.demoted.log.records) {
        violations += rec.adversary_hash_before.size() != 3;
      }
      multi.push_back(selected_record(r.demoted).dev.leakage.mean);
      base.push_back(selected_record(single[i].demoted).dev.leakage.mean);
    }
    const double m = mean(multi), s = mean(base);
    failures += report(9, "multi-adversary option",
                       {violations == 0 && m <= s + kMultiAdversarySlack,
                        std::to_string(violations) + " isolation violations; mean adversary dev acc " +
                            fmt("%.4f", m) + " with 3 adversaries vs " + fmt("%.4f", s) + " with 1"});
  }

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace demote

int main() { return demote::run(); }
