#include "demote/commands.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "demote/checkpoint.hpp"
#include "demote/errors.hpp"
#include "demote/experiment.hpp"
#include "demote/hash.hpp"
#include "demote/report_io.hpp"
#include "demote/split.hpp"
#include "demote/synthetic.hpp"
#include "demote/training.hpp"

namespace demote {
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One JSON line per run, appended to <dir>/manifests.jsonl.
class Manifest {
 public:
  Manifest(std::string command, fs::path dir) : dir_(std::move(dir)) {
    record_["command"] = std::move(command);
    record_["start"] = utc_now();
  }
  void config(const KvConfig& cfg) {
    for (const auto& [k, v] : cfg.entries()) record_["config"][k] = v;
  }
  void seed(std::uint64_t s) { record_["seed"] = s; }
  void data(const std::string& path) { record_["data_hashes"][path] = sha256_file(path); }
  void output(const fs::path& path) { record_["outputs"].push_back(path.string()); }
  void checkpoint(const fs::path& path) {
    record_["checkpoint_hash"] = sha256_file(path.string());
    output(path);
  }
  void set(const std::string& key, const nlohmann::ordered_json& value) { record_[key] = value; }

  void finish(int exit_code) {
    record_["end"] = utc_now();
    record_["exit_code"] = exit_code;
    fs::create_directories(dir_);
    std::ofstream out(dir_ / kManifestFile, std::ios::app);
    out << record_.dump() << "\n";
  }

 private:
  fs::path dir_;
  nlohmann::ordered_json record_;
};

fs::path parent_or_cwd(const std::string& path) {
  fs::path p = fs::path(path).parent_path();
  return p.empty() ? fs::path(".") : p;
}

std::vector<int> parse_class_list(const std::string& text) {
  KvConfig one;
  one.set("toxic_classes", text);
  auto list = one.get_int_list("toxic_classes");
  if (!list || list->empty()) throw ValidationError("--toxic-classes: at least one class id is required");
  return *list;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace

int cmd_gen_data(const GenDataOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KvConfig cfg = KvConfig::load(opts.spec_path);
    SyntheticSpec spec = SyntheticSpec::from_config(cfg);
    cfg.reject_unconsumed();
    if (opts.seed) spec.seed = static_cast<std::uint64_t>(*opts.seed);
    spec.validate();

    Manifest manifest("gen-data", parent_or_cwd(opts.out_path));
    manifest.config(spec.to_config());
    manifest.seed(spec.seed);
    const Dataset ds = generate_synthetic(spec, fs::path(opts.out_path).stem().string());
    write_file(opts.out_path, synthetic_to_jsonl(spec, ds));
    manifest.output(opts.out_path);
    manifest.set("dataset_hash", dataset_hash(ds));
    manifest.finish(kExitOk);
    out << "wrote " << ds.size() << " examples to " << opts.out_path << "\n";
    return kExitOk;
  });
}

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    KvConfig kv = opts.config_path.empty() ? KvConfig() : KvConfig::load(opts.config_path);
    RunConfig cfg = RunConfig::from_config(kv);
    if (opts.seed) cfg.training.seed = static_cast<std::uint64_t>(*opts.seed);
    cfg.validate();

    const fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    Manifest manifest(opts.demote ? "train --demote" : "train --baseline", dir);
    manifest.config(cfg.to_config());
    manifest.seed(cfg.training.seed);

    auto load = [&](const std::string& path) {
      manifest.data(path);
      return load_jsonl(path, cfg.data.num_target_classes, cfg.data.num_protected_classes,
                        cfg.data.posterior_threshold);
    };
    Dataset train, dev;
    std::optional<Dataset> test;
    if (!opts.data_path.empty()) {
      if (!opts.train_path.empty() || !opts.dev_path.empty() || !opts.test_path.empty()) {
        throw ValidationError("--data cannot be combined with --train/--dev/--test");
      }
      SplitResult parts = split(load(opts.data_path),
                                {cfg.data.split_train, cfg.data.split_dev, cfg.data.split_test},
                                cfg.training.seed);
      if (!parts.stratified) err << "warning: dataset too small to stratify; used an unstratified split\n";
      manifest.set("stratified_split", parts.stratified);
      train = std::move(parts.train);
      dev = std::move(parts.dev);
      test = std::move(parts.test);
    } else {
      if (opts.train_path.empty() || opts.dev_path.empty()) {
        throw ValidationError("either --data or both --train and --dev are required");
      }
      train = load(opts.train_path);
      dev = load(opts.dev_path);
      if (!opts.test_path.empty()) test = load(opts.test_path);
    }

    const Vocabulary vocab = build_vocab(train, cfg.model.min_freq);
    const EncodedDataset train_enc = encode_dataset(train, vocab, cfg.model.max_len);
    const EncodedDataset dev_enc = encode_dataset(dev, vocab, cfg.model.max_len);

    ModelDims dims;
    dims.vocab_size = vocab.size();
    dims.d_emb = cfg.model.d_emb;
    dims.d_h = cfg.model.d_h;
    dims.d_mlp = cfg.model.d_mlp;
    dims.num_target_classes = cfg.data.num_target_classes;
    dims.num_protected_classes = cfg.data.num_protected_classes;
    dims.n_adversaries = cfg.training.n_adversaries;

    Trainer trainer(train_enc, dev_enc, cfg.training);
    TrainingLog log;
    Trainer::Selected selected;
    try {
      Trainer::PretrainResult pre = trainer.pretrain(init_params(dims, cfg.training.seed), log);
      if (opts.demote) {
        selected = trainer.alternate(std::move(pre.best_accuracy.params), log).selected;
      } else {
        selected = std::move(pre.by_rule);
      }
    } catch (const NumericError& e) {
      write_file(dir / kTrainingLogFile, log.to_csv());
      manifest.output(dir / kTrainingLogFile);
      manifest.set("error", e.what());
      manifest.finish(kExitNumeric);
      throw;
    }

    write_file(dir / kTrainingLogFile, log.to_csv());
    manifest.output(dir / kTrainingLogFile);
    std::string vocab_text;
    for (const std::string& t : vocab.tokens()) vocab_text += t + "\n";
    write_file(dir / kVocabFile, vocab_text);
    manifest.output(dir / kVocabFile);

    Checkpoint ckpt;
    ckpt.params = selected.params;
    ckpt.vocab = vocab;
    ckpt.vocab_hash = vocab.hash();
    ckpt.max_len = cfg.model.max_len;
    ckpt.config = cfg.to_config().entries();
    ckpt.info["mode"] = opts.demote ? "demote" : "baseline";
    ckpt.info["selected_epoch"] = std::to_string(selected.epoch);
    ckpt.info["train_hash"] = dataset_hash(train);
    ckpt.info["dev_hash"] = dataset_hash(dev);
    save_checkpoint(ckpt, (dir / kCheckpointFile).string());
    manifest.checkpoint(dir / kCheckpointFile);
    manifest.set("selected_epoch", selected.epoch);

    if (test) {
      const EncodedDataset test_enc = encode_dataset(*test, vocab, cfg.model.max_len);
      AuditReport report = evaluate_model(selected.params, test_enc, cfg.training);
      const Leakage leak = adversary_leakage(selected.params, dev_enc);
      report.adversary_accuracy = leak.mean;
      report.adversary_accuracies = leak.per_adversary;
      write_file(dir / "test_report.json", report_to_json(report));
      write_file(dir / "test_report.csv", report_to_csv(report));
      manifest.output(dir / "test_report.json");
      manifest.output(dir / "test_report.csv");
      manifest.set("test_hash", dataset_hash(*test));
    }
    manifest.finish(kExitOk);
    out << "selected epoch " << selected.epoch << " of " << log.records.size() << "; wrote "
        << (dir / kCheckpointFile).string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const std::vector<int> toxic = parse_class_list(opts.toxic_classes);
    const Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);
    const std::string embedded = ckpt.vocab.hash();
    if (embedded != ckpt.vocab_hash) {
      err << "error: vocabulary mismatch: checkpoint records " << ckpt.vocab_hash
          << ", embedded vocabulary hashes to " << embedded << "\n";
      return kExitValidation;
    }
    if (!opts.vocab_path.empty()) {
      std::istringstream in(read_file(opts.vocab_path));
      std::vector<std::string> tokens;
      for (std::string line; std::getline(in, line);) tokens.push_back(line);
      const std::string expected = Vocabulary::from_tokens(tokens).hash();
      if (expected != ckpt.vocab_hash) {
        err << "error: vocabulary mismatch: checkpoint " << ckpt.vocab_hash << ", " << opts.vocab_path
            << " " << expected << "\n";
        return kExitValidation;
      }
    }

    double threshold = kDefaultPosteriorThreshold;
    if (auto it = ckpt.config.find("posterior_threshold"); it != ckpt.config.end()) {
      KvConfig one;
      one.set("t", it->second);
      threshold = *one.get_double("t");
    }
    const ModelDims& dims = ckpt.params.dims;
    const fs::path dir(opts.out_dir);
    Manifest manifest("eval", dir);
    manifest.set("checkpoint_hash", sha256_file(opts.checkpoint_path));
    const Dataset ds = load_jsonl(opts.data_path, dims.num_target_classes, dims.num_protected_classes,
                                  threshold);
    manifest.data(opts.data_path);

    TrainingConfig tc;
    tc.toxic_classes = toxic;
    tc.none_class = opts.none_class.value_or(0);
    KvConfig echo;
    std::string toxic_text;
    for (std::size_t i = 0; i < toxic.size(); ++i) toxic_text += (i ? "," : "") + std::to_string(toxic[i]);
    echo.set("toxic_classes", toxic_text);
    echo.set("none_class", std::to_string(tc.none_class));
    manifest.config(echo);

    const EncodedDataset enc = encode_dataset(ds, ckpt.vocab, ckpt.max_len);
    AuditReport report = evaluate_model(ckpt.params, enc, tc);
    const Leakage leak = adversary_leakage(ckpt.params, enc);
    report.adversary_accuracy = leak.mean;
    report.adversary_accuracies = leak.per_adversary;

    fs::create_directories(dir);
    write_file(dir / kReportJsonFile, report_to_json(report));
    write_file(dir / kReportCsvFile, report_to_csv(report));
    manifest.output(dir / kReportJsonFile);
    manifest.output(dir / kReportCsvFile);
    manifest.finish(kExitOk);
    out << "accuracy " << report.accuracy << ", macro-F1 " << report.macro_f1 << "\n";
    return kExitOk;
  });
}

int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const AuditReport base = report_from_json(read_file(opts.base_path));
    const AuditReport ours = report_from_json(read_file(opts.ours_path));
    const std::string table = compare_reports(base, ours);
    if (opts.out_path.empty()) {
      out << table;
      return kExitOk;
    }
    Manifest manifest("compare", parent_or_cwd(opts.out_path));
    manifest.data(opts.base_path);
    manifest.data(opts.ours_path);
    write_file(opts.out_path, table);
    manifest.output(opts.out_path);
    manifest.finish(kExitOk);
    return kExitOk;
  });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial demotion of a protected attribute in text classifiers"};
  app.require_subcommand(1);

  GenDataOptions gen;
  long long gen_seed = 0;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic confounded corpus");
  gen_cmd->add_option("--spec", gen.spec_path, "key=value generator spec")->required();
  gen_cmd->add_option("--out", gen.out_path, "output JSONL path")->required();
  auto* gen_seed_opt = gen_cmd->add_option("--seed", gen_seed, "override the spec seed");

  TrainOptions train;
  long long train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a baseline or demoted classifier");
  train_cmd->add_option("--config", train.config_path, "key=value training config");
  train_cmd->add_option("--data", train.data_path, "single JSONL file to split train/dev/test");
  train_cmd->add_option("--train", train.train_path, "training JSONL");
  train_cmd->add_option("--dev", train.dev_path, "dev JSONL");
  train_cmd->add_option("--test", train.test_path, "optional test JSONL");
  train_cmd->add_option("--out", train.out_dir, "output directory")->required();
  auto* baseline_flag = train_cmd->add_flag("--baseline", "pre-training only");
  auto* demote_flag = train_cmd->add_flag("--demote", "pre-training then adversarial alternation");
  baseline_flag->excludes(demote_flag);
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "override the config seed");

  EvalOptions eval;
  int none_class = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Audit a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval.checkpoint_path)->required();
  eval_cmd->add_option("--data", eval.data_path)->required();
  eval_cmd->add_option("--toxic-classes", eval.toxic_classes, "comma-separated class ids")->required();
  auto* none_opt = eval_cmd->add_option("--none-class", none_class);
  eval_cmd->add_option("--vocab", eval.vocab_path, "expected vocabulary file");
  eval_cmd->add_option("--out", eval.out_dir)->required();

  CompareOptions cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Per-cell deltas between two audit reports");
  cmp_cmd->add_option("base", cmp.base_path, "baseline report.json")->required();
  cmp_cmd->add_option("ours", cmp.ours_path, "demoted report.json")->required();
  cmp_cmd->add_option("--out", cmp.out_path, "CSV path (stdout when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kExitValidation;
  }

  if (*gen_cmd) {
    if (*gen_seed_opt) gen.seed = gen_seed;
    return cmd_gen_data(gen, out, err);
  }
  if (*train_cmd) {
    if (!*baseline_flag && !*demote_flag) {
      err << "usage error: one of --baseline or --demote is required\n";
      return kExitValidation;
    }
    train.demote = static_cast<bool>(*demote_flag);
    if (*train_seed_opt) train.seed = train_seed;
    return cmd_train(train, out, err);
  }
  if (*eval_cmd) {
    if (*none_opt) eval.none_class = none_class;
    return cmd_eval(eval, out, err);
  }
  return cmd_compare(cmp, out, err);
}

}  // namespace demote
