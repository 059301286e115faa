#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace demote {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

struct GenDataOptions {
  std::string spec_path;
  std::string out_path;
  std::optional<long long> seed;
};

struct TrainOptions {
  std::string config_path;  // empty: all defaults
  std::string data_path;    // split into train/dev/test when set
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string out_dir;
  bool demote = false;
  std::optional<long long> seed;
};

struct EvalOptions {
  std::string checkpoint_path;
  std::string data_path;
  std::string toxic_classes;  // comma-separated
  std::optional<int> none_class;
  std::string vocab_path;     // optional expected vocabulary
  std::string out_dir;
};

struct CompareOptions {
  std::string base_path;
  std::string ours_path;
  std::string out_path;  // stdout when empty
};

// Each command returns a process exit code and writes diagnostics to err.
int cmd_gen_data(const GenDataOptions& opts, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err);

// Full command line: gen-data, train, eval, compare.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// File names written by train and eval inside --out.
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kTrainingLogFile = "training_log.csv";
inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kReportJsonFile = "report.json";
inline constexpr const char* kReportCsvFile = "report.csv";
inline constexpr const char* kManifestFile = "manifests.jsonl";

}  // namespace demote
