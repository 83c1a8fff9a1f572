#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sbc/bundle.hpp"
#include "sbc/config.hpp"
#include "sbc/error.hpp"
#include "sbc/hpo.hpp"
#include "sbc/metrics.hpp"

namespace sbc {

// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitTraining = 4,
  kExitEvaluation = 5,
};

// Error raised by a command phase, carrying the exit code of that phase.
class CommandError : public std::runtime_error {
 public:
  CommandError(int exit_code, const std::string& message) : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

struct PrepareResult {
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  std::filesystem::path report_path;
  CleaningReport cleaning;
  std::vector<std::string> warnings;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

// Load, clean and split config.input_path into out_dir/{train,test}.csv and
// out_dir/cleaning_report.txt.
PrepareResult cmd_prepare(const RunConfig& config);

struct Evaluation {
  EvalSummary summary;
  ConfusionMatrix confusion;
  std::vector<std::string> class_names;
};

struct TrainOutcome {
  ModelBundle bundle;
  Timings timings;
  std::vector<HpoResult> hpo;  // one per cascade stage, or one for mcc
  std::optional<Evaluation> evaluation;
  std::filesystem::path bundle_path;
};

// Tunes (per config.hpo) and trains on an in-memory training set.
TrainOutcome train_model(const RunConfig& config, const Dataset& train);

// Predicts `test` with `bundle`; test labels are matched to the bundle's
// classes by name. Prediction wall-clock goes to summary.timings.test_s.
Evaluation evaluate_bundle(const ModelBundle& bundle, const Dataset& test, UnknownAction action);

// Writes report.txt, summary.json, confusion.csv and
// confusion_normalized.csv into `dir`.
void write_evaluation(const Evaluation& e, const std::filesystem::path& dir);

// Trains from config.train_path, writes out_dir/model.json (plus
// out_dir/hpo.json when tuning) and, if config.test_path is set, the
// evaluation files. Timing rows are printed to `log`.
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

Evaluation cmd_evaluate(const std::filesystem::path& bundle_path, const std::filesystem::path& test_csv,
                        const CsvOptions& csv, UnknownAction action, const std::filesystem::path& out_dir);

// One line per input row: "row,prediction,trace". The trace is
// "[stage:probability;...]" for cascades and empty for mcc bundles.
std::vector<std::string> cmd_predict(const std::filesystem::path& bundle_path, const std::filesystem::path& csv_path,
                                     const CsvOptions& csv);

struct BenchmarkColumn {
  std::string spec;
  std::string label;
  std::optional<EvalSummary> summary;
  std::string error;
};

struct BenchmarkReport {
  std::vector<std::string> class_names;
  std::vector<ClassId> class_order;  // descending training frequency
  std::vector<std::size_t> train_counts;
  std::vector<std::size_t> test_counts;
  std::vector<BenchmarkColumn> columns;

  // Rows: classes, Accuracy, Average F1, Std-dev F1, HPO/Train/Test time.
  std::string to_text() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Runs every method spec (e.g. "mcc+gs", "sbc+hgs+sw") on the shared
// train/test files of `config`. A failing column is recorded and the
// remaining columns still run.
BenchmarkReport run_benchmark(const RunConfig& config, const std::vector<std::string>& methods, std::ostream& log);
BenchmarkReport cmd_benchmark(const RunConfig& config, const std::vector<std::string>& methods, std::ostream& log);

int exit_code_for(Errc code);

}  // namespace sbc
