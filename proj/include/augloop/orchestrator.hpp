// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "augloop/baselines.hpp"
#include "augloop/bridge.hpp"
#include "augloop/dataset.hpp"
#include "augloop/gateway.hpp"
#include "augloop/reference_trainer.hpp"

namespace augloop {

inline constexpr const char* kLedgerVersion = "augloop-ledger/1";

enum class Method { method1, method2, baseline };
std::string_view to_string(Method m);

struct RunConfig {
  Method method = Method::method2;
  std::uint64_t seed = 0;
  int n_augmentations = 3;

  std::optional<SyntheticSpec> synthetic;
  std::filesystem::path dataset_dir;

  std::string trainer_kind = "reference";  // reference | bridge
  ReferenceTrainerConfig reference;
  BridgeConfig bridge;
  StoppingRule stopping;

  std::string provider = "mock-oracle";  // mock-oracle | mock-scripted:<path> | http
  std::filesystem::path script_path;
  ProviderConfig provider_config;
  OracleRules oracle;

  ExperimentContext context;
  int t_iterations = 3;
  bool reinitialize_per_iteration = true;
  int epochs = 100;     // method2 E
  int t_interval = 1;   // method2 T
  BaselineConfig baseline;

  std::filesystem::path output_dir;

  /// Relative paths resolve against `base_dir`. Throws ValidationError
  /// (BAD_CONFIG) naming the offending field.
  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  /// Snapshot stored in the ledger header; output_dir is left out so runs
  /// written to different places stay byte-identical.
  nlohmann::json to_json() const;
  /// Semantic checks, referenced paths and, if asked, provider credentials.
  void validate(bool check_provider = true) const;
};

struct RunSeeds {
  std::uint64_t run = 0;
  std::uint64_t trainer = 0;
  std::uint64_t dataset = 0;
  std::uint64_t augment = 0;

  static RunSeeds derive(std::uint64_t run_seed);
};

struct CostAccounting {
  int llm_queries = 0;
  int provider_calls = 0;
  int total_epochs_trained = 0;
  int full_trainings = 0;
  double provider_cost_estimate = 0.0;
};

struct RunResult {
  std::filesystem::path ledger_path;
  std::string status;  // completed | aborted
  Metrics final_metrics;
  int best_index = 0;
  CostAccounting cost;
  std::uint64_t kernel_invocations = 0;
  std::string error_code;
  std::string error_message;
};

/// Appends one JSON object per line and flushes after each.
class LedgerWriter {
 public:
  explicit LedgerWriter(const std::filesystem::path& path);
  void write(const nlohmann::json& line);

 private:
  std::ofstream out_;
};

/// Optional dependency overrides, mainly for tests and replay.
struct RunDeps {
  Provider* provider = nullptr;
  Trainer* trainer = nullptr;
  const LabeledDataset* dataset = nullptr;
};

/// Runs the configured method and writes ledger.jsonl and transcripts/ under
/// `out_dir`. Trainer failures are recorded as an aborted summary and then
/// rethrown.
RunResult execute_run(const RunConfig& cfg, const std::filesystem::path& out_dir, RunDeps deps = {});

LabeledDataset materialize_dataset(const RunConfig& cfg);

//------------------------------------------------------------------------------
// Ledger reading, replay and reports

struct LedgerFile {
  nlohmann::json header;
  std::vector<nlohmann::json> lines;  // everything after the header
  std::optional<nlohmann::json> summary;
  bool truncated = false;
};

/// Throws ValidationError: LEDGER_UNREADABLE, VERSION_MISMATCH.
LedgerFile read_ledger(const std::filesystem::path& path);

/// Removes every key whose name starts with "wall_", recursively.
nlohmann::json strip_wall_fields(const nlohmann::json& j);

struct Divergence {
  std::size_t line = 0;  // 1-based line in the recorded ledger
  std::string field;
  std::string recorded;
  std::string replayed;
};

struct ReplayReport {
  std::vector<Divergence> divergences;
  bool ok() const { return divergences.empty(); }
  std::string to_string() const;
};

/// Re-executes a run with recorded LLM replies in place of the provider and
/// compares the result line by line. Throws ValidationError for
/// VERSION_MISMATCH and LEDGER_TRUNCATED.
ReplayReport replay(const std::filesystem::path& ledger_path, const std::filesystem::path& scratch_dir);

struct ReportRow {
  std::string strategy;
  std::string ledger;
  bool valid = false;
  double val_accuracy = 0.0;
  int llm_queries = 0;
  int total_epochs = 0;
  double wall_time_s = 0.0;
  std::string problem;
};

std::vector<ReportRow> collect_report(const std::vector<std::filesystem::path>& ledgers);
std::string render_report_csv(const std::vector<ReportRow>& rows);
std::string render_report_text(const std::vector<ReportRow>& rows);

}  // namespace augloop
