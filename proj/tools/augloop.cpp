// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "augloop/error.hpp"
#include "augloop/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace augloop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("IO_ERROR", "cannot write " + path.string());
  out << text;
}

int cmd_run(const std::string& config_path, const std::string& out_flag, const std::optional<std::uint64_t>& seed) {
  auto cfg = RunConfig::load(config_path);
  if (seed) cfg.seed = *seed;
  fs::path out = out_flag.empty() ? cfg.output_dir : fs::path(out_flag);
  if (out.empty()) throw ValidationError("BAD_CONFIG", "no output directory: set 'output_dir' or pass --out");
  cfg.validate();
  int code = kExitOk;
  try {
    const auto result = execute_run(cfg, out);
    std::cerr << fmt::format("{} finished: val_accuracy {:.4f}, {} LLM queries, {} epochs\n", to_string(cfg.method),
                             result.final_metrics.val_accuracy, result.cost.llm_queries,
                             result.cost.total_epochs_trained);
  } catch (const RuntimeError& e) {
    std::cerr << fmt::format("run aborted [{}]: {}\n", e.code(), e.what());
    code = kExitRuntime;
  }
  const auto rows = collect_report({out / "ledger.jsonl"});
  write_text(out / "report.txt", render_report_text(rows));
  write_text(out / "report.csv", render_report_csv(rows));
  return code;
}

int cmd_report(const std::vector<std::string>& ledgers, const std::string& out_flag) {
  if (ledgers.empty()) throw ValidationError("BAD_ARGS", "report needs at least one ledger");
  std::vector<fs::path> paths(ledgers.begin(), ledgers.end());
  const auto rows = collect_report(paths);
  const auto text = render_report_text(rows);
  std::cout << text;
  if (!out_flag.empty()) {
    fs::create_directories(out_flag);
    write_text(fs::path(out_flag) / "report.txt", text);
    write_text(fs::path(out_flag) / "report.csv", render_report_csv(rows));
  }
  return kExitOk;
}

int cmd_replay(const std::string& ledger, const std::string& out_flag) {
  const fs::path scratch = out_flag.empty() ? fs::path(ledger).parent_path() / "replay" : fs::path(out_flag);
  const auto report = replay(ledger, scratch);
  if (report.ok()) {
    std::cout << "replay: 0 divergences\n";
    return kExitOk;
  }
  std::cout << fmt::format("replay: {} divergence(s)\n{}", report.divergences.size(), report.to_string());
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-guided augmentation policy search"};
  app.require_subcommand(1);

  std::string config_path, out_flag;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "execute the run described by a config file");
  run->add_option("--config", config_path, "run config (JSON)")->required();
  run->add_option("--out", out_flag, "output directory (overrides config)");
  run->add_option("--seed", seed, "run seed (overrides config)");

  std::vector<std::string> ledgers;
  std::string report_out;
  auto* report = app.add_subcommand("report", "compare finished runs");
  report->add_option("ledgers", ledgers, "ledger.jsonl files");
  report->add_option("--out", report_out, "directory for report.txt and report.csv");

  std::string replay_ledger, replay_out;
  auto* rep = app.add_subcommand("replay", "re-execute a run from its ledger and compare");
  rep->add_option("ledger", replay_ledger, "ledger.jsonl")->required();
  rep->add_option("--out", replay_out, "scratch directory for the replayed run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(config_path, out_flag, seed);
    if (*report) return cmd_report(ledgers, report_out);
    return cmd_replay(replay_ledger, replay_out);
  } catch (const ValidationError& e) {
    std::cerr << fmt::format("error [{}]: {}\n", e.code(), e.what());
    return kExitValidation;
  } catch (const RuntimeError& e) {
    std::cerr << fmt::format("error [{}]: {}\n", e.code(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
