// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "augloop/error.hpp"
#include "augloop/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace augloop {

LedgerFile read_ledger(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("LEDGER_UNREADABLE", "cannot open ledger " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  LedgerFile out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) {
      out.truncated = true;  // partial last line
      break;
    }
    const auto line = std::string_view(text).substr(pos, nl - pos);
    pos = nl + 1;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ValidationError("LEDGER_UNREADABLE", fmt::format("{}:{}: not a JSON object", path.string(), line_no));
    }
    if (line_no == 1) {
      if (j.value("type", "") != "header") {
        throw ValidationError("LEDGER_UNREADABLE", path.string() + ": first line is not a header");
      }
      if (j.value("ledger_version", "") != kLedgerVersion) {
        throw ValidationError("VERSION_MISMATCH", fmt::format("{} was written as '{}', this build reads '{}'",
                                                              path.string(), j.value("ledger_version", "?"),
                                                              kLedgerVersion));
      }
      out.header = std::move(j);
      continue;
    }
    out.lines.push_back(std::move(j));
  }
  if (out.header.is_null()) throw ValidationError("LEDGER_UNREADABLE", path.string() + " is empty");
  if (!out.truncated && !out.lines.empty() && out.lines.back().value("type", "") == "summary") {
    out.summary = out.lines.back();
  }
  return out;
}

json strip_wall_fields(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key().rfind("wall_", 0) == 0) continue;
      out[it.key()] = strip_wall_fields(it.value());
    }
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(strip_wall_fields(v));
    return out;
  }
  return j;
}

std::string ReplayReport::to_string() const {
  std::string out;
  for (const auto& d : divergences) {
    out += fmt::format("line {}: {}: recorded {} replayed {}\n", d.line, d.field, d.recorded, d.replayed);
  }
  return out;
}

namespace {

void flatten(const json& j, const std::string& path, std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], fmt::format("{}[{}]", path, i), out);
    if (j.empty()) out[path] = "[]";
  } else {
    out[path] = j.dump();
  }
}

void compare_lines(std::size_t line, const json& recorded, const json& replayed, std::vector<Divergence>& out) {
  std::map<std::string, std::string> a, b;
  flatten(strip_wall_fields(recorded), "", a);
  flatten(strip_wall_fields(replayed), "", b);
  a.erase("provider");
  b.erase("provider");
  for (const auto& [key, value] : a) {
    const auto it = b.find(key);
    const std::string other = it == b.end() ? "<absent>" : it->second;
    if (other != value) out.push_back({line, key, value, other});
  }
  for (const auto& [key, value] : b) {
    if (!a.count(key)) out.push_back({line, key, "<absent>", value});
  }
}

std::deque<ReplayProvider::Recorded> recorded_replies(const LedgerFile& ledger, const fs::path& dir) {
  std::deque<ReplayProvider::Recorded> out;
  for (const auto& line : ledger.lines) {
    if (line.value("type", "") != "query") continue;
    const auto ref = line.value("transcript_ref", "");
    std::ifstream in(dir / "transcripts" / (ref + ".json"));
    if (!in) throw ValidationError("LEDGER_TRUNCATED", "missing transcript " + ref);
    const auto t = json::parse(in, nullptr, false);
    if (t.is_discarded()) throw ValidationError("LEDGER_UNREADABLE", "transcript " + ref + " is not JSON");
    for (const auto& ex : t.at("exchanges")) {
      ReplayProvider::Recorded r;
      for (const auto& m : ex.at("request")) r.request.push_back({m.at("role"), m.at("content")});
      r.reply = ex.at("raw_response").get<std::string>();
      r.cost = ex.value("cost", 0.0);
      r.error = ex.value("provider_error", "");
      r.status = ex.value("provider_status", 0);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

ReplayReport replay(const fs::path& ledger_path, const fs::path& scratch_dir) {
  const auto recorded = read_ledger(ledger_path);
  if (recorded.truncated || !recorded.summary) {
    throw ValidationError("LEDGER_TRUNCATED", ledger_path.string() + " has no summary line (run cut short)");
  }
  const auto cfg = RunConfig::from_json(recorded.header.at("config"));
  ReplayProvider provider(recorded_replies(recorded, ledger_path.parent_path()));

  fs::remove_all(scratch_dir);
  RunDeps deps;
  deps.provider = &provider;
  try {
    execute_run(cfg, scratch_dir, deps);
  } catch (const RuntimeError&) {
    // An aborted original replays as an aborted run; the summaries compare.
  }
  const auto replayed = read_ledger(scratch_dir / "ledger.jsonl");

  ReplayReport report;
  compare_lines(1, recorded.header, replayed.header, report.divergences);
  const auto n = std::max(recorded.lines.size(), replayed.lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= recorded.lines.size() || i >= replayed.lines.size()) {
      report.divergences.push_back({i + 2, "line", i < recorded.lines.size() ? "present" : "<absent>",
                                    i < replayed.lines.size() ? "present" : "<absent>"});
      continue;
    }
    compare_lines(i + 2, recorded.lines[i], replayed.lines[i], report.divergences);
  }
  for (const auto& m : provider.mismatches()) report.divergences.push_back({0, "prompt", m, ""});
  if (provider.remaining() > 0) {
    report.divergences.push_back({0, "llm replies", fmt::format("{} unused", provider.remaining()), "0 unused"});
  }
  return report;
}

//------------------------------------------------------------------------------

namespace {

std::string strategy_label(const json& config) {
  const auto method = config.value("method", "?");
  if (method == "method1") return fmt::format("method1 (T={})", config["method1"].value("T_iterations", 0));
  if (method == "method2") {
    return fmt::format("method2 (E={}, T={})", config["method2"].value("E", 0), config["method2"].value("T_interval", 0));
  }
  return fmt::format("baseline:{}", config["baseline"].value("strategy", "?"));
}

}  // namespace

std::vector<ReportRow> collect_report(const std::vector<fs::path>& ledgers) {
  std::vector<ReportRow> rows;
  for (const auto& path : ledgers) {
    ReportRow row;
    row.ledger = path.string();
    try {
      const auto l = read_ledger(path);
      row.strategy = strategy_label(l.header.at("config"));
      if (!l.summary) {
        row.problem = "no summary line";
      } else if (l.summary->value("status", "") != "completed") {
        row.problem = "run " + l.summary->value("status", "?");
      } else {
        const auto& s = *l.summary;
        row.val_accuracy = s.at("final_metrics").at("val_accuracy").get<double>();
        row.llm_queries = s.at("cost").at("llm_queries").get<int>();
        row.total_epochs = s.at("cost").at("total_epochs_trained").get<int>();
        row.wall_time_s = s.value("wall_time_s", 0.0);
        row.valid = true;
      }
    } catch (const std::exception& e) {
      row.problem = e.what();
    }
    if (row.strategy.empty()) row.strategy = "?";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "strategy,val_accuracy,llm_queries,total_epochs,wall_time_s,status,ledger\n";
  for (const auto& r : rows) {
    if (r.valid) {
      out += fmt::format("\"{}\",{:.4f},{},{},{:.1f},ok,\"{}\"\n", r.strategy, r.val_accuracy, r.llm_queries,
                         r.total_epochs, r.wall_time_s, r.ledger);
    } else {
      out += fmt::format("\"{}\",,,,,invalid,\"{}\"\n", r.strategy, r.ledger);
    }
  }
  return out;
}

std::string render_report_text(const std::vector<ReportRow>& rows) {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.strategy.size());
  std::string out = fmt::format("{:<{}}  {:>12}  {:>11}  {:>12}  {:>11}\n", "strategy", width, "val_accuracy",
                                "llm_queries", "total_epochs", "wall_time_s");
  for (const auto& r : rows) {
    if (r.valid) {
      out += fmt::format("{:<{}}  {:>12.4f}  {:>11}  {:>12}  {:>11.1f}\n", r.strategy, width, r.val_accuracy,
                         r.llm_queries, r.total_epochs, r.wall_time_s);
    } else {
      out += fmt::format("{:<{}}  INVALID ({}): {}\n", r.strategy, width, r.ledger, r.problem);
    }
  }
  return out;
}

}  // namespace augloop
