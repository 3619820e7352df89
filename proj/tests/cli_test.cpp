// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int exit_code = -1;
  std::string output;  // stdout and stderr together
};

// Runs the CLI from the fixtures directory so relative paths stay stable.
Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      "cd '" AUGLOOP_FIXTURES "' && " + env + " '" AUGLOOP_CLI "' " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("augloop_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("run") {
  SUBCASE("missing method is a validation error naming the field") {
    const auto r = cli("run --config configs/missing_method.json --out " + scratch("missing").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("'method'") != std::string::npos);
  }
  SUBCASE("unset API key fails before any training") {
    const auto out = scratch("nokey");
    const auto r = cli("run --config configs/http_provider.json --out " + out.string(), "env -u AUGLOOP_CLI_TEST_KEY");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("AUGLOOP_CLI_TEST_KEY") != std::string::npos);
    CHECK_FALSE(fs::exists(out / "ledger.jsonl"));
  }
  SUBCASE("API key never appears in output or artifacts") {
    const auto out = scratch("secret");
    const std::string secret = "sk-test-9f8e7d6c5b4a";
    const auto r = cli("run --config configs/http_provider.json --out " + out.string(),
                       "AUGLOOP_CLI_TEST_KEY=" + secret);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find(secret) == std::string::npos);
    for (const auto& e : fs::recursive_directory_iterator(out)) {
      if (e.is_regular_file()) CHECK(slurp(e.path()).find(secret) == std::string::npos);
    }
  }
  SUBCASE("mock method2 run writes ledger, transcripts and reports") {
    const auto out = scratch("ok");
    const auto r = cli("run --config configs/tiny_method2.json --out " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out / "ledger.jsonl"));
    CHECK(fs::exists(out / "transcripts" / "q000.json"));
    CHECK(fs::exists(out / "report.txt"));
    CHECK(fs::exists(out / "report.csv"));
  }
  SUBCASE("--seed overrides the config") {
    const auto out = scratch("seed");
    CHECK(cli("run --config configs/tiny_none.json --seed 99 --out " + out.string()).exit_code == 0);
    std::ifstream in(out / "ledger.jsonl");
    std::string header;
    std::getline(in, header);
    CHECK(nlohmann::json::parse(header)["seeds"]["run"] == 99);
  }
  SUBCASE("unknown flag") { CHECK(cli("run --config x.json --bogus").exit_code == 2); }
}

TEST_CASE("report") {
  SUBCASE("golden report for two checked-in ledgers") {
    const auto out = scratch("report");
    const auto r = cli("report ledgers/method2/ledger.jsonl ledgers/none/ledger.jsonl --out " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(slurp(out / "report.csv") == slurp(AUGLOOP_FIXTURES "/report.golden.csv"));
    CHECK(slurp(out / "report.txt") == slurp(AUGLOOP_FIXTURES "/report.golden.txt"));
  }
  SUBCASE("empty ledger list") { CHECK(cli("report").exit_code == 2); }
  SUBCASE("corrupt ledger is marked invalid, others still reported") {
    const auto r = cli("report ledgers/none/ledger.jsonl configs/missing_method.json");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("baseline:none") != std::string::npos);
    CHECK(r.output.find("INVALID") != std::string::npos);
  }
}

TEST_CASE("replay") {
  SUBCASE("pristine checked-in ledger") {
    const auto r = cli("replay ledgers/method2/ledger.jsonl --out " + scratch("rp_ok").string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("0 divergences") != std::string::npos);
  }
  const auto copy = scratch("rp_copy");
  fs::create_directories(copy);
  fs::copy(AUGLOOP_FIXTURES "/ledgers/method2", copy, fs::copy_options::recursive);
  std::vector<nlohmann::json> lines;
  {
    std::ifstream in(copy / "ledger.jsonl");
    std::string line;
    while (std::getline(in, line)) lines.push_back(nlohmann::json::parse(line));
  }
  auto write = [&](const std::vector<nlohmann::json>& ls) {
    std::ofstream out(copy / "ledger.jsonl", std::ios::trunc);
    for (const auto& l : ls) out << l.dump() << '\n';
  };
  SUBCASE("tampered ledger lists the divergence") {
    auto t = lines;
    for (auto& l : t) {
      if (l["type"] == "iteration" && !l["metrics"].is_null()) {
        l["metrics"]["correct"] = l["metrics"]["correct"].get<int>() + 1;
        break;
      }
    }
    write(t);
    const auto r = cli("replay " + (copy / "ledger.jsonl").string() + " --out " + scratch("rp_t").string());
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("1 divergence") != std::string::npos);
    CHECK(r.output.find("metrics.correct") != std::string::npos);
  }
  SUBCASE("newer ledger version") {
    auto t = lines;
    t[0]["ledger_version"] = "augloop-ledger/9";
    write(t);
    const auto r = cli("replay " + (copy / "ledger.jsonl").string() + " --out " + scratch("rp_v").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("VERSION_MISMATCH") != std::string::npos);
  }
}
