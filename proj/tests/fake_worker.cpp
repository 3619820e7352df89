// SPDX-License-Identifier: Apache-2.0
// Minimal adapter speaking the bridge protocol, for bridge tests.
// Usage: fake_worker [--mode=normal|crash|hang|bad-version|bad-seq|reject-init] <dataset> <model>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

namespace {

void send(const nlohmann::json& j) { std::cout << j.dump() << "\n" << std::flush; }

void send_error(const nlohmann::json& seq, const std::string& code, const std::string& message) {
  send({{"msg", "error"}, {"seq", seq}, {"code", code}, {"message", message}});
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode = "normal";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--mode=", 0) == 0) mode = a.substr(7);
  }

  bool initialized = false;
  int epochs = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    const auto req = nlohmann::json::parse(line, nullptr, false);
    if (!req.is_object()) {
      send_error(nullptr, "BAD_REQUEST", "not a JSON object");
      continue;
    }
    const auto seq = req.value("seq", nlohmann::json());
    const std::string msg = req.value("msg", "");
    if (msg == "hello") {
      send({{"msg", "hello"}, {"seq", seq}, {"protocol", mode == "bad-version" ? "augloop/0" : "augloop/1"}});
    } else if (msg == "init") {
      if (mode == "reject-init") {
        send_error(seq, "MODEL_UNKNOWN", "no such model");
        continue;
      }
      initialized = true;
      epochs = 0;
      send({{"msg", "init"}, {"seq", seq}});
    } else if (msg == "train_epoch") {
      if (!initialized) {
        send_error(seq, "NOT_INITIALIZED", "train_epoch before init");
        continue;
      }
      if (mode == "crash") std::_Exit(7);
      if (mode == "hang") std::this_thread::sleep_for(std::chrono::hours(1));
      ++epochs;
      send({{"msg", "epoch_done"}, {"seq", seq}, {"train_loss", 1.0 / (1 + epochs)}});
    } else if (msg == "evaluate") {
      const nlohmann::json reply_seq = mode == "bad-seq" ? nlohmann::json(seq.get<int>() + 100) : seq;
      send({{"msg", "eval_done"},
            {"seq", reply_seq},
            {"metrics", {{"val_accuracy", 0.5 + 0.125 * epochs}, {"correct", 4 + epochs}, {"total", 8}}}});
    } else if (msg == "shutdown") {
      send({{"msg", "shutdown"}, {"seq", seq}});
      return 0;
    } else {
      send_error(seq, "UNKNOWN_MESSAGE", "unknown msg '" + msg + "'");
    }
  }
  return 0;
}
