// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <sys/types.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "augloop/trainer.hpp"

namespace augloop {

inline constexpr const char* kProtocolVersion = "augloop/1";

struct BridgeConfig {
  /// Adapter command line; the dataset path and model description are
  /// appended as the last two arguments.
  std::vector<std::string> command;
  double timeout_s = 600.0;  // per request

  void validate() const;
};

/// Trainer that forwards every call to an adapter process speaking
/// line-delimited JSON on stdin/stdout. Adapter failures surface as
/// RuntimeError: TRAINER_CRASHED, TRAINER_TIMEOUT, TRAINER_ERROR, PROTOCOL_ERROR.
class BridgeTrainer final : public Trainer {
 public:
  BridgeTrainer(BridgeConfig cfg, std::string dataset_path);
  ~BridgeTrainer() override;
  BridgeTrainer(const BridgeTrainer&) = delete;
  BridgeTrainer& operator=(const BridgeTrainer&) = delete;

  void init(const std::string& model_description, std::uint64_t seed) override;
  double train_epoch(const EpochPlan& plan) override;
  Metrics evaluate() override;
  std::string name() const override { return "bridge"; }

  /// Sends shutdown and waits for the adapter to exit.
  void shutdown();
  bool running() const { return pid_ > 0; }
  /// Every line written (prefixed "> ") and read (prefixed "< ").
  const std::vector<std::string>& wire_log() const { return log_; }

 private:
  void launch(const std::string& model_description);
  nlohmann::json request(const std::string& line, std::uint64_t seq, const char* expected_msg);
  std::string read_line();
  void kill_child();

  BridgeConfig cfg_;
  std::string dataset_path_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t seq_ = 0;
  bool initialized_ = false;
  int epochs_ = 0;
  double last_loss_ = 0.0;
  std::vector<std::string> log_;
};

}  // namespace augloop
