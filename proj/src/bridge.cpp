// SPDX-License-Identifier: Apache-2.0
#include "augloop/bridge.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include <fmt/format.h>

#include "augloop/error.hpp"

extern char** environ;

namespace augloop {

void BridgeConfig::validate() const {
  if (command.empty()) throw ValidationError("BAD_CONFIG", "bridge command must not be empty");
  if (!(timeout_s > 0.0)) throw ValidationError("BAD_CONFIG", "bridge timeout must be > 0");
}

BridgeTrainer::BridgeTrainer(BridgeConfig cfg, std::string dataset_path)
    : cfg_(std::move(cfg)), dataset_path_(std::move(dataset_path)) {
  cfg_.validate();
}

BridgeTrainer::~BridgeTrainer() {
  try {
    shutdown();
  } catch (...) {
    kill_child();
  }
}

void BridgeTrainer::launch(const std::string& model_description) {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
    throw RuntimeError("TRAINER_CRASHED", fmt::format("pipe failed: {}", std::strerror(errno)));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) posix_spawn_file_actions_addclose(&actions, fd);

  std::vector<std::string> args = cfg_.command;
  args.push_back(dataset_path_);
  args.push_back(model_description);
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  const int rc = posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    pid_ = -1;
    throw RuntimeError("TRAINER_CRASHED", fmt::format("cannot start '{}': {}", args[0], std::strerror(rc)));
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
  seq_ = 0;

  const auto seq = ++seq_;
  const auto reply = request(fmt::format(R"({{"catalog":{},"msg":"hello","protocol":{},"seq":{}}})",
                                         nlohmann::json(Catalog::standard().version()).dump(),
                                         nlohmann::json(kProtocolVersion).dump(), seq),
                             seq, "hello");
  if (reply.value("protocol", "") != kProtocolVersion) {
    kill_child();
    throw RuntimeError("PROTOCOL_ERROR", fmt::format("adapter speaks '{}', expected '{}'",
                                                     reply.value("protocol", ""), kProtocolVersion));
  }
}

void BridgeTrainer::kill_child() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

std::string BridgeTrainer::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg_.timeout_s);
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      kill_child();
      throw RuntimeError("TRAINER_TIMEOUT", fmt::format("adapter gave no reply within {} s", cfg_.timeout_s));
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (pr < 0 && errno != EINTR) throw RuntimeError("TRAINER_CRASHED", std::strerror(errno));
    if (pr <= 0) continue;
    char chunk[4096];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n > 0) {
      buffer_.append(chunk, static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    int status = 0;
    const pid_t pid = pid_;
    pid_ = -1;
    ::close(from_child_);
    ::close(to_child_);
    from_child_ = to_child_ = -1;
    ::waitpid(pid, &status, 0);
    const auto how = WIFSIGNALED(status) ? fmt::format("killed by signal {}", WTERMSIG(status))
                                         : fmt::format("exited with status {}", WEXITSTATUS(status));
    throw RuntimeError("TRAINER_CRASHED", "adapter closed its output (" + how + ")");
  }
}

nlohmann::json BridgeTrainer::request(const std::string& line, std::uint64_t seq, const char* expected_msg) {
  if (pid_ <= 0) throw RuntimeError("TRAINER_CRASHED", "adapter is not running");
  log_.push_back("> " + line);
  const std::string framed = line + "\n";
  std::size_t off = 0;
  while (off < framed.size()) {
    const auto n = ::write(to_child_, framed.data() + off, framed.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      kill_child();
      throw RuntimeError("TRAINER_CRASHED", fmt::format("cannot write to adapter: {}", std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
  const std::string reply_line = read_line();
  log_.push_back("< " + reply_line);
  auto reply = nlohmann::json::parse(reply_line, nullptr, false);
  if (!reply.is_object() || !reply.contains("msg") || !reply.contains("seq")) {
    throw RuntimeError("PROTOCOL_ERROR", "adapter sent a malformed line: " + reply_line);
  }
  if (reply["seq"] != seq) {
    throw RuntimeError("PROTOCOL_ERROR", fmt::format("reply seq {} does not match request seq {}",
                                                     reply["seq"].dump(), seq));
  }
  if (reply["msg"] == "error") {
    throw RuntimeError("TRAINER_ERROR", fmt::format("{}: {}", reply.value("code", "UNKNOWN"),
                                                    reply.value("message", "")));
  }
  if (reply["msg"] != expected_msg) {
    throw RuntimeError("PROTOCOL_ERROR",
                       fmt::format("expected '{}' reply, got {}", expected_msg, reply["msg"].dump()));
  }
  return reply;
}

void BridgeTrainer::init(const std::string& model_description, std::uint64_t seed) {
  initialized_ = false;
  if (pid_ <= 0) launch(model_description);
  const auto seq = ++seq_;
  request(fmt::format(R"({{"model":{},"msg":"init","seed":{},"seq":{}}})", nlohmann::json(model_description).dump(),
                      seed, seq),
          seq, "init");
  epochs_ = 0;
  last_loss_ = 0.0;
  initialized_ = true;
}

double BridgeTrainer::train_epoch(const EpochPlan& plan) {
  if (!initialized_) throw RuntimeError("NOT_INITIALIZED", "init() must run before train_epoch()");
  std::string policy = "null";
  if (plan.augmenter != nullptr && !plan.augmenter->is_identity()) {
    const Policy* p = plan.augmenter->policy();
    if (p == nullptr) {
      throw ValidationError("BRIDGE_UNSUPPORTED",
                            fmt::format("the bridge can only carry policies, not '{}'", plan.augmenter->describe()));
    }
    policy = canonical_serialize(*p);
  }
  const auto seq = ++seq_;
  const auto reply = request(fmt::format(R"({{"epoch":{},"msg":"train_epoch","policy":{},"seed":{},"seq":{}}})",
                                         plan.epoch, policy, plan.augment_seed, seq),
                             seq, "epoch_done");
  if (!reply.contains("train_loss") || !reply["train_loss"].is_number()) {
    throw RuntimeError("PROTOCOL_ERROR", "epoch_done without a numeric train_loss");
  }
  last_loss_ = reply["train_loss"].get<double>();
  ++epochs_;
  return last_loss_;
}

Metrics BridgeTrainer::evaluate() {
  if (!initialized_) throw RuntimeError("NOT_INITIALIZED", "init() must run before evaluate()");
  const auto seq = ++seq_;
  const auto reply = request(fmt::format(R"({{"msg":"evaluate","seq":{}}})", seq), seq, "eval_done");
  const auto& m = reply.contains("metrics") ? reply["metrics"] : nlohmann::json();
  if (!m.is_object() || !m.contains("val_accuracy") || !m["val_accuracy"].is_number()) {
    throw RuntimeError("PROTOCOL_ERROR", "eval_done without metrics.val_accuracy");
  }
  Metrics out;
  out.val_accuracy = m["val_accuracy"].get<double>();
  out.train_loss = m.value("train_loss", last_loss_);
  out.correct = m.value("correct", std::size_t{0});
  out.total = m.value("total", std::size_t{0});
  out.epoch_index = epochs_;
  return out;
}

void BridgeTrainer::shutdown() {
  if (pid_ <= 0) return;
  const auto seq = ++seq_;
  try {
    request(fmt::format(R"({{"msg":"shutdown","seq":{}}})", seq), seq, "shutdown");
  } catch (const Error&) {
    kill_child();
    return;
  }
  ::close(to_child_);
  ::close(from_child_);
  to_child_ = from_child_ = -1;
  int status = 0;
  ::waitpid(pid_, &status, 0);
  pid_ = -1;
}

}  // namespace augloop
