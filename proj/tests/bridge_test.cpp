// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <fstream>
#include <sstream>

#include "augloop/bridge.hpp"
#include "augloop/error.hpp"
#include "doctest.h"

using namespace augloop;

namespace {

BridgeConfig worker(const std::string& mode, double timeout_s = 10.0) {
  return {{AUGLOOP_FAKE_WORKER, "--mode=" + mode}, timeout_s};
}

std::string error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

Policy rotate_policy() {
  AugOpInstance op;
  op.kind = AugKind::rotate;
  op.params["degrees"] = 15.0;
  op.apply_probability = 0.5;
  return Policy::of({op});
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("bridge round trip matches the golden transcript") {
  BridgeTrainer tr(worker("normal"), "/data/shapes");
  tr.init("mlp-128", 42);
  NoAugmentation none;
  PolicyAugmenter aug(rotate_policy());
  CHECK(tr.train_epoch({1, &none, 7}) == doctest::Approx(0.5));
  CHECK(tr.train_epoch({2, &aug, 7}) == doctest::Approx(1.0 / 3.0));
  const auto m = tr.evaluate();
  CHECK(m.val_accuracy == 0.75);
  CHECK(m.correct == 6);
  CHECK(m.total == 8);
  CHECK(m.epoch_index == 2);
  tr.shutdown();
  CHECK_FALSE(tr.running());

  std::string log;
  for (const auto& l : tr.wire_log()) log += l + "\n";
  CHECK(log == read_file(AUGLOOP_FIXTURES "/bridge_transcript.golden.txt"));
}

TEST_CASE("re-init resets the adapter without relaunching") {
  BridgeTrainer tr(worker("normal"), "d");
  NoAugmentation none;
  tr.init("m", 1);
  tr.train_epoch({1, &none, 0});
  tr.init("m", 1);
  CHECK(tr.evaluate().val_accuracy == 0.5);
  const auto& log = tr.wire_log();
  CHECK(std::count_if(log.begin(), log.end(), [](const auto& l) { return l.find("\"hello\"") != std::string::npos; }) ==
        2);  // one request, one reply
}

TEST_CASE("adapter failures surface as runtime errors") {
  NoAugmentation none;
  SUBCASE("crash") {
    BridgeTrainer tr(worker("crash"), "d");
    tr.init("m", 1);
    try {
      tr.train_epoch({1, &none, 0});
      FAIL("expected TRAINER_CRASHED");
    } catch (const RuntimeError& e) {
      CHECK(e.code() == "TRAINER_CRASHED");
      CHECK(std::string(e.what()).find("status 7") != std::string::npos);
    }
    CHECK_FALSE(tr.running());
  }
  SUBCASE("hang hits the timeout") {
    BridgeTrainer tr(worker("hang", 0.5), "d");
    tr.init("m", 1);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(error_code_of([&] { tr.train_epoch({1, &none, 0}); }) == "TRAINER_TIMEOUT");
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
    CHECK_FALSE(tr.running());
  }
  SUBCASE("protocol version mismatch") {
    BridgeTrainer tr(worker("bad-version"), "d");
    CHECK(error_code_of([&] { tr.init("m", 1); }) == "PROTOCOL_ERROR");
  }
  SUBCASE("reply with the wrong seq") {
    BridgeTrainer tr(worker("bad-seq"), "d");
    tr.init("m", 1);
    CHECK(error_code_of([&] { tr.evaluate(); }) == "PROTOCOL_ERROR");
  }
  SUBCASE("error reply") {
    BridgeTrainer tr(worker("reject-init"), "d");
    try {
      tr.init("m", 1);
      FAIL("expected TRAINER_ERROR");
    } catch (const RuntimeError& e) {
      CHECK(e.code() == "TRAINER_ERROR");
      CHECK(std::string(e.what()).find("MODEL_UNKNOWN") != std::string::npos);
    }
  }
  SUBCASE("train before init") {
    BridgeTrainer tr(worker("normal"), "d");
    CHECK(error_code_of([&] { tr.train_epoch({1, &none, 0}); }) == "NOT_INITIALIZED");
    CHECK(error_code_of([&] { tr.evaluate(); }) == "NOT_INITIALIZED");
  }
  SUBCASE("missing executable") {
    BridgeTrainer tr({{"/nonexistent/augloop-worker"}, 1.0}, "d");
    CHECK(error_code_of([&] { tr.init("m", 1); }) == "TRAINER_CRASHED");
  }
}

TEST_CASE("non-policy augmenters cannot cross the bridge") {
  BridgeTrainer tr(worker("normal"), "d");
  tr.init("m", 1);
  BaselineAugmenter trivial({BaselineStrategy::trivial});
  CHECK(error_code_of([&] { tr.train_epoch({1, &trivial, 0}); }) == "BRIDGE_UNSUPPORTED");
  BaselineAugmenter none({BaselineStrategy::none});
  CHECK(tr.train_epoch({1, &none, 0}) == doctest::Approx(0.5));
}

TEST_CASE("bridge config validation") {
  CHECK_THROWS_AS(BridgeTrainer({{}, 1.0}, "d"), ValidationError);
  CHECK_THROWS_AS(BridgeTrainer({{"x"}, 0.0}, "d"), ValidationError);
}
