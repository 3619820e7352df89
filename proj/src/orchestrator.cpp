// SPDX-License-Identifier: Apache-2.0
#include "augloop/orchestrator.hpp"

#include <chrono>

#include <fmt/format.h>

#include "augloop/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace augloop {

LedgerWriter::LedgerWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw RuntimeError("IO_ERROR", "cannot write ledger " + path.string());
}

void LedgerWriter::write(const json& line) {
  out_ << line.dump() << '\n';
  out_.flush();
}

LabeledDataset materialize_dataset(const RunConfig& cfg) {
  if (cfg.synthetic) return generate_synthetic_dataset(*cfg.synthetic, RunSeeds::derive(cfg.seed).dataset);
  return load_dataset(cfg.dataset_dir);
}

namespace {

using Clock = std::chrono::steady_clock;

// Stand-in when the very first query fails: n exact no-ops.
Policy fallback_policy(int n) {
  std::vector<AugOpInstance> ops;
  for (int i = 0; i < n; ++i) ops.push_back(identity_op(all_aug_kinds()[static_cast<std::size_t>(i) % kAugKindCount]));
  return Policy::of(std::move(ops));
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json metrics_json(const Metrics& m) {
  return {{"val_accuracy", m.val_accuracy},
          {"train_loss", m.train_loss},
          {"epoch_index", m.epoch_index},
          {"correct", m.correct},
          {"total", m.total}};
}

// Counts initializations and epochs so the ledger reports what happened,
// not what the algorithm was supposed to do.
class CountingTrainer final : public Trainer {
 public:
  explicit CountingTrainer(Trainer& inner) : inner_(inner) {}
  void init(const std::string& d, std::uint64_t seed) override {
    ++inits;
    inner_.init(d, seed);
  }
  double train_epoch(const EpochPlan& plan) override {
    ++epochs;
    return inner_.train_epoch(plan);
  }
  Metrics evaluate() override { return inner_.evaluate(); }
  std::unique_ptr<ModelSnapshot> snapshot() const override { return inner_.snapshot(); }
  void restore(const ModelSnapshot& s) override { inner_.restore(s); }
  std::string name() const override { return inner_.name(); }

  int inits = 0;
  int epochs = 0;

 private:
  Trainer& inner_;
};

class Run {
 public:
  Run(const RunConfig& cfg, const fs::path& out_dir, Trainer& trainer, Provider* provider)
      : cfg_(cfg), seeds_(RunSeeds::derive(cfg.seed)), out_dir_(out_dir), trainer_(trainer), provider_(provider),
        ledger_((fs::create_directories(out_dir), out_dir / "ledger.jsonl")) {
    result_.ledger_path = out_dir / "ledger.jsonl";
  }

  RunResult execute() {
    write_header();
    try {
      switch (cfg_.method) {
        case Method::method1: method1(); break;
        case Method::method2: method2(); break;
        case Method::baseline: baseline(); break;
      }
      result_.status = "completed";
    } catch (const Error& e) {
      result_.status = "aborted";
      result_.error_code = e.code();
      result_.error_message = e.what();
      write_summary();
      throw;
    }
    write_summary();
    return result_;
  }

 private:
  void write_header() {
    json deviations = json::array();
    if (cfg_.method == Method::method1) {
      deviations.push_back("method1 returns the best-accuracy iteration's model, not the last one");
      if (cfg_.reinitialize_per_iteration) deviations.push_back("method1 reinitializes the model every iteration");
    }
    ledger_.write({{"type", "header"},
                   {"ledger_version", kLedgerVersion},
                   {"protocol_version", kProtocolVersion},
                   {"catalog_version", Catalog::standard().version()},
                   {"run_id", fmt::format("{}-{}", to_string(cfg_.method), cfg_.seed)},
                   {"method", std::string(to_string(cfg_.method))},
                   {"trainer", trainer_.name()},
                   {"provider", cfg_.method == Method::baseline ? "none" : provider_->name()},
                   {"config", cfg_.to_json()},
                   {"seeds",
                    {{"run", seeds_.run},
                     {"trainer", seeds_.trainer},
                     {"dataset", seeds_.dataset},
                     {"augment", seeds_.augment}}},
                   {"deviations", deviations}});
  }

  // One LLM query: writes the transcript file and a query line. Returns the
  // new policy, or nullopt when the query failed (the caller keeps its policy).
  std::optional<Policy> query(const PromptBundle& prompt, int after_index) {
    const auto ref = fmt::format("q{:03}", result_.cost.llm_queries);
    auto outcome = query_policy(*provider_, prompt, Catalog::standard(), cfg_.n_augmentations,
                                cfg_.provider_config.max_repairs);
    ++result_.cost.llm_queries;
    result_.cost.provider_calls += static_cast<int>(outcome.transcript.exchanges.size());
    result_.cost.provider_cost_estimate += outcome.transcript.cost_estimate;
    fs::create_directories(out_dir_ / "transcripts");
    {
      std::ofstream t(out_dir_ / "transcripts" / (ref + ".json"), std::ios::binary | std::ios::trunc);
      t << outcome.transcript.to_json().dump(2) << '\n';
    }
    ledger_.write({{"type", "query"},
                   {"after_index", after_index},
                   {"transcript_ref", ref},
                   {"ok", outcome.ok()},
                   {"policy", outcome.ok() ? json(canonical_serialize(*outcome.policy)) : json(nullptr)},
                   {"repair_count", outcome.transcript.repair_count},
                   {"error_code", outcome.error_code},
                   {"cost", outcome.transcript.cost_estimate},
                   {"wall_latency_s", outcome.transcript.wall_latency_s}});
    last_ref_ = ref;
    return outcome.policy;
  }

  void iteration_line(int index, const std::optional<Policy>& policy, const std::optional<Metrics>& metrics,
                      double train_loss, bool degraded, Clock::time_point t0, json extra = json::object()) {
    json line{{"type", "iteration"},
              {"index", index},
              {"policy", policy ? json(canonical_serialize(*policy)) : json(nullptr)},
              {"train_loss", train_loss},
              {"metrics", metrics ? metrics_json(*metrics) : json(nullptr)},
              {"transcript_ref", last_ref_.empty() ? json(nullptr) : json(last_ref_)},
              {"epochs_trained_so_far", counting().epochs},
              {"seed", seeds_.augment},
              {"degraded", degraded},
              {"wall_time_s", seconds_since(t0)}};
    for (auto it = extra.begin(); it != extra.end(); ++it) line[it.key()] = it.value();
    ledger_.write(line);
    last_ref_.clear();
  }

  CountingTrainer& counting() { return static_cast<CountingTrainer&>(trainer_); }

  std::unique_ptr<Augmenter> augmenter_for(const Policy& p) { return std::make_unique<PolicyAugmenter>(p, &counters_); }

  Policy initial_policy(bool& degraded) {
    auto p = query(build_initial_prompt(cfg_.context), 0);
    degraded = !p.has_value();
    return p ? std::move(*p) : fallback_policy(cfg_.n_augmentations);
  }

  void method1() {
    bool degraded = false;
    Policy policy = initial_policy(degraded);
    std::vector<HistoryEntry> history;
    std::unique_ptr<ModelSnapshot> best_model;
    double best = -1.0;
    for (int t = 1; t <= cfg_.t_iterations; ++t) {
      const auto t0 = Clock::now();
      if (t == 1 || cfg_.reinitialize_per_iteration) trainer_.init(cfg_.context.model_description, seeds_.trainer);
      const auto aug = augmenter_for(policy);
      const auto fitted = fit(trainer_, *aug, derive_seed(seeds_.augment, static_cast<std::uint64_t>(t)), cfg_.stopping);
      const Metrics& a = fitted.best;
      if (a.val_accuracy > best) {
        best = a.val_accuracy;
        best_model = trainer_.snapshot();
        result_.final_metrics = a;
        result_.best_index = t;
      }
      const auto used = policy;
      const bool used_degraded = degraded;
      history.push_back({t, used, a.val_accuracy});
      if (auto next = query(build_feedback_prompt(history, cfg_.context), t)) {
        policy = std::move(*next);
        degraded = false;
      } else {
        degraded = true;
      }
      iteration_line(t, used, a, a.train_loss, used_degraded, t0,
                     {{"epochs_this_iteration", fitted.epochs_trained}, {"best_epoch", fitted.best_epoch}});
    }
    if (best_model) trainer_.restore(*best_model);
  }

  void method2() {
    bool degraded = false;
    Policy policy = initial_policy(degraded);
    std::vector<HistoryEntry> history;
    trainer_.init(cfg_.context.model_description, seeds_.trainer);
    EarlyStopping stopper(cfg_.stopping.patience);
    std::unique_ptr<ModelSnapshot> best_model;
    auto aug = augmenter_for(policy);
    for (int e = 1; e <= cfg_.epochs; ++e) {
      const auto t0 = Clock::now();
      const double loss = trainer_.train_epoch({e, aug.get(), seeds_.augment});
      const auto used = policy;
      const bool used_degraded = degraded;
      if (e % cfg_.t_interval != 0) {
        iteration_line(e, used, std::nullopt, loss, used_degraded, t0);
        continue;
      }
      const Metrics m = trainer_.evaluate();
      if (stopper.update(m.val_accuracy)) {
        best_model = trainer_.snapshot();
        result_.final_metrics = m;
        result_.best_index = e;
      }
      const bool stop = stopper.should_stop();
      history.push_back({e, used, m.val_accuracy});
      if (!stop) {
        if (auto next = query(build_feedback_prompt(history, cfg_.context), e)) {
          policy = std::move(*next);
          degraded = false;
          aug = augmenter_for(policy);
        } else {
          degraded = true;
        }
      }
      iteration_line(e, used, m, loss, used_degraded, t0, {{"early_stop", stop}});
      if (stop) break;
    }
    if (best_model) trainer_.restore(*best_model);
  }

  void baseline() {
    trainer_.init(cfg_.context.model_description, seeds_.trainer);
    BaselineAugmenter aug(cfg_.baseline, &counters_);
    auto t0 = Clock::now();
    const auto fitted = fit(trainer_, aug, seeds_.augment, cfg_.stopping, [&](const EpochLog& log, const Metrics& m) {
      iteration_line(log.epoch, std::nullopt, m, log.train_loss, false, t0);
      t0 = Clock::now();
    });
    result_.final_metrics = fitted.best;
    result_.best_index = fitted.best_epoch;
  }

  void write_summary() {
    result_.cost.total_epochs_trained = counting().epochs;
    result_.cost.full_trainings = counting().inits;
    result_.kernel_invocations = counters_.total_invoked();
    json summary{{"type", "summary"},
                 {"status", result_.status},
                 {"final_metrics", metrics_json(result_.final_metrics)},
                 {"best_index", result_.best_index},
                 {"cost",
                  {{"llm_queries", result_.cost.llm_queries},
                   {"provider_calls", result_.cost.provider_calls},
                   {"total_epochs_trained", result_.cost.total_epochs_trained},
                   {"full_trainings", result_.cost.full_trainings},
                   {"provider_cost_estimate", result_.cost.provider_cost_estimate}}},
                 {"kernel_invocations", result_.kernel_invocations},
                 {"wall_time_s", seconds_since(started_)}};
    if (!result_.error_code.empty()) {
      summary["error"] = {{"code", result_.error_code}, {"message", result_.error_message}};
    }
    ledger_.write(summary);
  }

  const RunConfig& cfg_;
  RunSeeds seeds_;
  fs::path out_dir_;
  Trainer& trainer_;
  Provider* provider_;
  LedgerWriter ledger_;
  KernelCounters counters_;
  RunResult result_;
  std::string last_ref_;
  Clock::time_point started_ = Clock::now();
};

std::unique_ptr<Provider> make_provider(const RunConfig& cfg) {
  if (cfg.provider == "mock-oracle") return std::make_unique<MockOracleProvider>(cfg.oracle);
  if (cfg.provider == "mock-scripted") return ScriptedProvider::from_file(cfg.script_path.string());
  return std::make_unique<HttpProvider>(cfg.provider_config);
}

}  // namespace

RunResult execute_run(const RunConfig& cfg, const fs::path& out_dir, RunDeps deps) {
  cfg.validate(deps.provider == nullptr);
  std::unique_ptr<Provider> own_provider;
  Provider* provider = deps.provider;
  if (provider == nullptr && cfg.method != Method::baseline) {
    own_provider = make_provider(cfg);
    provider = own_provider.get();
  }

  std::optional<LabeledDataset> own_dataset;
  const LabeledDataset* dataset = deps.dataset;
  std::unique_ptr<Trainer> own_trainer;
  Trainer* trainer = deps.trainer;
  if (trainer == nullptr) {
    if (cfg.trainer_kind == "reference") {
      if (dataset == nullptr) dataset = &own_dataset.emplace(materialize_dataset(cfg));
      own_trainer = std::make_unique<ReferenceTrainer>(*dataset, cfg.reference);
    } else {
      fs::path data_path = cfg.dataset_dir;
      if (cfg.synthetic) {
        data_path = out_dir / "dataset";
        write_dataset(dataset != nullptr ? *dataset : materialize_dataset(cfg), data_path);
      }
      own_trainer = std::make_unique<BridgeTrainer>(cfg.bridge, fs::absolute(data_path).string());
    }
    trainer = own_trainer.get();
  }
  CountingTrainer counted(*trainer);
  Run run(cfg, out_dir, counted, provider);
  return run.execute();
}

}  // namespace augloop
