// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "augloop/baselines.hpp"
#include "augloop/image.hpp"
#include "augloop/policy.hpp"
#include "augloop/transforms.hpp"

namespace augloop {

struct LabeledImage {
  ImageBuffer image;
  int label = 0;

  friend bool operator==(const LabeledImage&, const LabeledImage&) = default;
};

struct LabeledDataset {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> valid;
  std::vector<std::string> class_names;

  /// Throws ValidationError if a label is out of range or a split is empty.
  void validate() const;
  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

struct Metrics {
  double val_accuracy = 0.0;  // correct / total, exactly
  double train_loss = 0.0;
  int epoch_index = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

//------------------------------------------------------------------------------
// Per-sample augmentation used for one epoch.

class Augmenter {
 public:
  virtual ~Augmenter() = default;
  virtual ImageBuffer augment(const ImageBuffer& img, const StreamKey& key) const = 0;
  /// The policy behind this augmenter, if it is policy-driven.
  virtual const Policy* policy() const { return nullptr; }
  virtual bool is_identity() const { return false; }
  virtual std::string describe() const = 0;
};

class NoAugmentation final : public Augmenter {
 public:
  ImageBuffer augment(const ImageBuffer& img, const StreamKey&) const override { return img; }
  bool is_identity() const override { return true; }
  std::string describe() const override { return "none"; }
};

class PolicyAugmenter final : public Augmenter {
 public:
  explicit PolicyAugmenter(Policy policy, KernelCounters* counters = nullptr)
      : policy_(std::move(policy)), counters_(counters) {}
  ImageBuffer augment(const ImageBuffer& img, const StreamKey& key) const override {
    return apply_policy(img, policy_, key, counters_);
  }
  const Policy* policy() const override { return &policy_; }
  std::string describe() const override { return canonical_serialize(policy_); }

 private:
  Policy policy_;
  KernelCounters* counters_;
};

class BaselineAugmenter final : public Augmenter {
 public:
  explicit BaselineAugmenter(BaselineConfig cfg, KernelCounters* counters = nullptr)
      : cfg_(cfg), counters_(counters) {}
  ImageBuffer augment(const ImageBuffer& img, const StreamKey& key) const override {
    return apply_baseline(img, cfg_, key, counters_);
  }
  bool is_identity() const override { return cfg_.strategy == BaselineStrategy::none; }
  std::string describe() const override { return std::string(to_string(cfg_.strategy)); }

 private:
  BaselineConfig cfg_;
  KernelCounters* counters_;
};

//------------------------------------------------------------------------------
// Trainer contract

struct EpochPlan {
  int epoch = 1;  // 1-based, counted since the last init
  const Augmenter* augmenter = nullptr;
  std::uint64_t augment_seed = 0;
};

/// Opaque saved model state; only the trainer that made it can restore it.
class ModelSnapshot {
 public:
  virtual ~ModelSnapshot() = default;
};

/// The surface both optimization methods drive. evaluate() must not change
/// model state; init() is idempotent per (description, seed).
class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual void init(const std::string& model_description, std::uint64_t seed) = 0;
  /// One pass over the augmented training split; returns the mean batch loss.
  virtual double train_epoch(const EpochPlan& plan) = 0;
  /// Metrics on the fixed, never-augmented validation split.
  virtual Metrics evaluate() = 0;
  virtual std::unique_ptr<ModelSnapshot> snapshot() const { return nullptr; }
  virtual void restore(const ModelSnapshot&) {}
  virtual std::string name() const = 0;
};

//------------------------------------------------------------------------------
// Early stopping and train-to-convergence.

struct StoppingRule {
  int max_epochs = 100;
  int patience = 10;
};

/// Tracks the best validation accuracy; improvement means strictly greater.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  /// Returns true when `accuracy` is a new best.
  bool update(double accuracy);
  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }
  int since_best() const { return since_best_; }

 private:
  int patience_;
  double best_ = -1.0;
  int since_best_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct FitResult {
  int epochs_trained = 0;
  int best_epoch = 0;
  Metrics best;
  std::vector<EpochLog> epochs;
};

/// Trains with per-epoch evaluation until early stopping or max_epochs,
/// then restores the best checkpoint when the trainer supports snapshots.
/// `on_epoch` sees each epoch right after its evaluation.
FitResult fit(Trainer& trainer, const Augmenter& augmenter, std::uint64_t augment_seed, const StoppingRule& rule,
              const std::function<void(const EpochLog&, const Metrics&)>& on_epoch = {});

}  // namespace augloop
