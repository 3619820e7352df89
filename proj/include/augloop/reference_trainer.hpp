// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "augloop/trainer.hpp"

namespace augloop {

struct ReferenceTrainerConfig {
  int input_size = 32;  // images are converted to grayscale input_size x input_size
  int hidden_units = 128;
  double learning_rate = 0.01;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  int augment_threads = 1;

  void validate() const;
  StoppingRule stopping() const { return {max_epochs, patience}; }
};

/// Flatten, dense, ReLU, dense, softmax. Parameters live in one flat vector
/// laid out as w1 (hidden x inputs), b1, w2 (classes x hidden), b2.
struct MlpModel {
  int inputs = 0;
  int hidden = 0;
  int classes = 0;
  std::vector<double> params;

  MlpModel() = default;
  MlpModel(int inputs, int hidden, int classes);

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return static_cast<std::size_t>(hidden) * inputs; }
  std::size_t w2_offset() const { return b1_offset() + hidden; }
  std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(classes) * hidden; }

  /// Uniform fan-in scaled weights, zero biases.
  void initialize(std::uint64_t seed);
  std::vector<double> logits(std::span<const double> input) const;
  /// Argmax with ties going to the lower class index.
  int predict(std::span<const double> input) const;
};

/// Row-major inputs, one row of `model.inputs` values per label.
struct Batch {
  std::vector<double> inputs;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

/// Mean cross-entropy over the batch.
double batch_loss(const MlpModel& model, const Batch& batch);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as MlpModel::params
};

LossAndGradient loss_and_gradient(const MlpModel& model, const Batch& batch);

using GradientFn = std::function<std::vector<double>(const MlpModel&, const Batch&)>;

/// Central differences (step 1e-4) on `coordinates` randomly sampled
/// parameters; returns the max of |a - n| / max(|a|, |n|), with 0/0 taken as 0.
double gradient_check(const MlpModel& model, const Batch& batch, std::uint64_t seed, const GradientFn& analytic = {},
                      int coordinates = 100, double step = 1e-4);

/// Canonical input vector: grayscale, resized to size x size, standardized to
/// zero mean and unit variance per image, row-major.
std::vector<double> canonical_input(const ImageBuffer& img, int size);

class ReferenceTrainer final : public Trainer {
 public:
  ReferenceTrainer(const LabeledDataset& dataset, ReferenceTrainerConfig cfg);

  void init(const std::string& model_description, std::uint64_t seed) override;
  double train_epoch(const EpochPlan& plan) override;
  Metrics evaluate() override;
  std::unique_ptr<ModelSnapshot> snapshot() const override;
  void restore(const ModelSnapshot& snap) override;
  std::string name() const override { return "reference"; }

  /// Accuracy on the unaugmented training split.
  double train_accuracy() const;
  const MlpModel& model() const { return model_; }
  MlpModel& model() { return model_; }
  const ReferenceTrainerConfig& config() const { return cfg_; }
  Batch make_batch(std::span<const std::size_t> indices, bool from_valid = false) const;

 private:
  std::vector<std::vector<double>> augmented_inputs(const EpochPlan& plan) const;

  const LabeledDataset& dataset_;
  ReferenceTrainerConfig cfg_;
  std::vector<std::vector<double>> train_inputs_;
  std::vector<std::vector<double>> valid_inputs_;
  MlpModel model_;
  std::uint64_t seed_ = 0;
  bool initialized_ = false;
  int epochs_ = 0;
  double last_loss_ = 0.0;
};

}  // namespace augloop
