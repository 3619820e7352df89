// SPDX-License-Identifier: Apache-2.0
#include "augloop/trainer.hpp"

#include <fmt/format.h>

#include "augloop/error.hpp"

namespace augloop {

void LabeledDataset::validate() const {
  if (class_names.empty()) throw ValidationError("BAD_DATASET", "dataset has no classes");
  if (train.empty()) throw ValidationError("BAD_DATASET", "train split is empty");
  if (valid.empty()) throw ValidationError("BAD_DATASET", "valid split is empty");
  const auto n = static_cast<int>(class_names.size());
  for (const auto* split : {&train, &valid}) {
    for (const auto& s : *split) {
      if (s.label < 0 || s.label >= n) {
        throw ValidationError("BAD_DATASET", fmt::format("label {} outside [0, {})", s.label, n));
      }
    }
  }
}

bool EarlyStopping::update(double accuracy) {
  if (accuracy > best_) {
    best_ = accuracy;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

FitResult fit(Trainer& trainer, const Augmenter& augmenter, std::uint64_t augment_seed, const StoppingRule& rule,
              const std::function<void(const EpochLog&, const Metrics&)>& on_epoch) {
  FitResult result;
  EarlyStopping stopper(rule.patience);
  std::unique_ptr<ModelSnapshot> best_snapshot;
  for (int epoch = 1; epoch <= rule.max_epochs; ++epoch) {
    const double loss = trainer.train_epoch({epoch, &augmenter, augment_seed});
    const Metrics m = trainer.evaluate();
    result.epochs.push_back({epoch, loss, m.val_accuracy});
    result.epochs_trained = epoch;
    if (on_epoch) on_epoch(result.epochs.back(), m);
    if (stopper.update(m.val_accuracy)) {
      result.best = m;
      result.best_epoch = epoch;
      best_snapshot = trainer.snapshot();
    }
    if (stopper.should_stop()) break;
  }
  if (best_snapshot) trainer.restore(*best_snapshot);
  return result;
}

}  // namespace augloop
