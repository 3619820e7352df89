// SPDX-License-Identifier: Apache-2.0
#include "augloop/reference_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "augloop/error.hpp"

namespace augloop {

namespace {
constexpr double kStdFloor = 1e-4;  // variance floor for flat images
}  // namespace

void ReferenceTrainerConfig::validate() const {
  if (input_size < 1 || hidden_units < 1 || batch_size < 1 || max_epochs < 1 || patience < 1 || augment_threads < 1) {
    throw ValidationError("BAD_CONFIG", "reference trainer sizes and counts must be positive");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("BAD_CONFIG", "reference trainer learning_rate must be finite and >= 0");
  }
}

MlpModel::MlpModel(int inputs_, int hidden_, int classes_)
    : inputs(inputs_), hidden(hidden_), classes(classes_),
      params(static_cast<std::size_t>(hidden_) * inputs_ + hidden_ + static_cast<std::size_t>(classes_) * hidden_ +
                 classes_,
             0.0) {}

void MlpModel::initialize(std::uint64_t seed) {
  std::fill(params.begin(), params.end(), 0.0);
  SampleRng rng(seed);
  const double l1 = std::sqrt(6.0 / (inputs + hidden));
  for (std::size_t i = w1_offset(); i < b1_offset(); ++i) params[i] = rng.uniform(-l1, l1);
  const double l2 = std::sqrt(6.0 / (hidden + classes));
  for (std::size_t i = w2_offset(); i < b2_offset(); ++i) params[i] = rng.uniform(-l2, l2);
}

namespace {

struct Forward {
  std::vector<double> pre;     // hidden pre-activations
  std::vector<double> act;     // ReLU outputs
  std::vector<double> logits;
};

Forward forward(const MlpModel& m, std::span<const double> x) {
  Forward f;
  f.pre.resize(static_cast<std::size_t>(m.hidden));
  f.act.resize(f.pre.size());
  const double* w1 = m.params.data() + m.w1_offset();
  const double* b1 = m.params.data() + m.b1_offset();
  for (int j = 0; j < m.hidden; ++j) {
    const double* row = w1 + static_cast<std::size_t>(j) * m.inputs;
    double s = b1[j];
    for (int i = 0; i < m.inputs; ++i) s += row[i] * x[static_cast<std::size_t>(i)];
    f.pre[j] = s;
    f.act[j] = s > 0.0 ? s : 0.0;
  }
  const double* w2 = m.params.data() + m.w2_offset();
  const double* b2 = m.params.data() + m.b2_offset();
  f.logits.resize(static_cast<std::size_t>(m.classes));
  for (int k = 0; k < m.classes; ++k) {
    const double* row = w2 + static_cast<std::size_t>(k) * m.hidden;
    double s = b2[k];
    for (int j = 0; j < m.hidden; ++j) s += row[j] * f.act[j];
    f.logits[k] = s;
  }
  return f;
}

// Softmax probabilities and -log p[label], computed stably.
double softmax_xent(const std::vector<double>& logits, int label, std::vector<double>& probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  probs.resize(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) z += (probs[k] = std::exp(logits[k] - mx));
  for (auto& p : probs) p /= z;
  return std::log(z) - (logits[static_cast<std::size_t>(label)] - mx);
}

std::span<const double> row(const Batch& b, std::size_t i, int width) {
  return {b.inputs.data() + i * static_cast<std::size_t>(width), static_cast<std::size_t>(width)};
}

}  // namespace

std::vector<double> MlpModel::logits(std::span<const double> input) const { return forward(*this, input).logits; }

int MlpModel::predict(std::span<const double> input) const {
  const auto z = logits(input);
  int best = 0;
  for (int k = 1; k < classes; ++k) {
    if (z[k] > z[best]) best = k;
  }
  return best;
}

double batch_loss(const MlpModel& model, const Batch& batch) {
  double total = 0.0;
  std::vector<double> probs;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    total += softmax_xent(forward(model, row(batch, b, model.inputs)).logits, batch.labels[b], probs);
  }
  return total / static_cast<double>(batch.size());
}

LossAndGradient loss_and_gradient(const MlpModel& m, const Batch& batch) {
  LossAndGradient out;
  out.gradient.assign(m.params.size(), 0.0);
  double* gw1 = out.gradient.data() + m.w1_offset();
  double* gb1 = out.gradient.data() + m.b1_offset();
  double* gw2 = out.gradient.data() + m.w2_offset();
  double* gb2 = out.gradient.data() + m.b2_offset();
  const double* w2 = m.params.data() + m.w2_offset();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> probs;
  std::vector<double> dh(static_cast<std::size_t>(m.hidden));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto x = row(batch, b, m.inputs);
    const auto f = forward(m, x);
    out.loss += softmax_xent(f.logits, batch.labels[b], probs);
    probs[static_cast<std::size_t>(batch.labels[b])] -= 1.0;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int k = 0; k < m.classes; ++k) {
      const double dz = probs[k] * inv_n;
      gb2[k] += dz;
      double* grow = gw2 + static_cast<std::size_t>(k) * m.hidden;
      const double* wrow = w2 + static_cast<std::size_t>(k) * m.hidden;
      for (int j = 0; j < m.hidden; ++j) {
        grow[j] += dz * f.act[j];
        dh[j] += dz * wrow[j];
      }
    }
    for (int j = 0; j < m.hidden; ++j) {
      if (!(f.pre[j] > 0.0)) continue;
      gb1[j] += dh[j];
      double* grow = gw1 + static_cast<std::size_t>(j) * m.inputs;
      for (int i = 0; i < m.inputs; ++i) grow[i] += dh[j] * x[static_cast<std::size_t>(i)];
    }
  }
  out.loss *= inv_n;
  return out;
}

double gradient_check(const MlpModel& model, const Batch& batch, std::uint64_t seed, const GradientFn& analytic,
                      int coordinates, double step) {
  if (batch.size() == 0) throw ValidationError("EMPTY_BATCH", "gradient_check needs a non-empty batch");
  const auto grad = analytic ? analytic(model, batch) : loss_and_gradient(model, batch).gradient;
  std::vector<std::size_t> idx(model.params.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SampleRng rng(seed);
  const auto count = std::min(idx.size(), static_cast<std::size_t>(std::max(coordinates, 0)));
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.uniform_int(idx.size() - i)]);

  MlpModel probe = model;
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto c = idx[i];
    const double orig = probe.params[c];
    probe.params[c] = orig + step;
    const double up = batch_loss(probe, batch);
    probe.params[c] = orig - step;
    const double down = batch_loss(probe, batch);
    probe.params[c] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max(std::abs(grad[c]), std::abs(numeric));
    if (denom == 0.0) continue;
    worst = std::max(worst, std::abs(grad[c] - numeric) / denom);
  }
  return worst;
}

std::vector<double> canonical_input(const ImageBuffer& img, int size) {
  ImageBuffer g = img.channels() == 1 ? img : to_grayscale(img);
  if (g.height() != size || g.width() != size) g = resize_bilinear(g, size, size);
  const auto px = g.data();
  double mean = 0.0;
  for (float v : px) mean += v;
  mean /= static_cast<double>(px.size());
  double var = 0.0;
  for (float v : px) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(px.size()) + kStdFloor);
  std::vector<double> out(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = (px[i] - mean) / sd;
  return out;
}

//------------------------------------------------------------------------------

namespace {

struct MlpSnapshot final : ModelSnapshot {
  MlpModel model;
  int epochs = 0;
  double last_loss = 0.0;
};

}  // namespace

ReferenceTrainer::ReferenceTrainer(const LabeledDataset& dataset, ReferenceTrainerConfig cfg)
    : dataset_(dataset), cfg_(cfg) {
  cfg_.validate();
  dataset_.validate();
  for (const auto& s : dataset_.train) train_inputs_.push_back(canonical_input(s.image, cfg_.input_size));
  for (const auto& s : dataset_.valid) valid_inputs_.push_back(canonical_input(s.image, cfg_.input_size));
}

void ReferenceTrainer::init(const std::string&, std::uint64_t seed) {
  model_ = MlpModel(cfg_.input_size * cfg_.input_size, cfg_.hidden_units, static_cast<int>(dataset_.class_names.size()));
  model_.initialize(derive_seed(seed, "weights"));
  seed_ = seed;
  epochs_ = 0;
  last_loss_ = 0.0;
  initialized_ = true;
}

std::vector<std::vector<double>> ReferenceTrainer::augmented_inputs(const EpochPlan& plan) const {
  const auto n = dataset_.train.size();
  std::vector<std::vector<double>> out(n);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const StreamKey key{plan.augment_seed, static_cast<std::uint64_t>(plan.epoch), i, 0};
      out[i] = canonical_input(plan.augmenter->augment(dataset_.train[i].image, key), cfg_.input_size);
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(cfg_.augment_threads), n);
  if (threads <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  const auto chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t * chunk, std::min(n, (t + 1) * chunk));
  for (auto& th : pool) th.join();
  return out;
}

Batch ReferenceTrainer::make_batch(std::span<const std::size_t> indices, bool from_valid) const {
  const auto& inputs = from_valid ? valid_inputs_ : train_inputs_;
  const auto& samples = from_valid ? dataset_.valid : dataset_.train;
  Batch b;
  for (auto i : indices) {
    b.inputs.insert(b.inputs.end(), inputs[i].begin(), inputs[i].end());
    b.labels.push_back(samples[i].label);
  }
  return b;
}

double ReferenceTrainer::train_epoch(const EpochPlan& plan) {
  if (!initialized_) throw RuntimeError("NOT_INITIALIZED", "train_epoch called before init");
  std::vector<std::vector<double>> augmented;
  const bool identity = plan.augmenter == nullptr || plan.augmenter->is_identity();
  if (!identity) augmented = augmented_inputs(plan);
  const auto& inputs = identity ? train_inputs_ : augmented;

  ++epochs_;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SampleRng shuffle(derive_seed(derive_seed(seed_, "shuffle"), static_cast<std::uint64_t>(epochs_)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_int(i)]);

  double total = 0.0;
  int batches = 0;
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    Batch batch;
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
      batch.inputs.insert(batch.inputs.end(), inputs[order[i]].begin(), inputs[order[i]].end());
      batch.labels.push_back(dataset_.train[order[i]].label);
    }
    const auto lg = loss_and_gradient(model_, batch);
    if (!std::isfinite(lg.loss)) {
      throw RuntimeError("NUMERIC_DIVERGENCE", fmt::format("non-finite loss in epoch {}", epochs_));
    }
    for (std::size_t p = 0; p < model_.params.size(); ++p) model_.params[p] -= cfg_.learning_rate * lg.gradient[p];
    total += lg.loss;
    ++batches;
  }
  last_loss_ = total / batches;
  return last_loss_;
}

Metrics ReferenceTrainer::evaluate() {
  if (!initialized_) throw RuntimeError("NOT_INITIALIZED", "evaluate called before init");
  Metrics m;
  m.total = valid_inputs_.size();
  for (std::size_t i = 0; i < valid_inputs_.size(); ++i) {
    if (model_.predict(valid_inputs_[i]) == dataset_.valid[i].label) ++m.correct;
  }
  m.val_accuracy = static_cast<double>(m.correct) / static_cast<double>(m.total);
  m.train_loss = last_loss_;
  m.epoch_index = epochs_;
  return m;
}

double ReferenceTrainer::train_accuracy() const {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < train_inputs_.size(); ++i) {
    if (model_.predict(train_inputs_[i]) == dataset_.train[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(train_inputs_.size());
}

std::unique_ptr<ModelSnapshot> ReferenceTrainer::snapshot() const {
  auto s = std::make_unique<MlpSnapshot>();
  s->model = model_;
  s->epochs = epochs_;
  s->last_loss = last_loss_;
  return s;
}

void ReferenceTrainer::restore(const ModelSnapshot& snap) {
  const auto* s = dynamic_cast<const MlpSnapshot*>(&snap);
  if (s == nullptr) throw ValidationError("BAD_SNAPSHOT", "snapshot was not made by a reference trainer");
  model_ = s->model;
  epochs_ = s->epochs;
  last_loss_ = s->last_loss;
}

}  // namespace augloop
