// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "lwdock/anchor.hpp"
#include "lwdock/spec.hpp"

namespace lwdock {

/// Optimization schedule for fitting the adapter's B factors.
struct TrainConfig {
  std::size_t steps = 400;
  std::size_t batch_size = 8;
  double peak_lr = 5e-3;
  double warmup_ratio = 0.03;
  double l2_decay = 0.5;
  double l1_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t shuffle_seed = 0;
  std::string preset_name{"toy"};

  void validate() const;
  /// ceil(warmup_ratio * steps)
  std::size_t warmup_steps() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Tuned for the tiny anchor: larger lr, no L1, eps = 1e-6.
TrainConfig toy_preset();
/// Schedule used for the 0.5B-parameter anchor in the reference setting.
TrainConfig paper_preset();
/// "toy" or "paper"; throws Error(kInvalidConfig) otherwise.
TrainConfig preset_by_name(std::string_view name);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Linear warmup over w = ceil(warmup_ratio * T) steps, then cosine decay.
double lr_at(const TrainConfig& cfg, std::size_t step);

/// First and second moment estimates for each B matrix.
struct AdamState {
  std::array<MatrixD, kNumModules> m;
  std::array<MatrixD, kNumModules> v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const LoraAdapter& adapter);
};

/// One AdamW update on a flat parameter block at (already incremented) step t.
/// Weight decay is decoupled: p -= lr * (m_hat / (sqrt(v_hat) + eps) + l2 * p + l1 * sign(p)).
void adamw_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                  std::span<double> v, std::uint64_t t, double lr, const TrainConfig& cfg);

/// Applies one optimizer step to the adapter's B matrices.
/// Throws Error(kNanInGradient) if any gradient entry is not finite; nothing is modified then.
void opt_step(LoraAdapter& adapter, const LoraGrads& grads, AdamState& state, double lr, const TrainConfig& cfg);

/// Targets come from the dataset's labels.
struct GroundTruth {};

/// Targets come from a model h queried without gradients. Called exactly once
/// per example per pass over the dataset.
struct ModelLabeler {
  std::function<std::size_t(std::string_view text)> label;
};

using LabelSource = std::variant<GroundTruth, ModelLabeler>;

SpecMode mode_of(const LabelSource& source);

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double batch_loss = 0.0;
};
using StepObserver = std::function<void(const StepRecord&)>;

/// Runs exactly cfg.steps optimizer steps on the adapter's B matrices over
/// reshuffled mini-batches of the dataset. A and the anchor are untouched.
void fit_adapter(const AnchorModel& anchor, LoraAdapter& adapter, std::span<const LabeledExample> dataset,
                 const LabelSource& source, const TrainConfig& cfg, const StepObserver& observer = {});

/// Flatten(B): row-major B_q, B_k, B_v narrowed to binary32.
std::vector<float> flatten_b(const LoraAdapter& adapter);

Specification make_specification(const AnchorConfig& config, const LoraAdapter& adapter, SpecMode mode,
                                 std::int64_t created_unix_ms = 0);

/// Fits a fresh adapter and returns its specification.
Specification build_spec(const AnchorModel& anchor, std::span<const LabeledExample> dataset,
                         const LabelSource& source, const TrainConfig& cfg, std::int64_t created_unix_ms = 0);

std::vector<Sample> to_samples(const AnchorConfig& config, std::span<const LabeledExample> dataset);

/// Mean cross-entropy of an adapted model over a sample set.
double mean_loss(const AdaptedModel& model, std::span<const Sample> samples);

}  // namespace lwdock
