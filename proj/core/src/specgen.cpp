// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/specgen.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "lwdock/error.hpp"
#include "lwdock/rng.hpp"

namespace lwdock {

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t shuffle_seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(shuffle_seed, {epoch}));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (steps < 1) fail("steps must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) fail("peak_lr must be positive");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) fail("warmup_ratio must lie in [0, 1)");
  if (!(l2_decay >= 0.0) || !(l1_decay >= 0.0)) fail("decays must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be positive");
  if (warmup_steps() >= steps) fail("warmup must end before the last step");
}

std::size_t TrainConfig::warmup_steps() const {
  return static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(steps)));
}

TrainConfig toy_preset() {
  TrainConfig c;
  c.steps = 400;
  c.batch_size = 8;
  c.peak_lr = 5e-3;
  c.warmup_ratio = 0.03;
  c.l2_decay = 0.5;
  c.l1_decay = 0.0;
  // At init the B_q/B_k gradients sit near 1e-10 while B_v's are near 1e-4.
  // With eps = 1e-8 Adam inflates the former to full-size noisy steps.
  c.eps = 1e-6;
  c.preset_name = "toy";
  return c;
}

TrainConfig paper_preset() {
  TrainConfig c;
  c.steps = 400;
  c.batch_size = 8;
  c.peak_lr = 1e-5;
  c.warmup_ratio = 0.03;
  c.l2_decay = 0.5;
  c.l1_decay = 1.0;
  c.preset_name = "paper";
  return c;
}

TrainConfig preset_by_name(std::string_view name) {
  if (name == "toy") return toy_preset();
  if (name == "paper") return paper_preset();
  throw Error(ErrorCode::kInvalidConfig, "unknown preset '" + std::string(name) + "'");
}

nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"steps", c.steps},     {"batch_size", c.batch_size}, {"peak_lr", c.peak_lr},
      {"warmup_ratio", c.warmup_ratio}, {"l2_decay", c.l2_decay}, {"l1_decay", c.l1_decay},
      {"beta1", c.beta1},     {"beta2", c.beta2},           {"eps", c.eps},
      {"shuffle_seed", c.shuffle_seed}, {"preset_name", c.preset_name},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.steps = j.at("steps").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.peak_lr = j.at("peak_lr").get<double>();
    c.warmup_ratio = j.at("warmup_ratio").get<double>();
    c.l2_decay = j.at("l2_decay").get<double>();
    c.l1_decay = j.at("l1_decay").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    c.preset_name = j.at("preset_name").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("train config json: ") + e.what());
  }
}

double lr_at(const TrainConfig& cfg, std::size_t step) {
  if (step >= cfg.steps) {
    throw Error(ErrorCode::kStepOutOfRange,
                "step " + std::to_string(step) + " outside [0, " + std::to_string(cfg.steps) + ")");
  }
  const std::size_t w = cfg.warmup_steps();
  if (step < w) return cfg.peak_lr * static_cast<double>(step + 1) / static_cast<double>(w);
  const double progress = static_cast<double>(step - w) / static_cast<double>(cfg.steps - w);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState AdamState::zeros_like(const LoraAdapter& adapter) {
  AdamState s;
  for (std::size_t m = 0; m < kNumModules; ++m) {
    s.m[m] = MatrixD(adapter.b[m].rows, adapter.b[m].cols, 0.0);
    s.v[m] = MatrixD(adapter.b[m].rows, adapter.b[m].cols, 0.0);
  }
  return s;
}

void adamw_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                  std::span<double> v, std::uint64_t t, double lr, const TrainConfig& cfg) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer buffers differ in size");
  }
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    const double p = params[i];
    params[i] = p - lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.l2_decay * p + cfg.l1_decay * sign(p));
  }
}

void opt_step(LoraAdapter& adapter, const LoraGrads& grads, AdamState& state, double lr, const TrainConfig& cfg) {
  for (std::size_t m = 0; m < kNumModules; ++m) {
    if (grads.b[m].size() != adapter.b[m].size()) throw Error(ErrorCode::kShapeMismatch, "gradient shape");
    for (std::size_t i = 0; i < grads.b[m].size(); ++i) {
      if (!std::isfinite(grads.b[m].data[i])) {
        throw Error(ErrorCode::kNanInGradient, "non-finite gradient in " + std::string(kTargetModules[m]) +
                                                   " B at flat index " + std::to_string(i) + " (optimizer step " +
                                                   std::to_string(state.t + 1) + ")");
      }
    }
  }
  ++state.t;
  for (std::size_t m = 0; m < kNumModules; ++m) {
    adamw_update(adapter.b[m].data, grads.b[m].data, state.m[m].data, state.v[m].data, state.t, lr, cfg);
  }
}

SpecMode mode_of(const LabelSource& source) {
  return std::holds_alternative<ModelLabeler>(source) ? SpecMode::kDeveloper : SpecMode::kUser;
}

std::vector<Sample> to_samples(const AnchorConfig& config, std::span<const LabeledExample> dataset) {
  std::vector<Sample> out;
  out.reserve(dataset.size());
  for (const LabeledExample& ex : dataset) {
    if (ex.label >= config.num_classes) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(ex.label) + " >= " +
                                                   std::to_string(config.num_classes));
    }
    out.push_back(Sample{tokenize(ex.text, config.max_len), ex.label});
  }
  return out;
}

void fit_adapter(const AnchorModel& anchor, LoraAdapter& adapter, std::span<const LabeledExample> dataset,
                 const LabelSource& source, const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "cannot fit a specification to zero examples");
  const AnchorConfig& acfg = anchor.config;

  std::vector<Sample> samples;
  samples.reserve(dataset.size());
  for (const LabeledExample& ex : dataset) samples.push_back(Sample{tokenize(ex.text, acfg.max_len), ex.label});
  const auto* labeler = std::get_if<ModelLabeler>(&source);
  if (labeler == nullptr) {
    for (const Sample& s : samples) {
      if (s.label >= acfg.num_classes) throw Error(ErrorCode::kLabelOutOfRange, "dataset label out of range");
    }
  }

  const AdaptedModel model(anchor, adapter);
  AdamState state = AdamState::zeros_like(adapter);
  std::vector<Sample> batch;
  batch.reserve(cfg.batch_size);
  std::uint64_t epoch = 0;
  std::vector<std::size_t> order = epoch_order(samples.size(), cfg.shuffle_seed, epoch);
  std::size_t cursor = 0;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batch.clear();
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        order = epoch_order(samples.size(), cfg.shuffle_seed, ++epoch);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      Sample s = samples[idx];
      if (labeler != nullptr) {
        s.label = labeler->label(dataset[idx].text);
        if (s.label >= acfg.num_classes) throw Error(ErrorCode::kLabelOutOfRange, "labeler output out of range");
      }
      batch.push_back(std::move(s));
    }
    const LoraGrads grads = model.loss_and_grad(batch);
    const double lr = lr_at(cfg, step);
    opt_step(adapter, grads, state, lr, cfg);
    if (observer) observer(StepRecord{step, lr, grads.mean_loss});
  }
}

std::vector<float> flatten_b(const LoraAdapter& adapter) {
  std::vector<float> out;
  for (const MatrixD& b : adapter.b) {
    for (double v : b.data) out.push_back(static_cast<float>(v));
  }
  return out;
}

Specification make_specification(const AnchorConfig& config, const LoraAdapter& adapter, SpecMode mode,
                                 std::int64_t created_unix_ms) {
  Specification spec;
  spec.header.anchor_id = anchor_id(config);
  spec.header.spec_dim = config.spec_dim();
  spec.header.rank = config.rank;
  spec.header.lora_alpha = config.lora_alpha;
  spec.header.target_modules = config.target_modules;
  spec.header.dtype = config.dtype;
  spec.header.mode = mode;
  spec.header.created_unix_ms = created_unix_ms;
  spec.vector = flatten_b(adapter);
  return spec;
}

Specification build_spec(const AnchorModel& anchor, std::span<const LabeledExample> dataset,
                         const LabelSource& source, const TrainConfig& cfg, std::int64_t created_unix_ms) {
  LoraAdapter adapter = init_adapter(anchor.config);
  fit_adapter(anchor, adapter, dataset, source, cfg);
  return make_specification(anchor.config, adapter, mode_of(source), created_unix_ms);
}

double mean_loss(const AdaptedModel& model, std::span<const Sample> samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyDataset, "mean loss of zero samples");
  double total = 0.0;
  for (const Sample& s : samples) total += loss(model.logits(s.seq), s.label);
  return total / static_cast<double>(samples.size());
}

}  // namespace lwdock
