// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lwdock/anchor.hpp"
#include "lwdock/rng.hpp"
#include "lwdock/specgen.hpp"

namespace lwdock {

/// A synthetic task: random printable strings labeled by a seeded teacher
/// network that shares the anchor's shape but not its weights.
struct TaskFamily {
  std::uint64_t family_seed = 0;
  AnchorModel teacher;
  std::size_t input_len = 32;
  /// Mean teacher logits over a calibration draw. A random teacher's logits
  /// share a large input-independent component that would map every input to
  /// the same class; labels are taken after removing it.
  std::vector<double> logit_offset;

  std::size_t label(std::string_view text) const;
};

inline constexpr std::size_t kCalibrationDraws = 2048;

TaskFamily make_family(const AnchorConfig& anchor, std::uint64_t family_seed, std::size_t input_len = 32);

/// Uniform random text over printable ASCII (0x20..0x7E).
std::string random_text(Rng& rng, std::size_t len);

/// n teacher-labeled examples with per-class quota ceil(n / C). After 10 n
/// draws the quota is lifted and a warning is appended.
std::vector<LabeledExample> sample_dataset(const TaskFamily& family, std::size_t n, std::uint64_t split_seed,
                                           std::vector<std::string>* warnings = nullptr);

/// The developer's model h: a fresh adapter (A drawn from model_seed) fit to
/// the labeled train split with the toy schedule for `steps` steps.
LoraAdapter train_learnware_model(const AnchorModel& anchor, std::span<const LabeledExample> train,
                                  std::uint64_t model_seed, std::size_t steps);

double accuracy(const AnchorModel& anchor, const LoraAdapter& adapter, std::span<const LabeledExample> examples);

enum class DeveloperLabels { kGroundTruth, kModel };

struct BenchConfig {
  std::size_t n_families = 8;
  std::size_t models_per_family = 2;
  std::size_t train_n = 512;
  std::size_t user_n = 256;
  std::size_t test_n = 512;
  std::string spec_preset{"toy"};
  std::size_t model_train_steps = 600;
  std::uint64_t trial_seed = 20260101;
  std::size_t n_trials = 20;
  std::size_t input_len = 32;
  DeveloperLabels developer_labels = DeveloperLabels::kGroundTruth;
  AnchorConfig anchor;
  /// Worker threads for independent trials; the report does not depend on it.
  std::size_t jobs = 1;

  void validate() const;
};

nlohmann::json to_json(const BenchConfig& cfg);

inline constexpr std::size_t kNumContenders = 4;
inline constexpr std::array<std::string_view, kNumContenders> kContenders = {"random", "learnware", "best_single",
                                                                              "oracle"};

/// One (trial, user task) row. Accuracies are on the task's test split.
struct TaskRow {
  std::size_t trial = 0;
  std::size_t task = 0;
  std::array<double, kNumContenders> score{}; // indexed like kContenders
  std::uint64_t identified_id = 0;
  std::size_t identified_family = 0;
  double similarity = 0.0;
};

struct TrialSummary {
  std::size_t trial = 0;
  std::size_t family_matches = 0;
  std::array<double, kNumContenders> mean{};
};

struct WinTieLoss {
  std::size_t win = 0;
  std::size_t tie = 0;
  std::size_t loss = 0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<TaskRow> rows;
  std::vector<std::vector<std::size_t>> family_match_matrix; // [user family][identified family]
  std::vector<TrialSummary> trials;
  std::array<double, kNumContenders> averages{};
  std::array<double, kNumContenders> average_ranks{}; // 1 = best, ties share the mean rank
  std::array<WinTieLoss, kNumContenders> learnware_vs{}; // learnware against each contender
  std::vector<std::string> warnings;

  double family_match_rate() const;
};

using TrialObserver = std::function<void(const TrialSummary&)>;

/// Runs cfg.n_trials independent hub simulations. Trial i draws all its
/// randomness from mix_seed(trial_seed, {i}), so the report is identical for
/// any jobs value.
BenchReport run_bench(const BenchConfig& cfg, const TrialObserver& observer = {});

nlohmann::json to_json(const BenchReport& report);
std::string render_table(const BenchReport& report);
std::string family_match_csv(const BenchReport& report);

}  // namespace lwdock
