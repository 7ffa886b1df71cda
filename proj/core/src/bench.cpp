// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "lwdock/error.hpp"
#include "lwdock/identify.hpp"
#include "lwdock/registry.hpp"
#include "lwdock/rng.hpp"

namespace lwdock {

namespace {

// Stream tags for mix_seed paths.
enum : std::uint64_t {
  kTagFamily = 1,
  kTagModel = 2,
  kTagSplit = 3,
  kTagUserSpec = 4,
  kTagCalibration = 5,
};

enum : std::uint64_t { kSplitTrain = 0, kSplitUser = 1, kSplitTest = 2 };

constexpr std::size_t kRandom = 0;
constexpr std::size_t kLearnware = 1;
constexpr std::size_t kBestSingle = 2;
constexpr std::size_t kOracle = 3;

struct TrialResult {
  std::vector<TaskRow> rows;
  std::vector<std::vector<std::size_t>> matches; // K x K
  TrialSummary summary;
  std::vector<std::string> warnings;
};

TrialResult run_trial(const BenchConfig& cfg, const AnchorModel& anchor, std::size_t trial) {
  const std::uint64_t root = mix_seed(cfg.trial_seed, {trial});
  const std::size_t k_fam = cfg.n_families;
  const std::size_t per = cfg.models_per_family;
  TrialResult out;
  out.matches.assign(k_fam, std::vector<std::size_t>(k_fam, 0));

  TrainConfig spec_cfg = preset_by_name(cfg.spec_preset);

  std::vector<TaskFamily> families;
  std::vector<std::vector<LabeledExample>> train(k_fam), user(k_fam), test(k_fam);
  for (std::size_t f = 0; f < k_fam; ++f) {
    families.push_back(make_family(cfg.anchor, mix_seed(root, {kTagFamily, f}), cfg.input_len));
    std::vector<std::string> warn;
    train[f] = sample_dataset(families[f], cfg.train_n, mix_seed(root, {kTagSplit, f, kSplitTrain}), &warn);
    user[f] = sample_dataset(families[f], cfg.user_n, mix_seed(root, {kTagSplit, f, kSplitUser}), &warn);
    test[f] = sample_dataset(families[f], cfg.test_n, mix_seed(root, {kTagSplit, f, kSplitTest}), &warn);
    for (const std::string& w : warn) {
      out.warnings.push_back("trial " + std::to_string(trial) + " family " + std::to_string(f) + ": " + w);
    }
  }

  // Candidate c belongs to family c / per.
  Registry registry = Registry::in_memory(cfg.anchor);
  std::vector<LoraAdapter> models;
  std::vector<std::uint64_t> ids;
  for (std::size_t f = 0; f < k_fam; ++f) {
    for (std::size_t m = 0; m < per; ++m) {
      const std::uint64_t model_seed = mix_seed(root, {kTagModel, f, m});
      models.push_back(train_learnware_model(anchor, train[f], model_seed, cfg.model_train_steps));
      const LoraAdapter& model = models.back();

      TrainConfig dev_cfg = spec_cfg;
      dev_cfg.shuffle_seed = model_seed;
      LabelSource source = GroundTruth{};
      const AdaptedModel h(anchor, model);
      if (cfg.developer_labels == DeveloperLabels::kModel) {
        source = ModelLabeler{[&anchor, &h](std::string_view text) {
          return h.predict(tokenize(text, anchor.config.max_len));
        }};
      }
      const Specification spec = build_spec(anchor, train[f], source, dev_cfg);
      const std::string uri =
          "bench://trial/" + std::to_string(trial) + "/family/" + std::to_string(f) + "/model/" + std::to_string(m);
      ids.push_back(registry.submit(uri, spec, {{"family", std::to_string(f)}, {"model", std::to_string(m)}}));
    }
  }

  // accuracy[c][task]
  const std::size_t n_cand = models.size();
  std::vector<std::vector<double>> acc(n_cand, std::vector<double>(k_fam, 0.0));
  for (std::size_t c = 0; c < n_cand; ++c) {
    for (std::size_t t = 0; t < k_fam; ++t) acc[c][t] = accuracy(anchor, models[c], test[t]);
  }
  std::size_t best_single = 0;
  std::vector<double> cand_mean(n_cand, 0.0);
  for (std::size_t c = 0; c < n_cand; ++c) {
    for (std::size_t t = 0; t < k_fam; ++t) cand_mean[c] += acc[c][t];
    cand_mean[c] /= static_cast<double>(k_fam);
    if (cand_mean[c] > cand_mean[best_single]) best_single = c;
  }

  out.summary.trial = trial;
  for (std::size_t t = 0; t < k_fam; ++t) {
    TrainConfig user_cfg = spec_cfg;
    user_cfg.shuffle_seed = mix_seed(root, {kTagUserSpec, t});
    const Specification user_spec = build_spec(anchor, user[t], GroundTruth{}, user_cfg);
    const std::vector<RankedMatch> top = identify(registry, user_spec, 1);
    if (top.empty()) throw Error(ErrorCode::kInternal, "identification returned no candidate");
    const std::size_t chosen =
        static_cast<std::size_t>(std::find(ids.begin(), ids.end(), top.front().learnware_id) - ids.begin());

    TaskRow row;
    row.trial = trial;
    row.task = t;
    row.identified_id = top.front().learnware_id;
    row.identified_family = chosen / per;
    row.similarity = top.front().similarity;
    double total = 0.0;
    double best = acc[0][t];
    for (std::size_t c = 0; c < n_cand; ++c) {
      total += acc[c][t];
      best = std::max(best, acc[c][t]);
    }
    row.score[kRandom] = total / static_cast<double>(n_cand);
    row.score[kLearnware] = acc[chosen][t];
    row.score[kBestSingle] = acc[best_single][t];
    row.score[kOracle] = best;
    out.matches[t][row.identified_family] += 1;
    if (row.identified_family == t) ++out.summary.family_matches;
    for (std::size_t i = 0; i < kNumContenders; ++i) out.summary.mean[i] += row.score[i] / static_cast<double>(k_fam);
    out.rows.push_back(row);
  }
  return out;
}

// Average 1-based ranks, higher score is better, ties share the mean rank.
std::array<double, kNumContenders> row_ranks(const std::array<double, kNumContenders>& s) {
  std::array<double, kNumContenders> ranks{};
  for (std::size_t i = 0; i < kNumContenders; ++i) {
    std::size_t above = 0;
    std::size_t equal = 0;
    for (std::size_t j = 0; j < kNumContenders; ++j) {
      if (s[j] > s[i]) ++above;
      if (s[j] == s[i]) ++equal;
    }
    ranks[i] = static_cast<double>(above) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return ranks;
}

nlohmann::json scores_json(const std::array<double, kNumContenders>& s) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumContenders; ++i) j[std::string(kContenders[i])] = s[i];
  return j;
}

}  // namespace

std::size_t TaskFamily::label(std::string_view text) const {
  std::vector<double> logits = forward(teacher, tokenize(text, teacher.config.max_len));
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] -= logit_offset[c];
  return argmax(logits);
}

std::string random_text(Rng& rng, std::size_t len) {
  constexpr std::uint64_t kFirst = 0x20;
  constexpr std::uint64_t kCount = 0x7F - kFirst;
  std::string s(len, ' ');
  for (char& ch : s) ch = static_cast<char>(kFirst + rng.below(kCount));
  return s;
}

TaskFamily make_family(const AnchorConfig& anchor, std::uint64_t family_seed, std::size_t input_len) {
  if (input_len == 0 || input_len > anchor.max_len) {
    throw Error(ErrorCode::kInvalidConfig, "input_len must be in [1, max_len]");
  }
  if (anchor.vocab_size < 0x80) throw Error(ErrorCode::kInvalidConfig, "task families need vocab_size >= 128");
  AnchorConfig tc;
  tc.vocab_size = anchor.vocab_size;
  tc.embed_dim = anchor.embed_dim;
  tc.max_len = anchor.max_len;
  tc.num_classes = anchor.num_classes;
  tc.rank = std::min(tc.rank, tc.embed_dim);
  tc.base_seed = family_seed;

  TaskFamily family;
  family.family_seed = family_seed;
  family.teacher = init_anchor(tc);
  family.input_len = input_len;
  family.logit_offset.assign(tc.num_classes, 0.0);
  Rng rng(mix_seed(family_seed, {kTagCalibration}));
  for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
    const std::vector<double> logits = forward(family.teacher, tokenize(random_text(rng, input_len), tc.max_len));
    for (std::size_t c = 0; c < logits.size(); ++c) family.logit_offset[c] += logits[c];
  }
  for (double& v : family.logit_offset) v /= static_cast<double>(kCalibrationDraws);
  return family;
}

std::vector<LabeledExample> sample_dataset(const TaskFamily& family, std::size_t n, std::uint64_t split_seed,
                                           std::vector<std::string>* warnings) {
  if (n == 0) throw Error(ErrorCode::kInvalidConfig, "dataset size must be >= 1");
  const std::size_t classes = family.teacher.config.num_classes;
  const std::size_t quota = (n + classes - 1) / classes;
  const std::size_t budget = 10 * n;
  std::vector<std::size_t> counts(classes, 0);
  std::vector<LabeledExample> out;
  out.reserve(n);
  Rng rng(split_seed);
  std::size_t draws = 0;
  bool lifted = false;
  while (out.size() < n) {
    std::string text = random_text(rng, family.input_len);
    const std::size_t y = family.label(text);
    ++draws;
    if (!lifted && draws > budget) {
      lifted = true;
      if (warnings != nullptr) {
        warnings->push_back("class quota lifted after " + std::to_string(budget) + " draws; dataset is imbalanced");
      }
    }
    if (lifted || counts[y] < quota) {
      ++counts[y];
      out.push_back(LabeledExample{std::move(text), y});
    }
  }
  return out;
}

LoraAdapter train_learnware_model(const AnchorModel& anchor, std::span<const LabeledExample> train,
                                  std::uint64_t model_seed, std::size_t steps) {
  AnchorConfig cfg = anchor.config;
  cfg.lora_seed = model_seed;
  LoraAdapter adapter = init_adapter(cfg);
  TrainConfig tc = toy_preset();
  tc.steps = steps;
  tc.shuffle_seed = model_seed;
  fit_adapter(anchor, adapter, train, GroundTruth{}, tc);
  return adapter;
}

double accuracy(const AnchorModel& anchor, const LoraAdapter& adapter, std::span<const LabeledExample> examples) {
  if (examples.empty()) throw Error(ErrorCode::kEmptyDataset, "accuracy of zero examples");
  const AdaptedModel model(anchor, adapter);
  std::size_t hits = 0;
  for (const LabeledExample& ex : examples) {
    if (model.predict(tokenize(ex.text, anchor.config.max_len)) == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

void BenchConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (n_families < 1 || models_per_family < 1) fail("families and models per family must be >= 1");
  if (train_n < 1 || user_n < 1 || test_n < 1) fail("dataset sizes must be >= 1");
  if (model_train_steps < 1) fail("model_train_steps must be >= 1");
  if (n_trials < 1) fail("n_trials must be >= 1");
  if (jobs < 1) fail("jobs must be >= 1");
  if (input_len < 1 || input_len > anchor.max_len) fail("input_len must be in [1, max_len]");
  anchor.validate();
  preset_by_name(spec_preset).validate();
}

nlohmann::json to_json(const BenchConfig& cfg) {
  return nlohmann::json{
      {"n_families", cfg.n_families},
      {"models_per_family", cfg.models_per_family},
      {"train_n", cfg.train_n},
      {"user_n", cfg.user_n},
      {"test_n", cfg.test_n},
      {"spec_preset", cfg.spec_preset},
      {"model_train_steps", cfg.model_train_steps},
      {"trial_seed", cfg.trial_seed},
      {"n_trials", cfg.n_trials},
      {"input_len", cfg.input_len},
      {"developer_labels", cfg.developer_labels == DeveloperLabels::kModel ? "model" : "ground_truth"},
      {"anchor_id", anchor_id(cfg.anchor)},
  };
}

double BenchReport::family_match_rate() const {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < family_match_matrix.size(); ++i) {
    for (std::size_t j = 0; j < family_match_matrix[i].size(); ++j) {
      total += family_match_matrix[i][j];
      if (i == j) hits += family_match_matrix[i][j];
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

BenchReport run_bench(const BenchConfig& cfg, const TrialObserver& observer) {
  cfg.validate();
  const AnchorModel anchor = init_anchor(cfg.anchor);

  std::vector<TrialResult> results(cfg.n_trials);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= cfg.n_trials) return;
      try {
        results[t] = run_trial(cfg, anchor, t);
        if (observer) {
          const std::lock_guard<std::mutex> lock(mu);
          observer(results[t].summary);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = cfg.n_trials;
        return;
      }
    }
  };
  const std::size_t workers = std::min(cfg.jobs, cfg.n_trials);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  BenchReport report;
  report.config = cfg;
  report.family_match_matrix.assign(cfg.n_families, std::vector<std::size_t>(cfg.n_families, 0));
  for (TrialResult& tr : results) {
    for (std::size_t i = 0; i < cfg.n_families; ++i) {
      for (std::size_t j = 0; j < cfg.n_families; ++j) report.family_match_matrix[i][j] += tr.matches[i][j];
    }
    report.rows.insert(report.rows.end(), tr.rows.begin(), tr.rows.end());
    report.trials.push_back(tr.summary);
    report.warnings.insert(report.warnings.end(), tr.warnings.begin(), tr.warnings.end());
  }

  const double n_rows = static_cast<double>(report.rows.size());
  for (const TaskRow& row : report.rows) {
    const auto ranks = row_ranks(row.score);
    for (std::size_t i = 0; i < kNumContenders; ++i) {
      report.averages[i] += row.score[i] / n_rows;
      report.average_ranks[i] += ranks[i] / n_rows;
      WinTieLoss& wtl = report.learnware_vs[i];
      if (row.score[kLearnware] > row.score[i]) {
        ++wtl.win;
      } else if (row.score[kLearnware] == row.score[i]) {
        ++wtl.tie;
      } else {
        ++wtl.loss;
      }
    }
  }
  return report;
}

nlohmann::json to_json(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const TaskRow& r : report.rows) {
    rows.push_back({{"trial", r.trial},
                    {"task", r.task},
                    {"scores", scores_json(r.score)},
                    {"identified_id", r.identified_id},
                    {"identified_family", r.identified_family},
                    {"similarity", r.similarity}});
  }
  nlohmann::json trials = nlohmann::json::array();
  for (const TrialSummary& t : report.trials) {
    trials.push_back({{"trial", t.trial}, {"family_matches", t.family_matches}, {"mean", scores_json(t.mean)}});
  }
  nlohmann::json wtl = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumContenders; ++i) {
    if (i == kLearnware) continue;
    const WinTieLoss& w = report.learnware_vs[i];
    wtl[std::string(kContenders[i])] = {{"win", w.win}, {"tie", w.tie}, {"loss", w.loss}};
  }
  return nlohmann::json{
      {"config", to_json(report.config)},
      {"rows", rows},
      {"family_match_matrix", report.family_match_matrix},
      {"family_match_rate", report.family_match_rate()},
      {"trials", trials},
      {"averages", scores_json(report.averages)},
      {"average_ranks", scores_json(report.average_ranks)},
      {"learnware_win_tie_loss", wtl},
      {"warnings", report.warnings},
  };
}

std::string render_table(const BenchReport& report) {
  std::string out;
  char buf[256];
  const BenchConfig& c = report.config;
  std::snprintf(buf, sizeof buf, "families=%zu models/family=%zu trials=%zu preset=%s trial_seed=%llu\n",
                c.n_families, c.models_per_family, c.n_trials, c.spec_preset.c_str(),
                static_cast<unsigned long long>(c.trial_seed));
  out += buf;
  out += "\ncontender      mean acc   avg rank   learnware W/T/L\n";
  for (std::size_t i = 0; i < kNumContenders; ++i) {
    const WinTieLoss& w = report.learnware_vs[i];
    char wtl[64] = "-";
    if (i != kLearnware) std::snprintf(wtl, sizeof wtl, "%zu/%zu/%zu", w.win, w.tie, w.loss);
    std::snprintf(buf, sizeof buf, "%-13s  %8.4f   %8.3f   %s\n", std::string(kContenders[i]).c_str(),
                  report.averages[i], report.average_ranks[i], wtl);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "\nfamily match rate: %.4f\n", report.family_match_rate());
  out += buf;
  out += "family match matrix (rows: user family, cols: identified family)\n";
  for (const auto& row : report.family_match_matrix) {
    for (std::size_t v : row) {
      std::snprintf(buf, sizeof buf, "%4zu", v);
      out += buf;
    }
    out += '\n';
  }
  if (!report.warnings.empty()) {
    std::snprintf(buf, sizeof buf, "\n%zu warning(s); see the JSON report\n", report.warnings.size());
    out += buf;
  }
  return out;
}

std::string family_match_csv(const BenchReport& report) {
  const std::size_t k = report.family_match_matrix.size();
  std::string out = "user_family";
  for (std::size_t j = 0; j < k; ++j) out += ",identified_" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < k; ++i) {
    out += std::to_string(i);
    for (std::size_t v : report.family_match_matrix[i]) out += "," + std::to_string(v);
    out += '\n';
  }
  return out;
}

}  // namespace lwdock
