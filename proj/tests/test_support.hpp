// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lwdock/anchor.hpp"
#include "lwdock/error.hpp"
#include "lwdock/rng.hpp"
#include "lwdock/spec.hpp"

/// Asserts that `stmt` throws lwdock::Error carrying `expected_code`.
#define EXPECT_LWDOCK_ERROR(stmt, expected_code)                  \
  do {                                                            \
    try {                                                         \
      stmt;                                                       \
      ADD_FAILURE() << "no error thrown";                         \
    } catch (const Error& e) {                                    \
      EXPECT_EQ(e.code(), expected_code) << e.what();             \
    }                                                             \
  } while (0)

namespace lwdock::testing {

inline const nlohmann::json& derived() {
  static const nlohmann::json j = [] {
    std::ifstream in(std::string(LWDOCK_FIXTURE_DIR) + "/derived_values.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lwdock-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline AnchorConfig small_config(std::uint64_t seed = 1) {
  AnchorConfig c;
  c.embed_dim = 8;
  c.rank = 2;
  c.num_classes = 3;
  c.max_len = 12;
  c.base_seed = seed;
  c.lora_seed = seed + 100;
  return c;
}

/// Specification with a random Gaussian vector in the given anchor's space.
inline Specification random_spec(const AnchorConfig& cfg, Rng& rng, SpecMode mode = SpecMode::kDeveloper) {
  Specification s;
  s.header.anchor_id = anchor_id(cfg);
  s.header.spec_dim = cfg.spec_dim();
  s.header.rank = cfg.rank;
  s.header.lora_alpha = cfg.lora_alpha;
  s.header.target_modules = cfg.target_modules;
  s.header.mode = mode;
  s.vector.resize(cfg.spec_dim());
  for (float& x : s.vector) x = static_cast<float>(rng.normal());
  return s;
}

inline std::string printable_text(Rng& rng, std::size_t len) {
  std::string s(len, ' ');
  for (char& ch : s) ch = static_cast<char>(0x20 + rng.below(95));
  return s;
}

/// Labels by a simple byte rule so fits are easy and reproducible.
inline std::vector<LabeledExample> rule_dataset(std::size_t n, std::size_t classes, std::uint64_t seed,
                                                std::size_t len = 16) {
  Rng rng(seed);
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string t = printable_text(rng, len);
    const std::size_t label = static_cast<unsigned char>(t[0]) % classes;
    out.push_back({std::move(t), label});
  }
  return out;
}

inline void randomize_b(LoraAdapter& a, std::uint64_t seed, double stddev) {
  Rng rng(seed);
  for (auto& b : a.b) {
    for (double& x : b.data) x = rng.normal(0.0, stddev);
  }
}

inline double mean_batch_loss(const AnchorModel& m, const LoraAdapter& a, const std::vector<Sample>& batch) {
  double total = 0.0;
  for (const Sample& s : batch) total += loss(forward(m, a, s.seq), s.label);
  return total / static_cast<double>(batch.size());
}

inline std::vector<Sample> random_batch(const AnchorConfig& cfg, std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 1 + rng.below(cfg.max_len + 4);
    out.push_back({tokenize(printable_text(rng, len), cfg.max_len), rng.below(cfg.num_classes)});
  }
  return out;
}

// Max over coordinates of |analytic - fd| / max(|analytic|, |fd|, floor). The
// floor keeps coordinates whose true gradient is ~0 from dividing noise by
// noise; it is 1e-6 of the largest gradient magnitude in the batch.
inline double max_relative_fd_error(const AnchorModel& m, LoraAdapter a, const std::vector<Sample>& batch, double h) {
  const LoraGrads g = grad_b(m, a, batch);
  double largest = 0.0;
  for (const MatrixD& gm : g.b) {
    for (double x : gm.data) largest = std::max(largest, std::abs(x));
  }
  const double floor = 1e-6 * largest;
  double worst = 0.0;
  for (std::size_t mod = 0; mod < kNumModules; ++mod) {
    for (std::size_t i = 0; i < a.b[mod].size(); ++i) {
      const double saved = a.b[mod].data[i];
      a.b[mod].data[i] = saved + h;
      const double up = mean_batch_loss(m, a, batch);
      a.b[mod].data[i] = saved - h;
      const double down = mean_batch_loss(m, a, batch);
      a.b[mod].data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double analytic = g.b[mod].data[i];
      const double denom = std::max({std::abs(analytic), std::abs(fd), floor});
      worst = std::max(worst, std::abs(analytic - fd) / denom);
    }
  }
  return worst;
}

}  // namespace lwdock::testing
