// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lwdock/matrix.hpp"

namespace lwdock {

inline constexpr std::string_view kArchVersion = "tiny-attn-v1";
inline constexpr std::uint32_t kPadId = 0;

/// Amplitude of the sinusoidal position signal added to token embeddings.
/// Kept an order of magnitude below the embedding scale: the position term is
/// identical for every input, and a large one adds a task-independent
/// direction to every trained B_q/B_k.
inline constexpr double kPositionScale = 0.002;

/// Adapter target modules, in canonical flatten order.
enum class Module : std::size_t { kQuery = 0, kKey = 1, kValue = 2 };
inline constexpr std::size_t kNumModules = 3;
inline constexpr std::array<std::string_view, kNumModules> kTargetModules = {"q_proj", "k_proj", "v_proj"};

/// Complete recipe for the shared anchor model: architecture, LoRA shape and
/// seeds. Two parties holding equal configs derive bit-identical weights.
struct AnchorConfig {
  std::string arch_version{kArchVersion};
  std::size_t vocab_size = 257;
  std::size_t embed_dim = 64;
  std::size_t max_len = 64;
  std::size_t num_classes = 4;
  std::size_t rank = 16;
  double lora_alpha = 32.0;
  std::vector<std::string> target_modules{kTargetModules.begin(), kTargetModules.end()};
  std::uint64_t base_seed = 20240601;
  std::uint64_t lora_seed = 1337;
  std::string dtype{"f32"};

  /// Throws Error(kInvalidConfig) when an invariant does not hold.
  void validate() const;

  std::size_t spec_dim() const { return target_modules.size() * embed_dim * rank; }
  double lora_scale() const { return lora_alpha / static_cast<double>(rank); }
  /// Number of frozen base parameters (embeddings, projections, head).
  std::size_t parameter_count() const;

  friend bool operator==(const AnchorConfig&, const AnchorConfig&) = default;
};

nlohmann::json to_json(const AnchorConfig& config);
AnchorConfig anchor_config_from_json(const nlohmann::json& j);

/// Sorted keys, no whitespace.
std::string canonical_json(const AnchorConfig& config);

/// Hex SHA-256 of the canonical JSON; the identity of a specification space.
std::string anchor_id(const AnchorConfig& config);

/// Frozen base model. Weights are N(0, 0.02^2) except the zero output bias.
/// The projection tables are derived caches and not parameters.
struct AnchorModel {
  AnchorConfig config;
  MatrixF embed;   // vocab_size x d
  MatrixF w_query; // d x d
  MatrixF w_key;   // d x d
  MatrixF w_value; // d x d
  MatrixF w_out;   // C x d
  std::vector<float> b_out;

  MatrixD positions;       // max_len x d
  MatrixD embed_query;     // embed * w_query^T
  MatrixD embed_key;       // embed * w_key^T
  MatrixD positions_query; // positions * w_query^T
  MatrixD positions_key;   // positions * w_key^T
  MatrixD value_t;         // w_value^T
};

/// Low-rank adapter on the q/k/v projections. A is frozen after init, B is
/// trained; B is held in double precision and emitted as binary32.
struct LoraAdapter {
  std::size_t embed_dim = 0;
  std::size_t rank = 0;
  double lora_alpha = 0.0;
  std::array<MatrixF, kNumModules> a; // rank x d each
  std::array<MatrixD, kNumModules> b; // d x rank each

  double scale() const { return lora_alpha / static_cast<double>(rank); }
  MatrixD& b_of(Module m) { return b[static_cast<std::size_t>(m)]; }
  const MatrixD& b_of(Module m) const { return b[static_cast<std::size_t>(m)]; }
  const MatrixF& a_of(Module m) const { return a[static_cast<std::size_t>(m)]; }
};

struct TokenSeq {
  std::vector<std::uint32_t> ids;
  std::size_t valid_len = 0;
};

struct LabeledExample {
  std::string text;
  std::size_t label = 0;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct Sample {
  TokenSeq seq;
  std::size_t label = 0;
};

/// Gradients of the mean batch loss with respect to B_q, B_k, B_v.
struct LoraGrads {
  std::array<MatrixD, kNumModules> b;
  double mean_loss = 0.0;
};

AnchorModel init_anchor(const AnchorConfig& config);
LoraAdapter init_adapter(const AnchorConfig& config);

/// Byte-level tokenization: id = byte + 1, PAD = 0, truncated to max_len.
TokenSeq tokenize(std::string_view text, std::size_t max_len);

/// Logits of the anchor with no adapter attached.
std::vector<double> forward(const AnchorModel& anchor, const TokenSeq& seq);
std::vector<double> forward(const AnchorModel& anchor, const LoraAdapter& adapter, const TokenSeq& seq);

/// Cross-entropy: -log softmax(logits)[label].
double loss(std::span<const double> logits, std::size_t label);

/// Argmax, lowest index on ties.
std::size_t argmax(std::span<const double> logits);

std::size_t predict(const AnchorModel& anchor, const LoraAdapter& adapter, const TokenSeq& seq);

LoraGrads grad_b(const AnchorModel& anchor, const LoraAdapter& adapter, std::span<const Sample> batch);

/// Binds an adapter to an anchor and caches the per-token A projections so
/// repeated forward/backward calls skip the frozen work. Holds references:
/// both arguments must outlive it. Reads the adapter's current B on every
/// call, so it stays valid while B is trained in place.
class AdaptedModel {
 public:
  AdaptedModel(const AnchorModel& anchor, const LoraAdapter& adapter);

  std::vector<double> logits(const TokenSeq& seq) const;
  std::size_t predict(const TokenSeq& seq) const;
  LoraGrads loss_and_grad(std::span<const Sample> batch) const;

 private:
  const AnchorModel& anchor_;
  const LoraAdapter& adapter_;
  std::array<MatrixD, kNumModules> embed_a_;     // vocab_size x r
  std::array<MatrixD, kNumModules> positions_a_; // max_len x r
};

/// Raw bytes of every frozen base weight, in a fixed order.
std::vector<std::byte> frozen_bytes(const AnchorModel& anchor);
/// Raw bytes of the adapter's A matrices.
std::vector<std::byte> frozen_bytes(const LoraAdapter& adapter);

void validate_seq(const AnchorConfig& config, const TokenSeq& seq);

}  // namespace lwdock
