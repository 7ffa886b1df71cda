// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lwdock/matrix.hpp"
#include "lwdock/spec.hpp"

namespace lwdock {

class Registry;

/// Cosine similarity with 64-bit accumulation, clamped to [-1, 1].
/// Throws Error(kLengthMismatch) or Error(kZeroVector).
double cosine(std::span<const float> u, std::span<const float> v);
double cosine(std::span<const double> u, std::span<const double> v);

struct RankedMatch {
  std::uint64_t learnware_id = 0;
  double similarity = 0.0;
  std::size_t rank = 0;

  friend bool operator==(const RankedMatch&, const RankedMatch&) = default;
};

struct Candidate {
  std::uint64_t id = 0;
  std::span<const float> vector;
};

/// Exhaustive ranking: similarity descending, ties by ascending id, ranks
/// 1..min(k, n).
std::vector<RankedMatch> rank_by_cosine(std::span<const float> query, std::span<const Candidate> candidates,
                                        std::size_t k);

/// Ranks every learnware in the registry against a user specification.
/// Throws kAnchorMismatch, kDimMismatch, kZeroVectorSpec or kBadRequest (k == 0).
std::vector<RankedMatch> identify(const Registry& registry, const Specification& user_spec, std::size_t k);

/// Checks how well cos(B1, B2) tracks cos(B1 A, B2 A) for a shared frozen A.
struct CosinePair {
  double factor = 0.0;  // cos(B1, B2)
  double product = 0.0; // cos(B1 A, B2 A)
};

CosinePair low_rank_cosines(const MatrixD& b1, const MatrixD& b2, const MatrixD& a);

struct AgreementStats {
  std::size_t n_pairs = 0;
  double mean_abs_gap = 0.0;
  double kendall_tau = 0.0;
};

/// Draws A ~ N(0, 1/r) (r x d) and n_pairs of d x r factors B1, B2 = rho B1 +
/// sqrt(1 - rho^2) N with rho ~ U(-1, 1), then compares the two similarity
/// orderings. Throws Error(kInvalidDims) unless d >= r >= 1 and n_pairs >= 1.
AgreementStats low_rank_agreement_probe(std::size_t d, std::size_t r, std::size_t n_pairs, std::uint64_t seed);

/// Kendall tau-b rank correlation.
double kendall_tau(std::span<const double> x, std::span<const double> y);

}  // namespace lwdock
