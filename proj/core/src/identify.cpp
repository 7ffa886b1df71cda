// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/identify.hpp"

#include <algorithm>
#include <cmath>

#include "lwdock/error.hpp"
#include "lwdock/registry.hpp"
#include "lwdock/rng.hpp"

namespace lwdock {

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::kLengthMismatch, "cosine of vectors with different lengths");
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = static_cast<double>(u[i]);
    const double b = static_cast<double>(v[i]);
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::kZeroVector, "cosine with a zero vector");
  // sqrt(nu * nv) rather than sqrt(nu) * sqrt(nv): for u == v the former is
  // exactly dot, so self-similarity is exactly 1.
  const double norm_product = nu * nv;
  const double denom = std::isfinite(norm_product) ? std::sqrt(norm_product) : std::sqrt(nu) * std::sqrt(nv);
  return std::clamp(dot / denom, -1.0, 1.0);
}

MatrixD times(const MatrixD& b, const MatrixD& a) {
  MatrixD out(b.rows, a.cols, 0.0);
  for (std::size_t i = 0; i < b.rows; ++i) {
    for (std::size_t t = 0; t < b.cols; ++t) {
      const double bit = b(i, t);
      for (std::size_t j = 0; j < a.cols; ++j) out(i, j) += bit * a(t, j);
    }
  }
  return out;
}

MatrixD gaussian(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  MatrixD m(rows, cols);
  for (double& v : m.data) v = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

double cosine(std::span<const float> u, std::span<const float> v) { return cosine_impl(u, v); }
double cosine(std::span<const double> u, std::span<const double> v) { return cosine_impl(u, v); }

std::vector<RankedMatch> rank_by_cosine(std::span<const float> query, std::span<const Candidate> candidates,
                                        std::size_t k) {
  std::vector<RankedMatch> all;
  all.reserve(candidates.size());
  for (const Candidate& c : candidates) all.push_back(RankedMatch{c.id, cosine(query, c.vector), 0});
  const auto better = [](const RankedMatch& a, const RankedMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.learnware_id < b.learnware_id;
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
  return all;
}

std::vector<RankedMatch> identify(const Registry& registry, const Specification& user_spec, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kBadRequest, "k must be >= 1");
  registry.check_compatible(user_spec);
  const auto snapshot = registry.snapshot();
  std::vector<Candidate> candidates;
  candidates.reserve(snapshot->size());
  for (const Learnware& lw : *snapshot) candidates.push_back(Candidate{lw.id, lw.spec.vector});
  return rank_by_cosine(user_spec.vector, candidates, k);
}

CosinePair low_rank_cosines(const MatrixD& b1, const MatrixD& b2, const MatrixD& a) {
  if (b1.rows != b2.rows || b1.cols != b2.cols || b1.cols != a.rows) {
    throw Error(ErrorCode::kInvalidDims, "B1, B2 must be d x r and A r x d");
  }
  const MatrixD p1 = times(b1, a);
  const MatrixD p2 = times(b2, a);
  return CosinePair{cosine(std::span<const double>(b1.data), std::span<const double>(b2.data)),
                    cosine(std::span<const double>(p1.data), std::span<const double>(p2.data))};
}

AgreementStats low_rank_agreement_probe(std::size_t d, std::size_t r, std::size_t n_pairs, std::uint64_t seed) {
  if (r < 1 || d < r || n_pairs < 1) throw Error(ErrorCode::kInvalidDims, "need d >= r >= 1 and n_pairs >= 1");
  Rng rng(seed);
  const MatrixD a = gaussian(rng, r, d, 1.0 / std::sqrt(static_cast<double>(r)));
  std::vector<double> factor;
  std::vector<double> product;
  double gap = 0.0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const double rho = 2.0 * rng.uniform() - 1.0;
    const MatrixD b1 = gaussian(rng, d, r, 1.0);
    MatrixD b2 = gaussian(rng, d, r, 1.0);
    const double keep = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < b2.size(); ++i) b2.data[i] = rho * b1.data[i] + keep * b2.data[i];
    const CosinePair c = low_rank_cosines(b1, b2, a);
    factor.push_back(c.factor);
    product.push_back(c.product);
    gap += std::abs(c.product - c.factor);
  }
  return AgreementStats{n_pairs, gap / static_cast<double>(n_pairs), kendall_tau(factor, product)};
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "kendall_tau inputs differ in length");
  long long concordant = 0;
  long long discordant = 0;
  long long ties_x = 0;
  long long ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++ties_x;
      } else if (dy == 0.0) {
        ++ties_y;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = static_cast<double>(concordant + discordant);
  const double denom = std::sqrt((n0 + static_cast<double>(ties_x)) * (n0 + static_cast<double>(ties_y)));
  if (denom == 0.0) return 0.0;
  return static_cast<double>(concordant - discordant) / denom;
}

}  // namespace lwdock
