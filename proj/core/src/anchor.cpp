// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/anchor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "lwdock/digest.hpp"
#include "lwdock/error.hpp"
#include "lwdock/rng.hpp"

namespace lwdock {

namespace {

constexpr double kBaseInitStd = 0.02;

// The kernels below get an AVX2 clone picked at load time. Floating-point
// contraction is off in ISO mode, so both clones round identically.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__) && defined(__linux__)
#define LWDOCK_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define LWDOCK_KERNEL
#endif

MatrixF gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  MatrixF m(rows, cols);
  for (float& v : m.data) v = static_cast<float>(rng.normal(0.0, stddev));
  return m;
}

MatrixD sinusoidal_positions(std::size_t max_len, std::size_t d) {
  MatrixD p(max_len, d);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t j = 0; j < d; ++j) {
      const double pair = static_cast<double>(j / 2 * 2);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, pair / static_cast<double>(d));
      p(pos, j) = kPositionScale * ((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  }
  return p;
}

// out = in * w^T, in: n x k (double), w: m x k (float)
template <typename In>
MatrixD project(const Matrix<In>& in, const MatrixF& w) {
  MatrixD out(in.rows, w.rows);
  for (std::size_t i = 0; i < in.rows; ++i) {
    const auto x = in.row(i);
    for (std::size_t j = 0; j < w.rows; ++j) {
      const auto wr = w.row(j);
      double acc = 0.0;
      for (std::size_t t = 0; t < wr.size(); ++t) acc += static_cast<double>(x[t]) * static_cast<double>(wr[t]);
      out(i, j) = acc;
    }
  }
  return out;
}

void append_bytes(std::vector<std::byte>& out, const std::vector<float>& values) {
  const auto* p = reinterpret_cast<const std::byte*>(values.data());
  out.insert(out.end(), p, p + values.size() * sizeof(float));
}

// Per-example activations kept for the backward pass, plus scratch. One
// instance is reused across examples so the hot loop never allocates.
struct Workspace {
  std::size_t len = 0;
  std::vector<double> x;     // len x d
  std::vector<double> q;     // len x d
  std::vector<double> k;     // len x d
  std::vector<double> k_t;   // d x len
  std::array<std::vector<double>, kNumModules> xa; // len x r each
  std::vector<double> xa_t;  // r x len
  std::vector<double> probs; // len x len attention
  std::vector<double> col_weight; // len, column sums of probs
  std::vector<double> u;     // d, weighted mean of x
  std::vector<double> ua;    // r, weighted mean of xa_v
  std::vector<double> pooled;
  std::vector<double> logits;
  // backward scratch
  std::vector<double> dpooled, du, bvd, dw, dscore, dscore_t, proj_t;
};

// Gradients accumulated transposed (r x d) so the inner loops run over d.
struct GradAccumulator {
  std::array<std::vector<double>, kNumModules> b_t;
};

// Adapter state in the layout the kernels want: B transposed to r x d.
struct LoraView {
  const LoraAdapter* adapter = nullptr;
  const std::array<MatrixD, kNumModules>* embed_a = nullptr;
  const std::array<MatrixD, kNumModules>* positions_a = nullptr;
  std::array<MatrixD, kNumModules> b_t;
};

LoraView make_view(const LoraAdapter& ad, const std::array<MatrixD, kNumModules>& embed_a,
                   const std::array<MatrixD, kNumModules>& positions_a) {
  LoraView view{&ad, &embed_a, &positions_a, {}};
  for (std::size_t m = 0; m < kNumModules; ++m) {
    const MatrixD& b = ad.b[m];
    MatrixD t(b.cols, b.rows);
    for (std::size_t i = 0; i < b.rows; ++i) {
      for (std::size_t a = 0; a < b.cols; ++a) t(a, i) = b(i, a);
    }
    view.b_t[m] = std::move(t);
  }
  return view;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void axpy(double alpha, const float* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * static_cast<double>(x[i]);
}

// C += alpha * A * B, all row-major; A: m x k, B: k x n, C: m x n. Column
// blocks stay in registers across the k loop. Summation order over k is
// ascending for every element, so results do not depend on the blocking.
LWDOCK_KERNEL void gemm_acc(std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a, std::size_t lda,
              const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  constexpr std::size_t kBlock = 8;
  const std::size_t n_full = n - n % kBlock;
  std::size_t i = 0;
  for (; i < m; ++i) {
    const double* ai = a + i * lda;
    double* ci = c + i * ldc;
    for (std::size_t j0 = 0; j0 < n_full; j0 += kBlock) {
      double acc[kBlock];
      for (std::size_t jj = 0; jj < kBlock; ++jj) acc[jj] = ci[j0 + jj];
      for (std::size_t t = 0; t < k; ++t) {
        const double w = alpha * ai[t];
        const double* bt = b + t * ldb + j0;
        for (std::size_t jj = 0; jj < kBlock; ++jj) acc[jj] += w * bt[jj];
      }
      for (std::size_t jj = 0; jj < kBlock; ++jj) ci[j0 + jj] = acc[jj];
    }
  }
  // Ragged columns for every row.
  for (std::size_t r = 0; r < m; ++r) {
    const double* ar = a + r * lda;
    double* cr = c + r * ldc;
    for (std::size_t j = n_full; j < n; ++j) {
      double acc = cr[j];
      for (std::size_t t = 0; t < k; ++t) acc += (alpha * ar[t]) * b[t * ldb + j];
      cr[j] = acc;
    }
  }
}

LWDOCK_KERNEL void run_forward(const AnchorModel& anchor, const LoraView& lora, const TokenSeq& seq, Workspace& ws) {
  const AnchorConfig& cfg = anchor.config;
  const std::size_t d = cfg.embed_dim;
  const std::size_t len = seq.valid_len;
  ws.len = len;
  ws.x.resize(len * d);
  ws.q.resize(len * d);
  ws.k.resize(len * d);

  for (std::size_t i = 0; i < len; ++i) {
    const std::uint32_t t = seq.ids[i];
    const auto e = anchor.embed.row(t);
    const auto p = anchor.positions.row(i);
    const auto eq = anchor.embed_query.row(t);
    const auto pq = anchor.positions_query.row(i);
    const auto ek = anchor.embed_key.row(t);
    const auto pk = anchor.positions_key.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      ws.x[i * d + j] = static_cast<double>(e[j]) + p[j];
      ws.q[i * d + j] = eq[j] + pq[j];
      ws.k[i * d + j] = ek[j] + pk[j];
    }
  }

  const double s = lora.adapter != nullptr ? lora.adapter->scale() : 0.0;
  const std::size_t r = lora.adapter != nullptr ? lora.adapter->rank : 0;
  if (lora.adapter != nullptr) {
    for (std::size_t m = 0; m < kNumModules; ++m) {
      auto& xa = ws.xa[m];
      xa.resize(len * r);
      for (std::size_t i = 0; i < len; ++i) {
        const auto ea = (*lora.embed_a)[m].row(seq.ids[i]);
        const auto pa = (*lora.positions_a)[m].row(i);
        for (std::size_t a = 0; a < r; ++a) xa[i * r + a] = ea[a] + pa[a];
      }
    }
    // Q += s * XA_q * B_q^T, K += s * XA_k * B_k^T
    const std::array<std::pair<std::vector<double>*, Module>, 2> targets = {
        std::pair{&ws.q, Module::kQuery}, std::pair{&ws.k, Module::kKey}};
    for (const auto& [dst, mod] : targets) {
      const MatrixD& bt = lora.b_t[static_cast<std::size_t>(mod)];
      const auto& xa = ws.xa[static_cast<std::size_t>(mod)];
      gemm_acc(len, d, r, s, xa.data(), r, bt.data.data(), d, dst->data(), d);
    }
  }

  ws.k_t.resize(d * len);
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t t = 0; t < d; ++t) ws.k_t[t * len + j] = ws.k[j * d + t];
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  ws.probs.assign(len * len, 0.0);
  gemm_acc(len, len, d, 1.0, ws.q.data(), d, ws.k_t.data(), len, ws.probs.data(), len);
  for (std::size_t i = 0; i < len; ++i) {
    double* row = ws.probs.data() + i * len;
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < len; ++j) {
      row[j] *= inv_sqrt_d;
      row_max = std::max(row_max, row[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      row[j] = std::exp(row[j] - row_max);
      total += row[j];
    }
    const double inv_total = 1.0 / total;
    for (std::size_t j = 0; j < len; ++j) row[j] *= inv_total;
  }

  ws.col_weight.assign(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) axpy(1.0, ws.probs.data() + i * len, ws.col_weight.data(), len);

  const double inv_len = 1.0 / static_cast<double>(len);
  ws.u.assign(d, 0.0);
  for (std::size_t j = 0; j < len; ++j) axpy(ws.col_weight[j] * inv_len, ws.x.data() + j * d, ws.u.data(), d);

  // pooled = W'_v u, with W'_v = W_v + s * B_v * A_v
  ws.pooled.assign(d, 0.0);
  for (std::size_t t = 0; t < d; ++t) axpy(ws.u[t], anchor.value_t.row(t).data(), ws.pooled.data(), d);
  if (lora.adapter != nullptr) {
    const auto& xa_v = ws.xa[static_cast<std::size_t>(Module::kValue)];
    ws.ua.assign(r, 0.0);
    for (std::size_t j = 0; j < len; ++j) axpy(ws.col_weight[j] * inv_len, xa_v.data() + j * r, ws.ua.data(), r);
    const MatrixD& bvt = lora.b_t[static_cast<std::size_t>(Module::kValue)];
    for (std::size_t a = 0; a < r; ++a) axpy(s * ws.ua[a], bvt.row(a).data(), ws.pooled.data(), d);
  }

  const std::size_t c = cfg.num_classes;
  ws.logits.resize(c);
  for (std::size_t ci = 0; ci < c; ++ci) {
    const auto wr = anchor.w_out.row(ci);
    double acc = 0.0;
    for (std::size_t t = 0; t < d; ++t) acc += static_cast<double>(wr[t]) * ws.pooled[t];
    ws.logits[ci] = acc + static_cast<double>(anchor.b_out[ci]);
  }
}

// Accumulates d(loss)/dB^T into acc given dlogits (already scaled by 1/batch).
LWDOCK_KERNEL void run_backward(const AnchorModel& anchor, const LoraView& lora, Workspace& ws, std::span<const double> dlogits,
                  GradAccumulator& acc) {
  const LoraAdapter& ad = *lora.adapter;
  const std::size_t d = anchor.config.embed_dim;
  const std::size_t c = anchor.config.num_classes;
  const std::size_t r = ad.rank;
  const std::size_t len = ws.len;
  const double s = ad.scale();
  const double inv_len = 1.0 / static_cast<double>(len);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  ws.dpooled.assign(d, 0.0);
  for (std::size_t ci = 0; ci < c; ++ci) axpy(dlogits[ci], anchor.w_out.row(ci).data(), ws.dpooled.data(), d);

  // dB_v^T[a] += s * ua[a] * dpooled
  auto& gv = acc.b_t[static_cast<std::size_t>(Module::kValue)];
  for (std::size_t a = 0; a < r; ++a) axpy(s * ws.ua[a], ws.dpooled.data(), gv.data() + a * d, d);

  // du = W'_v^T dpooled
  const MatrixD& bvt = lora.b_t[static_cast<std::size_t>(Module::kValue)];
  const MatrixF& av = ad.a_of(Module::kValue);
  ws.du.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) axpy(ws.dpooled[j], anchor.w_value.row(j).data(), ws.du.data(), d);
  for (std::size_t a = 0; a < r; ++a) {
    const double* bt = bvt.row(a).data();
    double bvd = 0.0;
    for (std::size_t j = 0; j < d; ++j) bvd += bt[j] * ws.dpooled[j];
    axpy(s * bvd, av.row(a).data(), ws.du.data(), d);
  }

  ws.dw.resize(len);
  for (std::size_t j = 0; j < len; ++j) {
    const double* xj = ws.x.data() + j * d;
    double sum = 0.0;
    for (std::size_t t = 0; t < d; ++t) sum += xj[t] * ws.du[t];
    ws.dw[j] = sum * inv_len;
  }

  // Softmax backward; every row of d(probs) equals dw.
  ws.dscore.resize(len * len);
  ws.dscore_t.resize(len * len);
  for (std::size_t i = 0; i < len; ++i) {
    const double* pr = ws.probs.data() + i * len;
    double dot = 0.0;
    for (std::size_t j = 0; j < len; ++j) dot += pr[j] * ws.dw[j];
    double* ds = ws.dscore.data() + i * len;
    for (std::size_t j = 0; j < len; ++j) ds[j] = pr[j] * (ws.dw[j] - dot) * inv_sqrt_d;
    for (std::size_t j = 0; j < len; ++j) ws.dscore_t[j * len + i] = ds[j];
  }

  const auto& xa_q = ws.xa[static_cast<std::size_t>(Module::kQuery)];
  const auto& xa_k = ws.xa[static_cast<std::size_t>(Module::kKey)];
  auto& gq = acc.b_t[static_cast<std::size_t>(Module::kQuery)];
  auto& gk = acc.b_t[static_cast<std::size_t>(Module::kKey)];
  ws.proj_t.resize(r * len);
  ws.xa_t.resize(r * len);

  // dB_q^T = s * P_q K with P_q = XA_q^T dS (r x len)
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t a = 0; a < r; ++a) ws.xa_t[a * len + i] = xa_q[i * r + a];
  }
  std::fill(ws.proj_t.begin(), ws.proj_t.end(), 0.0);
  gemm_acc(r, len, len, 1.0, ws.xa_t.data(), len, ws.dscore.data(), len, ws.proj_t.data(), len);
  gemm_acc(r, d, len, s, ws.proj_t.data(), len, ws.k.data(), d, gq.data(), d);

  // dB_k^T = s * P_k Q with P_k = XA_k^T dS^T (r x len)
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t a = 0; a < r; ++a) ws.xa_t[a * len + j] = xa_k[j * r + a];
  }
  std::fill(ws.proj_t.begin(), ws.proj_t.end(), 0.0);
  gemm_acc(r, len, len, 1.0, ws.xa_t.data(), len, ws.dscore_t.data(), len, ws.proj_t.data(), len);
  gemm_acc(r, d, len, s, ws.proj_t.data(), len, ws.q.data(), d, gk.data(), d);
}

Workspace& thread_workspace() {
  thread_local Workspace ws;
  return ws;
}

void check_adapter_shape(const AnchorConfig& cfg, const LoraAdapter& ad) {
  bool ok = ad.embed_dim == cfg.embed_dim && ad.rank == cfg.rank && ad.lora_alpha == cfg.lora_alpha;
  for (std::size_t m = 0; ok && m < kNumModules; ++m) {
    ok = ad.a[m].rows == cfg.rank && ad.a[m].cols == cfg.embed_dim && ad.b[m].rows == cfg.embed_dim &&
         ad.b[m].cols == cfg.rank;
  }
  if (!ok) throw Error(ErrorCode::kShapeMismatch, "adapter shape does not match anchor config");
}

double log_sum_exp(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(mx)) return mx;
  double total = 0.0;
  for (double v : logits) total += std::exp(v - mx);
  return mx + std::log(total);
}

}  // namespace

void AnchorConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (arch_version != kArchVersion) fail("unsupported arch_version '" + arch_version + "'");
  if (vocab_size < 2) fail("vocab_size must be >= 2");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (max_len < 1) fail("max_len must be >= 1");
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (rank < 1 || rank > embed_dim) fail("rank must satisfy 1 <= r <= d");
  if (!(lora_alpha > 0.0) || !std::isfinite(lora_alpha)) fail("lora_alpha must be positive");
  if (!std::equal(target_modules.begin(), target_modules.end(), kTargetModules.begin(), kTargetModules.end())) {
    fail("target_modules must be [q_proj, k_proj, v_proj]");
  }
  if (dtype != "f32") fail("dtype must be f32");
}

std::size_t AnchorConfig::parameter_count() const {
  return vocab_size * embed_dim + 3 * embed_dim * embed_dim + num_classes * embed_dim + num_classes;
}

nlohmann::json to_json(const AnchorConfig& config) {
  return nlohmann::json{
      {"arch_version", config.arch_version}, {"vocab_size", config.vocab_size},
      {"embed_dim", config.embed_dim},       {"max_len", config.max_len},
      {"num_classes", config.num_classes},   {"rank", config.rank},
      {"lora_alpha", config.lora_alpha},     {"target_modules", config.target_modules},
      {"base_seed", config.base_seed},       {"lora_seed", config.lora_seed},
      {"dtype", config.dtype},
  };
}

AnchorConfig anchor_config_from_json(const nlohmann::json& j) {
  try {
    AnchorConfig c;
    c.arch_version = j.at("arch_version").get<std::string>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.rank = j.at("rank").get<std::size_t>();
    c.lora_alpha = j.at("lora_alpha").get<double>();
    c.target_modules = j.at("target_modules").get<std::vector<std::string>>();
    c.base_seed = j.at("base_seed").get<std::uint64_t>();
    c.lora_seed = j.at("lora_seed").get<std::uint64_t>();
    c.dtype = j.at("dtype").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("anchor config json: ") + e.what());
  }
}

std::string canonical_json(const AnchorConfig& config) { return to_json(config).dump(); }

std::string anchor_id(const AnchorConfig& config) { return sha256_hex(canonical_json(config)); }

AnchorModel init_anchor(const AnchorConfig& config) {
  config.validate();
  const std::size_t d = config.embed_dim;
  AnchorModel m;
  m.config = config;
  Rng rng(config.base_seed);
  m.embed = gaussian_matrix(rng, config.vocab_size, d, kBaseInitStd);
  m.w_query = gaussian_matrix(rng, d, d, kBaseInitStd);
  m.w_key = gaussian_matrix(rng, d, d, kBaseInitStd);
  m.w_value = gaussian_matrix(rng, d, d, kBaseInitStd);
  m.w_out = gaussian_matrix(rng, config.num_classes, d, kBaseInitStd);
  m.b_out.assign(config.num_classes, 0.0F);

  m.positions = sinusoidal_positions(config.max_len, d);
  m.embed_query = project(m.embed, m.w_query);
  m.embed_key = project(m.embed, m.w_key);
  m.positions_query = project(m.positions, m.w_query);
  m.positions_key = project(m.positions, m.w_key);
  m.value_t = MatrixD(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) m.value_t(j, i) = static_cast<double>(m.w_value(i, j));
  }
  return m;
}

LoraAdapter init_adapter(const AnchorConfig& config) {
  config.validate();
  LoraAdapter ad;
  ad.embed_dim = config.embed_dim;
  ad.rank = config.rank;
  ad.lora_alpha = config.lora_alpha;
  Rng rng(config.lora_seed);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(config.rank));
  for (std::size_t m = 0; m < kNumModules; ++m) {
    ad.a[m] = gaussian_matrix(rng, config.rank, config.embed_dim, stddev);
    ad.b[m] = MatrixD(config.embed_dim, config.rank, 0.0);
  }
  return ad;
}

TokenSeq tokenize(std::string_view text, std::size_t max_len) {
  if (text.empty()) throw Error(ErrorCode::kEmptyText, "training text must be non-empty");
  if (max_len == 0) throw Error(ErrorCode::kInvalidConfig, "max_len must be >= 1");
  TokenSeq seq;
  seq.ids.assign(max_len, kPadId);
  seq.valid_len = std::min(text.size(), max_len);
  for (std::size_t i = 0; i < seq.valid_len; ++i) {
    seq.ids[i] = static_cast<std::uint32_t>(static_cast<unsigned char>(text[i])) + 1;
  }
  return seq;
}

void validate_seq(const AnchorConfig& config, const TokenSeq& seq) {
  if (seq.valid_len == 0 || seq.valid_len > seq.ids.size() || seq.ids.size() > config.max_len) {
    throw Error(ErrorCode::kShapeMismatch, "token sequence length out of range");
  }
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (seq.ids[i] >= config.vocab_size) throw Error(ErrorCode::kShapeMismatch, "token id out of vocabulary");
    if (i >= seq.valid_len && seq.ids[i] != kPadId) {
      throw Error(ErrorCode::kShapeMismatch, "non-PAD token beyond valid_len");
    }
  }
}

std::vector<double> forward(const AnchorModel& anchor, const TokenSeq& seq) {
  validate_seq(anchor.config, seq);
  Workspace& ws = thread_workspace();
  run_forward(anchor, LoraView{}, seq, ws);
  return ws.logits;
}

std::vector<double> forward(const AnchorModel& anchor, const LoraAdapter& adapter, const TokenSeq& seq) {
  return AdaptedModel(anchor, adapter).logits(seq);
}

double loss(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw Error(ErrorCode::kLabelOutOfRange, "label exceeds number of classes");
  return log_sum_exp(logits) - logits[label];
}

std::size_t argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

std::size_t predict(const AnchorModel& anchor, const LoraAdapter& adapter, const TokenSeq& seq) {
  return argmax(forward(anchor, adapter, seq));
}

LoraGrads grad_b(const AnchorModel& anchor, const LoraAdapter& adapter, std::span<const Sample> batch) {
  return AdaptedModel(anchor, adapter).loss_and_grad(batch);
}

AdaptedModel::AdaptedModel(const AnchorModel& anchor, const LoraAdapter& adapter)
    : anchor_(anchor), adapter_(adapter) {
  check_adapter_shape(anchor.config, adapter);
  for (std::size_t m = 0; m < kNumModules; ++m) {
    embed_a_[m] = project(anchor.embed, adapter.a[m]);
    positions_a_[m] = project(anchor.positions, adapter.a[m]);
  }
}

std::vector<double> AdaptedModel::logits(const TokenSeq& seq) const {
  validate_seq(anchor_.config, seq);
  Workspace& ws = thread_workspace();
  run_forward(anchor_, make_view(adapter_, embed_a_, positions_a_), seq, ws);
  return ws.logits;
}

std::size_t AdaptedModel::predict(const TokenSeq& seq) const { return argmax(logits(seq)); }

LoraGrads AdaptedModel::loss_and_grad(std::span<const Sample> batch) const {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "gradient of an empty batch");
  const AnchorConfig& cfg = anchor_.config;
  const std::size_t d = cfg.embed_dim;
  const std::size_t r = cfg.rank;
  GradAccumulator acc;
  for (auto& g : acc.b_t) g.assign(r * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> dlogits(cfg.num_classes);
  double total_loss = 0.0;
  const LoraView view = make_view(adapter_, embed_a_, positions_a_);
  Workspace& ws = thread_workspace();
  for (const Sample& sample : batch) {
    validate_seq(cfg, sample.seq);
    if (sample.label >= cfg.num_classes) throw Error(ErrorCode::kLabelOutOfRange, "label exceeds number of classes");
    run_forward(anchor_, view, sample.seq, ws);
    const double lse = log_sum_exp(ws.logits);
    total_loss += lse - ws.logits[sample.label];
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      const double p = std::exp(ws.logits[c] - lse);
      dlogits[c] = (p - (c == sample.label ? 1.0 : 0.0)) * inv_n;
    }
    run_backward(anchor_, view, ws, dlogits, acc);
  }
  LoraGrads grads;
  for (std::size_t m = 0; m < kNumModules; ++m) {
    grads.b[m] = MatrixD(d, r);
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t i = 0; i < d; ++i) grads.b[m](i, a) = acc.b_t[m][a * d + i];
    }
  }
  grads.mean_loss = total_loss * inv_n;
  return grads;
}

std::vector<std::byte> frozen_bytes(const AnchorModel& anchor) {
  std::vector<std::byte> out;
  append_bytes(out, anchor.embed.data);
  append_bytes(out, anchor.w_query.data);
  append_bytes(out, anchor.w_key.data);
  append_bytes(out, anchor.w_value.data);
  append_bytes(out, anchor.w_out.data);
  append_bytes(out, anchor.b_out);
  return out;
}

std::vector<std::byte> frozen_bytes(const LoraAdapter& adapter) {
  std::vector<std::byte> out;
  for (const MatrixF& a : adapter.a) append_bytes(out, a.data);
  return out;
}

}  // namespace lwdock
