#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gazelign/core.hpp"

namespace gazelign::attention {

inline constexpr double kRowSumTolerance = 1e-4;

/// Dense row-major square matrix.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * n_, n_}; }
  std::span<const double> values() const { return data_; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix out(a.n_);
    for (std::size_t i = 0; i < a.n_; ++i) {
      for (std::size_t k = 0; k < a.n_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < a.n_; ++j) out(i, j) += aik * b(k, j);
      }
    }
    return out;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Per-layer, per-head attention weights of one document, plus the token
/// alignment needed to map token importances back to words.
struct AttentionStack {
  std::string model_id;
  std::string doc_id;
  std::int64_t seed = 0;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t tokens = 0;
  /// attn[((l * heads + h) * tokens + i) * tokens + j]
  std::vector<double> attn;
  AlignmentMap align;

  double at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const {
    return attn[((l * heads + h) * tokens + i) * tokens + j];
  }
  double& at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) {
    return attn[((l * heads + h) * tokens + i) * tokens + j];
  }
};

/// Empty string when the stack is valid.
inline std::string check(const AttentionStack& s) {
  std::ostringstream os;
  if (s.layers == 0 || s.heads == 0 || s.tokens == 0) {
    os << "dims must be positive (layers=" << s.layers << ", heads=" << s.heads
       << ", tokens=" << s.tokens << ")";
    return os.str();
  }
  if (s.attn.size() != s.layers * s.heads * s.tokens * s.tokens) {
    os << "attn holds " << s.attn.size() << " values, dims require "
       << s.layers * s.heads * s.tokens * s.tokens;
    return os.str();
  }
  if (s.align.tokens.size() != s.tokens) {
    os << "alignment has " << s.align.tokens.size() << " tokens, dims say " << s.tokens;
    return os.str();
  }
  for (std::size_t l = 0; l < s.layers; ++l) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      for (std::size_t i = 0; i < s.tokens; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < s.tokens; ++j) {
          const double v = s.at(l, h, i, j);
          if (!(v >= 0.0) || !std::isfinite(v)) {
            os << "attn[" << l << "][" << h << "][" << i << "][" << j << "] is negative or not finite";
            return os.str();
          }
          sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          os << "attn[" << l << "][" << h << "][" << i << "] sums to " << sum;
          return os.str();
        }
      }
    }
  }
  return {};
}

/// Mean over heads of one layer.
inline Matrix head_mean(const AttentionStack& s, std::size_t layer) {
  if (layer >= s.layers) {
    std::ostringstream os;
    os << "layer " << layer << " out of range for " << s.layers << " layers";
    throw InputError(os.str());
  }
  Matrix m(s.tokens);
  const double inv = 1.0 / static_cast<double>(s.heads);
  for (std::size_t h = 0; h < s.heads; ++h) {
    for (std::size_t i = 0; i < s.tokens; ++i) {
      for (std::size_t j = 0; j < s.tokens; ++j) m(i, j) += s.at(layer, h, i, j);
    }
  }
  for (std::size_t i = 0; i < s.tokens; ++i) {
    for (std::size_t j = 0; j < s.tokens; ++j) m(i, j) *= inv;
  }
  return m;
}

/// residual_weight * I + (1 - residual_weight) * A, each row renormalised.
inline Matrix blend_with_identity(const Matrix& a, double residual_weight) {
  Matrix out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      out(i, j) = (1.0 - residual_weight) * a(i, j) + (i == j ? residual_weight : 0.0);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < a.size(); ++j) out(i, j) /= sum;
  }
  return out;
}

/// Attention rollout accumulated from layer 0 upward:
/// R = B_k · ... · B_1 · B_0 with B_l the residual-blended head mean of layer l.
/// upto_layer selects k; nullopt means the last layer.
inline Matrix rollout(const AttentionStack& s, double residual_weight = 0.5,
                      std::optional<std::size_t> upto_layer = std::nullopt) {
  if (!(residual_weight >= 0.0 && residual_weight <= 1.0)) {
    throw InputError("rollout residual weight must lie in [0,1]");
  }
  const std::size_t last = upto_layer.value_or(s.layers - 1);
  if (last >= s.layers) {
    std::ostringstream os;
    os << "rollout upto layer " << last << " out of range for " << s.layers << " layers";
    throw InputError(os.str());
  }
  Matrix acc = blend_with_identity(head_mean(s, 0), residual_weight);
  for (std::size_t l = 1; l <= last; ++l) {
    acc = blend_with_identity(head_mean(s, l), residual_weight) * acc;
  }
  return acc;
}

/// How token importance is read off an attention-like matrix.
enum class Readout {
  column_mean,  // mean attention received by each token
  cls_row,      // the first token's row
};

inline std::vector<double> token_importance(const Matrix& m, Readout readout = Readout::column_mean) {
  std::vector<double> out(m.size(), 0.0);
  if (readout == Readout::cls_row) {
    auto r = m.row(0);
    out.assign(r.begin(), r.end());
    return out;
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) out[j] += m(i, j);
  }
  for (double& v : out) v /= static_cast<double>(m.size());
  return out;
}

struct SaliencyOptions {
  double residual_weight = 0.5;
  std::optional<std::size_t> rollout_upto;
  Readout readout = Readout::column_mean;
  SubwordAgg aggregation = SubwordAgg::sum;
};

inline std::vector<double> token_saliency(const AttentionStack& s, Method method,
                                          const SaliencyOptions& opt = {}) {
  switch (method) {
    case Method::first_attn: return token_importance(head_mean(s, 0), opt.readout);
    case Method::last_attn: return token_importance(head_mean(s, s.layers - 1), opt.readout);
    case Method::rollout:
      return token_importance(rollout(s, opt.residual_weight, opt.rollout_upto), opt.readout);
    default:
      throw InputError("attention_saliency: method '" + std::string(to_string(method)) +
                       "' is not attention-based");
  }
}

/// Word-level explanation from an attention stack.
inline SaliencyMap attention_saliency(const AttentionStack& s, Method method, std::size_t word_count,
                                      const SaliencyOptions& opt = {}) {
  auto tokens = token_saliency(s, method, opt);
  return SaliencyMap{s.model_id, method, s.seed, s.doc_id,
                     aggregate_subwords(tokens, s.align, word_count, opt.aggregation)};
}

}  // namespace gazelign::attention
