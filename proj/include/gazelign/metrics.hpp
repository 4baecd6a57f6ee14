#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "gazelign/core.hpp"

namespace gazelign::metrics {

inline constexpr double kPatternSumTolerance = 1e-9;
/// Largest n for which correlation p-values come from full enumeration.
inline constexpr std::size_t kExactPermutationMaxN = 8;

// =============================================================================
// Ranks
// =============================================================================

/// 1-based ranks, ties receive the average of the ranks they span.
inline std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

// =============================================================================
// Entropy
// =============================================================================

inline void require_pattern(std::span<const double> p) {
  if (p.empty()) throw InputError("empty pattern");
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("pattern has a negative or non-finite entry");
    s += v;
  }
  if (std::abs(s - 1.0) > kPatternSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "pattern sums to " << s << ", expected 1";
    throw InputError(os.str());
  }
}

/// Shannon entropy with 0·log 0 = 0.
inline double entropy(std::span<const double> pattern, double base = 2.0) {
  if (!(base > 1.0)) throw InputError("entropy base must exceed 1");
  require_pattern(pattern);
  double h = 0.0;
  for (double p : pattern) {
    if (p > 0.0) h -= p * std::log(p);
  }
  h /= std::log(base);
  return h < 0.0 ? 0.0 : h;
}

inline double entropy(const ReadingPattern& p, double base = 2.0) { return entropy(p.rfd, base); }

// =============================================================================
// Decoding ROC-AUC
// =============================================================================

/// ROC-AUC of scores against a binary rationale mask, computed through the
/// Mann-Whitney identity with midranks so ties count one half.
inline double decode_roc_auc(std::span<const double> scores, std::span<const std::uint8_t> mask) {
  if (scores.size() != mask.size()) {
    std::ostringstream os;
    os << "decode_roc_auc: " << scores.size() << " scores vs " << mask.size() << " mask entries";
    throw InputError(os.str());
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw InputError("decode_roc_auc: non-finite score");
  }
  const auto ranks = midranks(scores);
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      n_pos += 1.0;
      rank_sum += ranks[i];
    }
  }
  const double n_neg = static_cast<double>(mask.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw UndefinedMetricError("ROC-AUC undefined: mask needs both positive and negative words");
  }
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

inline double decode_roc_auc(std::span<const double> scores, const RationaleMask& mask) {
  return decode_roc_auc(scores, std::span<const std::uint8_t>(mask.mask));
}

// =============================================================================
// Alignment AUC
// =============================================================================

enum class TieBreak { ascending_index, random };

/// Area under the cumulative-evidence curve. Words are visited in descending
/// model score; the curve passes through (k/T, E_k/E_T) for k = 0..T and is
/// integrated with the trapezoid rule. Uniform evidence gives 0.5.
inline double alignment_auc(std::span<const double> model_scores,
                            std::span<const double> human_evidence,
                            TieBreak tie_break = TieBreak::ascending_index,
                            std::uint64_t tie_seed = 0) {
  const std::size_t n = model_scores.size();
  if (n == 0 || human_evidence.size() != n) {
    std::ostringstream os;
    os << "alignment_auc: " << n << " scores vs " << human_evidence.size() << " evidence entries";
    throw InputError(os.str());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(model_scores[i])) throw InputError("alignment_auc: non-finite score");
    if (!(human_evidence[i] >= 0.0)) throw InputError("alignment_auc: negative evidence");
    total += human_evidence[i];
  }
  if (!(total > 0.0)) throw UndefinedMetricError("alignment AUC undefined: zero total evidence");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (tie_break == TieBreak::random) {
    std::mt19937_64 rng(tie_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return model_scores[a] > model_scores[b];
  });

  double area = 0.0, prev = 0.0, cum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += human_evidence[order[k]];
    const double y = cum / total;
    area += 0.5 * (prev + y);
    prev = y;
  }
  return area / static_cast<double>(n);
}

// =============================================================================
// Correlation
// =============================================================================

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;
};

enum class CorrelationMethod { spearman, pearson };

namespace detail {

inline double pearson_coefficient(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided p-value from the t distribution with n-2 degrees of freedom.
inline double t_test_p(double r, std::size_t n) {
  if (n < 3) return 1.0;
  const double dof = static_cast<double>(n - 2);
  const double denom = (1.0 - r) * (1.0 + r);
  if (denom <= 0.0) return 0.0;
  const double t = r * std::sqrt(dof / denom);
  boost::math::students_t_distribution<double> dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

/// Two-sided exact permutation p-value: the fraction of the n! orderings of
/// y whose |coefficient| is at least the observed one.
inline double exact_permutation_p(std::span<const double> x, std::span<const double> y,
                                  double observed) {
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> permuted(y.size());
  const double threshold = std::abs(observed) - 1e-12;
  std::size_t hits = 0, total = 0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = y[perm[i]];
    const double r = pearson_coefficient(x, permuted);
    if (std::abs(r) >= threshold) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

inline void require_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("correlation: vectors differ in length");
  if (a.size() < 3) throw InputError("correlation: need at least 3 observations");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw InputError("correlation: non-finite value");
    }
  }
}

}  // namespace detail

/// Spearman r_s (Pearson correlation of midranks) with a two-sided p-value:
/// exact enumeration for n <= 8, t approximation above.
inline CorrelationResult spearman(std::span<const double> a, std::span<const double> b) {
  detail::require_pair(a, b);
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  CorrelationResult out;
  out.coefficient = detail::pearson_coefficient(ra, rb);
  out.p_value = a.size() <= kExactPermutationMaxN
                    ? detail::exact_permutation_p(ra, rb, out.coefficient)
                    : detail::t_test_p(out.coefficient, a.size());
  return out;
}

inline CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y);
  CorrelationResult out;
  out.coefficient = detail::pearson_coefficient(x, y);
  out.p_value = detail::t_test_p(out.coefficient, x.size());
  return out;
}

inline CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                                   CorrelationMethod method = CorrelationMethod::spearman) {
  return method == CorrelationMethod::spearman ? spearman(x, y) : pearson(x, y);
}

// =============================================================================
// QA F1
// =============================================================================

using ArticleLists = std::map<std::string, std::vector<std::string>, std::less<>>;

inline const ArticleLists& default_articles() {
  static const ArticleLists lists{
      {"en", {"a", "an", "the"}},
      {"es", {"el", "la", "los", "las", "un", "una", "unos", "unas"}},
      {"de", {"der", "die", "das", "den", "dem", "des", "ein", "eine", "einen", "einem", "einer",
              "eines"}},
  };
  return lists;
}

namespace detail {

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

/// Decodes UTF-8; invalid bytes are passed through as Latin-1 code points.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(c);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(c);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;  // Latin-1 supplement
  return c;
}

inline bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
  }
  switch (c) {
    case 0xA1: case 0xAB: case 0xB7: case 0xBB: case 0xBF:  // ¡ « · » ¿
    case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015:
    case 0x2018: case 0x2019: case 0x201A: case 0x201C: case 0x201D: case 0x201E:
    case 0x2026:
      return true;
    default:
      return false;
  }
}

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == 0xA0;
}

}  // namespace detail

/// Lowercases, strips punctuation, removes the language's articles and
/// splits on whitespace.
inline std::vector<std::string> normalize_answer(std::string_view text, std::string_view language,
                                                 const ArticleLists& articles = default_articles()) {
  std::vector<std::string> tokens;
  std::string current;
  for (char32_t c : detail::decode_utf8(text)) {
    c = detail::to_lower(c);
    if (detail::is_punct(c)) continue;
    if (detail::is_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    detail::append_utf8(current, c);
  }
  if (!current.empty()) tokens.push_back(std::move(current));

  if (auto it = articles.find(language); it != articles.end()) {
    const auto& drop = it->second;
    std::erase_if(tokens, [&](const std::string& t) {
      return std::find(drop.begin(), drop.end(), t) != drop.end();
    });
  }
  return tokens;
}

/// Token-overlap F1 between a predicted and a gold answer string.
inline double squad_f1(std::string_view predicted, std::string_view gold, std::string_view language,
                       const ArticleLists& articles = default_articles()) {
  if (normalize_whitespace(predicted).empty()) return 0.0;
  const auto pred = normalize_answer(predicted, language, articles);
  const auto ref = normalize_answer(gold, language, articles);
  if (pred.empty() || ref.empty()) return pred == ref ? 1.0 : 0.0;

  std::map<std::string_view, long> counts;
  for (const auto& t : ref) ++counts[t];
  long common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace gazelign::metrics
