#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gazelign/error.hpp"

namespace gazelign {

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Method { first_attn, last_attn, rollout, grad_x_input, lrp, gaze };

inline constexpr Method kModelMethods[] = {Method::first_attn, Method::last_attn,
                                           Method::rollout, Method::grad_x_input,
                                           Method::lrp};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::first_attn: return "first-attn";
    case Method::last_attn: return "last-attn";
    case Method::rollout: return "rollout";
    case Method::grad_x_input: return "grad-x-input";
    case Method::lrp: return "lrp";
    case Method::gaze: return "gaze";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (auto m : {Method::first_attn, Method::last_attn, Method::rollout,
                 Method::grad_x_input, Method::lrp, Method::gaze}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

enum class PatternSource { gaze_individual, gaze_averaged };

inline std::string_view to_string(PatternSource s) {
  return s == PatternSource::gaze_individual ? "gaze-individual" : "gaze-averaged";
}

enum class SubwordAgg { sum, mean, max };

inline std::string_view to_string(SubwordAgg a) {
  switch (a) {
    case SubwordAgg::sum: return "sum";
    case SubwordAgg::mean: return "mean";
    case SubwordAgg::max: return "max";
  }
  return "?";
}

inline std::optional<SubwordAgg> parse_subword_agg(std::string_view s) {
  if (s == "sum") return SubwordAgg::sum;
  if (s == "mean") return SubwordAgg::mean;
  if (s == "max") return SubwordAgg::max;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Half-open word interval [start, end).
struct WordSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool contains(std::size_t i) const { return start <= i && i < end; }
  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

struct Document {
  std::string doc_id;
  std::string language;
  std::string set_id;
  std::vector<std::string> words;
  std::string question;
  WordSpan answer_word_span;
  std::string answer_text;

  std::size_t word_count() const { return words.size(); }
  friend bool operator==(const Document&, const Document&) = default;
};

struct RationaleMask {
  std::string doc_id;
  std::vector<std::uint8_t> mask;

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  }
};

struct TrialRecord {
  std::string participant_id;
  std::string doc_id;
  std::vector<double> trt_ms;
  double webgazer_accuracy = 0.0;
  bool answer_correct = false;
  std::optional<std::string> group;
  std::optional<bool> wears_glasses;

  double total_trt() const {
    double s = 0.0;
    for (double v : trt_ms) s += v;
    return s;
  }
  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct ReadingPattern {
  std::string doc_id;
  PatternSource source = PatternSource::gaze_individual;
  std::vector<double> rfd;
};

struct SaliencyMap {
  std::string model_id;
  Method method = Method::gaze;
  std::int64_t seed = 0;
  std::string doc_id;
  std::vector<double> scores;
};

struct AlignmentMap {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<std::optional<std::size_t>> word_ids;
};

struct Prediction {
  std::string model_id;
  std::int64_t seed = 0;
  std::string doc_id;
  std::string predicted_answer;
  double f1 = 0.0;
};

// ---------------------------------------------------------------------------
// Invariant checks. Each returns an empty string when the value is valid,
// otherwise a human-readable description of the first violation.
// ---------------------------------------------------------------------------

inline std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

inline std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

inline std::string check(const Document& d) {
  if (d.doc_id.empty()) return "empty doc_id";
  if (d.words.empty()) return "document has no words";
  const auto& sp = d.answer_word_span;
  if (!(sp.start < sp.end && sp.end <= d.words.size())) {
    std::ostringstream os;
    os << "answer_word_span [" << sp.start << "," << sp.end << ") invalid for "
       << d.words.size() << " words";
    return os.str();
  }
  auto span_text = join_words(std::span(d.words).subspan(sp.start, sp.length()));
  if (normalize_whitespace(span_text) != normalize_whitespace(d.answer_text)) {
    return "answer_text '" + d.answer_text + "' does not match span words '" + span_text + "'";
  }
  return {};
}

inline std::string check(const TrialRecord& t, std::size_t word_count) {
  if (t.trt_ms.size() != word_count) {
    std::ostringstream os;
    os << "trt_ms length " << t.trt_ms.size() << " != word count " << word_count;
    return os.str();
  }
  for (std::size_t i = 0; i < t.trt_ms.size(); ++i) {
    if (!(t.trt_ms[i] >= 0.0)) {
      std::ostringstream os;
      os << "trt_ms[" << i << "] is negative or not a number";
      return os.str();
    }
  }
  if (!(t.webgazer_accuracy >= 0.0 && t.webgazer_accuracy <= 1.0)) {
    std::ostringstream os;
    os << "webgazer_accuracy " << t.webgazer_accuracy << " outside [0,1]";
    return os.str();
  }
  return {};
}

inline std::string check(const AlignmentMap& a, std::size_t word_count) {
  if (a.tokens.size() != a.word_ids.size()) {
    std::ostringstream os;
    os << "tokens length " << a.tokens.size() << " != word_ids length " << a.word_ids.size();
    return os.str();
  }
  std::vector<bool> covered(word_count, false);
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < a.word_ids.size(); ++i) {
    if (!a.word_ids[i]) continue;
    auto w = *a.word_ids[i];
    if (w >= word_count) {
      std::ostringstream os;
      os << "token " << i << " maps to word " << w << " beyond word count " << word_count;
      return os.str();
    }
    if (prev && w < *prev) {
      std::ostringstream os;
      os << "word_ids decrease at token " << i;
      return os.str();
    }
    prev = w;
    covered[w] = true;
  }
  for (std::size_t w = 0; w < word_count; ++w) {
    if (!covered[w]) {
      std::ostringstream os;
      os << "word " << w << " is not covered by any token";
      return os.str();
    }
  }
  return {};
}

inline std::string check(const Prediction& p) {
  if (!(p.f1 >= 0.0 && p.f1 <= 1.0)) {
    std::ostringstream os;
    os << "f1 " << p.f1 << " outside [0,1]";
    return os.str();
  }
  return {};
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline RationaleMask rationale_from_span(const Document& doc) {
  if (auto err = check(doc); !err.empty()) throw InputError(doc.doc_id + ": " + err);
  RationaleMask m{doc.doc_id, std::vector<std::uint8_t>(doc.word_count(), 0)};
  for (auto i = doc.answer_word_span.start; i < doc.answer_word_span.end; ++i) m.mask[i] = 1;
  return m;
}

/// Collapses token-level scores onto words. Tokens without a word id
/// (special and question tokens) are dropped.
inline std::vector<double> aggregate_subwords(std::span<const double> token_scores,
                                              const AlignmentMap& align,
                                              std::size_t word_count,
                                              SubwordAgg mode = SubwordAgg::sum) {
  if (token_scores.size() != align.tokens.size() ||
      align.word_ids.size() != align.tokens.size()) {
    std::ostringstream os;
    os << align.doc_id << ": " << token_scores.size() << " token scores for "
       << align.tokens.size() << " tokens";
    throw InputError(os.str());
  }
  std::vector<double> out(word_count, 0.0);
  std::vector<std::size_t> count(word_count, 0);
  for (std::size_t t = 0; t < token_scores.size(); ++t) {
    if (!align.word_ids[t]) continue;
    auto w = *align.word_ids[t];
    if (w >= word_count) {
      std::ostringstream os;
      os << align.doc_id << ": token " << t << " maps to word " << w << " beyond word count "
         << word_count;
      throw AlignmentError(os.str(), w);
    }
    double s = token_scores[t];
    if (count[w] == 0) {
      out[w] = s;
    } else if (mode == SubwordAgg::max) {
      out[w] = std::max(out[w], s);
    } else {
      out[w] += s;
    }
    ++count[w];
  }
  for (std::size_t w = 0; w < word_count; ++w) {
    if (count[w] == 0) {
      std::ostringstream os;
      os << align.doc_id << ": word " << w << " has no covering token";
      throw AlignmentError(os.str(), w);
    }
    if (mode == SubwordAgg::mean) out[w] /= static_cast<double>(count[w]);
  }
  return out;
}

}  // namespace gazelign
