#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gazelign/core.hpp"

namespace gazelign::gaze {

struct Fixation {
  std::size_t word_index = 0;
  double duration_ms = 0.0;
};

/// Quality and correctness filter. Thresholds are fractions and inclusive.
struct FilterPolicy {
  double min_webgazer_accuracy = 0.20;
  bool drop_wrong_answers = true;
  /// Applied to model samples only (per model, seed and document).
  double min_f1 = 0.5;

  std::string check() const {
    if (!(min_webgazer_accuracy >= 0.0 && min_webgazer_accuracy <= 1.0)) {
      return "min_webgazer_accuracy must lie in [0,1]";
    }
    if (!(min_f1 >= 0.0 && min_f1 <= 1.0)) return "min_f1 must lie in [0,1]";
    return {};
  }
};

/// Total reading time per word: the sum of all fixation durations on it.
inline std::vector<double> trt_from_fixations(std::span<const Fixation> fixations,
                                              std::size_t word_count) {
  std::vector<double> trt(word_count, 0.0);
  for (const auto& f : fixations) {
    if (f.word_index >= word_count) {
      std::ostringstream os;
      os << "fixation on word " << f.word_index << " outside document of " << word_count
         << " words";
      throw InputError(os.str());
    }
    if (!(f.duration_ms >= 0.0)) throw InputError("negative fixation duration");
    trt[f.word_index] += f.duration_ms;
  }
  return trt;
}

/// Relative fixation duration: TRT normalised by the text's total TRT.
inline ReadingPattern rfd(std::span<const double> trt, std::string doc_id = {}) {
  if (trt.empty()) throw InputError("rfd: empty TRT vector");
  double total = 0.0;
  for (double v : trt) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("rfd: negative or non-finite TRT");
    total += v;
  }
  if (!(total > 0.0)) {
    throw EmptyPatternError("rfd: all-zero TRT" + (doc_id.empty() ? "" : " for " + doc_id));
  }
  ReadingPattern p{std::move(doc_id), PatternSource::gaze_individual, {}};
  p.rfd.reserve(trt.size());
  for (double v : trt) p.rfd.push_back(v / total);
  return p;
}

inline ReadingPattern rfd(const TrialRecord& trial) { return rfd(trial.trt_ms, trial.doc_id); }

/// Element-wise mean of same-document patterns.
inline ReadingPattern average_patterns(std::span<const ReadingPattern> patterns) {
  if (patterns.empty()) throw InputError("average_patterns: no patterns");
  const auto& first = patterns.front();
  ReadingPattern out{first.doc_id, PatternSource::gaze_averaged,
                     std::vector<double>(first.rfd.size(), 0.0)};
  for (const auto& p : patterns) {
    if (p.doc_id != first.doc_id) {
      throw InputError("average_patterns: mixed doc_ids '" + first.doc_id + "' and '" + p.doc_id +
                       "'");
    }
    if (p.rfd.size() != first.rfd.size()) throw InputError("average_patterns: length mismatch");
    for (std::size_t i = 0; i < p.rfd.size(); ++i) out.rfd[i] += p.rfd[i];
  }
  const double n = static_cast<double>(patterns.size());
  for (double& v : out.rfd) v /= n;
  return out;
}

struct Exclusion {
  std::string participant_id;
  std::string doc_id;
  std::string reason;  // "low-quality" or "wrong-answer"
  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

struct FilterOutcome {
  std::vector<TrialRecord> retained;
  std::vector<Exclusion> exclusions;
};

inline FilterOutcome apply_filter(std::span<const TrialRecord> trials, const FilterPolicy& policy) {
  FilterOutcome out;
  for (const auto& t : trials) {
    if (t.webgazer_accuracy < policy.min_webgazer_accuracy) {
      out.exclusions.push_back({t.participant_id, t.doc_id, "low-quality"});
    } else if (policy.drop_wrong_answers && !t.answer_correct) {
      out.exclusions.push_back({t.participant_id, t.doc_id, "wrong-answer"});
    } else {
      out.retained.push_back(t);
    }
  }
  return out;
}

}  // namespace gazelign::gaze
