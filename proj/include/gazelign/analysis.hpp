#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gazelign/core.hpp"
#include "gazelign/gaze.hpp"
#include "gazelign/metrics.hpp"

namespace gazelign::analysis {

// =============================================================================
// Distribution summaries
// =============================================================================

/// Five-number summary plus mean. Quantiles interpolate linearly between
/// order statistics, so the median of an even count is the midpoint of the
/// two central values.
struct Summary {
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

inline std::optional<Summary> summarize(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  Summary s;
  s.n = values.size();
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = std::clamp(sum / static_cast<double>(values.size()), s.min, s.max);
  return s;
}

// =============================================================================
// Method ranking
// =============================================================================

enum class Reference { rationale, gaze };

inline std::string_view to_string(Reference r) { return r == Reference::rationale ? "rationale" : "gaze"; }

struct AlignmentResult {
  std::string doc_id;
  std::string language;
  std::string model_id;
  Method method = Method::gaze;
  std::int64_t seed = 0;
  Reference reference = Reference::rationale;
  double auc = 0.0;
};

/// Rank 1 goes to the largest value; ties share the average of their ranks.
template <typename Key>
std::map<Key, double> rank_descending(const std::map<Key, double>& values) {
  std::vector<double> neg;
  for (const auto& [k, v] : values) neg.push_back(-v);
  const auto r = metrics::midranks(neg);
  std::map<Key, double> out;
  std::size_t i = 0;
  for (const auto& [k, v] : values) out.emplace(k, r[i++]);
  return out;
}

struct MethodRanking {
  std::string model_id;
  std::string language;
  Reference reference = Reference::rationale;
  std::map<Method, double> mean_auc;
  std::map<Method, std::size_t> n;
  std::map<Method, double> rank;
};

/// Mean AUC per method over documents and seeds, then ranks by mean.
inline MethodRanking rank_methods(std::span<const AlignmentResult> results, const std::string& model_id,
                                  const std::string& language, Reference reference,
                                  std::span<const Method> required = kModelMethods) {
  MethodRanking out{model_id, language, reference, {}, {}, {}};
  std::map<Method, double> sums;
  for (const auto& r : results) {
    if (r.model_id != model_id || r.language != language || r.reference != reference) continue;
    sums[r.method] += r.auc;
    ++out.n[r.method];
  }
  std::vector<std::string> missing;
  for (auto m : required) {
    if (!out.n.count(m)) missing.emplace_back(to_string(m));
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "incomplete ranking for " << model_id << "/" << language << "/" << to_string(reference)
       << ": missing";
    for (const auto& m : missing) os << " " << m;
    throw IncompleteRankingError(os.str());
  }
  for (auto m : required) out.mean_auc[m] = sums[m] / static_cast<double>(out.n[m]);
  out.rank = rank_descending(out.mean_auc);
  return out;
}

struct RankingComparison {
  std::string model_id;
  std::string language;
  std::map<Method, double> ranking_rationale;
  std::map<Method, double> ranking_gaze;
  double r_s = 0.0;
  double p_value = 1.0;
  std::string significance;  // "**" p<=0.01, "*" p<=0.05, "ns"
};

inline std::string significance_tag(double p) {
  if (p <= 0.01) return "**";
  if (p <= 0.05) return "*";
  return "ns";
}

inline RankingComparison compare_rankings(const std::map<Method, double>& rank_rationale,
                                          const std::map<Method, double>& rank_gaze,
                                          std::string model_id = {}, std::string language = {}) {
  std::vector<double> a, b;
  for (const auto& [m, r] : rank_rationale) {
    auto it = rank_gaze.find(m);
    if (it == rank_gaze.end()) {
      throw InputError("compare_rankings: method " + std::string(to_string(m)) +
                       " missing from gaze ranking");
    }
    a.push_back(r);
    b.push_back(it->second);
  }
  if (rank_gaze.size() != rank_rationale.size()) {
    throw InputError("compare_rankings: method sets differ");
  }
  const auto c = metrics::spearman(a, b);
  return {std::move(model_id), std::move(language), rank_rationale, rank_gaze,
          c.coefficient, c.p_value, significance_tag(c.p_value)};
}

// =============================================================================
// Binned analyses
// =============================================================================

enum class BinVariable { answer_rel_pos, text_len, answer_len };

inline std::string_view to_string(BinVariable v) {
  switch (v) {
    case BinVariable::answer_rel_pos: return "answer_rel_pos";
    case BinVariable::text_len: return "text_len";
    case BinVariable::answer_len: return "answer_len";
  }
  return "?";
}

enum class BinRule { quartiles, median_split, explicit_edges };

struct BinSpec {
  BinVariable variable = BinVariable::answer_rel_pos;
  BinRule rule = BinRule::quartiles;
  std::vector<double> edges;  // only for explicit_edges
};

inline BinSpec default_bin_spec(BinVariable v) {
  return {v, v == BinVariable::answer_rel_pos ? BinRule::quartiles : BinRule::median_split, {}};
}

inline double bin_value(const Document& d, BinVariable v) {
  switch (v) {
    case BinVariable::answer_rel_pos:
      return static_cast<double>(d.answer_word_span.start) / static_cast<double>(d.word_count());
    case BinVariable::text_len: return static_cast<double>(d.word_count());
    case BinVariable::answer_len: return static_cast<double>(d.answer_word_span.length());
  }
  return 0.0;
}

struct DocScore {
  std::string doc_id;
  double value = 0.0;
};

struct BinRow {
  std::string label;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
  std::optional<Summary> summary;
  std::vector<std::string> doc_ids;
};

struct BinTable {
  BinVariable variable = BinVariable::answer_rel_pos;
  BinRule rule = BinRule::quartiles;
  std::vector<double> edges;
  std::vector<BinRow> rows;
};

/// Index of the bin holding v: the first bin whose upper edge is >= v, so a
/// value sitting on an edge belongs to the lower bin.
inline std::size_t bin_index(std::span<const double> edges, double v) {
  for (std::size_t i = 1; i + 1 < edges.size(); ++i) {
    if (v <= edges[i]) return i - 1;
  }
  return edges.size() - 2;
}

/// Splits per-document scores by a document property and summarises each bin.
/// Computed edges come from the analysed subset and may repeat when the data
/// has many ties; repeated edges simply produce empty bins.
inline BinTable bin_analysis(std::span<const DocScore> results,
                             const std::map<std::string, Document>& docs, const BinSpec& spec) {
  std::vector<std::pair<double, const DocScore*>> vals;
  for (const auto& r : results) {
    auto it = docs.find(r.doc_id);
    if (it == docs.end()) throw InputError("bin_analysis: unknown doc_id " + r.doc_id);
    vals.emplace_back(bin_value(it->second, spec.variable), &r);
  }
  if (vals.empty()) throw InputError("bin_analysis: no results to bin");
  std::vector<double> sorted;
  for (const auto& [v, r] : vals) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());

  BinTable table{spec.variable, spec.rule, {}, {}};
  std::vector<std::string> labels;
  switch (spec.rule) {
    case BinRule::quartiles:
      table.edges = {sorted.front(), quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5),
                     quantile_sorted(sorted, 0.75), sorted.back()};
      labels = {"Q1", "Q2", "Q3", "Q4"};
      break;
    case BinRule::median_split:
      table.edges = {sorted.front(), quantile_sorted(sorted, 0.5), sorted.back()};
      labels = {"short", "long"};
      break;
    case BinRule::explicit_edges:
      table.edges = spec.edges;
      if (table.edges.size() < 2) throw InputError("bin_analysis: need at least two edges");
      for (std::size_t i = 1; i < table.edges.size(); ++i) {
        if (!(table.edges[i] > table.edges[i - 1])) {
          throw InputError("bin_analysis: edges must be strictly increasing");
        }
      }
      if (sorted.front() < table.edges.front() || sorted.back() > table.edges.back()) {
        throw InputError("bin_analysis: edges do not cover the data range");
      }
      for (std::size_t i = 1; i < table.edges.size(); ++i) {
        std::ostringstream os;
        os << "[" << table.edges[i - 1] << "," << table.edges[i] << "]";
        labels.push_back(os.str());
      }
      break;
  }

  std::vector<std::vector<double>> members(table.edges.size() - 1);
  table.rows.resize(members.size());
  for (const auto& [v, r] : vals) {
    const auto b = bin_index(table.edges, v);
    members[b].push_back(r->value);
    table.rows[b].doc_ids.push_back(r->doc_id);
  }
  for (std::size_t b = 0; b < members.size(); ++b) {
    auto& row = table.rows[b];
    row.label = labels[b];
    row.lower = table.edges[b];
    row.upper = table.edges[b + 1];
    row.n = members[b].size();
    row.summary = summarize(members[b]);
    std::sort(row.doc_ids.begin(), row.doc_ids.end());
  }
  return table;
}

// =============================================================================
// Group comparison
// =============================================================================

enum class GroupBy { group, wears_glasses };

inline std::string_view to_string(GroupBy g) { return g == GroupBy::group ? "group" : "wears_glasses"; }

inline std::string group_label(const TrialRecord& t, GroupBy by) {
  if (by == GroupBy::group) return t.group.value_or("unknown");
  if (!t.wears_glasses) return "unknown";
  return *t.wears_glasses ? "glasses" : "no-glasses";
}

struct GroupSummary {
  std::string label;
  std::size_t n_trials = 0;
  std::size_t n_participants = 0;
  double accuracy_mean = 0.0;
  double accuracy_median = 0.0;
  std::optional<Summary> decoding;  // over documents, patterns averaged within the group
};

/// Per group: WebGazer accuracy statistics over its trials, and the decoding
/// ROC-AUC of each document's pattern averaged over the group's trials.
/// Trials with zero total reading time do not contribute patterns.
inline std::vector<GroupSummary> group_comparison(std::span<const TrialRecord> trials,
                                                  const std::map<std::string, Document>& docs,
                                                  GroupBy by) {
  std::map<std::string, std::vector<const TrialRecord*>> groups;
  for (const auto& t : trials) groups[group_label(t, by)].push_back(&t);

  std::vector<GroupSummary> out;
  for (const auto& [label, members] : groups) {
    GroupSummary g;
    g.label = label;
    g.n_trials = members.size();
    std::set<std::string> people;
    std::vector<double> acc;
    std::map<std::string, std::vector<ReadingPattern>> per_doc;
    for (const auto* t : members) {
      people.insert(t->participant_id);
      acc.push_back(t->webgazer_accuracy);
      if (t->total_trt() > 0.0) per_doc[t->doc_id].push_back(gaze::rfd(*t));
    }
    g.n_participants = people.size();
    double sum = 0.0;
    for (double a : acc) sum += a;
    g.accuracy_mean = sum / static_cast<double>(acc.size());
    g.accuracy_median = median(acc);
    std::vector<double> aucs;
    for (const auto& [doc_id, patterns] : per_doc) {
      auto it = docs.find(doc_id);
      if (it == docs.end()) throw InputError("group_comparison: unknown doc_id " + doc_id);
      const auto avg = gaze::average_patterns(patterns);
      const auto mask = rationale_from_span(it->second);
      if (mask.positives() == mask.mask.size()) continue;  // undefined ROC-AUC
      aucs.push_back(metrics::decode_roc_auc(avg.rfd, mask));
    }
    g.decoding = summarize(std::move(aucs));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gazelign::analysis
