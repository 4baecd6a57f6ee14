#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "gazelign/analysis.hpp"
#include "gazelign/attention.hpp"
#include "gazelign/config.hpp"
#include "gazelign/dataset.hpp"
#include "gazelign/gaze.hpp"
#include "gazelign/metrics.hpp"
#include "gazelign/util.hpp"

namespace gazelign {

enum Section : unsigned {
  kGazeStats = 1u << 0,
  kDecoding = 1u << 1,
  kAlignment = 1u << 2,
  kRanking = 1u << 3,
  kBins = 1u << 4,
  kGroups = 1u << 5,
  kAllSections = 0x3f,
};

/// Gaze filter stages reported side by side: no filter, quality threshold
/// only, and the full configured policy.
inline const std::vector<std::string>& filter_stages() {
  static const std::vector<std::string> s{"none", "quality", "policy"};
  return s;
}

struct GazeDocStats {
  std::string stage;
  std::string doc_id;
  std::string language;
  double entropy = 0.0;
  double total_trt_ms = 0.0;  // mean over contributing participants
  std::size_t n_participants = 0;
  std::optional<double> decoding_auc;
};

struct CorrelationRow {
  std::string language;
  std::string analysis;  // "trt_vs_correct" (per trial) or "entropy_vs_accuracy" (per document)
  std::size_t n = 0;
  std::optional<metrics::CorrelationResult> result;
  std::string note;
};

/// Decoding ROC-AUC for one explanation of one document.
struct DecodingRow {
  std::string model_id;
  Method method = Method::gaze;
  std::int64_t seed = 0;
  std::string doc_id;
  std::string language;
  double auc = 0.0;
};

/// Per-document decoding result, averaged over seeds for model sources.
struct DecodingResult {
  std::string source;  // "gaze" or "<model>/<method>"
  std::string stage;   // gaze filter stage, "f1" for model sources
  std::string doc_id;
  std::string language;
  double roc_auc = 0.0;
};

struct BinResult {
  std::string language;
  std::string source;
  analysis::BinTable table;
};

struct GroupResult {
  std::string stage;
  analysis::GroupBy by = analysis::GroupBy::group;
  std::vector<analysis::GroupSummary> groups;
};

struct Analyses {
  unsigned sections = 0;
  std::string dataset_hash;
  std::vector<gaze::Exclusion> exclusions;
  std::vector<GazeDocStats> gaze_docs;
  std::vector<CorrelationRow> correlations;
  std::vector<DecodingRow> decoding_rows;
  std::vector<DecodingResult> decoding;
  std::vector<analysis::AlignmentResult> alignment;
  std::vector<analysis::MethodRanking> rankings;
  std::vector<analysis::RankingComparison> comparisons;
  std::vector<BinResult> bins;
  std::vector<GroupResult> groups;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> omitted;  // section, reason
  std::map<std::string, std::size_t> counts;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline bool selected(const std::vector<std::string>& filter, const std::string& v) {
  return filter.empty() || std::find(filter.begin(), filter.end(), v) != filter.end();
}

inline bool selected(const std::vector<std::int64_t>& filter, std::int64_t v) {
  return filter.empty() || std::find(filter.begin(), filter.end(), v) != filter.end();
}

/// Record-order independent digest of a dataset tree: JSONL lines are sorted
/// before hashing.
inline std::string dataset_digest(const fs::path& root, std::map<std::string, std::string>* per_file) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& f : files) {
    const auto rel = fs::relative(f, root).generic_string();
    const auto content = read_file(f);
    if (per_file) (*per_file)[rel] = sha256_hex(content);
    if (f.extension() == ".jsonl") {
      std::vector<std::string> lines;
      std::istringstream in(content);
      for (std::string l; std::getline(in, l);) {
        if (!trim(l).empty()) lines.push_back(trim(l));
      }
      std::sort(lines.begin(), lines.end());
      std::string joined;
      for (const auto& l : lines) joined += l + '\n';
      entries.emplace_back(rel, sha256_hex(joined));
    } else {
      entries.emplace_back(rel, sha256_hex(content));
    }
  }
  std::sort(entries.begin(), entries.end());
  std::string all;
  for (const auto& [rel, h] : entries) all += rel + '\0' + h + '\n';
  return sha256_hex(all);
}

}  // namespace detail

inline std::string source_name(const std::string& model, Method m) {
  return model + "/" + std::string(to_string(m));
}

/// Averaged reading pattern per document for a set of trials. Trials with
/// zero total reading time are skipped; documents without any surviving
/// trial are absent from the result.
inline std::map<std::string, std::pair<ReadingPattern, std::vector<const TrialRecord*>>>
averaged_patterns(std::span<const TrialRecord> trials, std::vector<std::string>* warnings = nullptr) {
  std::map<std::string, std::vector<const TrialRecord*>> by_doc;
  for (const auto& t : trials) {
    if (t.total_trt() > 0.0) {
      by_doc[t.doc_id].push_back(&t);
    } else if (warnings) {
      warnings->push_back("empty-pattern participant_id=" + t.participant_id + " doc_id=" + t.doc_id);
    }
  }
  std::map<std::string, std::pair<ReadingPattern, std::vector<const TrialRecord*>>> out;
  for (auto& [doc_id, members] : by_doc) {
    std::vector<ReadingPattern> patterns;
    for (const auto* t : members) patterns.push_back(gaze::rfd(*t));
    out.emplace(doc_id, std::make_pair(gaze::average_patterns(patterns), std::move(members)));
  }
  return out;
}

/// Runs the requested analyses over a loaded dataset.
inline Analyses run_analyses(const Dataset& ds, const RunConfig& cfg, unsigned sections) {
  Analyses out;
  out.sections = sections;
  const bool need_decoding = sections & (kDecoding | kBins);
  const bool need_alignment = sections & (kAlignment | kRanking);
  const bool need_models = need_decoding || need_alignment;

  // Documents in scope.
  std::map<std::string, Document> docs;
  std::map<std::string, RationaleMask> masks;
  for (const auto& [id, d] : ds.documents) {
    if (!detail::selected(cfg.languages, d.language)) continue;
    docs.emplace(id, d);
    masks.emplace(id, rationale_from_span(d));
  }
  out.counts["documents"] = docs.size();
  std::vector<TrialRecord> trials;
  for (const auto& t : ds.trials) {
    if (docs.count(t.doc_id)) trials.push_back(t);
  }
  out.counts["trials"] = trials.size();

  // ---------------------------------------------------------------- gaze
  std::map<std::string, std::vector<TrialRecord>> stage_trials;
  {
    gaze::FilterPolicy quality = cfg.filter;
    quality.drop_wrong_answers = false;
    stage_trials["none"] = trials;
    stage_trials["quality"] = gaze::apply_filter(trials, quality).retained;
    auto policy = gaze::apply_filter(trials, cfg.filter);
    stage_trials["policy"] = std::move(policy.retained);
    out.exclusions = std::move(policy.exclusions);
    std::sort(out.exclusions.begin(), out.exclusions.end(), [](const auto& a, const auto& b) {
      return std::tie(a.participant_id, a.doc_id) < std::tie(b.participant_id, b.doc_id);
    });
  }
  out.counts["trials_retained"] = stage_trials["policy"].size();

  std::map<std::string, ReadingPattern> policy_patterns;
  std::map<std::string, ReadingPattern> unfiltered_patterns;
  if (!trials.empty()) {
    for (const auto& stage : filter_stages()) {
      std::vector<std::string> stage_warnings;
      auto averaged = averaged_patterns(stage_trials[stage], stage == "policy" ? &stage_warnings : nullptr);
      for (auto& w : stage_warnings) out.warnings.push_back(std::move(w));
      for (const auto& [doc_id, doc] : docs) {
        auto it = averaged.find(doc_id);
        if (it == averaged.end()) {
          if (stage == "policy") out.warnings.push_back("doc-dropped doc_id=" + doc_id + " reason=no-trials-after-filter");
          continue;
        }
        const auto& [pattern, members] = it->second;
        GazeDocStats s{stage, doc_id, doc.language, metrics::entropy(pattern, cfg.entropy_base), 0.0,
                       members.size(), std::nullopt};
        for (const auto* t : members) s.total_trt_ms += t->total_trt();
        s.total_trt_ms /= static_cast<double>(members.size());
        const auto& mask = masks.at(doc_id);
        if (mask.positives() < mask.mask.size()) s.decoding_auc = metrics::decode_roc_auc(pattern.rfd, mask);
        out.gaze_docs.push_back(std::move(s));
        if (stage == "policy") policy_patterns.emplace(doc_id, pattern);
        if (stage == "none") unfiltered_patterns.emplace(doc_id, pattern);
      }
    }
  } else if (sections & (kGazeStats | kGroups)) {
    out.omitted.emplace_back("gaze", "dataset has no trials");
  }

  if ((sections & kGazeStats) && !trials.empty()) {
    std::set<std::string> languages;
    for (const auto& [id, d] : docs) languages.insert(d.language);
    for (const auto& lang : languages) {
      // Longer total reading vs answering correctly, one point per trial.
      {
        std::vector<double> x, y;
        for (const auto& t : trials) {
          if (docs.at(t.doc_id).language != lang) continue;
          x.push_back(t.total_trt());
          y.push_back(t.answer_correct ? 1.0 : 0.0);
        }
        CorrelationRow row{lang, "trt_vs_correct", x.size(), std::nullopt, {}};
        try {
          row.result = metrics::spearman(x, y);
        } catch (const Error& e) {
          row.note = e.what();
        }
        out.correlations.push_back(std::move(row));
      }
      // Entropy of the averaged pattern vs share of correct answers, one point per document.
      {
        std::vector<double> x, y;
        for (const auto& [doc_id, pattern] : unfiltered_patterns) {
          if (docs.at(doc_id).language != lang) continue;
          double correct = 0.0, n = 0.0;
          for (const auto& t : trials) {
            if (t.doc_id != doc_id) continue;
            n += 1.0;
            correct += t.answer_correct ? 1.0 : 0.0;
          }
          x.push_back(metrics::entropy(pattern, cfg.entropy_base));
          y.push_back(correct / n);
        }
        CorrelationRow row{lang, "entropy_vs_accuracy", x.size(), std::nullopt, {}};
        try {
          row.result = metrics::spearman(x, y);
        } catch (const Error& e) {
          row.note = e.what();
        }
        out.correlations.push_back(std::move(row));
      }
    }
  }

  if ((sections & kGroups) && !trials.empty()) {
    for (const auto& stage : {std::string("none"), std::string("policy")}) {
      for (auto by : {analysis::GroupBy::group, analysis::GroupBy::wears_glasses}) {
        const auto& st = stage_trials[stage];
        if (st.empty()) continue;
        out.groups.push_back({stage, by, analysis::group_comparison(st, docs, by)});
      }
    }
  }

  // --------------------------------------------------------- model maps
  std::vector<SaliencyMap> maps;
  if (need_models) {
    for (const auto& m : ds.saliency) {
      if (docs.count(m.doc_id) && detail::selected(cfg.models, m.model_id) &&
          detail::selected(cfg.seeds, m.seed)) {
        maps.push_back(m);
      }
    }
    std::vector<fs::path> attn_files;
    for (const auto& f : ds.attention_files) {
      if (detail::selected(cfg.models, f.parent_path().filename().string()) &&
          docs.count(f.stem().string())) {
        attn_files.push_back(f);
      }
    }
    attention::SaliencyOptions opt{cfg.rollout_residual, cfg.rollout_upto, cfg.token_readout, cfg.subword_agg};
    std::vector<std::vector<SaliencyMap>> derived(attn_files.size());
    parallel_for(attn_files.size(), cfg.jobs, [&](std::size_t i) {
      const auto stack = load_attention(attn_files[i]);
      if (auto err = attention::check(stack); !err.empty()) {
        throw InputError(attn_files[i].string() + ": " + err);
      }
      if (!detail::selected(cfg.seeds, stack.seed)) return;
      const auto wc = docs.at(stack.doc_id).word_count();
      for (auto method : {Method::first_attn, Method::last_attn, Method::rollout}) {
        derived[i].push_back(attention::attention_saliency(stack, method, wc, opt));
      }
    });
    std::set<std::tuple<std::string, Method, std::int64_t, std::string>> seen;
    for (const auto& m : maps) seen.insert({m.model_id, m.method, m.seed, m.doc_id});
    for (auto& group : derived) {
      for (auto& m : group) {
        if (!seen.insert({m.model_id, m.method, m.seed, m.doc_id}).second) {
          out.warnings.push_back("duplicate-saliency model=" + m.model_id + " method=" +
                                 std::string(to_string(m.method)) + " doc_id=" + m.doc_id);
          continue;
        }
        maps.push_back(std::move(m));
      }
    }

    // Model samples whose QA answer scored below the F1 threshold are dropped.
    std::set<std::tuple<std::string, std::int64_t, std::string>> low_f1;
    for (const auto& p : ds.predictions) {
      if (p.f1 < cfg.filter.min_f1) low_f1.insert({p.model_id, p.seed, p.doc_id});
    }
    const auto before = maps.size();
    std::erase_if(maps, [&](const SaliencyMap& m) { return low_f1.count({m.model_id, m.seed, m.doc_id}) > 0; });
    out.counts["saliency_maps"] = maps.size();
    out.counts["saliency_maps_below_f1"] = before - maps.size();
    std::sort(maps.begin(), maps.end(), [](const auto& a, const auto& b) {
      return std::tie(a.model_id, a.method, a.seed, a.doc_id) < std::tie(b.model_id, b.method, b.seed, b.doc_id);
    });
    if (maps.empty()) out.omitted.emplace_back("models", "no model explanations in scope");
  }

  // ------------------------------------------------------------ decoding
  if (need_decoding) {
    for (const auto& s : out.gaze_docs) {
      if (s.decoding_auc) out.decoding.push_back({"gaze", s.stage, s.doc_id, s.language, *s.decoding_auc});
    }
    std::vector<std::optional<DecodingRow>> rows(maps.size());
    parallel_for(maps.size(), cfg.jobs, [&](std::size_t i) {
      const auto& m = maps[i];
      const auto& mask = masks.at(m.doc_id);
      if (mask.positives() == mask.mask.size()) return;
      rows[i] = DecodingRow{m.model_id, m.method, m.seed, m.doc_id, docs.at(m.doc_id).language,
                            metrics::decode_roc_auc(m.scores, mask)};
    });
    std::map<std::tuple<std::string, Method, std::string>, std::pair<double, std::size_t>> per_doc;
    for (auto& r : rows) {
      if (!r) continue;
      auto& acc = per_doc[{r->model_id, r->method, r->doc_id}];
      acc.first += r->auc;
      ++acc.second;
      out.decoding_rows.push_back(std::move(*r));
    }
    for (const auto& [key, acc] : per_doc) {
      const auto& [model, method, doc_id] = key;
      out.decoding.push_back({source_name(model, method), "f1", doc_id, docs.at(doc_id).language,
                              acc.first / static_cast<double>(acc.second)});
    }
  }

  // ----------------------------------------------------------- alignment
  if (need_alignment) {
    std::vector<std::vector<analysis::AlignmentResult>> rows(maps.size());
    parallel_for(maps.size(), cfg.jobs, [&](std::size_t i) {
      const auto& m = maps[i];
      const auto& lang = docs.at(m.doc_id).language;
      const auto tie_seed = cfg.tie_seed ^ detail::fnv1a(m.model_id + "|" + std::string(to_string(m.method)) +
                                                         "|" + std::to_string(m.seed) + "|" + m.doc_id);
      const auto& mask = masks.at(m.doc_id).mask;
      std::vector<double> evidence(mask.begin(), mask.end());
      rows[i].push_back({m.doc_id, lang, m.model_id, m.method, m.seed, analysis::Reference::rationale,
                         metrics::alignment_auc(m.scores, evidence, cfg.alignment_tie_break, tie_seed)});
      if (auto it = policy_patterns.find(m.doc_id); it != policy_patterns.end()) {
        rows[i].push_back({m.doc_id, lang, m.model_id, m.method, m.seed, analysis::Reference::gaze,
                           metrics::alignment_auc(m.scores, it->second.rfd, cfg.alignment_tie_break, tie_seed)});
      }
    });
    for (auto& r : rows) {
      for (auto& x : r) out.alignment.push_back(std::move(x));
    }
  }

  // -------------------------------------------------------------- ranking
  if (sections & kRanking) {
    std::set<std::pair<std::string, std::string>> units;
    for (const auto& r : out.alignment) units.insert({r.model_id, r.language});
    for (const auto& [model, lang] : units) {
      std::map<analysis::Reference, analysis::MethodRanking> by_ref;
      for (auto ref : {analysis::Reference::rationale, analysis::Reference::gaze}) {
        try {
          by_ref.emplace(ref, analysis::rank_methods(out.alignment, model, lang, ref));
          out.rankings.push_back(by_ref.at(ref));
        } catch (const IncompleteRankingError& e) {
          out.warnings.push_back(std::string("incomplete-ranking ") + e.what());
        }
      }
      if (by_ref.size() == 2) {
        try {
          out.comparisons.push_back(analysis::compare_rankings(by_ref.at(analysis::Reference::rationale).rank,
                                                               by_ref.at(analysis::Reference::gaze).rank, model, lang));
        } catch (const Error& e) {
          out.warnings.push_back("ranking-comparison model=" + model + " language=" + lang + " " + e.what());
        }
      }
    }
  }

  // ----------------------------------------------------------------- bins
  if (sections & kBins) {
    std::map<std::pair<std::string, std::string>, std::vector<analysis::DocScore>> by_source;
    for (const auto& d : out.decoding) {
      if (d.source == "gaze" && d.stage != "policy") continue;
      by_source[{d.language, d.source}].push_back({d.doc_id, d.roc_auc});
    }
    for (const auto& [key, scores] : by_source) {
      const auto& [lang, source] = key;
      const bool is_gaze = source == "gaze";
      for (auto var : {analysis::BinVariable::answer_rel_pos, analysis::BinVariable::text_len,
                       analysis::BinVariable::answer_len}) {
        if (!is_gaze && var != analysis::BinVariable::answer_len) continue;
        out.bins.push_back({lang, source, analysis::bin_analysis(scores, docs, analysis::default_bin_spec(var))});
      }
    }
  }

  std::sort(out.warnings.begin(), out.warnings.end());
  out.warnings.erase(std::unique(out.warnings.begin(), out.warnings.end()), out.warnings.end());
  return out;
}

}  // namespace gazelign
