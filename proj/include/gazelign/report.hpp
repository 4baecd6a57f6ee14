#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazelign/analysis.hpp"
#include "gazelign/config.hpp"
#include "gazelign/pipeline.hpp"
#include "gazelign/util.hpp"

namespace gazelign::report {

inline constexpr const char* kSchemaVersion = "1.0.0";
inline constexpr const char* kToolVersion = "0.1.0";

/// A named table: column names plus rows of JSON scalars. Rendered both into
/// report.json (as objects) and as CSV.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;

  json to_json() const {
    json arr = json::array();
    for (const auto& r : rows) {
      json o = json::object();
      for (std::size_t i = 0; i < columns.size(); ++i) o[columns[i]] = r[i];
      arr.push_back(std::move(o));
    }
    return arr;
  }
};

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) {
    std::string s = "\"";
    for (char c : v.get<std::string>()) {
      if (c == '"') s += '"';
      s += c;
    }
    return s + "\"";
  }
  return v.dump();
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_cell(r[i]);
    out += '\n';
  }
  return out;
}

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> c{"n", "min", "q1", "median", "q3", "max", "mean"};
  return c;
}

inline void append_summary(std::vector<json>& row, const std::optional<analysis::Summary>& s) {
  if (!s) {
    row.push_back(0);
    for (int i = 0; i < 6; ++i) row.push_back(nullptr);
    return;
  }
  row.insert(row.end(), {json(s->n), json(s->min), json(s->q1), json(s->median), json(s->q3),
                         json(s->max), json(s->mean)});
}

inline std::vector<std::string> with_summary(std::vector<std::string> cols) {
  cols.insert(cols.end(), summary_columns().begin(), summary_columns().end());
  return cols;
}

// -----------------------------------------------------------------------------
// SVG boxplots
// -----------------------------------------------------------------------------

struct Box {
  std::string label;
  std::optional<analysis::Summary> summary;
};

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Self-contained boxplot: whiskers span min..max, the box q1..q3, a line
/// marks the median and a white dot the mean.
inline std::string boxplot_svg(const std::string& title, const std::vector<Box>& boxes) {
  const double slot = 70.0, left = 60.0, top = 40.0, plot_h = 220.0;
  const double width = left + slot * static_cast<double>(std::max<std::size_t>(boxes.size(), 1)) + 20.0;
  const double height = top + plot_h + 110.0;
  double lo = 0.0, hi = 1.0;
  bool any = false;
  for (const auto& b : boxes) {
    if (!b.summary) continue;
    lo = any ? std::min(lo, b.summary->min) : b.summary->min;
    hi = any ? std::max(hi, b.summary->max) : b.summary->max;
    any = true;
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto y = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
       "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" +
       xml_escape(title) + "</text>\n";
  s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) + "\" y2=\"" +
       fmt(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    s += "<line x1=\"" + fmt(left - 4) + "\" y1=\"" + fmt(y(v)) + "\" x2=\"" + fmt(left) + "\" y2=\"" +
         fmt(y(v)) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(y(v) + 3) + "\" text-anchor=\"end\">" + fmt(v) +
         "</text>\n";
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double bx = cx - slot * 0.3, bw = slot * 0.6;
    if (b.summary) {
      const auto& m = *b.summary;
      s += "<line x1=\"" + fmt(cx) + "\" y1=\"" + fmt(y(m.max)) + "\" x2=\"" + fmt(cx) + "\" y2=\"" +
           fmt(y(m.min)) + "\" stroke=\"black\"/>\n";
      s += "<rect x=\"" + fmt(bx) + "\" y=\"" + fmt(y(m.q3)) + "\" width=\"" + fmt(bw) + "\" height=\"" +
           fmt(std::max(0.0, y(m.q1) - y(m.q3))) + "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
      s += "<line x1=\"" + fmt(bx) + "\" y1=\"" + fmt(y(m.median)) + "\" x2=\"" + fmt(bx + bw) + "\" y2=\"" +
           fmt(y(m.median)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
      s += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(y(m.mean)) +
           "\" r=\"3\" fill=\"white\" stroke=\"black\"/>\n";
    }
    s += "<text transform=\"translate(" + fmt(cx) + "," + fmt(top + plot_h + 12) +
         ") rotate(40)\" text-anchor=\"start\">" + xml_escape(b.label) + " (n=" +
         std::to_string(b.summary ? b.summary->n : 0) + ")</text>\n";
  }
  s += "</svg>\n";
  return s;
}

// -----------------------------------------------------------------------------
// Report assembly
// -----------------------------------------------------------------------------

struct Output {
  json report;
  std::vector<Table> tables;
  std::vector<std::pair<std::string, std::string>> plots;  // file name, svg
  Table exclusions;
};

inline json summary_json(const std::optional<analysis::Summary>& s) {
  if (!s) return nullptr;
  return json{{"n", s->n}, {"min", s->min}, {"q1", s->q1}, {"median", s->median},
              {"q3", s->q3}, {"max", s->max}, {"mean", s->mean}};
}

/// Builds every table, plot and the report document from analysis results.
inline Output assemble(const Analyses& a, const RunConfig& cfg) {
  Output out;
  std::vector<std::string> sections;

  out.exclusions = {"exclusions", {"participant_id", "doc_id", "reason"}, {}};
  for (const auto& e : a.exclusions) out.exclusions.rows.push_back({e.participant_id, e.doc_id, e.reason});

  const bool has_gaze = !a.gaze_docs.empty();
  if ((a.sections & kGazeStats) && has_gaze) {
    sections.push_back("gaze_stats");
    Table docs{"gaze_doc_stats",
               {"stage", "language", "doc_id", "entropy", "total_trt_ms", "n_participants", "decoding_auc"},
               {}};
    std::map<std::pair<std::string, std::string>, std::vector<double>> entropy;
    for (const auto& s : a.gaze_docs) {
      docs.rows.push_back({s.stage, s.language, s.doc_id, s.entropy, s.total_trt_ms, s.n_participants,
                           s.decoding_auc ? json(*s.decoding_auc) : json(nullptr)});
      entropy[{s.stage, s.language}].push_back(s.entropy);
    }
    out.tables.push_back(std::move(docs));

    Table ent{"gaze_entropy_summary", with_summary({"stage", "language"}), {}};
    std::vector<Box> boxes;
    for (const auto& [key, vals] : entropy) {
      std::vector<json> row{key.first, key.second};
      auto s = analysis::summarize(vals);
      append_summary(row, s);
      ent.rows.push_back(std::move(row));
      boxes.push_back({key.second + " " + key.first, s});
    }
    out.tables.push_back(std::move(ent));
    out.plots.emplace_back("gaze_entropy.svg", boxplot_svg("Gaze entropy by language and filter", boxes));

    Table corr{"gaze_correlations", {"language", "analysis", "method", "n", "coefficient", "p_value", "note"}, {}};
    for (const auto& c : a.correlations) {
      corr.rows.push_back({c.language, c.analysis, "spearman", c.n,
                           c.result ? json(c.result->coefficient) : json(nullptr),
                           c.result ? json(c.result->p_value) : json(nullptr), c.note});
    }
    out.tables.push_back(std::move(corr));
  }

  if (a.sections & kDecoding) {
    sections.push_back("decoding");
    Table rows{"decoding_rows", {"model_id", "method", "seed", "language", "doc_id", "roc_auc"}, {}};
    for (const auto& r : a.decoding_rows) {
      rows.rows.push_back({r.model_id, std::string(to_string(r.method)), r.seed, r.language, r.doc_id, r.auc});
    }
    out.tables.push_back(std::move(rows));

    Table per_doc{"decoding_docs", {"source", "stage", "language", "doc_id", "roc_auc"}, {}};
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
    for (const auto& d : a.decoding) {
      per_doc.rows.push_back({d.source, d.stage, d.language, d.doc_id, d.roc_auc});
      groups[{d.source, d.stage, d.language}].push_back(d.roc_auc);
    }
    out.tables.push_back(std::move(per_doc));

    Table summary{"decoding_summary", with_summary({"source", "stage", "language"}), {}};
    std::vector<Box> gaze_boxes, model_boxes;
    for (const auto& [key, vals] : groups) {
      const auto& [source, stage, lang] = key;
      std::vector<json> row{source, stage, lang};
      auto s = analysis::summarize(vals);
      append_summary(row, s);
      summary.rows.push_back(std::move(row));
      if (source == "gaze") {
        gaze_boxes.push_back({lang + " " + stage, s});
      } else {
        model_boxes.push_back({source + " " + lang, s});
      }
    }
    out.tables.push_back(std::move(summary));
    if (!gaze_boxes.empty()) {
      out.plots.emplace_back("decoding_gaze.svg", boxplot_svg("Gaze decoding ROC-AUC", gaze_boxes));
    }
    if (!model_boxes.empty()) {
      out.plots.emplace_back("decoding_models.svg", boxplot_svg("Model decoding ROC-AUC", model_boxes));
    }
  }

  if (a.sections & kAlignment) {
    sections.push_back("alignment");
    Table rows{"alignment_rows", {"model_id", "method", "seed", "reference", "language", "doc_id", "auc"}, {}};
    std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> groups;
    for (const auto& r : a.alignment) {
      const std::string method(to_string(r.method));
      const std::string ref(analysis::to_string(r.reference));
      rows.rows.push_back({r.model_id, method, r.seed, ref, r.language, r.doc_id, r.auc});
      groups[{r.model_id, method, ref, r.language}].push_back(r.auc);
    }
    out.tables.push_back(std::move(rows));
    Table summary{"alignment_summary", with_summary({"model_id", "method", "reference", "language"}), {}};
    std::vector<Box> boxes;
    for (const auto& [key, vals] : groups) {
      const auto& [model, method, ref, lang] = key;
      std::vector<json> row{model, method, ref, lang};
      auto s = analysis::summarize(vals);
      append_summary(row, s);
      summary.rows.push_back(std::move(row));
      boxes.push_back({model + " " + method + " " + ref + " " + lang, s});
    }
    out.tables.push_back(std::move(summary));
    if (!boxes.empty()) out.plots.emplace_back("alignment_auc.svg", boxplot_svg("Alignment AUC", boxes));
  }

  if (a.sections & kRanking) {
    sections.push_back("ranking");
    Table ranks{"rankings", {"model_id", "language", "reference", "method", "n", "mean_auc", "rank"}, {}};
    for (const auto& r : a.rankings) {
      for (const auto& [m, rank] : r.rank) {
        ranks.rows.push_back({r.model_id, r.language, std::string(analysis::to_string(r.reference)),
                              std::string(to_string(m)), r.n.at(m), r.mean_auc.at(m), rank});
      }
    }
    out.tables.push_back(std::move(ranks));
    Table cmp{"ranking_comparisons", {"model_id", "language", "n_methods", "r_s", "p_value", "significance"}, {}};
    for (const auto& c : a.comparisons) {
      cmp.rows.push_back({c.model_id, c.language, c.ranking_rationale.size(), c.r_s, c.p_value, c.significance});
    }
    out.tables.push_back(std::move(cmp));
  }

  if ((a.sections & kBins) && !a.bins.empty()) {
    sections.push_back("bins");
    Table bins{"bins", with_summary({"language", "source", "variable", "rule", "bin", "label", "lower", "upper"}), {}};
    for (const auto& b : a.bins) {
      const std::string rule = b.table.rule == analysis::BinRule::quartiles      ? "quartiles"
                               : b.table.rule == analysis::BinRule::median_split ? "median-split"
                                                                                  : "explicit";
      std::vector<Box> boxes;
      for (std::size_t i = 0; i < b.table.rows.size(); ++i) {
        const auto& r = b.table.rows[i];
        std::vector<json> row{b.language, b.source, std::string(analysis::to_string(b.table.variable)),
                              rule, i + 1, r.label, r.lower, r.upper};
        append_summary(row, r.summary);
        bins.rows.push_back(std::move(row));
        boxes.push_back({r.label + " <= " + fmt(r.upper), r.summary});
      }
      if (b.source == "gaze") {
        const std::string var(analysis::to_string(b.table.variable));
        out.plots.emplace_back("bins_" + b.language + "_" + var + ".svg",
                               boxplot_svg("Gaze decoding by " + var + " (" + b.language + ")", boxes));
      }
    }
    out.tables.push_back(std::move(bins));
  }

  if ((a.sections & kGroups) && !a.groups.empty()) {
    sections.push_back("groups");
    Table groups{"groups",
                 with_summary({"stage", "group_by", "group", "n_trials", "n_participants", "webgazer_accuracy_mean",
                               "webgazer_accuracy_median"}),
                 {}};
    for (const auto& g : a.groups) {
      std::vector<Box> boxes;
      for (const auto& s : g.groups) {
        std::vector<json> row{g.stage, std::string(analysis::to_string(g.by)), s.label, s.n_trials,
                              s.n_participants, s.accuracy_mean, s.accuracy_median};
        append_summary(row, s.decoding);
        groups.rows.push_back(std::move(row));
        boxes.push_back({s.label, s.decoding});
      }
      out.plots.emplace_back("groups_" + g.stage + "_" + std::string(analysis::to_string(g.by)) + ".svg",
                             boxplot_svg("Gaze decoding by " + std::string(analysis::to_string(g.by)) +
                                             " (" + g.stage + ")",
                                         boxes));
    }
    out.tables.push_back(std::move(groups));
  }

  json omitted = json::array();
  for (const auto& [section, reason] : a.omitted) omitted.push_back({{"section", section}, {"reason", reason}});
  if ((a.sections & kGazeStats) && !has_gaze && a.omitted.empty()) {
    omitted.push_back({{"section", "gaze"}, {"reason", "no gaze patterns survived"}});
  }

  const auto settings = analysis_settings_json(cfg);
  json meta;
  meta["tool"] = "gazelign";
  meta["tool_version"] = kToolVersion;
  meta["settings"] = settings;
  meta["config_hash"] = sha256_hex(settings.dump());
  meta["dataset_hash"] = a.dataset_hash;
  meta["sections"] = sections;
  meta["omitted"] = std::move(omitted);
  meta["warnings"] = a.warnings;
  meta["counts"] = a.counts;
  meta["filter_stages"] = filter_stages();
  meta["conventions"] = {
      {"entropy_base", cfg.entropy_base},
      {"roc_auc", "Mann-Whitney U with midranks; ties count one half"},
      {"alignment_auc", "trapezoid over (k/T, E_k/E_T), k=0..T, words by descending score"},
      {"alignment_tie_break", settings["alignment_tie_break"]},
      {"quantiles", "linear interpolation between order statistics"},
      {"median", "midpoint of the two central values for even counts"},
      {"bins", "edges from analysed subset; values on an edge go to the lower bin"},
      {"ranking", "mean AUC over documents and seeds, descending, average ranks for ties"},
      {"spearman_p", "two-sided; exact enumeration for n <= 8, t approximation above"},
      {"significance", "** p<=0.01, * p<=0.05, ns otherwise"},
      {"tolerances", {{"rfd_sum", metrics::kPatternSumTolerance}, {"attention_row_sum", attention::kRowSumTolerance}}},
  };

  json tables = json::object();
  for (const auto& t : out.tables) tables[t.name] = t.to_json();
  tables[out.exclusions.name] = out.exclusions.to_json();
  out.report = {{"schema_version", kSchemaVersion}, {"metadata", std::move(meta)}, {"tables", std::move(tables)}};
  return out;
}

inline void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << content;
  if (!f) throw IoError("error writing " + path.string());
}

/// Writes report.json, tables/*.csv, plots/*.svg and exclusions.csv.
/// Returns the report document.
inline json build_report(const Analyses& a, const RunConfig& cfg, const fs::path& out_dir) {
  if (a.sections == 0) throw InputError("build_report: no analysis ran");
  auto out = assemble(a, cfg);
  write_text(out_dir / "report.json", out.report.dump(2) + "\n");
  for (const auto& t : out.tables) write_text(out_dir / "tables" / (t.name + ".csv"), to_csv(t));
  for (const auto& [name, svg] : out.plots) write_text(out_dir / "plots" / name, svg);
  write_text(out_dir / "exclusions.csv", to_csv(out.exclusions));
  return out.report;
}

struct RunResult {
  std::vector<Violation> violations;
  std::optional<json> report;
};

/// Validates the dataset, runs the analyses and writes all outputs plus a
/// run-manifest.json. Stops before analysing when the dataset has violations.
inline RunResult run(const RunConfig& cfg, unsigned sections) {
  RunResult result;
  auto ds = load_dataset(cfg.dataset_dir, {cfg.subword_agg, true});
  if (!ds.violations.empty()) {
    result.violations = std::move(ds.violations);
    return result;
  }
  std::map<std::string, std::string> file_hashes;
  auto analyses = run_analyses(ds, cfg, sections);
  analyses.dataset_hash = detail::dataset_digest(cfg.dataset_dir, &file_hashes);
  for (const auto& w : analyses.warnings) log_warn("analysis-warning", w);
  result.report = build_report(analyses, cfg, cfg.out_dir);

  json manifest;
  manifest["config"] = to_json(cfg);
  manifest["sections"] = sections;
  manifest["dataset_hash"] = analyses.dataset_hash;
  manifest["inputs"] = file_hashes;
  manifest["report_sha256"] = sha256_hex(result.report->dump(2) + "\n");
  write_text(cfg.out_dir / "run-manifest.json", manifest.dump(2) + "\n");
  return result;
}

}  // namespace gazelign::report
