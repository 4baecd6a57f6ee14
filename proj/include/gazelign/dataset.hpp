#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazelign/attention.hpp"
#include "gazelign/core.hpp"

namespace gazelign {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// One problem found in a dataset directory.
struct Violation {
  std::string file;  // relative to the dataset root
  std::size_t line = 0;  // 1-based, 0 when not line-specific
  std::string message;

  auto key() const { return std::tie(file, line, message); }
  friend bool operator<(const Violation& a, const Violation& b) { return a.key() < b.key(); }
  friend bool operator==(const Violation& a, const Violation& b) { return a.key() == b.key(); }

  std::string str() const {
    std::ostringstream os;
    os << file;
    if (line) os << ":" << line;
    os << ": " << message;
    return os.str();
  }
};

/// Everything under a dataset directory except attention tensors, which are
/// loaded on demand. All collections are kept in canonical id order so that
/// record order inside input files never matters.
struct Dataset {
  fs::path root;
  std::map<std::string, Document> documents;
  std::vector<TrialRecord> trials;  // sorted by (doc_id, participant_id)
  std::map<std::string, std::map<std::string, AlignmentMap>> alignments;  // model -> doc -> map
  std::vector<SaliencyMap> saliency;  // word-level, sorted by (model, method, seed, doc)
  std::vector<Prediction> predictions;  // sorted by (model, seed, doc)
  std::vector<fs::path> attention_files;  // sorted by relative path
  std::vector<Violation> violations;  // sorted

  const Document* find_document(const std::string& id) const {
    auto it = documents.find(id);
    return it == documents.end() ? nullptr : &it->second;
  }
};

struct LoadOptions {
  SubwordAgg aggregation = SubwordAgg::sum;
  /// Parse and check every attention tensor (slow on large exports).
  bool check_attention = true;
};

namespace detail {

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

inline const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw SchemaError(std::string("missing field '") + name + "'");
  return *it;
}

inline std::string get_string(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_string()) throw SchemaError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

inline double get_number(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number()) throw SchemaError(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

inline std::size_t get_index(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw SchemaError(what + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline bool get_bool(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_boolean()) throw SchemaError(std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

inline std::vector<double> get_numbers(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_array()) throw SchemaError(std::string("field '") + name + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw SchemaError(std::string("field '") + name + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::vector<std::string> get_strings(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_array()) throw SchemaError(std::string("field '") + name + "' must be an array");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) throw SchemaError(std::string("field '") + name + "' must hold strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

inline std::vector<std::optional<std::size_t>> get_word_ids(const json& obj) {
  const auto& v = field(obj, "word_ids");
  if (!v.is_array()) throw SchemaError("field 'word_ids' must be an array");
  std::vector<std::optional<std::size_t>> out;
  for (const auto& x : v) {
    if (x.is_null()) {
      out.emplace_back();
    } else {
      out.emplace_back(get_index(x, "word_ids entry"));
    }
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw IoError("not a readable file: " + p.string());
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + p.string());
  return ss.str();
}

/// Calls fn(json, line_number) for every non-blank line. Parse failures are
/// recorded as violations.
template <typename Fn>
void for_each_jsonl(const fs::path& path, const std::string& rel, std::vector<Violation>& out,
                    Fn&& fn) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      out.push_back({rel, n, std::string("malformed JSON: ") + e.what()});
      continue;
    }
    if (!obj.is_object()) {
      out.push_back({rel, n, "record is not a JSON object"});
      continue;
    }
    try {
      fn(obj, n);
    } catch (const InputError& e) {
      out.push_back({rel, n, e.what()});
    } catch (const json::exception& e) {
      out.push_back({rel, n, e.what()});
    }
  }
}

inline std::string rel_path(const fs::path& root, const fs::path& p) {
  return fs::relative(p, root).generic_string();
}

inline std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline Document parse_document(const json& o) {
  using namespace detail;
  Document d;
  d.doc_id = get_string(o, "doc_id");
  d.language = get_string(o, "language");
  d.set_id = o.contains("set_id") ? get_string(o, "set_id") : std::string{};
  d.words = get_strings(o, "words");
  d.question = get_string(o, "question");
  const auto& span = field(o, "answer_word_span");
  if (!span.is_array() || span.size() != 2) {
    throw SchemaError("field 'answer_word_span' must be [start, end)");
  }
  d.answer_word_span = {get_index(span[0], "span start"), get_index(span[1], "span end")};
  d.answer_text = get_string(o, "answer_text");
  return d;
}

inline json to_json(const Document& d) {
  return json{{"doc_id", d.doc_id},
              {"language", d.language},
              {"set_id", d.set_id},
              {"words", d.words},
              {"question", d.question},
              {"answer_word_span", {d.answer_word_span.start, d.answer_word_span.end}},
              {"answer_text", d.answer_text}};
}

inline TrialRecord parse_trial(const json& o) {
  using namespace detail;
  TrialRecord t;
  t.participant_id = get_string(o, "participant_id");
  t.doc_id = get_string(o, "doc_id");
  t.trt_ms = get_numbers(o, "trt_ms");
  t.webgazer_accuracy = get_number(o, "webgazer_accuracy");
  t.answer_correct = get_bool(o, "answer_correct");
  if (auto it = o.find("group"); it != o.end() && !it->is_null()) t.group = get_string(o, "group");
  if (auto it = o.find("wears_glasses"); it != o.end() && !it->is_null()) {
    t.wears_glasses = get_bool(o, "wears_glasses");
  }
  return t;
}

inline json to_json(const TrialRecord& t) {
  json j{{"participant_id", t.participant_id},
         {"doc_id", t.doc_id},
         {"webgazer_accuracy", t.webgazer_accuracy},
         {"answer_correct", t.answer_correct}};
  json trt = json::array();
  for (double v : t.trt_ms) {
    if (v == std::floor(v) && v < 9.0e15) {
      trt.push_back(static_cast<long long>(v));
    } else {
      trt.push_back(v);
    }
  }
  j["trt_ms"] = std::move(trt);
  if (t.group) j["group"] = *t.group;
  if (t.wears_glasses) j["wears_glasses"] = *t.wears_glasses;
  return j;
}

inline AlignmentMap parse_alignment(const json& o) {
  AlignmentMap a;
  a.doc_id = detail::get_string(o, "doc_id");
  a.tokens = detail::get_strings(o, "tokens");
  a.word_ids = detail::get_word_ids(o);
  return a;
}

inline json word_ids_json(const AlignmentMap& a) {
  json ids = json::array();
  for (const auto& w : a.word_ids) ids.push_back(w ? json(*w) : json(nullptr));
  return ids;
}

inline json to_json(const AlignmentMap& a) {
  return json{{"doc_id", a.doc_id}, {"tokens", a.tokens}, {"word_ids", word_ids_json(a)}};
}

inline json to_json(const Prediction& p) {
  return json{{"doc_id", p.doc_id}, {"predicted_answer", p.predicted_answer}, {"f1", p.f1}};
}

/// Reads `attention/<model_id>/<doc_id>.json`.
inline attention::AttentionStack load_attention(const fs::path& path) {
  using namespace detail;
  json o;
  try {
    o = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
  attention::AttentionStack s;
  s.model_id = get_string(o, "model_id");
  s.doc_id = get_string(o, "doc_id");
  if (auto it = o.find("seed"); it != o.end()) {
    if (!it->is_number_integer()) throw SchemaError("field 'seed' must be an integer");
    s.seed = it->get<std::int64_t>();
  }
  const auto& dims = field(o, "dims");
  s.layers = get_index(field(dims, "layers"), "dims.layers");
  s.heads = get_index(field(dims, "heads"), "dims.heads");
  s.tokens = get_index(field(dims, "tokens"), "dims.tokens");
  s.align.doc_id = s.doc_id;
  s.align.tokens = get_strings(o, "tokens");
  s.align.word_ids = get_word_ids(o);
  const auto& attn = field(o, "attn");
  auto bad_shape = [] { return SchemaError("field 'attn' does not match dims"); };
  if (!attn.is_array() || attn.size() != s.layers) throw bad_shape();
  s.attn.reserve(s.layers * s.heads * s.tokens * s.tokens);
  for (const auto& layer : attn) {
    if (!layer.is_array() || layer.size() != s.heads) throw bad_shape();
    for (const auto& head : layer) {
      if (!head.is_array() || head.size() != s.tokens) throw bad_shape();
      for (const auto& row : head) {
        if (!row.is_array() || row.size() != s.tokens) throw bad_shape();
        for (const auto& v : row) {
          if (!v.is_number()) throw SchemaError("field 'attn' must hold numbers");
          s.attn.push_back(v.get<double>());
        }
      }
    }
  }
  return s;
}

inline json to_json(const attention::AttentionStack& s, int decimals = 6) {
  const double scale = std::pow(10.0, decimals);
  json attn = json::array();
  for (std::size_t l = 0; l < s.layers; ++l) {
    json layer = json::array();
    for (std::size_t h = 0; h < s.heads; ++h) {
      json head = json::array();
      for (std::size_t i = 0; i < s.tokens; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < s.tokens; ++j) {
          row.push_back(std::round(s.at(l, h, i, j) * scale) / scale);
        }
        head.push_back(std::move(row));
      }
      layer.push_back(std::move(head));
    }
    attn.push_back(std::move(layer));
  }
  return json{{"model_id", s.model_id},
              {"doc_id", s.doc_id},
              {"seed", s.seed},
              {"dims", {{"layers", s.layers}, {"heads", s.heads}, {"tokens", s.tokens}}},
              {"tokens", s.align.tokens},
              {"word_ids", word_ids_json(s.align)},
              {"attn", std::move(attn)}};
}

/// Loads a dataset directory. Malformed records never throw: they become
/// violations and are left out of the returned collections. Only I/O
/// failures on existing files raise IoError.
inline Dataset load_dataset(const fs::path& root, const LoadOptions& opt = {}) {
  using namespace detail;
  if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  Dataset ds;
  ds.root = root;
  auto& v = ds.violations;

  // documents
  const auto doc_path = root / "documents.jsonl";
  if (!fs::exists(doc_path)) {
    v.push_back({"documents.jsonl", 0, "missing required file"});
  } else {
    std::set<std::string> dup;
    for_each_jsonl(doc_path, "documents.jsonl", v, [&](const json& o, std::size_t line) {
      auto d = parse_document(o);
      if (auto err = check(d); !err.empty()) throw InputError("doc_id " + d.doc_id + ": " + err);
      if (ds.documents.count(d.doc_id)) {
        v.push_back({"documents.jsonl", line, "duplicate doc_id " + d.doc_id});
        dup.insert(d.doc_id);
        return;
      }
      ds.documents.emplace(d.doc_id, std::move(d));
    });
    for (const auto& id : dup) ds.documents.erase(id);
  }

  // trials
  const auto trial_path = root / "trials.jsonl";
  if (fs::exists(trial_path)) {
    std::set<std::pair<std::string, std::string>> seen;
    for_each_jsonl(trial_path, "trials.jsonl", v, [&](const json& o, std::size_t line) {
      auto t = parse_trial(o);
      const std::string who = "participant_id " + t.participant_id + ", doc_id " + t.doc_id;
      const auto* doc = ds.find_document(t.doc_id);
      if (!doc) throw InputError(who + ": unknown document");
      if (auto err = check(t, doc->word_count()); !err.empty()) throw InputError(who + ": " + err);
      if (!seen.insert({t.doc_id, t.participant_id}).second) {
        v.push_back({"trials.jsonl", line, who + ": duplicate trial"});
        return;
      }
      ds.trials.push_back(std::move(t));
    });
    std::sort(ds.trials.begin(), ds.trials.end(), [](const auto& a, const auto& b) {
      return std::tie(a.doc_id, a.participant_id) < std::tie(b.doc_id, b.participant_id);
    });
  }

  // alignments
  for (const auto& file : sorted_entries(root / "alignments", false)) {
    if (file.extension() != ".jsonl") continue;
    const auto model = file.stem().string();
    const auto rel = rel_path(root, file);
    auto& per_doc = ds.alignments[model];
    for_each_jsonl(file, rel, v, [&](const json& o, std::size_t line) {
      auto a = parse_alignment(o);
      const auto* doc = ds.find_document(a.doc_id);
      if (!doc) throw InputError("doc_id " + a.doc_id + ": unknown document");
      if (auto err = check(a, doc->word_count()); !err.empty()) {
        throw InputError("doc_id " + a.doc_id + ": " + err);
      }
      if (per_doc.count(a.doc_id)) {
        v.push_back({rel, line, "doc_id " + a.doc_id + ": duplicate alignment"});
        return;
      }
      per_doc.emplace(a.doc_id, std::move(a));
    });
  }

  // saliency/<model>/<method>/<seed>.jsonl
  std::set<std::tuple<std::string, Method, std::int64_t, std::string>> seen_maps;
  for (const auto& model_dir : sorted_entries(root / "saliency", true)) {
    const auto model = model_dir.filename().string();
    for (const auto& method_dir : sorted_entries(model_dir, true)) {
      const auto method = parse_method(method_dir.filename().string());
      if (!method) {
        v.push_back({rel_path(root, method_dir), 0, "unknown method directory"});
        continue;
      }
      for (const auto& file : sorted_entries(method_dir, false)) {
        if (file.extension() != ".jsonl") continue;
        const auto rel = rel_path(root, file);
        std::int64_t seed = 0;
        try {
          std::size_t pos = 0;
          const auto stem = file.stem().string();
          seed = std::stoll(stem, &pos);
          if (pos != stem.size()) throw std::invalid_argument(stem);
        } catch (const std::exception&) {
          v.push_back({rel, 0, "file name is not an integer seed"});
          continue;
        }
        for_each_jsonl(file, rel, v, [&](const json& o, std::size_t line) {
          SaliencyMap m{model, *method, seed, get_string(o, "doc_id"), get_numbers(o, "scores")};
          const auto* doc = ds.find_document(m.doc_id);
          if (!doc) throw InputError("doc_id " + m.doc_id + ": unknown document");
          for (double s : m.scores) {
            if (!std::isfinite(s)) throw InputError("doc_id " + m.doc_id + ": non-finite score");
          }
          const AlignmentMap* align = nullptr;
          if (auto it = ds.alignments.find(model); it != ds.alignments.end()) {
            if (auto jt = it->second.find(m.doc_id); jt != it->second.end()) align = &jt->second;
          }
          bool token_level = align != nullptr;
          if (auto it = o.find("level"); it != o.end()) {
            if (it->is_string() && (*it == "token" || *it == "word")) {
              token_level = *it == "token";
            } else if (it->is_boolean()) {
              token_level = it->get<bool>();
            } else {
              throw SchemaError("field 'level' must be \"token\", \"word\" or a boolean");
            }
          }
          if (token_level) {
            if (!align) {
              throw InputError("doc_id " + m.doc_id + ": token-level scores without an alignment for " +
                               model);
            }
            m.scores = aggregate_subwords(m.scores, *align, doc->word_count(), opt.aggregation);
          } else if (m.scores.size() != doc->word_count()) {
            std::ostringstream os;
            os << "doc_id " << m.doc_id << ": " << m.scores.size() << " word scores for "
               << doc->word_count() << " words";
            throw InputError(os.str());
          }
          if (!seen_maps.insert({model, *method, seed, m.doc_id}).second) {
            v.push_back({rel, line, "doc_id " + m.doc_id + ": duplicate saliency record"});
            return;
          }
          ds.saliency.push_back(std::move(m));
        });
      }
    }
  }

  // predictions/<model>/<seed>.jsonl
  for (const auto& model_dir : sorted_entries(root / "predictions", true)) {
    const auto model = model_dir.filename().string();
    for (const auto& file : sorted_entries(model_dir, false)) {
      if (file.extension() != ".jsonl") continue;
      const auto rel = rel_path(root, file);
      std::int64_t seed = 0;
      try {
        std::size_t pos = 0;
        const auto stem = file.stem().string();
        seed = std::stoll(stem, &pos);
        if (pos != stem.size()) throw std::invalid_argument(stem);
      } catch (const std::exception&) {
        v.push_back({rel, 0, "file name is not an integer seed"});
        continue;
      }
      std::set<std::string> seen;
      for_each_jsonl(file, rel, v, [&](const json& o, std::size_t line) {
        Prediction p{model, seed, get_string(o, "doc_id"), get_string(o, "predicted_answer"),
                     get_number(o, "f1")};
        if (!ds.find_document(p.doc_id)) throw InputError("doc_id " + p.doc_id + ": unknown document");
        if (auto err = check(p); !err.empty()) throw InputError("doc_id " + p.doc_id + ": " + err);
        if (!seen.insert(p.doc_id).second) {
          v.push_back({rel, line, "doc_id " + p.doc_id + ": duplicate prediction"});
          return;
        }
        ds.predictions.push_back(std::move(p));
      });
    }
  }

  // attention/<model>/<doc>.json
  for (const auto& model_dir : sorted_entries(root / "attention", true)) {
    for (const auto& file : sorted_entries(model_dir, false)) {
      if (file.extension() != ".json") continue;
      if (!opt.check_attention) {
        ds.attention_files.push_back(file);
        continue;
      }
      const auto rel = rel_path(root, file);
      try {
        auto s = load_attention(file);
        const auto* doc = ds.find_document(s.doc_id);
        if (s.model_id != model_dir.filename().string()) {
          throw InputError("model_id " + s.model_id + " does not match directory");
        }
        if (!doc) throw InputError("doc_id " + s.doc_id + ": unknown document");
        if (auto err = attention::check(s); !err.empty()) throw InputError(err);
        if (auto err = check(s.align, doc->word_count()); !err.empty()) throw InputError(err);
        ds.attention_files.push_back(file);
      } catch (const InputError& e) {
        v.push_back({rel, 0, e.what()});
      } catch (const json::exception& e) {
        v.push_back({rel, 0, e.what()});
      }
    }
  }

  std::sort(ds.saliency.begin(), ds.saliency.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.method, a.seed, a.doc_id) <
           std::tie(b.model_id, b.method, b.seed, b.doc_id);
  });
  std::sort(ds.predictions.begin(), ds.predictions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.seed, a.doc_id) < std::tie(b.model_id, b.seed, b.doc_id);
  });
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return ds;
}

/// Lists every schema or invariant violation under `root`; empty iff the
/// dataset is well-formed.
inline std::vector<Violation> validate_dataset(const fs::path& root, SubwordAgg agg = SubwordAgg::sum) {
  return load_dataset(root, {agg, true}).violations;
}

}  // namespace gazelign
