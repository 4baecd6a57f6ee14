#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazelign/attention.hpp"
#include "gazelign/dataset.hpp"
#include "gazelign/metrics.hpp"

namespace gazelign::gaze {

/// Parameters of the synthetic dataset generator.
struct SynthConfig {
  std::uint64_t rng_seed = 42;
  std::size_t n_docs = 12;
  std::size_t n_participants = 20;
  /// Scales the multiplicative reading-time noise. At 0 every rationale word
  /// outreads every other word.
  double noise_level = 0.5;
  double stop_after_answer_prob = 0.2;
  double calibration_lo = 0.05;
  double calibration_hi = 0.75;
  double wrong_answer_prob = 0.2;

  std::vector<std::string> languages{"en", "es", "de"};
  std::vector<std::string> models{"synth-mbert", "synth-xlmr"};
  std::vector<std::int64_t> seeds{0, 1};
  std::size_t layers = 2;
  std::size_t heads = 2;
  bool with_models = true;

  std::string check() const {
    if (n_docs < 1 || n_participants < 1) return "n_docs and n_participants must be >= 1";
    if (!(noise_level >= 0.0)) return "noise_level must be non-negative";
    if (!(stop_after_answer_prob >= 0.0 && stop_after_answer_prob <= 1.0)) {
      return "stop_after_answer_prob must lie in [0,1]";
    }
    if (!(wrong_answer_prob >= 0.0 && wrong_answer_prob <= 1.0)) {
      return "wrong_answer_prob must lie in [0,1]";
    }
    if (!(0.0 <= calibration_lo && calibration_lo <= calibration_hi && calibration_hi <= 1.0)) {
      return "calibration range must satisfy 0 <= lo <= hi <= 1";
    }
    if (languages.empty()) return "at least one language is required";
    if (with_models && (models.empty() || seeds.empty() || layers < 1 || heads < 1)) {
      return "model fixtures need models, seeds, layers and heads";
    }
    return {};
  }
};

namespace detail {

/// Portable random source: only the raw 64-bit engine output is used, so the
/// stream is identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }
  bool chance(double p) { return uniform() < p; }
  double normal() {
    // Box-Muller
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

inline std::string make_word(Rng& rng) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr"};
  static const char* vowels[] = {"a", "e", "i", "o", "u", "ei", "au"};
  std::string w;
  const auto syllables = rng.between(1, 3);
  for (std::size_t i = 0; i < syllables; ++i) {
    w += onsets[rng.index(std::size(onsets))];
    w += vowels[rng.index(std::size(vowels))];
  }
  return w;
}

inline void write_lines(const fs::path& path, const std::vector<json>& rows) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw IoError("error writing " + path.string());
}

inline void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace detail

struct Participant {
  std::string id;
  std::string group;
  std::optional<bool> wears_glasses;
  double accuracy = 0.0;
};

/// Synthetic documents and trials, before anything is written to disk.
struct SynthGaze {
  std::vector<Document> documents;
  std::vector<Participant> participants;
  std::vector<TrialRecord> trials;
};

inline SynthGaze synthesize_gaze(const SynthConfig& cfg) {
  if (auto err = cfg.check(); !err.empty()) throw InputError("SynthConfig: " + err);
  detail::Rng rng(cfg.rng_seed);
  SynthGaze out;

  for (std::size_t d = 0; d < cfg.n_docs; ++d) {
    Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "doc%03zu", d);
    doc.doc_id = id;
    doc.language = cfg.languages[d % cfg.languages.size()];
    doc.set_id = "set" + std::to_string(d / 3);
    const auto n_words = rng.between(18, 40);
    for (std::size_t w = 0; w < n_words; ++w) doc.words.push_back(detail::make_word(rng));
    const std::size_t answer_len = rng.chance(0.5) ? rng.between(1, 2) : rng.between(2, 4);
    const auto start = rng.index(n_words - answer_len + 1);
    doc.answer_word_span = {start, start + answer_len};
    doc.answer_text = join_words(std::span(doc.words).subspan(start, answer_len));
    doc.question = "wo " + detail::make_word(rng) + " " + detail::make_word(rng) + "?";
    out.documents.push_back(std::move(doc));
  }

  static const char* groups[] = {"mturk", "volunteer", "control"};
  const double mid = 0.5 * (cfg.calibration_lo + cfg.calibration_hi);
  for (std::size_t p = 0; p < cfg.n_participants; ++p) {
    Participant part;
    char id[32];
    std::snprintf(id, sizeof id, "p%03zu", p);
    part.id = id;
    part.group = groups[p % 3];
    if (part.group == "control") part.wears_glasses = rng.chance(0.4);
    if (part.wears_glasses == true) {
      part.accuracy = rng.uniform(cfg.calibration_lo, mid);
    } else if (part.wears_glasses == false) {
      part.accuracy = rng.uniform(mid, cfg.calibration_hi);
    } else {
      part.accuracy = rng.uniform(cfg.calibration_lo, cfg.calibration_hi);
    }
    part.accuracy = std::round(part.accuracy * 1e4) / 1e4;
    out.participants.push_back(std::move(part));
  }

  const double bonus = 300.0 / (1.0 + cfg.noise_level);
  for (const auto& doc : out.documents) {
    for (const auto& part : out.participants) {
      TrialRecord t;
      t.participant_id = part.id;
      t.doc_id = doc.doc_id;
      t.webgazer_accuracy = part.accuracy;
      t.group = part.group;
      t.wears_glasses = part.wears_glasses;
      t.answer_correct = !rng.chance(cfg.wrong_answer_prob);
      const bool stops = rng.chance(cfg.stop_after_answer_prob);
      // Poorly calibrated recordings are noisier.
      const double sigma = cfg.noise_level * (1.25 - part.accuracy);
      const auto& span = doc.answer_word_span;
      for (std::size_t w = 0; w < doc.word_count(); ++w) {
        const bool in_answer = span.contains(w);
        const bool skipped = !in_answer && rng.chance(0.25);
        double base = rng.uniform(60.0, 220.0);
        const double noise = std::exp(sigma * rng.normal());
        if (in_answer) base += bonus;
        double v = skipped || (stops && w >= span.end) ? 0.0 : std::round(base * noise);
        if (in_answer) v = std::max(v, 1.0);
        if (!t.answer_correct) v = std::round(v * 1.3);
        t.trt_ms.push_back(v);
      }
      // Gaze mislocated onto another word; approaches a random pattern as noise grows.
      const double mislocate = 1.0 - std::exp(-0.5 * sigma);
      for (std::size_t w = 0; w < t.trt_ms.size(); ++w) {
        if (rng.chance(mislocate)) std::swap(t.trt_ms[w], t.trt_ms[w + rng.index(t.trt_ms.size() - w)]);
      }
      out.trials.push_back(std::move(t));
    }
  }
  return out;
}

namespace detail {

inline AlignmentMap synth_alignment(const Document& doc, Rng& rng) {
  AlignmentMap a;
  a.doc_id = doc.doc_id;
  a.tokens.push_back("[CLS]");
  a.word_ids.emplace_back();
  std::istringstream q(doc.question);
  for (std::string t; q >> t;) {
    a.tokens.push_back(t);
    a.word_ids.emplace_back();
  }
  a.tokens.push_back("[SEP]");
  a.word_ids.emplace_back();
  for (std::size_t w = 0; w < doc.word_count(); ++w) {
    const auto& word = doc.words[w];
    if (word.size() >= 4 && rng.chance(0.3)) {
      const auto cut = word.size() / 2;
      a.tokens.push_back(word.substr(0, cut));
      a.word_ids.emplace_back(w);
      a.tokens.push_back("##" + word.substr(cut));
      a.word_ids.emplace_back(w);
    } else {
      a.tokens.push_back(word);
      a.word_ids.emplace_back(w);
    }
  }
  a.tokens.push_back("[SEP]");
  a.word_ids.emplace_back();
  return a;
}

inline attention::AttentionStack synth_attention(const std::string& model, const Document& doc,
                                                 const AlignmentMap& align, std::size_t layers,
                                                 std::size_t heads, double focus, Rng& rng) {
  attention::AttentionStack s;
  s.model_id = model;
  s.doc_id = doc.doc_id;
  s.layers = layers;
  s.heads = heads;
  s.tokens = align.tokens.size();
  s.align = align;
  s.attn.resize(layers * heads * s.tokens * s.tokens);
  std::vector<double> logits(s.tokens);
  for (std::size_t l = 0; l < layers; ++l) {
    // Early layers attend to the answer more in this fixture.
    const double layer_focus = focus * (1.0 - static_cast<double>(l) / static_cast<double>(layers + 1));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < s.tokens; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < s.tokens; ++j) {
          const auto& wid = align.word_ids[j];
          logits[j] = rng.normal() + (wid && doc.answer_word_span.contains(*wid) ? layer_focus : 0.0) +
                      (i == j ? 1.0 : 0.0);
          mx = std::max(mx, logits[j]);
        }
        double sum = 0.0;
        for (double& x : logits) sum += (x = std::exp(x - mx));
        // Rounded to six decimals; the remainder goes to the diagonal so the
        // written row still sums to one within float precision.
        double written = 0.0;
        for (std::size_t j = 0; j < s.tokens; ++j) {
          const double v = std::round(logits[j] / sum * 1e6) / 1e6;
          s.at(l, h, i, j) = v;
          written += v;
        }
        s.at(l, h, i, i) = std::max(0.0, std::round((s.at(l, h, i, i) + 1.0 - written) * 1e6) / 1e6);
      }
    }
  }
  return s;
}

}  // namespace detail

/// Writes a complete synthetic dataset into `dir`. Output is a pure function
/// of `cfg`. Refuses to write into a non-empty directory.
inline void generate_fixture(const SynthConfig& cfg, const fs::path& dir) {
  if (auto err = cfg.check(); !err.empty()) throw InputError("SynthConfig: " + err);
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    throw IoError("fixture directory is not empty: " + dir.string());
  }
  fs::create_directories(dir);
  const auto gaze = synthesize_gaze(cfg);

  std::vector<json> rows;
  for (const auto& d : gaze.documents) rows.push_back(to_json(d));
  detail::write_lines(dir / "documents.jsonl", rows);
  rows.clear();
  for (const auto& t : gaze.trials) rows.push_back(to_json(t));
  detail::write_lines(dir / "trials.jsonl", rows);

  if (!cfg.with_models) return;
  detail::Rng rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    const auto& model = cfg.models[mi];
    std::vector<AlignmentMap> aligns;
    rows.clear();
    for (const auto& d : gaze.documents) {
      aligns.push_back(detail::synth_alignment(d, rng));
      rows.push_back(to_json(aligns.back()));
    }
    detail::write_lines(dir / "alignments" / (model + ".jsonl"), rows);

    const double focus = 0.4 + 0.4 * static_cast<double>(mi);
    for (std::size_t d = 0; d < gaze.documents.size(); ++d) {
      const auto& doc = gaze.documents[d];
      auto stack = detail::synth_attention(model, doc, aligns[d], cfg.layers, cfg.heads, focus, rng);
      detail::write_json(dir / "attention" / model / (doc.doc_id + ".json"), to_json(stack));
    }

    // The second model exports Gradient x Input already at word level.
    const bool gxi_word_level = mi % 2 == 1;
    for (auto seed : cfg.seeds) {
      const auto seed_file = std::to_string(seed) + ".jsonl";
      std::vector<json> gxi, lrp, preds;
      for (std::size_t d = 0; d < gaze.documents.size(); ++d) {
        const auto& doc = gaze.documents[d];
        const auto& align = aligns[d];
        std::vector<double> g, r;
        for (const auto& wid : align.word_ids) {
          const bool ans = wid && doc.answer_word_span.contains(*wid);
          g.push_back(std::round((0.8 * rng.normal() + (ans ? 0.9 : 0.0)) * 1e6) / 1e6);
          r.push_back(std::round((0.5 * rng.normal() + (ans ? 2.0 : 0.0)) * 1e6) / 1e6);
        }
        if (gxi_word_level) {
          g = aggregate_subwords(g, align, doc.word_count(), SubwordAgg::sum);
          gxi.push_back(json{{"doc_id", doc.doc_id}, {"scores", g}, {"level", "word"}});
        } else {
          gxi.push_back(json{{"doc_id", doc.doc_id}, {"scores", g}, {"level", "token"}});
        }
        lrp.push_back(json{{"doc_id", doc.doc_id}, {"scores", r}, {"level", "token"}});

        std::string answer;
        const double u = rng.uniform();
        if (u < 0.75) {
          answer = doc.answer_text;
        } else if (u < 0.9) {
          const auto s = doc.answer_word_span.start;
          answer = doc.words[s] + (s + 1 < doc.word_count() ? " " + doc.words[s + 1] : "");
        } else {
          answer = doc.words[rng.index(doc.word_count())];
        }
        const double f1 = metrics::squad_f1(answer, doc.answer_text, doc.language);
        preds.push_back(to_json(Prediction{model, seed, doc.doc_id, answer, f1}));
      }
      detail::write_lines(dir / "saliency" / model / "grad-x-input" / seed_file, gxi);
      detail::write_lines(dir / "saliency" / model / "lrp" / seed_file, lrp);
      detail::write_lines(dir / "predictions" / model / seed_file, preds);
    }
  }
}

}  // namespace gazelign::gaze
