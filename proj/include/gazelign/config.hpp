#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazelign/attention.hpp"
#include "gazelign/core.hpp"
#include "gazelign/gaze.hpp"
#include "gazelign/metrics.hpp"

namespace gazelign {

/// Fully resolved settings for one run.
struct RunConfig {
  std::filesystem::path dataset_dir;
  std::filesystem::path out_dir = "out";
  gaze::FilterPolicy filter;
  double entropy_base = 2.0;
  double rollout_residual = 0.5;
  std::optional<std::size_t> rollout_upto;  // nullopt = all layers
  SubwordAgg subword_agg = SubwordAgg::sum;
  attention::Readout token_readout = attention::Readout::column_mean;
  metrics::TieBreak alignment_tie_break = metrics::TieBreak::ascending_index;
  std::uint64_t tie_seed = 0;
  std::vector<std::string> languages;  // empty = all
  std::vector<std::string> models;     // empty = all
  std::vector<std::int64_t> seeds;     // empty = all
  std::size_t jobs = 1;
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "alignment_tie_break", "dataset_dir",    "drop_wrong_answers", "entropy_base",
      "jobs",                "languages",      "min_f1",             "min_webgazer_accuracy",
      "models",              "out_dir",        "rollout_residual",   "rollout_upto",
      "seeds",               "subword_agg",    "tie_seed",           "token_readout"};
  return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw UsageError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw UsageError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

inline void range_check(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

}  // namespace detail

inline std::size_t default_jobs() {
  if (const char* env = std::getenv("GAZELIGN_JOBS")) {
    try {
      auto n = detail::parse_int("GAZELIGN_JOBS", env);
      if (n >= 1) return static_cast<std::size_t>(n);
    } catch (const UsageError&) {
    }
  }
  return 1;
}

/// Applies one key = value setting.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& raw) {
  using namespace detail;
  const auto v = trim(raw);
  if (key == "dataset_dir") {
    cfg.dataset_dir = v;
  } else if (key == "out_dir") {
    cfg.out_dir = v;
  } else if (key == "min_webgazer_accuracy") {
    cfg.filter.min_webgazer_accuracy = parse_double(key, v);
    range_check(cfg.filter.min_webgazer_accuracy >= 0.0 && cfg.filter.min_webgazer_accuracy <= 1.0,
                "min_webgazer_accuracy must lie in [0,1] (a fraction, not a percent)");
  } else if (key == "drop_wrong_answers") {
    cfg.filter.drop_wrong_answers = parse_bool(key, v);
  } else if (key == "min_f1") {
    cfg.filter.min_f1 = parse_double(key, v);
    range_check(cfg.filter.min_f1 >= 0.0 && cfg.filter.min_f1 <= 1.0, "min_f1 must lie in [0,1]");
  } else if (key == "entropy_base") {
    cfg.entropy_base = parse_double(key, v);
    range_check(cfg.entropy_base > 1.0, "entropy_base must exceed 1");
  } else if (key == "rollout_residual") {
    cfg.rollout_residual = parse_double(key, v);
    range_check(cfg.rollout_residual >= 0.0 && cfg.rollout_residual <= 1.0,
                "rollout_residual must lie in [0,1]");
  } else if (key == "rollout_upto") {
    if (v == "all") {
      cfg.rollout_upto.reset();
    } else {
      auto n = parse_int(key, v);
      range_check(n >= 0, "rollout_upto must be a non-negative layer index or 'all'");
      cfg.rollout_upto = static_cast<std::size_t>(n);
    }
  } else if (key == "subword_agg") {
    auto a = parse_subword_agg(v);
    if (!a) throw UsageError("subword_agg: expected sum, mean or max, got '" + v + "'");
    cfg.subword_agg = *a;
  } else if (key == "token_readout") {
    if (v == "column-mean") {
      cfg.token_readout = attention::Readout::column_mean;
    } else if (v == "cls-row") {
      cfg.token_readout = attention::Readout::cls_row;
    } else {
      throw UsageError("token_readout: expected column-mean or cls-row, got '" + v + "'");
    }
  } else if (key == "alignment_tie_break") {
    if (v == "index") {
      cfg.alignment_tie_break = metrics::TieBreak::ascending_index;
    } else if (v == "random") {
      cfg.alignment_tie_break = metrics::TieBreak::random;
    } else {
      throw UsageError("alignment_tie_break: expected index or random, got '" + v + "'");
    }
  } else if (key == "tie_seed") {
    auto n = parse_int(key, v);
    range_check(n >= 0, "tie_seed must be non-negative");
    cfg.tie_seed = static_cast<std::uint64_t>(n);
  } else if (key == "languages") {
    cfg.languages = split_list(v);
  } else if (key == "models") {
    cfg.models = split_list(v);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& s : split_list(v)) cfg.seeds.push_back(parse_int(key, s));
  } else if (key == "jobs") {
    auto n = parse_int(key, v);
    range_check(n >= 1, "jobs must be at least 1");
    cfg.jobs = static_cast<std::size_t>(n);
  } else {
    std::ostringstream os;
    os << "unknown config key '" << key << "'; valid keys:";
    for (const auto& k : config_keys()) os << " " << k;
    throw UsageError(os.str());
  }
}

/// Parses flat `key = value` text. Blank lines and lines starting with '#'
/// are ignored.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(n) + ": expected key = value");
    }
    out[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  return out;
}

/// Defaults, then the config file (if any), then flag overrides.
inline RunConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::map<std::string, std::string>& overrides = {}) {
  RunConfig cfg;
  cfg.jobs = default_jobs();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw IoError("cannot read config file " + file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(ss.str())) apply_setting(cfg, k, v);
  }
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  return cfg;
}

/// Settings that influence results. `jobs` and the paths are excluded so the
/// report is identical for any worker count or output location.
inline nlohmann::json analysis_settings_json(const RunConfig& c) {
  nlohmann::json j;
  j["min_webgazer_accuracy"] = c.filter.min_webgazer_accuracy;
  j["drop_wrong_answers"] = c.filter.drop_wrong_answers;
  j["min_f1"] = c.filter.min_f1;
  j["entropy_base"] = c.entropy_base;
  j["rollout_residual"] = c.rollout_residual;
  j["rollout_upto"] = c.rollout_upto ? nlohmann::json(*c.rollout_upto) : nlohmann::json("all");
  j["subword_agg"] = std::string(to_string(c.subword_agg));
  j["token_readout"] = c.token_readout == attention::Readout::column_mean ? "column-mean" : "cls-row";
  j["alignment_tie_break"] = c.alignment_tie_break == metrics::TieBreak::ascending_index ? "index" : "random";
  j["tie_seed"] = c.tie_seed;
  j["languages"] = c.languages;
  j["models"] = c.models;
  j["seeds"] = c.seeds;
  return j;
}

inline nlohmann::json to_json(const RunConfig& c) {
  auto j = analysis_settings_json(c);
  j["dataset_dir"] = c.dataset_dir.string();
  j["out_dir"] = c.out_dir.string();
  j["jobs"] = c.jobs;
  return j;
}

/// Inverse of to_json, used to rerun from a run manifest.
inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.jobs = default_jobs();
  for (const auto& [k, v] : j.items()) {
    std::string s;
    if (v.is_string()) {
      s = v.get<std::string>();
    } else if (v.is_array()) {
      for (const auto& x : v) s += (s.empty() ? "" : ",") + (x.is_string() ? x.get<std::string>() : x.dump());
    } else {
      s = v.dump();
    }
    apply_setting(cfg, k, s);
  }
  return cfg;
}

}  // namespace gazelign
