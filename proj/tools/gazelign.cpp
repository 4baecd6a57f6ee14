// gazelign: evaluate model explanations and webcam gaze against gold rationales.
//
// Exit codes: 0 success, 1 dataset violations or analysis failure,
// 2 usage error, 3 I/O error.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "gazelign/gazelign.hpp"

namespace {

using namespace gazelign;

constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

/// Options shared by every analysis subcommand. Values stay strings until
/// load_config resolves them, so file and flag settings share one parser.
struct CommonOptions {
  std::string config_file;
  std::string manifest_file;
  std::map<std::string, std::string> overrides;
};

void add_setting(CLI::App* app, CommonOptions& opts, const std::string& key, const std::string& help) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  app->add_option_function<std::string>(
      flag, [&opts, key](const std::string& v) { opts.overrides[key] = v; }, help);
}

void add_common(CLI::App* app, CommonOptions& opts, bool analysis) {
  app->add_option("--config", opts.config_file, "Config file with flat key = value lines");
  add_setting(app, opts, "dataset_dir", "Dataset directory");
  add_setting(app, opts, "subword_agg", "Subword aggregation: sum, mean or max (default sum)");
  add_setting(app, opts, "jobs", "Worker threads (default $GAZELIGN_JOBS or 1)");
  if (!analysis) return;
  app->add_option("--manifest", opts.manifest_file, "Rerun with the settings stored in a run-manifest.json");
  add_setting(app, opts, "out_dir", "Output directory (default out)");
  add_setting(app, opts, "min_webgazer_accuracy", "Minimum WebGazer accuracy, a fraction (default 0.20)");
  add_setting(app, opts, "drop_wrong_answers", "Drop trials with wrong answers: true/false (default true)");
  add_setting(app, opts, "min_f1", "Minimum QA F1 for model samples (default 0.5)");
  add_setting(app, opts, "entropy_base", "Entropy logarithm base, > 1 (default 2)");
  add_setting(app, opts, "rollout_residual", "Rollout residual weight in [0,1] (default 0.5)");
  add_setting(app, opts, "rollout_upto", "Last rollout layer index, or 'all' (default all)");
  add_setting(app, opts, "token_readout", "Token importance readout: column-mean or cls-row");
  add_setting(app, opts, "alignment_tie_break", "Alignment AUC tie-break: index or random");
  add_setting(app, opts, "tie_seed", "Seed for the random tie-break");
  add_setting(app, opts, "languages", "Comma-separated languages to analyse (default all)");
  add_setting(app, opts, "models", "Comma-separated models to analyse (default all)");
  add_setting(app, opts, "seeds", "Comma-separated seeds to analyse (default all)");
}

RunConfig resolve(const CommonOptions& opts) {
  RunConfig cfg;
  if (!opts.manifest_file.empty()) {
    std::ifstream in(opts.manifest_file);
    if (!in) throw IoError("cannot read manifest " + opts.manifest_file);
    json manifest;
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError(std::string("malformed manifest: ") + e.what());
    }
    if (!manifest.contains("config")) throw UsageError("manifest has no config section");
    cfg = config_from_json(manifest.at("config"));
    for (const auto& [k, v] : opts.overrides) apply_setting(cfg, k, v);
  } else {
    std::optional<fs::path> file;
    if (!opts.config_file.empty()) file = opts.config_file;
    cfg = load_config(file, opts.overrides);
  }
  if (cfg.dataset_dir.empty()) throw UsageError("missing required --dataset-dir (or dataset_dir in the config)");
  if (!fs::is_directory(cfg.dataset_dir)) {
    throw UsageError("--dataset-dir: not a directory: " + cfg.dataset_dir.string());
  }
  return cfg;
}

void print_file(const fs::path& p) {
  std::ifstream in(p);
  if (in) std::cout << in.rdbuf();
}

int run_validate(const CommonOptions& opts) {
  const auto cfg = resolve(opts);
  const auto violations = validate_dataset(cfg.dataset_dir, cfg.subword_agg);
  for (const auto& v : violations) std::cout << v.str() << '\n';
  std::ostringstream detail;
  detail << "dataset=" << cfg.dataset_dir.string() << " violations=" << violations.size();
  log_info("validate-done", detail.str());
  return violations.empty() ? kExitOk : kExitViolations;
}

int run_analysis(const std::string& command, unsigned sections, const std::vector<std::string>& print_tables,
                 const CommonOptions& opts) {
  const auto cfg = resolve(opts);
  log_info("run-start", "command=" + command + " dataset=" + cfg.dataset_dir.string() +
                            " out=" + cfg.out_dir.string() + " jobs=" + std::to_string(cfg.jobs));
  const auto result = report::run(cfg, sections);
  if (!result.violations.empty()) {
    for (const auto& v : result.violations) std::cout << v.str() << '\n';
    log_error("dataset-invalid", "violations=" + std::to_string(result.violations.size()));
    return kExitViolations;
  }
  for (const auto& name : print_tables) print_file(cfg.out_dir / "tables" / (name + ".csv"));
  log_info("run-done", "command=" + command + " report=" + (cfg.out_dir / "report.json").string());
  return kExitOk;
}

struct FixtureOptions {
  std::string out_dir;
  gaze::SynthConfig cfg;
  bool no_models = false;
};

int run_fixtures(const FixtureOptions& f) {
  auto cfg = f.cfg;
  cfg.with_models = !f.no_models;
  if (auto err = cfg.check(); !err.empty()) throw UsageError(err);
  gaze::generate_fixture(cfg, f.out_dir);
  log_info("fixture-written", "dir=" + f.out_dir + " seed=" + std::to_string(cfg.rng_seed));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazelign: evaluate model explanations and webcam gaze against gold rationales"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* validate = app.add_subcommand("validate", "Check a dataset directory for schema and invariant violations");
  add_common(validate, common, false);

  struct Analysis {
    const char* name;
    const char* help;
    unsigned sections;
    std::vector<std::string> tables;
  };
  const std::vector<Analysis> analyses{
      {"gaze-stats", "Entropy, reading time and error correlations of gaze patterns", kGazeStats,
       {"gaze_entropy_summary", "gaze_correlations"}},
      {"decode", "Decoding ROC-AUC of rationales from gaze and model explanations", kDecoding, {"decoding_summary"}},
      {"align", "Alignment AUC of model explanations against rationales and gaze", kAlignment, {"alignment_summary"}},
      {"rank", "Rank explanation methods and compare rationale- and gaze-based rankings", kRanking,
       {"rankings", "ranking_comparisons"}},
      {"bins", "Decoding accuracy by answer position, text length and answer length", kBins, {"bins"}},
      {"groups", "WebGazer and decoding accuracy by participant group and glasses", kGroups, {"groups"}},
      {"report", "Run the full pipeline", kAllSections, {}},
  };
  std::vector<CLI::App*> analysis_apps;
  for (const auto& a : analyses) {
    auto* sub = app.add_subcommand(a.name, a.help);
    add_common(sub, common, true);
    analysis_apps.push_back(sub);
  }

  FixtureOptions fx;
  auto* fixtures = app.add_subcommand("fixtures", "Generate a deterministic synthetic dataset");
  fixtures->add_option("--out-dir", fx.out_dir, "Directory to create (must be empty)")->required();
  fixtures->add_option("--seed", fx.cfg.rng_seed, "Generator seed")->capture_default_str();
  fixtures->add_option("--docs", fx.cfg.n_docs, "Number of documents")->capture_default_str();
  fixtures->add_option("--participants", fx.cfg.n_participants, "Number of participants")->capture_default_str();
  fixtures->add_option("--noise", fx.cfg.noise_level, "Reading-time noise level (>= 0)")->capture_default_str();
  fixtures->add_option("--stop-prob", fx.cfg.stop_after_answer_prob,
                       "Probability a reader stops after the answer")->capture_default_str();
  fixtures->add_option("--calibration-lo", fx.cfg.calibration_lo, "Lowest WebGazer accuracy")->capture_default_str();
  fixtures->add_option("--calibration-hi", fx.cfg.calibration_hi, "Highest WebGazer accuracy")->capture_default_str();
  fixtures->add_option("--wrong-prob", fx.cfg.wrong_answer_prob, "Probability of a wrong answer")->capture_default_str();
  fixtures->add_option("--layers", fx.cfg.layers, "Attention layers per model")->capture_default_str();
  fixtures->add_option("--heads", fx.cfg.heads, "Attention heads per layer")->capture_default_str();
  fixtures->add_flag("--no-models", fx.no_models, "Only documents and trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return run_validate(common);
    if (fixtures->parsed()) return run_fixtures(fx);
    for (std::size_t i = 0; i < analyses.size(); ++i) {
      if (analysis_apps[i]->parsed()) {
        return run_analysis(analyses[i].name, analyses[i].sections, analyses[i].tables, common);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    log_error("usage-error");
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    log_error("io-error");
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    log_error("io-error");
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    log_error("failed");
    return kExitViolations;
  }
  return kExitUsage;
}
