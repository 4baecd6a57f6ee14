#include <gtest/gtest.h>

#include <cstdlib>

#include "gazelign/config.hpp"
#include "test_support.hpp"

using namespace gazelign;
namespace ts = testing_support;

namespace {

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) {
      ::setenv(name, value, 1);
    } else {
      ::unsetenv(name);
    }
  }
  ~ScopedEnv() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  ScopedEnv env("GAZELIGN_JOBS", nullptr);
  ts::TempDir dir;
  ts::spit(dir / "empty.cfg", "");
  auto cfg = load_config(dir / "empty.cfg");
  EXPECT_DOUBLE_EQ(cfg.filter.min_webgazer_accuracy, 0.20);
  EXPECT_TRUE(cfg.filter.drop_wrong_answers);
  EXPECT_DOUBLE_EQ(cfg.filter.min_f1, 0.5);
  EXPECT_DOUBLE_EQ(cfg.entropy_base, 2.0);
  EXPECT_DOUBLE_EQ(cfg.rollout_residual, 0.5);
  EXPECT_FALSE(cfg.rollout_upto);
  EXPECT_EQ(cfg.subword_agg, SubwordAgg::sum);
  EXPECT_EQ(cfg.token_readout, attention::Readout::column_mean);
  EXPECT_EQ(cfg.alignment_tie_break, metrics::TieBreak::ascending_index);
  EXPECT_EQ(cfg.jobs, 1u);
  EXPECT_EQ(cfg.out_dir, "out");
}

TEST(Config, FlagOverridesFile) {
  ts::TempDir dir;
  ts::spit(dir / "a.cfg", "# thresholds\nmin_webgazer_accuracy = 0.25\nentropy_base = 10\n");
  auto cfg = load_config(dir / "a.cfg", {{"min_webgazer_accuracy", "0.3"}});
  EXPECT_DOUBLE_EQ(cfg.filter.min_webgazer_accuracy, 0.3);
  EXPECT_DOUBLE_EQ(cfg.entropy_base, 10.0);
}

TEST(Config, RangeViolationsRejected) {
  RunConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "entropy_base", "0.5"), UsageError);
  EXPECT_THROW(apply_setting(cfg, "entropy_base", "1"), UsageError);
  EXPECT_THROW(apply_setting(cfg, "min_webgazer_accuracy", "20"), UsageError);
  EXPECT_THROW(apply_setting(cfg, "rollout_residual", "-0.1"), UsageError);
  EXPECT_THROW(apply_setting(cfg, "jobs", "0"), UsageError);
}

TEST(Config, UnknownKeyListsValidKeys) {
  RunConfig cfg;
  try {
    apply_setting(cfg, "min_accuracy", "0.2");
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("min_accuracy"), std::string::npos);
    for (const auto& k : config_keys()) EXPECT_NE(msg.find(k), std::string::npos) << k;
  }
}

TEST(Config, TypeMismatchRejected) {
  RunConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "min_f1", "high"), UsageError);
  EXPECT_THROW(apply_setting(cfg, "drop_wrong_answers", "maybe"), UsageError);
  EXPECT_THROW(apply_setting(cfg, "rollout_upto", "last"), UsageError);
  EXPECT_THROW(apply_setting(cfg, "subword_agg", "median"), UsageError);
}

TEST(Config, MalformedLineRejected) {
  EXPECT_THROW(parse_config_text("min_f1 0.5\n"), UsageError);
}

TEST(Config, ListsParsed) {
  RunConfig cfg;
  apply_setting(cfg, "languages", "en, de");
  apply_setting(cfg, "seeds", "0,2");
  apply_setting(cfg, "rollout_upto", "3");
  EXPECT_EQ(cfg.languages, (std::vector<std::string>{"en", "de"}));
  EXPECT_EQ(cfg.seeds, (std::vector<std::int64_t>{0, 2}));
  EXPECT_EQ(cfg.rollout_upto, std::optional<std::size_t>(3));
}

TEST(Config, JobsFromEnvironment) {
  {
    ScopedEnv env("GAZELIGN_JOBS", "6");
    EXPECT_EQ(load_config(std::nullopt).jobs, 6u);
    EXPECT_EQ(load_config(std::nullopt, {{"jobs", "2"}}).jobs, 2u);
  }
  ScopedEnv bad("GAZELIGN_JOBS", "lots");
  EXPECT_EQ(load_config(std::nullopt).jobs, 1u);
}

TEST(Config, JsonRoundTrip) {
  RunConfig cfg;
  apply_setting(cfg, "dataset_dir", "/data/x");
  apply_setting(cfg, "min_webgazer_accuracy", "0.35");
  apply_setting(cfg, "drop_wrong_answers", "false");
  apply_setting(cfg, "rollout_upto", "1");
  apply_setting(cfg, "token_readout", "cls-row");
  apply_setting(cfg, "languages", "es");
  apply_setting(cfg, "seeds", "4");
  auto back = config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Config, AnalysisSettingsExcludeJobsAndPaths) {
  RunConfig a, b;
  b.jobs = 8;
  b.out_dir = "elsewhere";
  b.dataset_dir = "/tmp/d";
  EXPECT_EQ(analysis_settings_json(a), analysis_settings_json(b));
}
