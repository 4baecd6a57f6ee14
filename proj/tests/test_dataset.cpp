#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "gazelign/dataset.hpp"
#include "gazelign/fixture.hpp"
#include "test_support.hpp"

using namespace gazelign;
namespace ts = testing_support;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

void write_small(const fs::path& root, const std::string& extra_trial = {}) {
  ts::spit(root / "documents.jsonl",
           R"({"doc_id":"d1","language":"en","words":["Who","won","?","Narges","Mohammadi"],"question":"Who won?","answer_word_span":[3,5],"answer_text":"Narges Mohammadi"})"
           "\n"
           R"({"doc_id":"d2","language":"es","words":["La","casa","es","roja"],"question":"Color?","answer_word_span":[3,4],"answer_text":"roja"})"
           "\n");
  std::string trials =
      R"({"participant_id":"p1","doc_id":"d1","trt_ms":[100,0,20,300,250],"webgazer_accuracy":0.4,"answer_correct":true})"
      "\n"
      R"({"participant_id":"p2","doc_id":"d1","trt_ms":[90,10,0,280,200],"webgazer_accuracy":0.3,"answer_correct":false,"group":"mturk"})"
      "\n"
      R"({"participant_id":"p1","doc_id":"d2","trt_ms":[50,60,40,300],"webgazer_accuracy":0.4,"answer_correct":true})"
      "\n";
  ts::spit(root / "trials.jsonl", trials + extra_trial);
}

std::vector<std::pair<std::string, std::string>> without_lines(const std::vector<Violation>& vs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& v : vs) out.emplace_back(v.file, v.message);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Validate, SmallDatasetIsClean) {
  ts::TempDir dir;
  write_small(dir.path());
  EXPECT_TRUE(validate_dataset(dir.path()).empty());
  auto ds = load_dataset(dir.path());
  EXPECT_EQ(ds.documents.size(), 2u);
  ASSERT_EQ(ds.trials.size(), 3u);
  EXPECT_EQ(ds.trials[0].participant_id, "p1");
  EXPECT_EQ(ds.trials[1].group, std::optional<std::string>("mturk"));
}

TEST(Validate, TrtLengthMismatchNamesParticipantAndDocument) {
  ts::TempDir dir;
  write_small(dir.path(),
              R"({"participant_id":"p9","doc_id":"d2","trt_ms":[1,2,3],"webgazer_accuracy":0.5,"answer_correct":true})"
              "\n");
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].file, "trials.jsonl");
  EXPECT_EQ(vs[0].line, 4u);
  EXPECT_NE(vs[0].message.find("p9"), std::string::npos);
  EXPECT_NE(vs[0].message.find("d2"), std::string::npos);
  EXPECT_NE(vs[0].message.find("trt_ms length"), std::string::npos);
}

TEST(Validate, AccuracyOutOfRange) {
  ts::TempDir dir;
  write_small(dir.path(),
              R"({"participant_id":"p9","doc_id":"d2","trt_ms":[1,2,3,4],"webgazer_accuracy":1.3,"answer_correct":true})"
              "\n");
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_NE(vs[0].message.find("webgazer_accuracy"), std::string::npos);
}

TEST(Validate, MalformedLineIsAViolation) {
  ts::TempDir dir;
  write_small(dir.path(), "{\"participant_id\": \"p9\", \n");
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].line, 4u);
  EXPECT_NE(vs[0].message.find("malformed JSON"), std::string::npos);
}

TEST(Validate, MissingFieldAndUnknownDocument) {
  ts::TempDir dir;
  write_small(dir.path(),
              R"({"participant_id":"p9","doc_id":"d2","webgazer_accuracy":0.5,"answer_correct":true})"
              "\n"
              R"({"participant_id":"p9","doc_id":"nope","trt_ms":[1],"webgazer_accuracy":0.5,"answer_correct":true})"
              "\n");
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_NE(vs[0].message.find("trt_ms"), std::string::npos);
  EXPECT_NE(vs[1].message.find("unknown document"), std::string::npos);
}

TEST(Validate, DuplicateTrial) {
  ts::TempDir dir;
  write_small(dir.path(),
              R"({"participant_id":"p1","doc_id":"d2","trt_ms":[1,2,3,4],"webgazer_accuracy":0.5,"answer_correct":true})"
              "\n");
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_NE(vs[0].message.find("duplicate"), std::string::npos);
}

TEST(Validate, MissingDocumentsFile) {
  ts::TempDir dir;
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].file, "documents.jsonl");
}

TEST(Validate, UnreadableDocumentsIsIoError) {
  ts::TempDir dir;
  fs::create_directories(dir / "documents.jsonl");
  EXPECT_THROW(validate_dataset(dir.path()), IoError);
}

TEST(Validate, MissingRootIsIoError) {
  ts::TempDir dir;
  EXPECT_THROW(validate_dataset(dir / "absent"), IoError);
}

TEST(Validate, Idempotent) {
  ts::TempDir dir;
  write_small(dir.path(), "not json\n");
  EXPECT_EQ(validate_dataset(dir.path()), validate_dataset(dir.path()));
}

TEST(Validate, TokenSaliencyWithoutAlignment) {
  ts::TempDir dir;
  write_small(dir.path());
  ts::spit(dir / "saliency/m/lrp/0.jsonl", R"({"doc_id":"d2","scores":[1,2,3,4,5],"level":"token"})" "\n");
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_NE(vs[0].message.find("without an alignment"), std::string::npos);
}

TEST(Validate, WordSaliencyLengthChecked) {
  ts::TempDir dir;
  write_small(dir.path());
  ts::spit(dir / "saliency/m/lrp/0.jsonl",
           R"({"doc_id":"d2","scores":[1,2,3,4]})" "\n" R"({"doc_id":"d1","scores":[1,2]})" "\n");
  auto vs = validate_dataset(dir.path());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].line, 2u);
  auto ds = load_dataset(dir.path());
  ASSERT_EQ(ds.saliency.size(), 1u);
  EXPECT_EQ(ds.saliency[0].method, Method::lrp);
}

TEST(Validate, TokenSaliencyAggregatedThroughAlignment) {
  ts::TempDir dir;
  write_small(dir.path());
  ts::spit(dir / "alignments/m.jsonl",
           R"({"doc_id":"d2","tokens":["[CLS]","La","ca","##sa","es","roja","[SEP]"],"word_ids":[null,0,1,1,2,3,null]})"
           "\n");
  ts::spit(dir / "saliency/m/grad-x-input/3.jsonl",
           R"({"doc_id":"d2","scores":[9,0.1,0.2,0.3,0.4,0.5,9],"level":"token"})" "\n");
  ASSERT_TRUE(validate_dataset(dir.path()).empty());
  auto ds = load_dataset(dir.path());
  ASSERT_EQ(ds.saliency.size(), 1u);
  EXPECT_EQ(ds.saliency[0].seed, 3);
  const auto& s = ds.saliency[0].scores;
  ASSERT_EQ(s.size(), 4u);
  EXPECT_NEAR(s[1], 0.5, 1e-12);
  EXPECT_NEAR(s[3], 0.5, 1e-12);
}

TEST(Validate, RecordOrderDoesNotMatter) {
  ts::TempDir a, b;
  gaze::SynthConfig cfg;
  cfg.n_docs = 5;
  cfg.n_participants = 6;
  gaze::generate_fixture(cfg, a / "ds");
  gaze::generate_fixture(cfg, b / "ds");
  // Break one trial so both copies carry a violation, then shuffle every
  // JSONL file in the second copy.
  for (auto* root : {&a, &b}) {
    auto lines = lines_of(ts::slurp(*root / "ds/trials.jsonl"));
    lines[2] = R"({"participant_id":"px","doc_id":"doc001","trt_ms":[1],"webgazer_accuracy":0.5,"answer_correct":true})";
    ts::spit(*root / "ds/trials.jsonl", join_lines(lines));
  }
  std::mt19937 rng(61);
  for (const auto& e : fs::recursive_directory_iterator(b / "ds")) {
    if (e.path().extension() != ".jsonl") continue;
    auto lines = lines_of(ts::slurp(e.path()));
    std::shuffle(lines.begin(), lines.end(), rng);
    ts::spit(e.path(), join_lines(lines));
  }
  auto da = load_dataset(a / "ds");
  auto db = load_dataset(b / "ds");
  EXPECT_EQ(without_lines(da.violations), without_lines(db.violations));
  EXPECT_EQ(da.violations.size(), 1u);
  EXPECT_EQ(da.trials, db.trials);
  ASSERT_EQ(da.saliency.size(), db.saliency.size());
  for (std::size_t i = 0; i < da.saliency.size(); ++i) {
    EXPECT_EQ(da.saliency[i].doc_id, db.saliency[i].doc_id);
    EXPECT_EQ(da.saliency[i].scores, db.saliency[i].scores);
  }
  EXPECT_EQ(da.predictions.size(), db.predictions.size());
}

TEST(Serialization, TrialRoundTrip) {
  TrialRecord t{"p", "d", {1, 2.5, 0}, 0.25, true, std::string("control"), false};
  EXPECT_EQ(parse_trial(to_json(t)), t);
  EXPECT_EQ(to_json(t).at("trt_ms").dump(), "[1,2.5,0]");
}

TEST(Serialization, AttentionRoundTrip) {
  ts::TempDir dir;
  attention::AttentionStack s;
  s.model_id = "m";
  s.doc_id = "d";
  s.seed = 2;
  s.layers = 1;
  s.heads = 1;
  s.tokens = 2;
  s.attn = {0.25, 0.75, 0.5, 0.5};
  s.align = {"d", {"a", "b"}, {0, 1}};
  ts::spit(dir / "a.json", to_json(s).dump());
  auto back = load_attention(dir / "a.json");
  EXPECT_EQ(back.attn, s.attn);
  EXPECT_EQ(back.seed, 2);
  EXPECT_EQ(back.align.word_ids, s.align.word_ids);
}
