#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "colt/corpus.hpp"
#include "colt/error.hpp"
#include "oracles.hpp"

using namespace colt;

namespace {

std::filesystem::path write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << "\n";
  return path;
}

Query train_query(std::string id, std::vector<std::string> gold) {
  return {std::move(id), "text", std::move(gold), Split::kTrain};
}

std::vector<Tool> abc_tools() {
  return {{"a", "A", "tool a"}, {"b", "B", "tool b"}, {"c", "C", "tool c"}};
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

/// Scene membership as a multiset of tool-id sets, one entry per train query.
std::multiset<std::set<std::string>> membership(const Corpus& c, const SceneTable& t) {
  std::multiset<std::set<std::string>> out;
  for (std::size_t i = 0; i < t.train_queries.size(); ++i) {
    std::set<std::string> ids;
    for (std::size_t tool : t.scenes[t.query_scene[i]].member_tools) ids.insert(c.tools()[tool].tool_id);
    out.insert(ids);
  }
  return out;
}

Corpus numbered_corpus(std::size_t queries) {
  std::vector<Tool> tools{{"t", "T", "a tool"}};
  std::vector<Query> qs;
  for (std::size_t i = 0; i < queries; ++i) qs.push_back({"q" + std::to_string(i), "x", {"t"}, {}});
  return Corpus(std::move(tools), std::move(qs));
}

}  // namespace

TEST(LoadCorpus, MinimalValidInput) {
  const auto dir = colt::testing::scratch_dir("corpus_min");
  const auto tools = write_lines(dir / "tools.jsonl",
                                 {R"({"tool_id": "t1", "name": "One", "description": "first"})",
                                  R"({"tool_id": "t2", "name": "Two", "description": "second"})"});
  const auto queries = write_lines(dir / "queries.jsonl",
                                   {R"({"query_id": "q1", "text": "use both", "tool_ids": ["t1", "t2"]})"});
  const Corpus c = load_corpus(tools, queries);
  EXPECT_EQ(c.tools().size(), 2u);
  ASSERT_EQ(c.queries().size(), 1u);
  EXPECT_EQ(c.queries()[0].gold_tools, (std::vector<std::string>{"t1", "t2"}));
  EXPECT_EQ(c.gold_indices(0), (std::vector<std::size_t>{0, 1}));
  EXPECT_FALSE(c.queries()[0].split.has_value());
}

TEST(LoadCorpus, UnknownToolIsNamed) {
  const auto dir = colt::testing::scratch_dir("corpus_unknown");
  const auto tools = write_lines(dir / "tools.jsonl", {R"({"tool_id": "t1", "name": "", "description": "d"})"});
  const auto queries =
      write_lines(dir / "queries.jsonl", {R"({"query_id": "q1", "text": "q", "tool_ids": ["t1", "x"]})"});
  const std::string msg = error_of([&] { load_corpus(tools, queries); });
  EXPECT_NE(msg.find("unknown tool_id x"), std::string::npos) << msg;
  EXPECT_THROW(load_corpus(tools, queries), DataError);
}

TEST(LoadCorpus, MalformedLineReportsLineNumber) {
  const auto dir = colt::testing::scratch_dir("corpus_malformed");
  const auto tools = write_lines(dir / "tools.jsonl", {R"({"tool_id": "t1", "name": "", "description": "d"})",
                                                       R"({"tool_id": "t2", "name": "", "description": )"});
  const auto queries =
      write_lines(dir / "queries.jsonl", {R"({"query_id": "q1", "text": "q", "tool_ids": ["t1"]})"});
  const std::string msg = error_of([&] { load_corpus(tools, queries); });
  EXPECT_NE(msg.find("2"), std::string::npos) << msg;
  EXPECT_THROW(load_corpus(tools, queries), DataError);
}

TEST(LoadCorpus, ExplicitSplitTagsAreRead) {
  const Corpus c = colt::testing::smoke_corpus();
  EXPECT_EQ(c.queries().size(), 8u);
  const auto dir = colt::testing::scratch_dir("corpus_split");
  const auto tools = write_lines(dir / "tools.jsonl", {R"({"tool_id": "t1", "name": "", "description": "d"})"});
  const auto queries = write_lines(
      dir / "queries.jsonl",
      {R"({"query_id": "q1", "text": "q", "tool_ids": ["t1"], "split": "test"})",
       R"({"query_id": "q2", "text": "q", "tool_ids": ["t1"], "split": "train"})"});
  const Corpus s = load_corpus(tools, queries);
  EXPECT_EQ(s.queries()[0].split, Split::kTest);
  EXPECT_EQ(s.queries()[1].split, Split::kTrain);
  EXPECT_TRUE(s.fully_split());
}

TEST(Corpus, RejectsInvalidRecords) {
  EXPECT_THROW(Corpus({{"a", "", "x"}, {"a", "", "y"}}, {}), DataError);
  EXPECT_THROW(Corpus({{"a", "", ""}}, {}), DataError);
  EXPECT_THROW(Corpus(abc_tools(), {train_query("q", {})}), DataError);
  EXPECT_THROW(Corpus(abc_tools(), {train_query("q", {"a"}), train_query("q", {"b"})}), DataError);
}

TEST(Corpus, DuplicateGoldToolsAreCollapsed) {
  const Corpus c(abc_tools(), {train_query("q", {"b", "a", "b"})});
  EXPECT_EQ(c.queries()[0].gold_tools, (std::vector<std::string>{"b", "a"}));
}

TEST(Corpus, SaveLoadRoundTrip) {
  const Corpus c = colt::testing::smoke_corpus();
  const auto dir = colt::testing::scratch_dir("corpus_roundtrip");
  save_tools(c, dir / "tools.jsonl");
  save_queries(c, dir / "queries.jsonl");
  const Corpus back = load_corpus(dir / "tools.jsonl", dir / "queries.jsonl");
  ASSERT_EQ(back.queries().size(), c.queries().size());
  for (std::size_t i = 0; i < c.queries().size(); ++i) {
    EXPECT_EQ(back.queries()[i].query_id, c.queries()[i].query_id);
    EXPECT_EQ(back.queries()[i].gold_tools, c.queries()[i].gold_tools);
    EXPECT_EQ(back.queries()[i].text, c.queries()[i].text);
  }
  EXPECT_EQ(back.tools()[3].description, c.tools()[3].description);
}

TEST(DeriveScenes, TwoDistinctSets) {
  const Corpus c(abc_tools(), {train_query("q1", {"a", "b"}), train_query("q2", {"b", "a"}),
                               train_query("q3", {"c"})});
  const SceneTable t = derive_scenes(c);
  EXPECT_EQ(t.scenes.size(), 2u);
  EXPECT_EQ(t.query_scene_edges.size(), 3u);
  EXPECT_EQ(t.scene_tool_edges.size(), 3u);
  EXPECT_EQ(t.query_tool_edges.size(), 5u);
  EXPECT_EQ(t.scenes[0].scene_id, "s0");
  EXPECT_EQ(t.query_scene, (std::vector<std::size_t>{0, 0, 1}));
}

TEST(DeriveScenes, SingleQuerySingleton) {
  const Corpus c(abc_tools(), {train_query("q1", {"a"})});
  const SceneTable t = derive_scenes(c);
  EXPECT_EQ(t.scenes.size(), 1u);
  EXPECT_EQ(t.query_scene_edges.size(), 1u);
  EXPECT_EQ(t.scene_tool_edges.size(), 1u);
  EXPECT_EQ(t.query_tool_edges.size(), 1u);
}

TEST(DeriveScenes, EmptyTrainSplitIsAnError) {
  const Corpus c(abc_tools(), {{"q1", "x", {"a"}, Split::kTest}});
  EXPECT_THROW(derive_scenes(c), DataError);
}

TEST(DeriveScenes, TestQueriesContributeNothing) {
  const Corpus c(abc_tools(), {train_query("q1", {"a"}), {"q2", "x", {"b", "c"}, Split::kTest}});
  const SceneTable t = derive_scenes(c);
  EXPECT_EQ(t.train_queries, (std::vector<std::size_t>{0}));
  EXPECT_EQ(t.scenes.size(), 1u);
  EXPECT_EQ(t.query_tool_edges.size(), 1u);
}

TEST(DeriveScenes, EdgeCountsAndOrderInsensitivity) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tool> tools;
    for (int i = 0; i < 6; ++i) tools.push_back({"t" + std::to_string(i), "", "d"});
    std::vector<Query> qs;
    for (int i = 0; i < 12; ++i) {
      std::set<std::string> g;
      const std::size_t n = 1 + rng.uniform_index(3);
      while (g.size() < n) g.insert("t" + std::to_string(rng.uniform_index(6)));
      std::vector<std::string> gold(g.begin(), g.end());
      rng.shuffle(gold);
      qs.push_back(train_query("q" + std::to_string(i), gold));
    }
    const Corpus c(tools, qs);
    const SceneTable t = derive_scenes(c);
    std::size_t gold_total = 0;
    std::set<std::set<std::size_t>> distinct;
    std::set<std::size_t> used_tools, st_tools;
    for (std::size_t q = 0; q < c.queries().size(); ++q) {
      gold_total += c.gold_indices(q).size();
      distinct.insert({c.gold_indices(q).begin(), c.gold_indices(q).end()});
      used_tools.insert(c.gold_indices(q).begin(), c.gold_indices(q).end());
    }
    for (auto [s, tool] : t.scene_tool_edges) st_tools.insert(tool);
    EXPECT_EQ(t.query_tool_edges.size(), gold_total);
    EXPECT_EQ(t.query_scene_edges.size(), c.queries().size());
    EXPECT_EQ(t.scenes.size(), distinct.size());
    EXPECT_EQ(st_tools, used_tools);

    auto shuffled = qs;
    rng.shuffle(shuffled);
    const Corpus c2(tools, shuffled);
    EXPECT_EQ(membership(c, t), membership(c2, derive_scenes(c2)));
    // Idempotent.
    EXPECT_EQ(membership(c, derive_scenes(c)), membership(c, t));
  }
}

TEST(Split, TenQueriesOneTestDeterministic) {
  const Corpus c = numbered_corpus(10);
  const Corpus a = split(c, 0.1, 7), b = split(c, 0.1, 7);
  EXPECT_EQ(a.queries_in(Split::kTest).size(), 1u);
  EXPECT_EQ(a.queries_in(Split::kTest), b.queries_in(Split::kTest));
  EXPECT_TRUE(a.fully_split());
}

TEST(Split, LargeCorpusRoundsFraction) {
  const Corpus c = numbered_corpus(18770);
  const Corpus s = split(c, 0.1, 1);
  EXPECT_EQ(s.queries_in(Split::kTest).size(), 1877u);
  EXPECT_EQ(s.queries_in(Split::kTrain).size(), 18770u - 1877u);
}

TEST(Split, BadArguments) {
  const Corpus c = numbered_corpus(10);
  EXPECT_THROW(split(c, 1.5, 0), UsageError);
  EXPECT_THROW(split(c, 0.0, 0), UsageError);
  EXPECT_THROW(split(c, 1.0, 0), UsageError);
  EXPECT_THROW(split(numbered_corpus(1), 0.5, 0), DataError);
}

TEST(Split, KeepsBothSidesNonEmpty) {
  EXPECT_EQ(split(numbered_corpus(3), 0.01, 0).queries_in(Split::kTest).size(), 1u);
  EXPECT_EQ(split(numbered_corpus(3), 0.99, 0).queries_in(Split::kTrain).size(), 1u);
}

TEST(Split, ExistingTagsAreKept) {
  const Corpus c(abc_tools(), {{"q1", "x", {"a"}, Split::kTest},
                               {"q2", "x", {"a"}, {}},
                               {"q3", "x", {"b"}, {}},
                               {"q4", "x", {"c"}, Split::kTrain}});
  const Corpus s = split(c, 0.5, 3);
  EXPECT_EQ(s.queries()[0].split, Split::kTest);
  EXPECT_EQ(s.queries()[3].split, Split::kTrain);
  EXPECT_TRUE(s.fully_split());
}

TEST(Split, DifferentSeedsUsuallyDiffer) {
  const Corpus c = numbered_corpus(100);
  EXPECT_NE(split(c, 0.1, 1).queries_in(Split::kTest), split(c, 0.1, 2).queries_in(Split::kTest));
}
