#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "colt/error.hpp"
#include "colt/io.hpp"
#include "colt/retrieval.hpp"
#include "oracles.hpp"

using namespace colt;
using colt::testing::random_matrix;

namespace {

EmbeddingTable table(const std::string& entity, const std::string& prefix, const Matrix& m) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < m.rows(); ++i) ids.push_back(prefix + std::to_string(i));
  return EmbeddingTable(entity, ids, m);
}

/// Random collaborative model with `nq` trained queries and `nt` tools.
TrainedModel random_model(Rng& rng, std::size_t nq, std::size_t nt, std::size_t dim) {
  TrainedModel m;
  m.query_base = table("query", "q", random_matrix(rng, nq, dim));
  m.query_scene_view = table("query", "q", random_matrix(rng, nq, dim));
  m.query_tool_view = table("query", "q", random_matrix(rng, nq, dim));
  m.tool_base = table("tool", "t", random_matrix(rng, nt, dim));
  m.tool_view = table("tool", "t", random_matrix(rng, nt, dim));
  return m;
}

std::vector<std::string> ids_of(const RankedList& r) {
  std::vector<std::string> out;
  for (const auto& e : r.entries) out.push_back(e.tool_id);
  return out;
}

}  // namespace

TEST(Score, Examples) {
  const std::vector<double> v{0.3, -1.0, 2.0};
  EXPECT_NEAR(score({v, v}, v), 2.0, 1e-15);
  const std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
  EXPECT_EQ(score({x, x}, y), 0.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Matrix m = random_matrix(rng, 3, 5);
    const double expected = cosine(m.row(0), m.row(2)) + cosine(m.row(1), m.row(2));
    const QueryRepresentation q{{m.row(0).begin(), m.row(0).end()}, {m.row(1).begin(), m.row(1).end()}};
    EXPECT_NEAR(score(q, m.row(2)), expected, 1e-9);
    EXPECT_LE(std::abs(score(q, m.row(2))), 2.0);
  }
}

TEST(Score, ZeroVectorIsAnError) {
  const std::vector<double> v{1.0, 0.0}, z{0.0, 0.0};
  EXPECT_THROW(score({v, v}, z), NumericalError);
}

TEST(EmbedUnseen, BothViewsAreTheSemanticVector) {
  const std::vector<double> v{0.1, 0.2, 0.3};
  const QueryRepresentation q = embed_unseen_query(v);
  EXPECT_EQ(q.scene_view, v);
  EXPECT_EQ(q.tool_view, v);
  EXPECT_THROW(embed_unseen_query(std::vector<double>{}), DataError);
}

TEST(Retriever, RoutesTrainedAndUnseenQueries) {
  Rng rng(2);
  const TrainedModel m = random_model(rng, 3, 6, 4);
  const Retriever r(m);
  EXPECT_TRUE(r.is_trained_query("q1"));
  EXPECT_FALSE(r.is_trained_query("new"));
  const QueryRepresentation trained = r.represent({"q1", {9.0, 9.0, 9.0, 9.0}});
  const auto s = m.query_scene_view.at("q1");
  EXPECT_EQ(trained.scene_view, std::vector<double>(s.begin(), s.end()));
  const QueryRepresentation unseen = r.represent({"new", {1.0, 2.0, 3.0, 4.0}});
  EXPECT_EQ(unseen.tool_view, (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  EXPECT_THROW(r.represent({"new", {}}), DataError);
  EXPECT_THROW(r.represent({"new", {1.0, 2.0}}), DataError);

  const RankedList list = r.retrieve_topk(QueryInput{"new", {1.0, 2.0, 3.0, 4.0}}, 6);
  for (const auto& e : list.entries) EXPECT_TRUE(std::isfinite(e.score));
}

TEST(Retriever, FullDepthIsAPermutationAndSorted) {
  Rng rng(3);
  const TrainedModel m = random_model(rng, 2, 9, 5);
  const Retriever r(m);
  const RankedList all = r.retrieve_topk(QueryInput{"q0", {}}, 9);
  EXPECT_EQ(all.k, 9u);
  const auto ids = ids_of(all);
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 9u);
  for (std::size_t i = 1; i < all.entries.size(); ++i) EXPECT_GE(all.entries[i - 1].score, all.entries[i].score);
  EXPECT_EQ(r.retrieve_topk(QueryInput{"q0", {}}, 50).entries.size(), 9u);
  EXPECT_THROW(r.retrieve_topk(QueryInput{"q0", {}}, 0), UsageError);
}

TEST(Retriever, TiesBreakByToolId) {
  TrainedModel m;
  Matrix tools(3, 2);
  tools(0, 0) = 1.0;
  tools(1, 0) = 2.0;  // same direction as row 0
  tools(2, 1) = 1.0;
  m.tool_view = EmbeddingTable("tool", {"zeta", "alpha", "mid"}, tools);
  m.tool_base = m.tool_view;
  Matrix q(1, 2);
  q(0, 0) = 1.0;
  m.query_scene_view = m.query_tool_view = m.query_base = EmbeddingTable("query", {"q"}, q);
  const Retriever r(m);
  EXPECT_EQ(ids_of(r.retrieve_topk(QueryInput{"q", {}}, 3)), (std::vector<std::string>{"alpha", "zeta", "mid"}));
}

TEST(Retriever, SmallerKIsAPrefix) {
  Rng rng(4);
  const TrainedModel m = random_model(rng, 4, 30, 6);
  const Retriever r(m);
  for (std::size_t q = 0; q < 4; ++q) {
    const QueryInput in{"q" + std::to_string(q), {}};
    const auto full = ids_of(r.retrieve_topk(in, 30));
    for (std::size_t k = 1; k <= 30; ++k) {
      const auto part = ids_of(r.retrieve_topk(in, k));
      ASSERT_TRUE(std::equal(part.begin(), part.end(), full.begin())) << "K=" << k;
    }
  }
}

TEST(Retriever, ReturnedScoresMatchRecomputation) {
  Rng rng(5);
  const TrainedModel m = random_model(rng, 3, 12, 4);
  const Retriever r(m);
  const QueryInput in{"q2", {}};
  const QueryRepresentation rep = r.represent(in);
  for (const auto& e : r.retrieve_topk(in, 12).entries) {
    EXPECT_NEAR(e.score, score(rep, m.tool_view.at(e.tool_id)), 1e-9);
  }
}

TEST(Retriever, RankingIgnoresPositiveRescalingOfOneTool) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    TrainedModel m = random_model(rng, 2, 10, 4);
    const auto before = ids_of(Retriever(m).retrieve_topk(QueryInput{"q0", {}}, 10));
    Matrix tv = m.tool_view.values();
    const std::size_t t = rng.uniform_index(10);
    const double alpha = 0.001 + 1000.0 * rng.uniform_real();
    for (double& v : tv.row(t)) v *= alpha;
    m.tool_view = EmbeddingTable("tool", m.tool_view.ids(), tv);
    EXPECT_EQ(ids_of(Retriever(m).retrieve_topk(QueryInput{"q0", {}}, 10)), before);
  }
}

TEST(Retriever, PassThroughScoresAreSingleCosine) {
  Rng rng(7);
  TrainedModel m = random_model(rng, 2, 5, 3);
  m.pass_through = true;
  m.query_scene_view = m.query_tool_view = m.query_base;
  m.tool_view = m.tool_base;
  const Retriever r(m);
  const std::vector<double> v{0.5, -0.2, 0.9};
  for (const auto& e : r.retrieve_topk(QueryInput{"unseen", v}, 5).entries) {
    EXPECT_NEAR(e.score, cosine(v, m.tool_base.at(e.tool_id)), 1e-15);
  }
  const auto base = m.query_base.at("q1");
  for (const auto& e : r.retrieve_topk(QueryInput{"q1", {}}, 5).entries) {
    EXPECT_NEAR(e.score, cosine(base, m.tool_base.at(e.tool_id)), 1e-15);
  }
}

TEST(Retriever, ThreadCountDoesNotChangeOutput) {
  Rng rng(8);
  const TrainedModel m = random_model(rng, 20, 40, 8);
  const Retriever r(m);
  std::vector<QueryInput> inputs;
  for (int i = 0; i < 20; ++i) inputs.push_back({"q" + std::to_string(i), {}});
  for (int i = 0; i < 7; ++i) {
    std::vector<double> v(8);
    for (double& x : v) x = rng.uniform_real() - 0.5;
    inputs.push_back({"u" + std::to_string(i), v});
  }
  const std::string one = serialize_run(r.retrieve_all(inputs, 5, 1));
  EXPECT_EQ(serialize_run(r.retrieve_all(inputs, 5, 4)), one);
  EXPECT_EQ(serialize_run(r.retrieve_all(inputs, 5, 64)), one);
}

TEST(RunFile, RoundTrip) {
  Rng rng(9);
  const TrainedModel m = random_model(rng, 3, 7, 4);
  const Retriever r(m);
  const auto run = r.retrieve_all({{"q0", {}}, {"q1", {}}, {"q2", {}}}, 4);
  const auto dir = colt::testing::scratch_dir("run_file");
  save_run(run, dir / "run.jsonl");
  const auto back = load_run(dir / "run.jsonl");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(serialize_run(back), serialize_run(run));
  const json first = json::parse(serialize_run(run).substr(0, serialize_run(run).find('\n')));
  EXPECT_EQ(first.at("query_id"), "q0");
  EXPECT_EQ(first.at("tools").size(), 4u);
}
