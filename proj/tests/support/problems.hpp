#pragma once

#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "colt/training.hpp"
#include "oracles.hpp"

namespace colt::testing {

/// Random corpus with a handful of multi-tool scenes, all queries in train.
inline Corpus random_corpus(Rng& rng, std::size_t tools, std::size_t queries) {
  std::vector<Tool> ts;
  for (std::size_t t = 0; t < tools; ++t) {
    ts.push_back({"t" + std::to_string(t), "", "tool " + std::to_string(t)});
  }
  std::vector<std::vector<std::string>> bundles;
  for (int b = 0; b < 4; ++b) {
    std::set<std::string> members;
    const std::size_t size = 1 + rng.uniform_index(3);
    while (members.size() < size) members.insert("t" + std::to_string(rng.uniform_index(tools)));
    bundles.emplace_back(members.begin(), members.end());
  }
  std::vector<Query> qs;
  for (std::size_t i = 0; i < queries; ++i) {
    Query q;
    q.query_id = "q" + std::to_string(i);
    q.text = "query";
    q.gold_tools = bundles[rng.uniform_index(bundles.size())];
    q.split = Split::kTrain;
    qs.push_back(std::move(q));
  }
  return Corpus(std::move(ts), std::move(qs));
}

struct Problem {
  Corpus corpus;
  SceneTable scenes;
  CollaborativeGraphs graphs;
  Parameters params;
  Batch batch;
};

inline Problem make_problem(std::uint64_t seed, std::size_t dim = 4) {
  Rng rng(seed);
  Problem p;
  p.corpus = random_corpus(rng, 7, 6);
  p.scenes = derive_scenes(p.corpus);
  p.graphs = build_graphs(p.corpus, p.scenes);
  p.params.queries = random_matrix(rng, p.scenes.train_queries.size(), dim);
  p.params.tools = random_matrix(rng, p.corpus.tools().size(), dim);
  std::vector<std::size_t> members(p.scenes.train_queries.size());
  std::iota(members.begin(), members.end(), std::size_t{0});
  rng.shuffle(members);
  members.resize(4);
  p.batch = make_batch(members, p.corpus, p.scenes, 5, rng);
  return p;
}

}  // namespace colt::testing
