#include "colt/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "colt/error.hpp"
#include "colt/rng.hpp"

namespace colt {

namespace {

std::string pseudo_word(Rng& rng) {
  static constexpr char kConsonants[] = "bcdfghjklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  std::string w;
  for (int s = 0; s < 3; ++s) {
    w.push_back(kConsonants[rng.uniform_index(sizeof(kConsonants) - 1)]);
    w.push_back(kVowels[rng.uniform_index(sizeof(kVowels) - 1)]);
  }
  return w;
}

std::vector<std::string> fresh_words(Rng& rng, std::size_t n, std::set<std::string>& used) {
  std::vector<std::string> out;
  while (out.size() < n) {
    auto w = pseudo_word(rng);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

Corpus make_bundle_corpus(const BundleCorpusOptions& o) {
  if (o.bundles == 0 || o.tools_per_bundle == 0 || o.bundles_per_domain == 0 || o.queries == 0) {
    throw UsageError("bundle corpus: sizes must be positive");
  }
  if (o.mentioned_tools == 0 || o.mentioned_tools > o.tools_per_bundle) {
    throw UsageError("bundle corpus: mentioned_tools must lie in [1, tools_per_bundle]");
  }
  Rng rng(o.seed);
  std::set<std::string> used;
  const std::size_t domains = (o.bundles + o.bundles_per_domain - 1) / o.bundles_per_domain;
  std::vector<std::vector<std::string>> domain_vocab;
  for (std::size_t d = 0; d < domains; ++d) domain_vocab.push_back(fresh_words(rng, o.domain_words, used));

  std::vector<Tool> tools;
  std::vector<std::vector<std::string>> topic_vocab;
  std::vector<std::vector<std::size_t>> bundle_tools(o.bundles);
  for (std::size_t b = 0; b < o.bundles; ++b) {
    const auto& dom = domain_vocab[b / o.bundles_per_domain];
    for (std::size_t k = 0; k < o.tools_per_bundle; ++k) {
      auto topic = fresh_words(rng, o.topic_words, used);
      std::vector<std::string> words = topic;
      words.insert(words.end(), dom.begin(), dom.end());
      const std::size_t t = tools.size();
      tools.push_back({padded("t", t, 3), topic.front(), join(words)});
      topic_vocab.push_back(std::move(topic));
      bundle_tools[b].push_back(t);
    }
  }

  std::vector<Query> queries;
  for (std::size_t i = 0; i < o.queries; ++i) {
    const std::size_t b = i % o.bundles;
    const auto& members = bundle_tools[b];
    std::vector<std::size_t> order = members;
    rng.shuffle(order);
    std::vector<std::string> words;
    for (std::size_t m = 0; m < o.mentioned_tools; ++m) {
      const auto& topic = topic_vocab[order[m]];
      words.push_back(topic[rng.uniform_index(topic.size())]);
    }
    const auto& dom = domain_vocab[b / o.bundles_per_domain];
    std::vector<std::string> dom_pick = dom;
    rng.shuffle(dom_pick);
    dom_pick.resize(std::max<std::size_t>(1, dom.size() / 2));
    words.insert(words.end(), dom_pick.begin(), dom_pick.end());
    rng.shuffle(words);

    Query q;
    q.query_id = padded("q", i, 4);
    q.text = join(words);
    for (std::size_t t : members) q.gold_tools.push_back(tools[t].tool_id);
    queries.push_back(std::move(q));
  }
  return Corpus(std::move(tools), std::move(queries));
}

}  // namespace colt
