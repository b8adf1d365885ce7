#pragma once

#include <cstddef>
#include <cstdint>

#include "colt/corpus.hpp"

namespace colt {

/// Generator for a corpus of fixed multi-tool bundles whose text is
/// ambiguous between sibling bundles.
///
/// Bundles come in groups of `bundles_per_domain` that share a domain
/// vocabulary; every tool description mixes its own topic words with its
/// domain words. Each query names the topic of only `mentioned_tools`
/// members of its bundle plus domain words, so the remaining members are
/// reachable through co-usage rather than text.
struct BundleCorpusOptions {
  std::size_t queries = 300;
  std::size_t bundles = 20;
  std::size_t tools_per_bundle = 3;
  std::size_t bundles_per_domain = 2;
  std::size_t domain_words = 4;
  std::size_t topic_words = 2;
  std::size_t mentioned_tools = 1;
  std::uint64_t seed = 1;
};

/// Queries are unsplit; gold sets are whole bundles.
Corpus make_bundle_corpus(const BundleCorpusOptions& options);

}  // namespace colt
