#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "colt/corpus.hpp"
#include "colt/retrieval.hpp"

namespace colt {

// Per-query metrics over binary relevance. `retrieved` is a ranking; only
// its first K entries count. All throw UsageError on an empty gold set.

/// |gold ∩ top-K| / |gold|
double recall_at_k(std::span<const std::string> gold, std::span<const std::string> retrieved,
                   std::size_t k);

/// DCG / IDCG with gain 1 per hit and discount 1/log2(rank + 1).
double ndcg_at_k(std::span<const std::string> gold, std::span<const std::string> retrieved,
                 std::size_t k);

/// 1 when every gold tool is in the top K, else 0. K < |gold| is allowed
/// and always yields 0.
int comp_at_k(std::span<const std::string> gold, std::span<const std::string> retrieved,
              std::size_t k);

/// Key used for metrics evaluated at K = |gold| per query.
inline constexpr const char* kAtGoldSize = "|N|";

/// metric name ("recall", "ndcg", "comp") -> K label -> mean value.
using MetricTable = std::map<std::string, std::map<std::string, double>>;

struct EvalReport {
  std::size_t query_count = 0;
  MetricTable metrics;
  // Keyed by gold-set size; present when the breakdown was requested.
  std::map<std::size_t, std::size_t> group_sizes;
  std::map<std::size_t, MetricTable> breakdown;
};

/// Means over `queries` (corpus indices). Every query needs a list in `run`;
/// missing ones raise DataError listing their ids. With `breakdown` set, the
/// @|N| metrics are added and results are also grouped by gold-set size.
EvalReport evaluate(const std::vector<RankedList>& run, const Corpus& corpus,
                    const std::vector<std::size_t>& queries, const std::vector<std::size_t>& ks,
                    bool breakdown);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);
void save_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace colt
