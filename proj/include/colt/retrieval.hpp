#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "colt/training.hpp"

namespace colt {

/// A query's two view vectors. Unseen queries carry their semantic vector
/// in both slots.
struct QueryRepresentation {
  std::vector<double> scene_view;
  std::vector<double> tool_view;
};

/// Dual-view matching score: sim(e_q^S, e_t^T) + sim(e_q^T, e_t^T).
double score(const QueryRepresentation& query, std::span<const double> tool_view);

/// Unseen queries have no graph edges, so only the layer-0 term survives.
QueryRepresentation embed_unseen_query(std::span<const double> semantic);

struct RankedEntry {
  std::string tool_id;
  double score = 0.0;
};

/// Descending score; equal scores order by tool_id ascending.
struct RankedList {
  std::string query_id;
  std::size_t k = 0;
  std::vector<RankedEntry> entries;
};

/// Input for one retrieval request. `semantic` may be empty for queries the
/// model was trained on.
struct QueryInput {
  std::string query_id;
  std::vector<double> semantic;
};

class Retriever {
 public:
  explicit Retriever(const TrainedModel& model);

  bool is_trained_query(const std::string& query_id) const;

  /// Trained ids route to their propagated views; others need `semantic`.
  /// Throws DataError when an unseen query has no vector.
  QueryRepresentation represent(const QueryInput& input) const;

  /// Exact top-K by full scan. Pass-through models score with a single
  /// cosine between base vectors.
  RankedList retrieve_topk(const std::string& query_id, const QueryRepresentation& query,
                           std::size_t k) const;

  RankedList retrieve_topk(const QueryInput& input, std::size_t k) const;

  /// Runs every input; `threads` > 1 splits queries across workers. Output
  /// order matches input order and does not depend on the thread count.
  std::vector<RankedList> retrieve_all(const std::vector<QueryInput>& inputs, std::size_t k,
                                       unsigned threads = 1) const;

  std::size_t tool_count() const { return model_.tool_view.size(); }

 private:
  const TrainedModel& model_;
};

/// One JSON line per list: {"query_id", "tools": [{"tool_id", "score"}, ...]}.
std::string serialize_run(const std::vector<RankedList>& run);
void save_run(const std::vector<RankedList>& run, const std::filesystem::path& path);
std::vector<RankedList> load_run(const std::filesystem::path& path);

}  // namespace colt
