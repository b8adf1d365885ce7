#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace colt {

struct Tool {
  std::string tool_id;
  std::string name;
  std::string description;
};

enum class Split { kTrain, kTest };

const char* to_string(Split split);

struct Query {
  std::string query_id;
  std::string text;
  std::vector<std::string> gold_tools;  // ordered, deduplicated
  std::optional<Split> split;           // unset until split() assigns one
};

/// Tools, queries and their ground-truth annotations. Iteration order is
/// file order; lookups by id go through the index maps.
class Corpus {
 public:
  Corpus() = default;

  /// Validates every invariant and builds the id indices. Throws DataError.
  Corpus(std::vector<Tool> tools, std::vector<Query> queries);

  const std::vector<Tool>& tools() const { return tools_; }
  const std::vector<Query>& queries() const { return queries_; }

  std::optional<std::size_t> tool_index(const std::string& id) const;
  std::optional<std::size_t> query_index(const std::string& id) const;

  /// Gold tools of query `q` as tool indices, in annotation order.
  const std::vector<std::size_t>& gold_indices(std::size_t q) const { return gold_indices_[q]; }

  /// Query indices with the given split tag, in corpus order.
  std::vector<std::size_t> queries_in(Split split) const;

  /// True when every query carries a split tag.
  bool fully_split() const;

  std::size_t max_gold_size(Split split) const;

 private:
  friend Corpus split(const Corpus&, double, std::uint64_t);

  std::vector<Tool> tools_;
  std::vector<Query> queries_;
  std::vector<std::vector<std::size_t>> gold_indices_;
  std::unordered_map<std::string, std::size_t> tool_index_;
  std::unordered_map<std::string, std::size_t> query_index_;
};

/// Reads the line-delimited JSON tools and queries files.
Corpus load_corpus(const std::filesystem::path& tools_path,
                   const std::filesystem::path& queries_path);

void save_tools(const Corpus& corpus, const std::filesystem::path& path);
void save_queries(const Corpus& corpus, const std::filesystem::path& path);

/// Assigns train/test tags. Queries that already carry a tag keep it; the
/// untagged ones are shuffled with `seed` and round(fraction * n) of them go
/// to test, clamped so each side of the final split is non-empty.
Corpus split(const Corpus& corpus, double test_fraction, std::uint64_t seed);

struct Scene {
  std::string scene_id;
  std::vector<std::size_t> member_tools;  // tool indices, ascending
};

using Edge = std::pair<std::size_t, std::size_t>;

/// Scenes of the train split plus the three bipartite edge lists. Query
/// indices on the left of Q-S and Q-T are positions in `train_queries`.
struct SceneTable {
  std::vector<std::size_t> train_queries;  // corpus query indices
  std::vector<Scene> scenes;
  std::vector<std::size_t> query_scene;  // scene index per train query
  std::vector<Edge> query_scene_edges;
  std::vector<Edge> query_tool_edges;
  std::vector<Edge> scene_tool_edges;
};

/// One scene per distinct gold-tool set among train queries; scene ids are
/// "s<k>" in order of first appearance.
SceneTable derive_scenes(const Corpus& corpus);

}  // namespace colt
