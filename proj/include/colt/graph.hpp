#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "colt/corpus.hpp"
#include "colt/matrix.hpp"

namespace colt {

/// Undirected bipartite graph stored as adjacency lists on both sides.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  /// Throws DataError on duplicate edges or out-of-range indices.
  BipartiteGraph(std::vector<std::string> left_ids, std::vector<std::string> right_ids,
                 std::vector<Edge> edges);

  const std::vector<std::string>& left_ids() const { return left_ids_; }
  const std::vector<std::string>& right_ids() const { return right_ids_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::size_t left_size() const { return left_ids_.size(); }
  std::size_t right_size() const { return right_ids_.size(); }

  std::size_t left_degree(std::size_t l) const { return left_adj_[l].size(); }
  std::size_t right_degree(std::size_t r) const { return right_adj_[r].size(); }

  /// Neighbors in ascending index order.
  const std::vector<std::size_t>& left_neighbors(std::size_t l) const { return left_adj_[l]; }
  const std::vector<std::size_t>& right_neighbors(std::size_t r) const { return right_adj_[r]; }

  /// Throws DataError naming the first node with no incident edge.
  void require_no_isolated() const;

  /// Writes `left_id<TAB>right_id` lines in edge order.
  void dump_edges(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> left_ids_;
  std::vector<std::string> right_ids_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> left_adj_;
  std::vector<std::vector<std::size_t>> right_adj_;
};

/// Layer-by-layer LightGCN outputs for one view. layers_left[0] and
/// layers_right[0] are the inputs; the sums run over layers 0..I.
struct PropagationState {
  std::vector<Matrix> layers_left;
  std::vector<Matrix> layers_right;
  Matrix sum_left;
  Matrix sum_right;

  std::size_t layer_count() const { return layers_left.empty() ? 0 : layers_left.size() - 1; }
};

/// Symmetrically normalized LightGCN propagation over `layers` >= 1 steps:
///   left^(i)_u  = sum_{v in N(u)} right^(i-1)_v / sqrt(|N(u)| |N(v)|)
///   right^(i)_v = sum_{u in N(v)} left^(i-1)_u  / sqrt(|N(u)| |N(v)|)
/// No self-loops; outputs are plain sums of layers 0..I. The map is linear
/// and self-adjoint, so the same call back-propagates gradients.
PropagationState propagate(const BipartiteGraph& graph, const Matrix& left0, const Matrix& right0,
                           int layers);

/// Same as propagate() but keeps only the layer sums.
void propagate_sums(const BipartiteGraph& graph, const Matrix& left0, const Matrix& right0,
                    int layers, Matrix& sum_left, Matrix& sum_right);

/// Row-wise mean over each left node's right neighbors: out_l = mean_{r in N(l)} x_r.
/// Used for scene pooling on the S-T graph (scenes on the left).
Matrix mean_pool(const BipartiteGraph& graph, const Matrix& right_values);

/// Adjoint of mean_pool: grad_right_r += sum_{l in N(r)} grad_left_l / |N(l)|.
void mean_pool_backward(const BipartiteGraph& graph, const Matrix& grad_left, Matrix& grad_right);

/// Outputs of one view: query rows and the rows of the other side.
struct ViewOutput {
  Matrix queries;
  Matrix others;
};

/// Scene-centric view on the Q-S graph: (e_q^S, e_s^S).
inline ViewOutput propagate_scene_view(const BipartiteGraph& query_scene, const Matrix& query0,
                                       const Matrix& scene0, int layers) {
  ViewOutput out;
  propagate_sums(query_scene, query0, scene0, layers, out.queries, out.others);
  return out;
}

/// Tool-centric view on the Q-T graph: (e_q^T, e_t^T).
inline ViewOutput propagate_tool_view(const BipartiteGraph& query_tool, const Matrix& query0,
                                      const Matrix& tool0, int layers) {
  ViewOutput out;
  propagate_sums(query_tool, query0, tool0, layers, out.queries, out.others);
  return out;
}

/// Layer-0 scene rows: mean of each scene's member tool rows.
inline Matrix init_scene_embeddings(const BipartiteGraph& scene_tool, const Matrix& tools) {
  return mean_pool(scene_tool, tools);
}

/// Tool-view scene rows: mean of each scene's member tool-view rows.
inline Matrix pool_scene_tool_view(const BipartiteGraph& scene_tool, const Matrix& tool_view) {
  return mean_pool(scene_tool, tool_view);
}

/// The three graphs derived from a scene table, with ids taken from the corpus.
/// The Q-T graph's right side lists only tools that have at least one train
/// query; `qt_tools` maps its right indices back to corpus tool indices.
struct CollaborativeGraphs {
  BipartiteGraph query_scene;
  BipartiteGraph query_tool;
  BipartiteGraph scene_tool;
  std::vector<std::size_t> qt_tools;
};

CollaborativeGraphs build_graphs(const Corpus& corpus, const SceneTable& scenes);

}  // namespace colt
