#include "colt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "colt/error.hpp"
#include "colt/io.hpp"

namespace colt {

BipartiteGraph::BipartiteGraph(std::vector<std::string> left_ids,
                               std::vector<std::string> right_ids, std::vector<Edge> edges)
    : left_ids_(std::move(left_ids)),
      right_ids_(std::move(right_ids)),
      edges_(std::move(edges)),
      left_adj_(left_ids_.size()),
      right_adj_(right_ids_.size()) {
  std::set<Edge> seen;
  for (const auto& [l, r] : edges_) {
    if (l >= left_ids_.size() || r >= right_ids_.size()) {
      throw DataError("graph edge (" + std::to_string(l) + ", " + std::to_string(r) +
                      ") out of range");
    }
    if (!seen.insert({l, r}).second) {
      throw DataError("duplicate graph edge " + left_ids_[l] + " - " + right_ids_[r]);
    }
    left_adj_[l].push_back(r);
    right_adj_[r].push_back(l);
  }
  for (auto& adj : left_adj_) std::sort(adj.begin(), adj.end());
  for (auto& adj : right_adj_) std::sort(adj.begin(), adj.end());
}

void BipartiteGraph::require_no_isolated() const {
  for (std::size_t l = 0; l < left_adj_.size(); ++l) {
    if (left_adj_[l].empty()) throw DataError("isolated graph node " + left_ids_[l]);
  }
  for (std::size_t r = 0; r < right_adj_.size(); ++r) {
    if (right_adj_[r].empty()) throw DataError("isolated graph node " + right_ids_[r]);
  }
}

void BipartiteGraph::dump_edges(const std::filesystem::path& path) const {
  std::ostringstream out;
  for (const auto& [l, r] : edges_) out << left_ids_[l] << '\t' << right_ids_[r] << '\n';
  write_file_atomic(path, out.str());
}

namespace {

std::vector<double> inv_sqrt_degrees(const std::vector<std::size_t>& degrees) {
  std::vector<double> out(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    out[i] = 1.0 / std::sqrt(static_cast<double>(degrees[i]));
  }
  return out;
}

struct Normalizer {
  std::vector<double> left;
  std::vector<double> right;

  explicit Normalizer(const BipartiteGraph& g) {
    std::vector<std::size_t> dl(g.left_size()), dr(g.right_size());
    for (std::size_t i = 0; i < dl.size(); ++i) dl[i] = g.left_degree(i);
    for (std::size_t i = 0; i < dr.size(); ++i) dr[i] = g.right_degree(i);
    left = inv_sqrt_degrees(dl);
    right = inv_sqrt_degrees(dr);
  }
};

void check_inputs(const BipartiteGraph& graph, const Matrix& left0, const Matrix& right0,
                  int layers) {
  if (layers < 1) throw UsageError("propagation needs at least 1 layer, got " + std::to_string(layers));
  if (left0.rows() != graph.left_size() || right0.rows() != graph.right_size()) {
    throw UsageError("propagation input rows do not match graph sides");
  }
  if (left0.cols() != right0.cols()) throw UsageError("propagation input dims differ");
  graph.require_no_isolated();
}

// One LightGCN hop; neighbors accumulate in ascending index order.
void step(const BipartiteGraph& g, const Normalizer& norm, const Matrix& prev_left,
          const Matrix& prev_right, Matrix& next_left, Matrix& next_right) {
  next_left.set_zero();
  next_right.set_zero();
  for (std::size_t l = 0; l < g.left_size(); ++l) {
    auto out = next_left.row(l);
    for (std::size_t r : g.left_neighbors(l)) axpy(norm.left[l] * norm.right[r], prev_right.row(r), out);
  }
  for (std::size_t r = 0; r < g.right_size(); ++r) {
    auto out = next_right.row(r);
    for (std::size_t l : g.right_neighbors(r)) axpy(norm.left[l] * norm.right[r], prev_left.row(l), out);
  }
}

}  // namespace

PropagationState propagate(const BipartiteGraph& graph, const Matrix& left0, const Matrix& right0,
                           int layers) {
  check_inputs(graph, left0, right0, layers);
  const Normalizer norm(graph);
  PropagationState st;
  st.layers_left.push_back(left0);
  st.layers_right.push_back(right0);
  st.sum_left = left0;
  st.sum_right = right0;
  for (int i = 1; i <= layers; ++i) {
    Matrix nl(left0.rows(), left0.cols()), nr(right0.rows(), right0.cols());
    step(graph, norm, st.layers_left.back(), st.layers_right.back(), nl, nr);
    st.sum_left += nl;
    st.sum_right += nr;
    st.layers_left.push_back(std::move(nl));
    st.layers_right.push_back(std::move(nr));
  }
  return st;
}

void propagate_sums(const BipartiteGraph& graph, const Matrix& left0, const Matrix& right0,
                    int layers, Matrix& sum_left, Matrix& sum_right) {
  check_inputs(graph, left0, right0, layers);
  const Normalizer norm(graph);
  Matrix cur_left = left0, cur_right = right0;
  Matrix next_left(left0.rows(), left0.cols()), next_right(right0.rows(), right0.cols());
  sum_left = left0;
  sum_right = right0;
  for (int i = 1; i <= layers; ++i) {
    step(graph, norm, cur_left, cur_right, next_left, next_right);
    sum_left += next_left;
    sum_right += next_right;
    std::swap(cur_left, next_left);
    std::swap(cur_right, next_right);
  }
}

Matrix mean_pool(const BipartiteGraph& graph, const Matrix& right_values) {
  if (right_values.rows() != graph.right_size()) throw UsageError("mean_pool: row count mismatch");
  Matrix out(graph.left_size(), right_values.cols());
  for (std::size_t l = 0; l < graph.left_size(); ++l) {
    const auto& members = graph.left_neighbors(l);
    if (members.empty()) throw DataError("empty scene " + graph.left_ids()[l]);
    const double w = 1.0 / static_cast<double>(members.size());
    for (std::size_t r : members) axpy(w, right_values.row(r), out.row(l));
  }
  return out;
}

void mean_pool_backward(const BipartiteGraph& graph, const Matrix& grad_left, Matrix& grad_right) {
  for (std::size_t l = 0; l < graph.left_size(); ++l) {
    const auto& members = graph.left_neighbors(l);
    if (members.empty()) continue;
    const double w = 1.0 / static_cast<double>(members.size());
    for (std::size_t r : members) axpy(w, grad_left.row(l), grad_right.row(r));
  }
}

CollaborativeGraphs build_graphs(const Corpus& corpus, const SceneTable& scenes) {
  std::vector<std::string> query_ids, scene_ids, tool_ids;
  for (std::size_t q : scenes.train_queries) query_ids.push_back(corpus.queries()[q].query_id);
  for (const auto& s : scenes.scenes) scene_ids.push_back(s.scene_id);
  for (const auto& t : corpus.tools()) tool_ids.push_back(t.tool_id);

  CollaborativeGraphs g;
  g.query_scene = BipartiteGraph(query_ids, scene_ids, scenes.query_scene_edges);
  g.scene_tool = BipartiteGraph(scene_ids, tool_ids, scenes.scene_tool_edges);

  std::vector<long> compact(tool_ids.size(), -1);
  for (const auto& [q, t] : scenes.query_tool_edges) {
    if (compact[t] < 0) compact[t] = 0;
  }
  std::vector<std::string> qt_ids;
  for (std::size_t t = 0; t < tool_ids.size(); ++t) {
    if (compact[t] < 0) continue;
    compact[t] = static_cast<long>(g.qt_tools.size());
    g.qt_tools.push_back(t);
    qt_ids.push_back(tool_ids[t]);
  }
  std::vector<Edge> qt_edges;
  qt_edges.reserve(scenes.query_tool_edges.size());
  for (const auto& [q, t] : scenes.query_tool_edges) {
    qt_edges.emplace_back(q, static_cast<std::size_t>(compact[t]));
  }
  g.query_tool = BipartiteGraph(query_ids, std::move(qt_ids), std::move(qt_edges));
  return g;
}

}  // namespace colt
