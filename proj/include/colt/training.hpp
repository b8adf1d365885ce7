#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "colt/corpus.hpp"
#include "colt/embedder.hpp"
#include "colt/graph.hpp"
#include "colt/matrix.hpp"
#include "colt/rng.hpp"

namespace colt {

enum class RankingLoss { kListwise, kPairwise };

/// Stage-2 hyper-parameters. The defaults are this project's choices; the
/// method itself is tuned per dataset.
struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  int layers = 2;
  double lambda = 0.1;
  double temperature = 0.2;
  std::size_t list_length = 32;
  std::size_t batch_size = 2048;
  int epochs = 100;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Ablation switches.
  bool collaborative = true;  // false: semantic-only scoring, no stage 2
  RankingLoss ranking_loss = RankingLoss::kListwise;
};

enum class Ablation { kSemantic, kCollaborative, kListwise, kContrastive };

/// Parses "semantic", "collab", "listwise" or "contrastive".
Ablation parse_ablation(const std::string& name);
const char* to_string(Ablation ablation);

/// Applies one ablation switch. kSemantic does not touch the config; it
/// selects the built-in embedder as the initial representation source.
TrainConfig ablate(TrainConfig config, Ablation ablation);

/// Clamps batch size and list length to the corpus and validates the rest.
/// Throws UsageError when an invariant cannot be met.
TrainConfig resolve_config(const TrainConfig& config, const Corpus& corpus, const SceneTable& scenes);

/// A query's training list: the gold tools first, then L - N_q negatives
/// drawn without replacement from the remaining tools.
struct ListSample {
  std::size_t query = 0;            // position in SceneTable::train_queries
  std::vector<std::size_t> tools;   // corpus tool indices
  std::vector<int> labels;          // 1 for gold, 0 otherwise
};

ListSample sample_list(std::size_t query, std::span<const std::size_t> gold, std::size_t num_tools,
                       std::size_t list_length, Rng& rng);

/// Cross-entropy between the uniform distribution over positives and the
/// softmax of `scores`, with both the p log p_hat and (1-p) log(1-p_hat)
/// terms. Writes dLoss/dScore into `grad` when it is non-empty.
double listwise_loss(std::span<const double> scores, std::span<const int> labels,
                     std::span<double> grad = {});

/// Mean logistic loss log(1 + exp(s_neg - s_pos)) over all positive/negative
/// pairs of the list.
double pairwise_loss(std::span<const double> scores, std::span<const int> labels,
                     std::span<double> grad = {});

/// In-batch cross-view InfoNCE. For each row i in `rows`, the positive is
/// positives[i] and the candidates are positives[j] for every j in `rows`:
///   -mean_i log softmax_j(cos(a_i, b_j) / tau)[i]
/// Gradients are accumulated into the given matrices when non-null.
double crossview_contrastive(const Matrix& anchors, const Matrix& positives,
                             std::span<const std::size_t> rows, double temperature,
                             Matrix* grad_anchors = nullptr, Matrix* grad_positives = nullptr);

/// Trainable stage-2 parameters: base query rows (train queries, in
/// SceneTable order) and base tool rows (corpus order).
struct Parameters {
  Matrix queries;
  Matrix tools;
};

/// Every representation family of one forward pass.
struct ForwardState {
  Matrix scene_init;        // e_s^(0)
  Matrix query_scene_view;  // e_q^S
  Matrix scene_scene_view;  // e_s^S
  Matrix query_tool_view;   // e_q^T
  Matrix tool_view;         // e_t^T, base rows for tools without train queries
  Matrix scene_tool_view;   // e_s^T
};

ForwardState forward(const CollaborativeGraphs& graphs, const Parameters& params, int layers);

struct Batch {
  std::vector<std::size_t> queries;  // train positions
  std::vector<ListSample> lists;     // one per query
  std::vector<std::size_t> scenes;   // distinct scenes of the queries, first-seen order
};

Batch make_batch(std::span<const std::size_t> queries, const Corpus& corpus,
                 const SceneTable& scenes, std::size_t list_length, Rng& rng);

struct LossBreakdown {
  double list = 0.0;
  double contrast_query = 0.0;
  double contrast_scene = 0.0;
  double total = 0.0;
};

/// L = L_list + lambda (L_CQ + L_CS) on one batch. L_list is the mean of the
/// per-query list losses. L_CS is zero when the batch touches fewer than two
/// scenes. When `grad` is non-null it receives dL/dParameters.
class Objective {
 public:
  Objective(const CollaborativeGraphs& graphs, const TrainConfig& config)
      : graphs_(graphs), config_(config) {}

  LossBreakdown evaluate(const Parameters& params, const Batch& batch,
                         Parameters* grad = nullptr) const;

 private:
  const CollaborativeGraphs& graphs_;
  TrainConfig config_;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;  // means over the epoch's batches
};

/// Line `epoch,L_list,L_CQ,L_CS,total` with shortest round-trip doubles.
std::string format_epoch_log(const EpochLog& log);

struct TrainedModel {
  TrainConfig config;
  bool pass_through = false;  // semantic-only scoring

  EmbeddingTable query_base;        // e_q^(0), train queries
  EmbeddingTable tool_base;         // e_t^(0), every tool
  EmbeddingTable query_scene_view;  // e_q^S
  EmbeddingTable query_tool_view;   // e_q^T
  EmbeddingTable tool_view;         // e_t^T
  EmbeddingTable scene_scene_view;  // e_s^S
  EmbeddingTable scene_tool_view;   // e_s^T
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Collaborative learning. `query_init` must cover every train query and
/// `tool_init` every tool. Deterministic for a given config. A non-finite
/// loss raises NumericalError naming the epoch and batch.
TrainedModel train(const Corpus& corpus, const SceneTable& scenes, const CollaborativeGraphs& graphs,
                   const EmbeddingTable& query_init, const EmbeddingTable& tool_init,
                   const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace colt
