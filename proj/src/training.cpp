#include "colt/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include "colt/error.hpp"
#include "colt/optimizer.hpp"

namespace colt {

Ablation parse_ablation(const std::string& name) {
  if (name == "semantic") return Ablation::kSemantic;
  if (name == "collab" || name == "collaborative") return Ablation::kCollaborative;
  if (name == "listwise") return Ablation::kListwise;
  if (name == "contrastive") return Ablation::kContrastive;
  throw UsageError("unknown ablation '" + name +
                   "' (expected semantic, collab, listwise or contrastive)");
}

const char* to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::kSemantic: return "semantic";
    case Ablation::kCollaborative: return "collab";
    case Ablation::kListwise: return "listwise";
    case Ablation::kContrastive: return "contrastive";
  }
  return "?";
}

TrainConfig ablate(TrainConfig config, Ablation ablation) {
  switch (ablation) {
    case Ablation::kSemantic: break;
    case Ablation::kCollaborative: config.collaborative = false; break;
    case Ablation::kListwise: config.ranking_loss = RankingLoss::kPairwise; break;
    case Ablation::kContrastive: config.lambda = 0.0; break;
  }
  return config;
}

TrainConfig resolve_config(const TrainConfig& config, const Corpus& corpus, const SceneTable& scenes) {
  TrainConfig c = config;
  auto fail = [](const std::string& msg) { throw UsageError("invalid training config: " + msg); };
  if (!(c.learning_rate > 0.0)) fail("learning rate must be > 0");
  if (!(c.weight_decay >= 0.0)) fail("weight decay must be >= 0");
  if (c.layers < 1) fail("layers must be >= 1");
  if (!(c.lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(c.temperature > 0.0)) fail("temperature must be > 0");
  if (c.epochs < 0) fail("epochs must be >= 0");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    fail("adam betas must lie in [0,1)");
  }
  if (!(c.epsilon > 0.0)) fail("adam epsilon must be > 0");
  if (c.batch_size < 2) fail("batch size must be >= 2");

  const std::size_t n_train = scenes.train_queries.size();
  if (c.collaborative && n_train < 2) fail("need at least 2 train queries");
  c.batch_size = std::min(c.batch_size, n_train);

  c.list_length = std::min(c.list_length, corpus.tools().size());
  const std::size_t max_gold = corpus.max_gold_size(Split::kTrain);
  if (c.list_length <= max_gold) {
    fail("list length " + std::to_string(c.list_length) + " leaves no negatives for a " +
         std::to_string(max_gold) + "-tool query");
  }
  return c;
}

ListSample sample_list(std::size_t query, std::span<const std::size_t> gold, std::size_t num_tools,
                       std::size_t list_length, Rng& rng) {
  if (list_length <= gold.size()) {
    throw UsageError("list length " + std::to_string(list_length) + " must exceed gold size " +
                     std::to_string(gold.size()));
  }
  if (list_length > num_tools) {
    throw UsageError("list length " + std::to_string(list_length) + " exceeds tool count " +
                     std::to_string(num_tools));
  }
  ListSample s;
  s.query = query;
  s.tools.assign(gold.begin(), gold.end());
  s.labels.assign(gold.size(), 1);

  const std::size_t need = list_length - gold.size();
  std::vector<char> taken(num_tools, 0);
  for (std::size_t t : gold) taken[t] = 1;
  if (2 * need <= num_tools - gold.size()) {
    while (s.tools.size() < list_length) {
      const std::size_t t = rng.uniform_index(num_tools);
      if (taken[t]) continue;
      taken[t] = 1;
      s.tools.push_back(t);
    }
  } else {
    std::vector<std::size_t> pool;
    for (std::size_t t = 0; t < num_tools; ++t) {
      if (!taken[t]) pool.push_back(t);
    }
    for (std::size_t i = 0; i < need; ++i) {
      std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
      s.tools.push_back(pool[i]);
    }
  }
  s.labels.resize(list_length, 0);
  return s;
}

namespace {

void check_labels(std::span<const double> scores, std::span<const int> labels, std::span<double> grad,
                  std::size_t& positives) {
  if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
  if (!grad.empty() && grad.size() != scores.size()) throw UsageError("gradient buffer size mismatch");
  positives = 0;
  for (int y : labels) positives += (y != 0);
  if (positives == 0 || positives == labels.size()) {
    throw UsageError("list needs at least one positive and one negative label");
  }
}

// log(1 - exp(x)) for x <= 0.
double log1mexp(double x) {
  return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

}  // namespace

double listwise_loss(std::span<const double> scores, std::span<const int> labels,
                     std::span<double> grad) {
  std::size_t npos = 0;
  check_labels(scores, labels, grad, npos);
  const std::size_t n = scores.size();
  const double max_s = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - max_s);
  const double lse = max_s + std::log(z);

  std::vector<double> log_p(n), log_q(n), target(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    log_p[i] = scores[i] - lse;
    log_q[i] = log1mexp(log_p[i]);
    target[i] = labels[i] ? 1.0 / static_cast<double>(npos) : 0.0;
    // 0 * log(.) terms are dropped so a saturated softmax stays finite where it can.
    if (target[i] > 0.0) loss -= target[i] * log_p[i];
    if (target[i] < 1.0) loss -= (1.0 - target[i]) * log_q[i];
  }
  if (!grad.empty()) {
    // dL/ds_k = p_hat_k - p_k + w_k - p_hat_k * sum_i w_i,
    // w_i = (1 - p_i) p_hat_i / (1 - p_hat_i).
    std::vector<double> w(n);
    double w_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = (1.0 - target[i]) * std::exp(log_p[i] - log_q[i]);
      w_sum += w[i];
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double p_hat = std::exp(log_p[k]);
      grad[k] = p_hat - target[k] + w[k] - p_hat * w_sum;
    }
  }
  return loss;
}

double pairwise_loss(std::span<const double> scores, std::span<const int> labels,
                     std::span<double> grad) {
  std::size_t npos = 0;
  check_labels(scores, labels, grad, npos);
  const std::size_t n = scores.size();
  const double pairs = static_cast<double>(npos * (n - npos));
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[j]) continue;
      const double margin = scores[j] - scores[i];
      // softplus(margin), and its derivative sigmoid(margin)
      loss += margin > 0 ? margin + std::log1p(std::exp(-margin)) : std::log1p(std::exp(margin));
      if (!grad.empty()) {
        const double sig = 1.0 / (1.0 + std::exp(-margin));
        grad[j] += sig / pairs;
        grad[i] -= sig / pairs;
      }
    }
  }
  return loss / pairs;
}

namespace {

// d cos(a,b) scaled by `g`, accumulated into ga and gb.
void cosine_backward(std::span<const double> a, std::span<const double> b, double g,
                     std::span<double> ga, std::span<double> gb) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw NumericalError("cosine: zero-norm vector");
  const double inv = 1.0 / (na * nb);
  const double c = dot(a, b) * inv;
  const double ca = c / (na * na);
  const double cb = c / (nb * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ga[i] += g * (b[i] * inv - ca * a[i]);
    gb[i] += g * (a[i] * inv - cb * b[i]);
  }
}

Matrix normalized_rows(const Matrix& m, std::span<const std::size_t> rows, std::vector<double>& norms) {
  Matrix out(rows.size(), m.cols());
  norms.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    const double n = std::sqrt(dot(src, src));
    if (n == 0.0) throw NumericalError("contrastive: zero-norm vector");
    norms[i] = n;
    auto dst = out.row(i);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] / n;
  }
  return out;
}

// Back-propagates through x_hat = x / |x|: dx = (g - (g . x_hat) x_hat) / |x|.
void normalize_backward(std::span<const double> x_hat, double norm, std::span<const double> g,
                        double scale, std::span<double> out) {
  const double proj = dot(g, x_hat);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += scale * (g[k] - proj * x_hat[k]) / norm;
}

double contrastive_impl(const Matrix& anchors, const Matrix& positives,
                        std::span<const std::size_t> rows, double tau, double scale,
                        Matrix* grad_anchors, Matrix* grad_positives) {
  const std::size_t b = rows.size();
  if (b < 2) throw UsageError("contrastive loss needs a batch of at least 2");
  if (!(tau > 0.0)) throw UsageError("temperature must be > 0");
  if (anchors.cols() != positives.cols()) throw UsageError("contrastive: view dims differ");
  std::vector<double> na, nb;
  const Matrix a = normalized_rows(anchors, rows, na);
  const Matrix p = normalized_rows(positives, rows, nb);

  Matrix logits(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) logits(i, j) = dot(a.row(i), p.row(j)) / tau;
  }
  double loss = 0.0;
  Matrix dlogits(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    auto row = logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double lse = m + std::log(z);
    loss += lse - row[i];
    for (std::size_t j = 0; j < b; ++j) {
      dlogits(i, j) = (std::exp(row[j] - lse) - (i == j ? 1.0 : 0.0)) / static_cast<double>(b);
    }
  }
  loss /= static_cast<double>(b);

  if (grad_anchors || grad_positives) {
    const std::size_t d = anchors.cols();
    std::vector<double> g(d);
    for (std::size_t i = 0; i < b; ++i) {
      if (!grad_anchors) break;
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t j = 0; j < b; ++j) axpy(dlogits(i, j) / tau, p.row(j), g);
      normalize_backward(a.row(i), na[i], g, scale, grad_anchors->row(rows[i]));
    }
    for (std::size_t j = 0; j < b; ++j) {
      if (!grad_positives) break;
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t i = 0; i < b; ++i) axpy(dlogits(i, j) / tau, a.row(i), g);
      normalize_backward(p.row(j), nb[j], g, scale, grad_positives->row(rows[j]));
    }
  }
  return loss;
}

}  // namespace

double crossview_contrastive(const Matrix& anchors, const Matrix& positives,
                             std::span<const std::size_t> rows, double temperature,
                             Matrix* grad_anchors, Matrix* grad_positives) {
  return contrastive_impl(anchors, positives, rows, temperature, 1.0, grad_anchors, grad_positives);
}

ForwardState forward(const CollaborativeGraphs& graphs, const Parameters& params, int layers) {
  ForwardState fs;
  fs.scene_init = init_scene_embeddings(graphs.scene_tool, params.tools);
  auto scene_view = propagate_scene_view(graphs.query_scene, params.queries, fs.scene_init, layers);
  fs.query_scene_view = std::move(scene_view.queries);
  fs.scene_scene_view = std::move(scene_view.others);

  Matrix connected(graphs.qt_tools.size(), params.tools.cols());
  for (std::size_t i = 0; i < graphs.qt_tools.size(); ++i) {
    auto src = params.tools.row(graphs.qt_tools[i]);
    std::copy(src.begin(), src.end(), connected.row(i).begin());
  }
  auto tool_view = propagate_tool_view(graphs.query_tool, params.queries, connected, layers);
  fs.query_tool_view = std::move(tool_view.queries);
  fs.tool_view = params.tools;
  for (std::size_t i = 0; i < graphs.qt_tools.size(); ++i) {
    auto src = tool_view.others.row(i);
    std::copy(src.begin(), src.end(), fs.tool_view.row(graphs.qt_tools[i]).begin());
  }
  fs.scene_tool_view = pool_scene_tool_view(graphs.scene_tool, fs.tool_view);
  return fs;
}

Batch make_batch(std::span<const std::size_t> queries, const Corpus& corpus,
                 const SceneTable& scenes, std::size_t list_length, Rng& rng) {
  Batch batch;
  batch.queries.assign(queries.begin(), queries.end());
  std::vector<char> seen(scenes.scenes.size(), 0);
  for (std::size_t pos : queries) {
    const std::size_t q = scenes.train_queries.at(pos);
    batch.lists.push_back(
        sample_list(pos, corpus.gold_indices(q), corpus.tools().size(), list_length, rng));
    const std::size_t s = scenes.query_scene[pos];
    if (!seen[s]) {
      seen[s] = 1;
      batch.scenes.push_back(s);
    }
  }
  return batch;
}

LossBreakdown Objective::evaluate(const Parameters& params, const Batch& batch,
                                  Parameters* grad) const {
  if (batch.queries.size() != batch.lists.size()) throw UsageError("batch lists misaligned");
  if (batch.lists.empty()) throw UsageError("empty batch");
  const ForwardState fs = forward(graphs_, params, config_.layers);
  const std::size_t d = params.queries.cols();
  const std::size_t nq = params.queries.rows(), nt = params.tools.rows();
  const std::size_t ns = fs.scene_init.rows();

  Matrix g_qs, g_qt, g_tv, g_ss, g_st;
  if (grad) {
    g_qs = Matrix(nq, d);
    g_qt = Matrix(nq, d);
    g_tv = Matrix(nt, d);
    g_ss = Matrix(ns, d);
    g_st = Matrix(ns, d);
  }

  LossBreakdown out;
  const double inv_b = 1.0 / static_cast<double>(batch.lists.size());
  std::vector<double> scores, dscores;
  for (const ListSample& s : batch.lists) {
    const std::size_t q = s.query;
    scores.resize(s.tools.size());
    dscores.resize(s.tools.size());
    for (std::size_t i = 0; i < s.tools.size(); ++i) {
      auto tv = fs.tool_view.row(s.tools[i]);
      scores[i] = cosine(fs.query_scene_view.row(q), tv) + cosine(fs.query_tool_view.row(q), tv);
    }
    std::span<double> gspan = grad ? std::span<double>(dscores) : std::span<double>{};
    out.list += config_.ranking_loss == RankingLoss::kListwise
                    ? listwise_loss(scores, s.labels, gspan)
                    : pairwise_loss(scores, s.labels, gspan);
    if (grad) {
      for (std::size_t i = 0; i < s.tools.size(); ++i) {
        const double g = dscores[i] * inv_b;
        const std::size_t t = s.tools[i];
        cosine_backward(fs.query_scene_view.row(q), fs.tool_view.row(t), g, g_qs.row(q), g_tv.row(t));
        cosine_backward(fs.query_tool_view.row(q), fs.tool_view.row(t), g, g_qt.row(q), g_tv.row(t));
      }
    }
  }
  out.list *= inv_b;

  if (config_.lambda != 0.0) {
    const double lam = config_.lambda;
    out.contrast_query =
        contrastive_impl(fs.query_scene_view, fs.query_tool_view, batch.queries, config_.temperature,
                         lam, grad ? &g_qs : nullptr, grad ? &g_qt : nullptr);
    if (batch.scenes.size() >= 2) {
      out.contrast_scene =
          contrastive_impl(fs.scene_scene_view, fs.scene_tool_view, batch.scenes,
                           config_.temperature, lam, grad ? &g_ss : nullptr, grad ? &g_st : nullptr);
    }
  }
  out.total = out.list + config_.lambda * (out.contrast_query + out.contrast_scene);

  if (grad) {
    // e_s^T = pool(e_t^T)
    mean_pool_backward(graphs_.scene_tool, g_st, g_tv);

    // Tool view: propagation is self-adjoint, so it maps output gradients
    // back onto the layer-0 inputs.
    Matrix g_connected(graphs_.qt_tools.size(), d);
    for (std::size_t i = 0; i < graphs_.qt_tools.size(); ++i) {
      auto src = g_tv.row(graphs_.qt_tools[i]);
      std::copy(src.begin(), src.end(), g_connected.row(i).begin());
    }
    Matrix g_q_tool, g_t0_connected;
    propagate_sums(graphs_.query_tool, g_qt, g_connected, config_.layers, g_q_tool, g_t0_connected);
    grad->tools = std::move(g_tv);
    for (std::size_t i = 0; i < graphs_.qt_tools.size(); ++i) {
      auto src = g_t0_connected.row(i);
      std::copy(src.begin(), src.end(), grad->tools.row(graphs_.qt_tools[i]).begin());
    }

    // Scene view, then e_s^(0) = pool(e_t^(0)).
    Matrix g_q_scene, g_s0;
    propagate_sums(graphs_.query_scene, g_qs, g_ss, config_.layers, g_q_scene, g_s0);
    mean_pool_backward(graphs_.scene_tool, g_s0, grad->tools);

    grad->queries = std::move(g_q_tool);
    grad->queries += g_q_scene;
  }
  return out;
}

std::string format_epoch_log(const EpochLog& log) {
  std::string out = std::to_string(log.epoch);
  char buf[64];
  for (double v : {log.loss.list, log.loss.contrast_query, log.loss.contrast_scene, log.loss.total}) {
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.push_back(',');
    out.append(buf, res.ptr);
  }
  return out;
}

namespace {

EmbeddingTable table_from(const std::string& entity, const std::vector<std::string>& ids,
                          const Matrix& values) {
  return EmbeddingTable(entity, ids, values);
}

}  // namespace

TrainedModel train(const Corpus& corpus, const SceneTable& scenes, const CollaborativeGraphs& graphs,
                   const EmbeddingTable& query_init, const EmbeddingTable& tool_init,
                   const TrainConfig& config, const EpochCallback& on_epoch) {
  const TrainConfig cfg = resolve_config(config, corpus, scenes);
  if (query_init.dim() != tool_init.dim()) {
    throw DataError("query and tool embeddings differ in dim (" + std::to_string(query_init.dim()) +
                    " vs " + std::to_string(tool_init.dim()) + ")");
  }
  std::vector<std::string> query_ids, tool_ids, scene_ids;
  for (std::size_t q : scenes.train_queries) query_ids.push_back(corpus.queries()[q].query_id);
  for (const auto& t : corpus.tools()) tool_ids.push_back(t.tool_id);
  for (const auto& s : scenes.scenes) scene_ids.push_back(s.scene_id);

  Parameters params{query_init.gather(query_ids), tool_init.gather(tool_ids)};

  TrainedModel model;
  model.config = cfg;
  if (!cfg.collaborative) {
    model.pass_through = true;
    model.query_base = table_from("query", query_ids, params.queries);
    model.tool_base = table_from("tool", tool_ids, params.tools);
    model.query_scene_view = model.query_base;
    model.query_tool_view = model.query_base;
    model.tool_view = model.tool_base;
    return model;
  }

  const Objective objective(graphs, cfg);
  AdamW optimizer({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay}, 2);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(query_ids.size());
  Parameters grad;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::span<const std::size_t>> chunks;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      if (len < 2 && !chunks.empty()) {
        // A trailing singleton joins the previous batch.
        auto& last = chunks.back();
        last = std::span<const std::size_t>(last.data(), last.size() + len);
      } else {
        chunks.emplace_back(order.data() + start, len);
      }
    }

    EpochLog log{epoch, {}};
    for (std::size_t b = 0; b < chunks.size(); ++b) {
      const Batch batch = make_batch(chunks[b], corpus, scenes, cfg.list_length, rng);
      const LossBreakdown loss = objective.evaluate(params, batch, &grad);
      if (!std::isfinite(loss.total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b));
      }
      optimizer.begin_step();
      optimizer.step(0, params.queries.data(), grad.queries.data());
      optimizer.step(1, params.tools.data(), grad.tools.data());
      log.loss.list += loss.list;
      log.loss.contrast_query += loss.contrast_query;
      log.loss.contrast_scene += loss.contrast_scene;
      log.loss.total += loss.total;
    }
    const double inv = 1.0 / static_cast<double>(chunks.size());
    log.loss.list *= inv;
    log.loss.contrast_query *= inv;
    log.loss.contrast_scene *= inv;
    log.loss.total *= inv;
    if (on_epoch) on_epoch(log);
  }

  const ForwardState fs = forward(graphs, params, cfg.layers);
  model.query_base = table_from("query", query_ids, params.queries);
  model.tool_base = table_from("tool", tool_ids, params.tools);
  model.query_scene_view = table_from("query", query_ids, fs.query_scene_view);
  model.query_tool_view = table_from("query", query_ids, fs.query_tool_view);
  model.tool_view = table_from("tool", tool_ids, fs.tool_view);
  model.scene_scene_view = table_from("scene", scene_ids, fs.scene_scene_view);
  model.scene_tool_view = table_from("scene", scene_ids, fs.scene_tool_view);
  return model;
}

}  // namespace colt
