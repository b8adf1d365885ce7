#include "colt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "colt/error.hpp"
#include "colt/io.hpp"

namespace colt {

namespace {

void require_gold(std::span<const std::string> gold) {
  if (gold.empty()) throw UsageError("metric needs a non-empty gold set");
}

std::size_t hits_at_k(std::span<const std::string> gold, std::span<const std::string> retrieved,
                      std::size_t k) {
  const std::unordered_set<std::string> g(gold.begin(), gold.end());
  std::unordered_set<std::string> counted;
  const std::size_t depth = std::min(k, retrieved.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (g.contains(retrieved[i]) && counted.insert(retrieved[i]).second) ++hits;
  }
  return hits;
}

}  // namespace

double recall_at_k(std::span<const std::string> gold, std::span<const std::string> retrieved,
                   std::size_t k) {
  require_gold(gold);
  const std::unordered_set<std::string> g(gold.begin(), gold.end());
  return static_cast<double>(hits_at_k(gold, retrieved, k)) / static_cast<double>(g.size());
}

double ndcg_at_k(std::span<const std::string> gold, std::span<const std::string> retrieved,
                 std::size_t k) {
  require_gold(gold);
  const std::unordered_set<std::string> g(gold.begin(), gold.end());
  std::unordered_set<std::string> counted;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, retrieved.size());
  for (std::size_t r = 1; r <= depth; ++r) {
    const auto& id = retrieved[r - 1];
    if (g.contains(id) && counted.insert(id).second) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, g.size());
  for (std::size_t r = 1; r <= ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

int comp_at_k(std::span<const std::string> gold, std::span<const std::string> retrieved,
              std::size_t k) {
  require_gold(gold);
  const std::unordered_set<std::string> g(gold.begin(), gold.end());
  return hits_at_k(gold, retrieved, k) == g.size() ? 1 : 0;
}

namespace {

// Order-independent mean: sort, then Neumaier-compensated sum.
double stable_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(values.size());
}

using Samples = std::map<std::string, std::map<std::string, std::vector<double>>>;

MetricTable reduce(const Samples& samples) {
  MetricTable out;
  for (const auto& [metric, by_k] : samples) {
    for (const auto& [k, values] : by_k) out[metric][k] = stable_mean(values);
  }
  return out;
}

void add_sample(Samples& s, const std::string& k, std::span<const std::string> gold,
                std::span<const std::string> ranking, std::size_t depth) {
  s["recall"][k].push_back(recall_at_k(gold, ranking, depth));
  s["ndcg"][k].push_back(ndcg_at_k(gold, ranking, depth));
  s["comp"][k].push_back(comp_at_k(gold, ranking, depth));
}

}  // namespace

EvalReport evaluate(const std::vector<RankedList>& run, const Corpus& corpus,
                    const std::vector<std::size_t>& queries, const std::vector<std::size_t>& ks,
                    bool breakdown) {
  if (ks.empty()) throw UsageError("evaluate: no K values");
  for (std::size_t k : ks) {
    if (k < 1) throw UsageError("evaluate: K must be >= 1");
  }
  std::unordered_map<std::string, const RankedList*> by_id;
  for (const auto& list : run) by_id.emplace(list.query_id, &list);

  std::vector<std::string> missing;
  for (std::size_t q : queries) {
    if (!by_id.contains(corpus.queries()[q].query_id)) missing.push_back(corpus.queries()[q].query_id);
  }
  if (!missing.empty()) {
    std::string msg = "run is missing " + std::to_string(missing.size()) + " queries:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    throw DataError(msg);
  }

  Samples overall;
  std::map<std::size_t, Samples> groups;
  EvalReport report;
  report.query_count = queries.size();
  std::vector<std::string> ranking;
  for (std::size_t q : queries) {
    const Query& query = corpus.queries()[q];
    const RankedList& list = *by_id.at(query.query_id);
    ranking.clear();
    for (const auto& e : list.entries) ranking.push_back(e.tool_id);
    const auto& gold = query.gold_tools;
    const std::size_t n = gold.size();
    for (std::size_t k : ks) {
      add_sample(overall, std::to_string(k), gold, ranking, k);
      if (breakdown) add_sample(groups[n], std::to_string(k), gold, ranking, k);
    }
    if (breakdown) {
      add_sample(overall, kAtGoldSize, gold, ranking, n);
      add_sample(groups[n], kAtGoldSize, gold, ranking, n);
      ++report.group_sizes[n];
    }
  }
  report.metrics = reduce(overall);
  for (const auto& [n, samples] : groups) report.breakdown[n] = reduce(samples);
  return report;
}

std::string report_json(const EvalReport& report) {
  json out = json::object();
  for (const auto& [metric, by_k] : report.metrics) out[metric] = by_k;
  out["queries"] = report.query_count;
  if (!report.breakdown.empty()) {
    json groups = json::object();
    for (const auto& [n, table] : report.breakdown) {
      json g = json::object();
      for (const auto& [metric, by_k] : table) g[metric] = by_k;
      g["queries"] = report.group_sizes.at(n);
      groups[std::to_string(n)] = g;
    }
    out["breakdown"] = groups;
  }
  return out.dump(2) + "\n";
}

namespace {

void write_table(std::ostringstream& out, const MetricTable& table) {
  // Column order follows the K labels of the first metric.
  if (table.empty()) return;
  std::vector<std::string> labels;
  for (const auto& [k, _] : table.begin()->second) labels.push_back(k);
  std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
    const bool na = a == kAtGoldSize, nb = b == kAtGoldSize;
    if (na != nb) return nb;
    if (na) return false;
    return std::stoul(a) < std::stoul(b);
  });
  char buf[64];
  out << "  " << "metric  ";
  for (const auto& k : labels) {
    std::snprintf(buf, sizeof(buf), "%10s", ("@" + k).c_str());
    out << buf;
  }
  out << '\n';
  for (const char* metric : {"recall", "ndcg", "comp"}) {
    auto it = table.find(metric);
    if (it == table.end()) continue;
    std::snprintf(buf, sizeof(buf), "  %-8s", metric);
    out << buf;
    for (const auto& k : labels) {
      std::snprintf(buf, sizeof(buf), "%10.4f", it->second.at(k));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "queries: " << report.query_count << '\n';
  write_table(out, report.metrics);
  for (const auto& [n, table] : report.breakdown) {
    out << "gold size " << n << " (" << report.group_sizes.at(n) << " queries)\n";
    write_table(out, table);
  }
  return out.str();
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, report_json(report));
}

}  // namespace colt
