#include "colt/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <thread>

#include "colt/error.hpp"
#include "colt/io.hpp"

namespace colt {

double score(const QueryRepresentation& query, std::span<const double> tool_view) {
  return cosine(query.scene_view, tool_view) + cosine(query.tool_view, tool_view);
}

QueryRepresentation embed_unseen_query(std::span<const double> semantic) {
  if (semantic.empty()) throw DataError("unseen query has no semantic embedding");
  std::vector<double> v(semantic.begin(), semantic.end());
  return {v, v};
}

Retriever::Retriever(const TrainedModel& model) : model_(model) {
  if (model_.tool_view.size() == 0) throw DataError("model has no tools");
}

bool Retriever::is_trained_query(const std::string& query_id) const {
  return model_.query_scene_view.contains(query_id);
}

QueryRepresentation Retriever::represent(const QueryInput& input) const {
  if (is_trained_query(input.query_id)) {
    auto s = model_.query_scene_view.at(input.query_id);
    auto t = model_.query_tool_view.at(input.query_id);
    return {{s.begin(), s.end()}, {t.begin(), t.end()}};
  }
  if (input.semantic.empty()) {
    throw DataError("missing embedding for query " + input.query_id);
  }
  if (input.semantic.size() != model_.tool_view.dim()) {
    throw DataError("query " + input.query_id + " embedding has dim " +
                    std::to_string(input.semantic.size()) + ", model uses " +
                    std::to_string(model_.tool_view.dim()));
  }
  return embed_unseen_query(input.semantic);
}

RankedList Retriever::retrieve_topk(const std::string& query_id, const QueryRepresentation& query,
                                    std::size_t k) const {
  if (k < 1) throw UsageError("K must be >= 1");
  const auto& tools = model_.tool_view;
  const std::size_t n = tools.size();
  std::vector<double> scores(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto tv = tools.values().row(t);
    scores[t] = model_.pass_through ? cosine(query.scene_view, tv) : score(query, tv);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, n);
  const auto& ids = tools.ids();
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids[a] < ids[b];
                    });
  RankedList out{query_id, k, {}};
  out.entries.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.entries.push_back({ids[order[i]], scores[order[i]]});
  return out;
}

RankedList Retriever::retrieve_topk(const QueryInput& input, std::size_t k) const {
  return retrieve_topk(input.query_id, represent(input), k);
}

std::vector<RankedList> Retriever::retrieve_all(const std::vector<QueryInput>& inputs, std::size_t k,
                                                unsigned threads) const {
  if (k < 1) throw UsageError("K must be >= 1");
  std::vector<RankedList> out(inputs.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(inputs.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = retrieve_topk(inputs[i], k);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < inputs.size(); i += threads) out[i] = retrieve_topk(inputs[i], k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string serialize_run(const std::vector<RankedList>& run) {
  std::ostringstream out;
  for (const auto& list : run) {
    json tools = json::array();
    for (const auto& e : list.entries) tools.push_back({{"tool_id", e.tool_id}, {"score", e.score}});
    out << json{{"query_id", list.query_id}, {"tools", tools}}.dump() << '\n';
  }
  return out.str();
}

void save_run(const std::vector<RankedList>& run, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_run(run));
}

std::vector<RankedList> load_run(const std::filesystem::path& path) {
  std::vector<RankedList> run;
  for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    RankedList list;
    list.query_id = require_string(obj, "query_id", line);
    auto tools = obj.find("tools");
    if (tools == obj.end() || !tools->is_array()) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": missing array 'tools'");
    }
    for (const auto& e : *tools) {
      if (!e.is_object()) throw DataError(path.string() + ":" + std::to_string(line) + ": bad entry");
      list.entries.push_back({require_string(e, "tool_id", line), e.value("score", 0.0)});
    }
    list.k = list.entries.size();
    run.push_back(std::move(list));
  });
  return run;
}

}  // namespace colt
