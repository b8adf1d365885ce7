#include "colt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "colt/error.hpp"
#include "colt/io.hpp"
#include "colt/rng.hpp"

namespace colt {

const char* to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Corpus::Corpus(std::vector<Tool> tools, std::vector<Query> queries)
    : tools_(std::move(tools)), queries_(std::move(queries)) {
  for (std::size_t i = 0; i < tools_.size(); ++i) {
    const Tool& t = tools_[i];
    if (t.tool_id.empty()) throw DataError("tool " + std::to_string(i) + ": empty tool_id");
    if (t.description.empty()) throw DataError("tool " + t.tool_id + ": empty description");
    if (!tool_index_.emplace(t.tool_id, i).second) {
      throw DataError("duplicate tool_id " + t.tool_id);
    }
  }
  gold_indices_.reserve(queries_.size());
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    Query& q = queries_[i];
    if (q.query_id.empty()) throw DataError("query " + std::to_string(i) + ": empty query_id");
    if (!query_index_.emplace(q.query_id, i).second) {
      throw DataError("duplicate query_id " + q.query_id);
    }
    // Keep first occurrence of each gold id.
    std::vector<std::string> dedup;
    for (auto& id : q.gold_tools) {
      if (std::find(dedup.begin(), dedup.end(), id) == dedup.end()) dedup.push_back(id);
    }
    q.gold_tools = std::move(dedup);
    if (q.gold_tools.empty()) throw DataError("query " + q.query_id + ": empty tool_ids");
    std::vector<std::size_t> gold;
    for (const auto& id : q.gold_tools) {
      auto it = tool_index_.find(id);
      if (it == tool_index_.end()) {
        throw DataError("query " + q.query_id + ": unknown tool_id " + id);
      }
      gold.push_back(it->second);
    }
    gold_indices_.push_back(std::move(gold));
  }
}

std::optional<std::size_t> Corpus::tool_index(const std::string& id) const {
  auto it = tool_index_.find(id);
  if (it == tool_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Corpus::query_index(const std::string& id) const {
  auto it = query_index_.find(id);
  if (it == query_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Corpus::queries_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    if (queries_[i].split == split) out.push_back(i);
  }
  return out;
}

bool Corpus::fully_split() const {
  return std::all_of(queries_.begin(), queries_.end(),
                     [](const Query& q) { return q.split.has_value(); });
}

std::size_t Corpus::max_gold_size(Split split) const {
  std::size_t m = 0;
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    if (queries_[i].split == split) m = std::max(m, gold_indices_[i].size());
  }
  return m;
}

Corpus load_corpus(const std::filesystem::path& tools_path,
                   const std::filesystem::path& queries_path) {
  std::vector<Tool> tools;
  for_each_jsonl(tools_path, [&](std::size_t line, const json& obj) {
    Tool t;
    t.tool_id = require_string(obj, "tool_id", line);
    t.name = obj.contains("name") && obj["name"].is_string() ? obj["name"].get<std::string>() : "";
    t.description = require_string(obj, "description", line);
    if (t.description.empty()) {
      throw DataError(tools_path.string() + ":" + std::to_string(line) + ": empty description");
    }
    tools.push_back(std::move(t));
  });

  std::vector<Query> queries;
  for_each_jsonl(queries_path, [&](std::size_t line, const json& obj) {
    Query q;
    q.query_id = require_string(obj, "query_id", line);
    q.text = require_string(obj, "text", line);
    auto it = obj.find("tool_ids");
    if (it == obj.end() || !it->is_array()) {
      throw DataError(queries_path.string() + ":" + std::to_string(line) +
                      ": missing array field 'tool_ids'");
    }
    for (const auto& id : *it) {
      if (!id.is_string()) {
        throw DataError(queries_path.string() + ":" + std::to_string(line) +
                        ": tool_ids must hold strings");
      }
      q.gold_tools.push_back(id.get<std::string>());
    }
    if (auto s = obj.find("split"); s != obj.end()) {
      const std::string tag = s->is_string() ? s->get<std::string>() : "";
      if (tag == "train") {
        q.split = Split::kTrain;
      } else if (tag == "test") {
        q.split = Split::kTest;
      } else {
        throw DataError(queries_path.string() + ":" + std::to_string(line) +
                        ": split must be \"train\" or \"test\"");
      }
    }
    queries.push_back(std::move(q));
  });
  return Corpus(std::move(tools), std::move(queries));
}

void save_tools(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& t : corpus.tools()) {
    json obj = {{"tool_id", t.tool_id}, {"name", t.name}, {"description", t.description}};
    out << obj.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

void save_queries(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& q : corpus.queries()) {
    json obj = {{"query_id", q.query_id}, {"text", q.text}, {"tool_ids", q.gold_tools}};
    if (q.split) obj["split"] = to_string(*q.split);
    out << obj.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

Corpus split(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw UsageError("test fraction must lie in (0,1), got " + std::to_string(test_fraction));
  }
  const std::size_t n = corpus.queries().size();
  if (n < 2) throw DataError("split needs at least 2 queries");

  Corpus out = corpus;
  std::vector<std::size_t> untagged;
  std::size_t tagged_test = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = corpus.queries()[i].split;
    if (!s) {
      untagged.push_back(i);
    } else if (*s == Split::kTest) {
      ++tagged_test;
    }
  }
  const std::size_t tagged_train = n - untagged.size() - tagged_test;

  if (!untagged.empty()) {
    Rng rng(seed);
    rng.shuffle(untagged);
    const std::size_t m = untagged.size();
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m)));
    // Each side of the final split needs at least one query.
    const std::size_t min_test = tagged_test == 0 ? 1 : 0;
    const std::size_t max_test = tagged_train == 0 ? m - 1 : m;
    n_test = std::clamp(n_test, std::min(min_test, max_test), max_test);
    for (std::size_t k = 0; k < m; ++k) {
      out.queries_[untagged[k]].split = k < n_test ? Split::kTest : Split::kTrain;
    }
  }
  if (out.queries_in(Split::kTrain).empty() || out.queries_in(Split::kTest).empty()) {
    throw DataError("split leaves one side empty");
  }
  return out;
}

SceneTable derive_scenes(const Corpus& corpus) {
  SceneTable table;
  table.train_queries = corpus.queries_in(Split::kTrain);
  if (table.train_queries.empty()) throw DataError("derive_scenes: empty train split");

  std::map<std::vector<std::size_t>, std::size_t> scene_of_set;
  for (std::size_t pos = 0; pos < table.train_queries.size(); ++pos) {
    const std::size_t q = table.train_queries[pos];
    std::vector<std::size_t> members = corpus.gold_indices(q);
    std::sort(members.begin(), members.end());
    auto [it, inserted] = scene_of_set.emplace(members, table.scenes.size());
    if (inserted) {
      table.scenes.push_back({"s" + std::to_string(table.scenes.size()), members});
      for (std::size_t t : members) table.scene_tool_edges.emplace_back(it->second, t);
    }
    table.query_scene.push_back(it->second);
    table.query_scene_edges.emplace_back(pos, it->second);
    for (std::size_t t : corpus.gold_indices(q)) table.query_tool_edges.emplace_back(pos, t);
  }
  return table;
}

}  // namespace colt
