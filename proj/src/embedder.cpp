#include "colt/embedder.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "colt/error.hpp"
#include "colt/io.hpp"

namespace colt {

EmbeddingTable::EmbeddingTable(std::string entity, std::vector<std::string> ids, Matrix values)
    : entity_(std::move(entity)), ids_(std::move(ids)), values_(std::move(values)) {
  if (ids_.size() != values_.rows()) {
    throw DataError("embedding table: " + std::to_string(ids_.size()) + " ids for " +
                    std::to_string(values_.rows()) + " rows");
  }
  if (values_.cols() < 2) throw DataError("embedding table: dim must be >= 2");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw DataError("embedding table: duplicate id " + ids_[i]);
    }
  }
  for (double v : values_.data()) {
    if (!std::isfinite(v)) throw DataError("embedding table: non-finite value");
  }
}

std::span<const double> EmbeddingTable::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("no embedding for id " + id);
  return values_.row(it->second);
}

Matrix EmbeddingTable::gather(const std::vector<std::string>& ids) const {
  Matrix out(ids.size(), dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = at(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw UsageError("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw NumericalError("cosine: zero-norm vector");
  return dot(a, b) / (na * nb);
}

namespace {

struct ParsedFile {
  std::string entity;
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};

ParsedFile parse_embedding_file(const std::filesystem::path& path) {
  ParsedFile f;
  bool header_seen = false;
  for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    const std::string where = path.string() + ":" + std::to_string(line);
    if (!header_seen) {
      auto dim = obj.find("dim");
      if (dim == obj.end() || !dim->is_number_integer() || dim->get<long long>() < 2) {
        throw DataError(where + ": header needs integer \"dim\" >= 2");
      }
      f.dim = dim->get<std::size_t>();
      f.entity = obj.value("entity", std::string{});
      header_seen = true;
      return;
    }
    std::string id = require_string(obj, "id", line);
    auto vec = obj.find("vector");
    if (vec == obj.end() || !vec->is_array()) throw DataError(where + ": missing \"vector\"");
    if (vec->size() != f.dim) {
      throw DataError(where + ": dim mismatch for id " + id + " (header " +
                      std::to_string(f.dim) + ", row " + std::to_string(vec->size()) + ")");
    }
    std::vector<double> row;
    row.reserve(f.dim);
    for (const auto& v : *vec) {
      if (!v.is_number()) throw DataError(where + ": non-numeric vector entry");
      row.push_back(v.get<double>());
    }
    f.ids.push_back(std::move(id));
    f.rows.push_back(std::move(row));
  });
  if (!header_seen) throw DataError(path.string() + ": empty embedding file");
  return f;
}

}  // namespace

LoadedEmbeddings load_embeddings(const std::filesystem::path& path,
                                 const std::vector<std::string>& expected_ids) {
  ParsedFile f = parse_embedding_file(path);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < f.ids.size(); ++i) pos.emplace(f.ids[i], i);

  std::vector<std::string> missing;
  for (const auto& id : expected_ids) {
    if (!pos.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << path.string() << ": missing: ";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg << (i ? ", " : "") << missing[i];
    if (missing.size() > 10) msg << " (+" << missing.size() - 10 << " more)";
    throw DataError(msg.str());
  }

  Matrix values(expected_ids.size(), f.dim);
  std::unordered_set<std::string> used;
  for (std::size_t i = 0; i < expected_ids.size(); ++i) {
    const auto& row = f.rows[pos.at(expected_ids[i])];
    std::copy(row.begin(), row.end(), values.row(i).begin());
    used.insert(expected_ids[i]);
  }
  return {EmbeddingTable(f.entity, expected_ids, std::move(values)), pos.size() - used.size()};
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  ParsedFile f = parse_embedding_file(path);
  Matrix values(f.ids.size(), f.dim);
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    std::copy(f.rows[i].begin(), f.rows[i].end(), values.row(i).begin());
  }
  return EmbeddingTable(f.entity, std::move(f.ids), std::move(values));
}

std::string serialize_embeddings(const EmbeddingTable& table) {
  std::ostringstream out;
  out << json{{"dim", table.dim()}, {"entity", table.entity()}}.dump() << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto row = table.values().row(i);
    // nlohmann emits the shortest round-trip representation of each double.
    json obj = {{"id", table.ids()[i]}, {"vector", std::vector<double>(row.begin(), row.end())}};
    out << obj.dump() << '\n';
  }
  return out.str();
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_embeddings(table));
}

namespace {

// FNV-1a over (seed, hash function index, gram bytes).
std::uint64_t feature_hash(std::uint64_t seed, std::uint64_t fn, std::string_view gram) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  mix(static_cast<unsigned char>(fn));
  for (char c : gram) mix(static_cast<unsigned char>(c));
  // Final avalanche so low bits depend on every input byte.
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

}  // namespace

std::vector<double> hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw UsageError("hash_embed: dim must be >= 2");
  std::string norm = " ";
  for (char c : text) norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  norm.push_back(' ');

  std::vector<double> v(dim, 0.0);
  if (!text.empty()) {
    for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
      const std::string_view gram(norm.data() + i, 3);
      for (std::uint64_t fn = 0; fn < 2; ++fn) {
        const std::uint64_t h = feature_hash(seed, fn, gram);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % dim] += sign;
      }
    }
  }
  const double norm2 = dot(v, v);
  if (norm2 == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

EmbeddingTable hash_embed_table(const std::string& entity, const std::vector<std::string>& ids,
                                const std::vector<std::string>& texts, std::size_t dim,
                                std::uint64_t seed) {
  Matrix values(ids.size(), dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto v = hash_embed(texts[i], dim, seed);
    std::copy(v.begin(), v.end(), values.row(i).begin());
  }
  return EmbeddingTable(entity, ids, std::move(values));
}

}  // namespace colt
