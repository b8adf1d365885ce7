#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "colt/matrix.hpp"

namespace colt {

inline constexpr std::size_t kDefaultEmbedDim = 128;

/// Dense vectors keyed by entity id. All rows share one dimension.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::string entity, std::size_t dim) : entity_(std::move(entity)), values_(0, dim) {}
  EmbeddingTable(std::string entity, std::vector<std::string> ids, Matrix values);

  const std::string& entity() const { return entity_; }
  std::size_t dim() const { return values_.cols(); }
  std::size_t size() const { return ids_.size(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& values() const { return values_; }

  bool contains(const std::string& id) const { return index_.contains(id); }
  /// Throws DataError when absent.
  std::span<const double> at(const std::string& id) const;

  /// Rows reordered to `ids`; every id must be present.
  Matrix gather(const std::vector<std::string>& ids) const;

 private:
  std::string entity_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  Matrix values_;
};

/// Cosine similarity. Throws NumericalError on a zero-norm input and
/// UsageError on a dimension mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

struct LoadedEmbeddings {
  EmbeddingTable table;
  std::size_t ignored_rows = 0;  // rows whose id was not expected
};

/// Reads an embedding file and keeps the rows named in `expected_ids`, in
/// that order. Missing ids raise DataError listing up to 10 of them.
LoadedEmbeddings load_embeddings(const std::filesystem::path& path,
                                 const std::vector<std::string>& expected_ids);

/// Reads every row of an embedding file in file order.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
std::string serialize_embeddings(const EmbeddingTable& table);

/// Character 3-gram feature hashing into `dim` signed buckets with two hash
/// functions, L2-normalized. Text is lower-cased and padded with one space on
/// each side. When no feature survives (empty text, or all buckets cancel)
/// the result is the basis vector e_0.
std::vector<double> hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed);

/// hash_embed applied to each text, rows in input order.
EmbeddingTable hash_embed_table(const std::string& entity, const std::vector<std::string>& ids,
                                const std::vector<std::string>& texts, std::size_t dim,
                                std::uint64_t seed);

}  // namespace colt
