#pragma once

#include "amod/embedding.hpp"
#include "amod/schema.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace amod {

/// Neighbors retrieved per instance unless configured otherwise.
inline constexpr std::size_t kDefaultNeighbors = 32;

/// Exact cosine index over unit vectors stored row-major. Immutable after build.
class VectorIndex {
public:
    VectorIndex(std::string schema_name, std::size_t dim);

    static VectorIndex build(const std::vector<ModerationInstance>& instances,
                             const std::vector<EmbeddingVector>& vectors, std::string schema_name);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& schema_name() const noexcept { return schema_name_; }

    const std::string& id(std::size_t row) const { return ids_[row]; }
    const std::string& label(std::size_t row) const { return labels_[row]; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * dim_, dim_};
    }
    std::optional<std::size_t> row_of(std::string_view id) const;

    /// Binary format: "AMODVIDX", u32 version, u32 dim, u64 count, u32 id width,
    /// u32 label width, u32 schema-name length + bytes, then `count` fixed-width
    /// records of zero-padded id, zero-padded label and `dim` little-endian doubles.
    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

    bool operator==(const VectorIndex&) const = default;

private:
    void add(std::string id, std::string label, std::span<const double> values);

    std::string schema_name_;
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<std::string> labels_;
    std::vector<double> data_;
    std::unordered_map<std::string, std::size_t> rows_;
};

enum class RetrievalPolicy { knn, random };

std::string_view to_string(RetrievalPolicy p);
RetrievalPolicy parse_retrieval_policy(std::string_view text);

/// Restricts candidates to the query's own label. Off by default.
enum class LabelFilter { any, same_label };

struct RetrievalResult {
    std::vector<AnalogyExample> neighbors;  // text left empty; see attach_texts
    RetrievalPolicy policy = RetrievalPolicy::knn;
    std::size_t k_requested = 0;
    std::optional<std::uint64_t> seed;

    bool operator==(const RetrievalResult&) const = default;
};

/// The k nearest rows by cosine distance, self excluded, ties by ascending id.
RetrievalResult retrieve_analogies(const VectorIndex& index, std::string_view query_id, std::size_t k,
                                   LabelFilter filter = LabelFilter::any);

/// retrieve_analogies for many queries, parallel across queries.
std::vector<RetrievalResult> retrieve_all(const VectorIndex& index, std::span<const std::string> query_ids,
                                          std::size_t k, LabelFilter filter = LabelFilter::any);

/// k rows drawn uniformly without replacement from everything but the query.
RetrievalResult random_sample(const VectorIndex& index, std::string_view query_id, std::size_t k,
                              std::uint64_t seed, LabelFilter filter = LabelFilter::any);

/// Per-query seed for random_sample derived from a run seed.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view query_id);

/// Fills neighbor texts from the corpus; throws when a neighbor id is unknown.
void attach_texts(RetrievalResult& result, const std::vector<ModerationInstance>& corpus);

namespace kernels {

/// out[r] = cosine distance between row `query` and row r (OpenMP over rows).
void distances_from(const VectorIndex& index, std::size_t query, std::span<double> out);

/// Rows of the k smallest distances, excluding `query`, ordered by (distance, id).
std::vector<std::size_t> nearest_rows(const VectorIndex& index, std::size_t query, std::size_t k,
                                      LabelFilter filter, bool parallel_distances);

}  // namespace kernels

}  // namespace amod
