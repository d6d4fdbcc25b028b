#pragma once

#include "amod/gateway.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace amod {

/// L2-normalized embedding. Construction normalizes; non-finite or zero input throws.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    static EmbeddingVector normalized(std::vector<double> raw);
    /// Adopts values that are already unit-norm (within 1e-6), e.g. from a persisted index.
    static EmbeddingVector from_unit(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }
    double norm() const;

    bool operator==(const EmbeddingVector&) const = default;

private:
    explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}
    std::vector<double> values_;
};

/// Sequential dot product; both retrieval paths use it so distances agree bit for bit.
double dot(std::span<const double> a, std::span<const double> b);

/// 1 - a.b, clamped to [0, 2]. Throws on dimension mismatch.
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

/// Embedding cache keyed by hex SHA-256 of (endpoint id, text). With a directory,
/// entries persist as `<dir>/<key>.emb`; writes are serialized.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path dir);

    static std::string key(const std::string& endpoint_id, const std::string& text);

    std::optional<EmbeddingVector> get(const std::string& key);
    void put(const std::string& key, const EmbeddingVector& vec);
    std::size_t size() const;

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mu_;
    std::map<std::string, EmbeddingVector> memory_;
};

struct EmbedOptions {
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 8;
    RetryPolicy retry;
};

/// One normalized vector per text, in order. Cached texts issue no endpoint request.
std::vector<EmbeddingVector> embed_texts(EmbeddingBackend& endpoint, const std::vector<std::string>& texts,
                                         EmbeddingCache& cache, const EmbedOptions& opts = {});

}  // namespace amod
