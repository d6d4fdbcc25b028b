#include "amod/embedding.hpp"

#include "amod/digest.hpp"
#include "amod/parallel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace amod {

namespace {

constexpr char kCacheMagic[4] = {'A', 'E', 'M', 'B'};

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
    if (raw.empty()) throw Error("embedding has zero dimension");
    double sq = 0.0;
    for (double x : raw) {
        if (!std::isfinite(x)) throw Error("embedding has a non-finite entry");
        sq += x * x;
    }
    if (sq == 0.0) throw Error("cannot normalize a zero embedding");
    const double n = std::sqrt(sq);
    for (auto& x : raw) x /= n;
    return EmbeddingVector(std::move(raw));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<double> values) {
    EmbeddingVector v(std::move(values));
    if (v.dim() == 0 || std::abs(v.norm() - 1.0) > 1e-6) throw Error("embedding is not unit-norm");
    return v;
}

double EmbeddingVector::norm() const {
    double sq = 0.0;
    for (double x : values_) sq += x * x;
    return std::sqrt(sq);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw Error("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    return std::clamp(1.0 - dot(a.values(), b.values()), 0.0, 2.0);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(*dir_);
}

std::string EmbeddingCache::key(const std::string& endpoint_id, const std::string& text) {
    std::string material = endpoint_id;
    material.push_back('\0');
    material += text;
    return sha256_hex(material);
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& key) {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    if (!dir_) return std::nullopt;

    std::ifstream in(*dir_ / (key + ".emb"), std::ios::binary);
    if (!in) return std::nullopt;
    char magic[4];
    std::uint32_t dim = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    if (!in || std::memcmp(magic, kCacheMagic, 4) != 0 || dim == 0) return std::nullopt;
    std::vector<double> values(dim);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) return std::nullopt;
    auto vec = EmbeddingVector::from_unit(std::move(values));
    memory_.emplace(key, vec);
    return vec;
}

void EmbeddingCache::put(const std::string& key, const EmbeddingVector& vec) {
    std::lock_guard lock(mu_);
    memory_.insert_or_assign(key, vec);
    if (!dir_) return;
    std::string blob(kCacheMagic, 4);
    const auto dim = static_cast<std::uint32_t>(vec.dim());
    blob.append(reinterpret_cast<const char*>(&dim), sizeof dim);
    blob.append(reinterpret_cast<const char*>(vec.values().data()), vec.dim() * sizeof(double));
    write_file_atomic(*dir_ / (key + ".emb"), blob);
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mu_);
    return memory_.size();
}

std::vector<EmbeddingVector> embed_texts(EmbeddingBackend& endpoint, const std::vector<std::string>& texts,
                                         EmbeddingCache& cache, const EmbedOptions& opts) {
    if (texts.empty()) throw Error("embed_texts: no texts");
    for (std::size_t i = 0; i < texts.size(); ++i)
        if (texts[i].empty()) throw Error("embed_texts: text " + std::to_string(i) + " is empty");

    const std::string endpoint_id = endpoint.endpoint_id();
    std::vector<std::string> keys(texts.size());
    std::vector<std::string> pending;  // unique uncached texts
    std::unordered_map<std::string, std::size_t> pending_slot;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = EmbeddingCache::key(endpoint_id, texts[i]);
        if (cache.get(keys[i])) continue;
        if (pending_slot.emplace(keys[i], pending.size()).second) pending.push_back(texts[i]);
    }

    if (!pending.empty()) {
        endpoint.check_ready();
        const std::size_t batch = std::max<std::size_t>(1, opts.batch_size);
        const std::size_t chunks = (pending.size() + batch - 1) / batch;
        std::vector<std::vector<std::vector<double>>> raw(chunks);
        std::vector<std::string> errors(chunks);
        bounded_for_each(chunks, opts.max_in_flight, [&](std::size_t c) {
            const auto first = pending.begin() + static_cast<std::ptrdiff_t>(c * batch);
            const auto last = pending.begin() + static_cast<std::ptrdiff_t>(std::min(pending.size(), (c + 1) * batch));
            const std::vector<std::string> slice(first, last);
            try {
                raw[c] = with_retries(opts.retry, [&] { return endpoint.embed(slice); });
                if (raw[c].size() != slice.size()) errors[c] = "endpoint returned a short batch";
            } catch (const std::exception& e) {
                errors[c] = e.what();
            }
        });
        for (const auto& err : errors)
            if (!err.empty()) throw GatewayError("embedding endpoint " + endpoint_id + " failed: " + err);

        std::optional<std::size_t> dim;
        for (std::size_t c = 0; c < chunks; ++c) {
            for (std::size_t j = 0; j < raw[c].size(); ++j) {
                auto& v = raw[c][j];
                if (!dim) dim = v.size();
                if (v.size() != *dim)
                    throw Error("embedding dimension mismatch in batch: " + std::to_string(v.size()) +
                                " vs " + std::to_string(*dim));
                const std::string& text = pending[c * batch + j];
                cache.put(EmbeddingCache::key(endpoint_id, text), EmbeddingVector::normalized(std::move(v)));
            }
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& k : keys) out.push_back(*cache.get(k));
    const auto d = out.front().dim();
    for (const auto& v : out)
        if (v.dim() != d) throw Error("embedding dimension mismatch across texts");
    return out;
}

}  // namespace amod
