#include "amod/vector_index.hpp"

#include "amod/digest.hpp"
#include "amod/error.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

namespace amod {

namespace {

constexpr char kIndexMagic[8] = {'A', 'M', 'O', 'D', 'V', 'I', 'D', 'X'};
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
void put(std::string& out, T value) {
    out.append(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T take(std::string_view& in) {
    if (in.size() < sizeof(T)) throw Error("truncated index file");
    T value;
    std::memcpy(&value, in.data(), sizeof value);
    in.remove_prefix(sizeof value);
    return value;
}

std::string take_padded(std::string_view& in, std::size_t width) {
    if (in.size() < width) throw Error("truncated index file");
    std::string s(in.substr(0, width));
    in.remove_prefix(width);
    s.resize(std::strlen(s.c_str()));
    return s;
}

std::size_t require_row(const VectorIndex& index, std::string_view query_id) {
    auto row = index.row_of(query_id);
    if (!row) throw Error("unknown query id " + std::string(query_id));
    return *row;
}

AnalogyExample make_neighbor(const VectorIndex& index, std::size_t row, double distance) {
    AnalogyExample ex;
    ex.id = index.id(row);
    ex.label = index.label(row);
    ex.origin = AnalogyOrigin::retrieved;
    ex.similarity = 1.0 - distance;
    return ex;
}

}  // namespace

VectorIndex::VectorIndex(std::string schema_name, std::size_t dim)
    : schema_name_(std::move(schema_name)), dim_(dim) {
    if (dim_ == 0) throw Error("index dimension must be positive");
}

void VectorIndex::add(std::string id, std::string label, std::span<const double> values) {
    if (values.size() != dim_)
        throw Error("vector for " + id + " has dimension " + std::to_string(values.size()) +
                    ", index has " + std::to_string(dim_));
    if (id.find('\0') != std::string::npos || label.find('\0') != std::string::npos)
        throw Error("id and label must not contain NUL bytes");
    if (!rows_.emplace(id, ids_.size()).second) throw Error("duplicate id " + id);
    ids_.push_back(std::move(id));
    labels_.push_back(std::move(label));
    data_.insert(data_.end(), values.begin(), values.end());
}

VectorIndex VectorIndex::build(const std::vector<ModerationInstance>& instances,
                               const std::vector<EmbeddingVector>& vectors, std::string schema_name) {
    if (instances.size() != vectors.size())
        throw Error("build_index: " + std::to_string(instances.size()) + " instances but " +
                    std::to_string(vectors.size()) + " vectors");
    if (instances.empty()) throw Error("build_index: empty corpus");
    VectorIndex index(std::move(schema_name), vectors.front().dim());
    for (std::size_t i = 0; i < instances.size(); ++i)
        index.add(instances[i].id, instances[i].label, vectors[i].values());
    return index;
}

std::optional<std::size_t> VectorIndex::row_of(std::string_view id) const {
    auto it = rows_.find(std::string(id));
    if (it == rows_.end()) return std::nullopt;
    return it->second;
}

void VectorIndex::save(const std::filesystem::path& path) const {
    std::size_t id_width = 1, label_width = 1;
    for (const auto& s : ids_) id_width = std::max(id_width, s.size() + 1);
    for (const auto& s : labels_) label_width = std::max(label_width, s.size() + 1);

    std::string out(kIndexMagic, 8);
    put<std::uint32_t>(out, kIndexVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
    put<std::uint64_t>(out, ids_.size());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id_width));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(label_width));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(schema_name_.size()));
    out += schema_name_;
    for (std::size_t r = 0; r < ids_.size(); ++r) {
        std::string id = ids_[r], label = labels_[r];
        id.resize(id_width, '\0');
        label.resize(label_width, '\0');
        out += id;
        out += label;
        for (double x : row(r)) put<double>(out, x);
    }
    write_file_atomic(path, out);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    const std::string blob = read_file(path);
    std::string_view in(blob);
    if (in.size() < 8 || std::memcmp(in.data(), kIndexMagic, 8) != 0)
        throw Error(path.string() + " is not an index file");
    in.remove_prefix(8);
    if (const auto version = take<std::uint32_t>(in); version != kIndexVersion)
        throw Error("unsupported index version " + std::to_string(version));
    const auto dim = take<std::uint32_t>(in);
    const auto count = take<std::uint64_t>(in);
    const auto id_width = take<std::uint32_t>(in);
    const auto label_width = take<std::uint32_t>(in);
    const auto name_len = take<std::uint32_t>(in);
    if (in.size() < name_len) throw Error("truncated index file");
    VectorIndex index(std::string(in.substr(0, name_len)), dim);
    in.remove_prefix(name_len);

    std::vector<double> values(dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        auto id = take_padded(in, id_width);
        auto label = take_padded(in, label_width);
        for (auto& x : values) x = take<double>(in);
        index.add(std::move(id), std::move(label), values);
    }
    if (!in.empty()) throw Error("trailing bytes in index file " + path.string());
    return index;
}

std::string_view to_string(RetrievalPolicy p) {
    return p == RetrievalPolicy::knn ? "knn" : "random";
}

RetrievalPolicy parse_retrieval_policy(std::string_view text) {
    if (text == "knn") return RetrievalPolicy::knn;
    if (text == "random") return RetrievalPolicy::random;
    throw ConfigError("unknown retrieval policy " + std::string(text) + " (expected knn or random)");
}

namespace kernels {

void distances_from(const VectorIndex& index, std::size_t query, std::span<double> out) {
    const auto q = index.row(query);
    const auto n = static_cast<std::ptrdiff_t>(index.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
        out[static_cast<std::size_t>(r)] =
            std::clamp(1.0 - dot(q, index.row(static_cast<std::size_t>(r))), 0.0, 2.0);
    }
}

std::vector<std::size_t> nearest_rows(const VectorIndex& index, std::size_t query, std::size_t k,
                                      LabelFilter filter, bool parallel_distances) {
    std::vector<double> dist(index.size());
    if (parallel_distances) {
        distances_from(index, query, dist);
    } else {
        const auto q = index.row(query);
        for (std::size_t r = 0; r < index.size(); ++r)
            dist[r] = std::clamp(1.0 - dot(q, index.row(r)), 0.0, 2.0);
    }

    std::vector<std::size_t> candidates;
    candidates.reserve(index.size());
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (r == query) continue;
        if (filter == LabelFilter::same_label && index.label(r) != index.label(query)) continue;
        candidates.push_back(r);
    }
    const std::size_t take_n = std::min(k, candidates.size());
    const auto closer = [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return index.id(a) < index.id(b);
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take_n),
                      candidates.end(), closer);
    candidates.resize(take_n);
    return candidates;
}

}  // namespace kernels

namespace {

RetrievalResult knn_result(const VectorIndex& index, std::size_t query, std::size_t k,
                           LabelFilter filter, bool parallel) {
    if (k == 0) throw Error("k must be at least 1");
    RetrievalResult result;
    result.policy = RetrievalPolicy::knn;
    result.k_requested = k;
    const auto q = index.row(query);
    for (std::size_t r : kernels::nearest_rows(index, query, k, filter, parallel))
        result.neighbors.push_back(make_neighbor(index, r, std::clamp(1.0 - dot(q, index.row(r)), 0.0, 2.0)));
    return result;
}

}  // namespace

RetrievalResult retrieve_analogies(const VectorIndex& index, std::string_view query_id, std::size_t k,
                                   LabelFilter filter) {
    return knn_result(index, require_row(index, query_id), k, filter, true);
}

std::vector<RetrievalResult> retrieve_all(const VectorIndex& index, std::span<const std::string> query_ids,
                                          std::size_t k, LabelFilter filter) {
    if (k == 0) throw Error("k must be at least 1");
    std::vector<std::size_t> rows;
    rows.reserve(query_ids.size());
    for (const auto& id : query_ids) rows.push_back(require_row(index, id));

    std::vector<RetrievalResult> out(rows.size());
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out[u] = knn_result(index, rows[u], k, filter, false);
    }
    return out;
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view query_id) {
    const auto hex = sha256_hex(std::to_string(run_seed) + ":" + std::string(query_id));
    return std::stoull(hex.substr(0, 16), nullptr, 16);
}

RetrievalResult random_sample(const VectorIndex& index, std::string_view query_id, std::size_t k,
                              std::uint64_t seed, LabelFilter filter) {
    if (k == 0) throw Error("k must be at least 1");
    const std::size_t query = require_row(index, query_id);
    std::vector<std::size_t> pool;
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (r == query) continue;
        if (filter == LabelFilter::same_label && index.label(r) != index.label(query)) continue;
        pool.push_back(r);
    }
    const std::size_t take_n = std::min(k, pool.size());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < take_n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }

    RetrievalResult result;
    result.policy = RetrievalPolicy::random;
    result.k_requested = k;
    result.seed = seed;
    const auto q = index.row(query);
    for (std::size_t i = 0; i < take_n; ++i)
        result.neighbors.push_back(
            make_neighbor(index, pool[i], std::clamp(1.0 - dot(q, index.row(pool[i])), 0.0, 2.0)));
    return result;
}

void attach_texts(RetrievalResult& result, const std::vector<ModerationInstance>& corpus) {
    std::unordered_map<std::string_view, const ModerationInstance*> by_id;
    for (const auto& inst : corpus) by_id.emplace(inst.id, &inst);
    for (auto& n : result.neighbors) {
        auto it = by_id.find(n.id);
        if (it == by_id.end()) throw Error("neighbor " + n.id + " is not in the corpus");
        n.text = it->second->text;
    }
}

}  // namespace amod
