#include "amod/retrieval_reference.hpp"

#include "amod/error.hpp"

#include <algorithm>
#include <tuple>

namespace amod::reference {

RetrievalResult retrieve_analogies(const VectorIndex& index, std::string_view query_id, std::size_t k,
                                   LabelFilter filter) {
    if (k == 0) throw Error("k must be at least 1");
    const auto query = index.row_of(query_id);
    if (!query) throw Error("unknown query id " + std::string(query_id));

    const auto q = index.row(*query);
    std::vector<std::tuple<double, std::string, std::size_t>> all;
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (r == *query) continue;
        if (filter == LabelFilter::same_label && index.label(r) != index.label(*query)) continue;
        const auto v = index.row(r);
        double s = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) s += q[d] * v[d];
        all.emplace_back(std::clamp(1.0 - s, 0.0, 2.0), index.id(r), r);
    }
    std::sort(all.begin(), all.end());
    if (all.size() > k) all.resize(k);

    RetrievalResult result;
    result.policy = RetrievalPolicy::knn;
    result.k_requested = k;
    for (const auto& [distance, id, row] : all) {
        AnalogyExample ex;
        ex.id = id;
        ex.label = index.label(row);
        ex.origin = AnalogyOrigin::retrieved;
        ex.similarity = 1.0 - distance;
        result.neighbors.push_back(std::move(ex));
    }
    return result;
}

}  // namespace amod::reference
