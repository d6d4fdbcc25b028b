#pragma once

// Brute-force reference computations and published table values shared by
// the unit tests and the acceptance binary.

#include "amod/embedding.hpp"
#include "amod/schema.hpp"
#include "amod/vector_index.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace oracles {

// Every pairwise distance, fully sorted by (distance, id).
inline std::vector<std::string> nearest_by_full_sort(const amod::VectorIndex& index, std::size_t q, std::size_t k) {
    std::vector<std::tuple<double, std::string>> all;
    const auto a = index.row(q);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (r == q) continue;
        const auto b = index.row(r);
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        all.emplace_back(std::clamp(1.0 - s, 0.0, 2.0), index.id(r));
    }
    std::sort(all.begin(), all.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(std::get<1>(all[i]));
    return out;
}

// Coarse coordinates in {-1, 0, 1} so exact distance ties are frequent.
inline amod::VectorIndex random_index(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    static const std::vector<std::string> labels{"A", "B", "C"};
    std::vector<amod::ModerationInstance> inst;
    std::vector<amod::EmbeddingVector> vecs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        bool nonzero = false;
        while (!nonzero) {
            for (auto& x : v) x = static_cast<double>(static_cast<int>(rng() % 3) - 1);
            nonzero = std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
        }
        inst.push_back({"id" + std::to_string(rng() % 100000) + "_" + std::to_string(i), "t", labels[rng() % 3], {}});
        vecs.push_back(amod::EmbeddingVector::normalized(std::move(v)));
    }
    return amod::VectorIndex::build(inst, vecs, "s");
}

struct F1Oracle {
    std::vector<double> f1;
    double macro = 0.0;
};

// Full confusion matrix with an extra column for unparsed predictions.
inline F1Oracle f1_by_confusion_matrix(const std::vector<std::size_t>& gold,
                                       const std::vector<std::optional<std::size_t>>& pred, std::size_t k) {
    std::vector<std::vector<long>> m(k, std::vector<long>(k + 1, 0));
    for (std::size_t i = 0; i < gold.size(); ++i) ++m[gold[i]][pred[i] ? *pred[i] : k];
    F1Oracle out;
    for (std::size_t c = 0; c < k; ++c) {
        long tp = m[c][c], row = 0, col = 0;
        for (std::size_t j = 0; j <= k; ++j) row += m[c][j];
        for (std::size_t g = 0; g < k; ++g) col += m[g][c];
        const long fp = col - tp, fn = row - tp;
        const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        out.f1.push_back(p + r > 0 ? 2 * p * r / (p + r) : 0.0);
    }
    double s = 0.0;
    for (double f : out.f1) s += f;
    out.macro = s / static_cast<double>(k);
    return out;
}

struct PublishedRow {
    std::string name;
    double average;
    std::vector<double> per_category;  // schema order, percent
};

// Fine-grained schema: Politics, Pornography, Violence, Gambling, Bias, Harmless.
inline const std::vector<PublishedRow>& fine_grained_method_rows() {
    static const std::vector<PublishedRow> rows{
        {"Rule Impact", 83.9, {83.8, 67.5, 92.2, 73.7, 90.6, 95.7}},
        {"Analogy-Rule Quality", 84.7, {84.4, 68.4, 92.8, 75.4, 90.3, 96.9}},
        {"E2E Reliability", 86.9, {88.3, 93.2, 96.0, 98.0, 82.2, 63.7}},
        {"Full", 89.2, {89.3, 71.5, 97.8, 82.0, 96.1, 98.6}},
    };
    return rows;
}

// Baseline general-purpose models; their printed averages are not macro means.
inline const std::vector<PublishedRow>& fine_grained_baseline_rows() {
    static const std::vector<PublishedRow> rows{
        {"GPT-4", 72.3, {58.6, 88.7, 79.8, 92.7, 64.3, 56.8}},
        {"DeepSeek R1", 77.1, {72.7, 91.4, 86.1, 94.3, 64.6, 59.7}},
        {"DeepSeek V3", 80.3, {79.0, 90.3, 89.8, 95.0, 70.5, 62.5}},
        {"Qwen2.5-32B-Instruct", 74.3, {59.1, 91.1, 84.4, 95.4, 67.9, 54.2}},
        {"QwQ-32B", 69.1, {75.4, 69.6, 72.0, 84.9, 60.7, 54.6}},
        {"LLaMA3-8B", 67.5, {58.5, 55.9, 81.0, 90.6, 65.2, 44.2}},
        {"LLaMA-Guard-3-8B", 39.7, {12.0, 74.1, 41.8, 29.4, 45.7, 35.6}},
    };
    return rows;
}

struct AblationRow {
    PublishedRow row;
    std::vector<std::string> deltas;  // Overall first, then categories
};

inline const std::vector<AblationRow>& ablation_rows() {
    static const std::vector<AblationRow> rows{
        {{"w/o k-NN Retrieval", 86.9, {85.4, 69.0, 96.6, 78.5, 93.6, 98.2}},
         {"-2.3", "-3.9", "-2.5", "-1.2", "-3.5", "-2.5", "-0.4"}},
        {{"w/o Second-stage SFT", 88.0, {86.1, 69.3, 97.2, 81.2, 95.8, 98.4}},
         {"-1.2", "-3.2", "-2.2", "-0.6", "-0.8", "-0.3", "-0.2"}},
    };
    return rows;
}

// Aegis-style schema: Hate, Sexual, Confessions, Harassment, Profanity.
inline const std::vector<PublishedRow>& aegis_rows() {
    static const std::vector<PublishedRow> rows{
        {"Qwen3-8B", 52.9, {67.2, 65.2, 66.4, 25.8, 40.0}},
        {"RAG", 54.7, {62.3, 72.3, 68.3, 27.6, 42.9}},
        {"SFT", 61.6, {74.7, 71.4, 80.0, 26.7, 55.0}},
        {"Full", 68.0, {81.5, 81.6, 82.5, 40.7, 53.9}},
    };
    return rows;
}

inline std::vector<double> as_fractions(const std::vector<double>& pct) {
    std::vector<double> out;
    for (double v : pct) out.push_back(v / 100.0);
    return out;
}

}  // namespace oracles

namespace oracles {

// Section contents biased toward reserved tags, escapes and line feeds.
inline std::string fuzz_section(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces{
        "<RULE>", "</RULE>", "<ANALOGY>", "</ANALOGY>", "<REASONING>", "</REASONING>", "\\", "\\\\",
        "\\<RULE>", "\n", "Decision: Bias", "<", ">", "/", "RULE", " ", "a", "word", "\xc3\xa9", "\t", "<RULE",
    };
    std::string out;
    const std::size_t n = 1 + rng() % 12;
    for (std::size_t i = 0; i < n; ++i) out += pieces[rng() % pieces.size()];
    return out;
}

inline std::string fuzz_decision(std::mt19937_64& rng) {
    static const std::vector<std::string> labels{"Bias", "Harmless", "Politics", "<RULE>", "x y", "\\"};
    return labels[rng() % labels.size()];
}

}  // namespace oracles
