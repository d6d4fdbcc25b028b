#include "amod/embedding.hpp"
#include "amod/error.hpp"
#include "amod/mock_backend.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace amod;

namespace {

// Returns fixed vectors of a chosen norm and counts requests.
class ScaledEndpoint final : public EmbeddingBackend {
public:
    std::string endpoint_id() const override { return "scaled"; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        ++requests;
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({2.0, 0.0});
        return out;
    }
    int requests = 0;
};

class RaggedEndpoint final : public EmbeddingBackend {
public:
    std::string endpoint_id() const override { return "ragged"; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(std::vector<double>(i == 0 ? 3 : 4, 1.0));
        return out;
    }
};

class FlakyEndpoint final : public EmbeddingBackend {
public:
    std::string endpoint_id() const override { return "flaky"; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        if (failures-- > 0) throw TransientError("503");
        return std::vector<std::vector<double>>(texts.size(), std::vector<double>{0.0, 1.0});
    }
    int failures = 2;
};

}  // namespace

TEST_CASE("cosine distance") {
    const auto a = EmbeddingVector::normalized({1, 0});
    const auto b = EmbeddingVector::normalized({0, 1});
    const auto c = EmbeddingVector::normalized({1 / std::sqrt(2.0), 1 / std::sqrt(2.0)});
    CHECK(cosine_distance(a, a) == 0.0);
    CHECK(cosine_distance(a, b) == doctest::Approx(1.0));
    CHECK(cosine_distance(a, c) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(std::abs(cosine_distance(a, c) - 0.29289) < 1e-5);
    CHECK(cosine_distance(a, c) == cosine_distance(c, a));
    CHECK(cosine_distance(a, EmbeddingVector::normalized({-1, 0})) == doctest::Approx(2.0));
    CHECK_THROWS(cosine_distance(a, EmbeddingVector::normalized({1, 0, 0})));
}

TEST_CASE("normalization") {
    const auto v = EmbeddingVector::normalized({3, 4});
    CHECK(std::abs(v.norm() - 1.0) < 1e-12);
    CHECK(v.values()[0] == doctest::Approx(0.6));
    CHECK_THROWS(EmbeddingVector::normalized({0, 0}));
    CHECK_THROWS(EmbeddingVector::normalized({NAN, 1}));
    CHECK_THROWS(EmbeddingVector::normalized({}));
    CHECK_THROWS(EmbeddingVector::from_unit({2, 0}));
}

TEST_CASE("embed_texts normalizes endpoint output") {
    ScaledEndpoint ep;
    EmbeddingCache cache;
    const auto out = embed_texts(ep, {"x"}, cache);
    REQUIRE(out.size() == 1);
    CHECK(std::abs(out[0].norm() - 1.0) < 1e-9);
}

TEST_CASE("identical texts share one cached vector") {
    MockEmbeddingBackend ep("m", 16);
    EmbeddingCache cache;
    const auto out = embed_texts(ep, {"same text", "same text"}, cache);
    CHECK(out[0] == out[1]);
    CHECK(ep.text_count() == 1);
}

TEST_CASE("hundred texts then zero requests on the second call") {
    testing_support::TempDir dir;
    MockEmbeddingBackend ep("m", 32, MockEmbeddingBackend::Mode::random, 3.0);
    std::vector<std::string> texts;
    for (int i = 0; i < 100; ++i) texts.push_back("text number " + std::to_string(i));

    EmbedOptions opts;
    opts.batch_size = 16;
    opts.max_in_flight = 4;
    std::vector<EmbeddingVector> first;
    {
        EmbeddingCache cache(dir.path());
        first = embed_texts(ep, texts, cache, opts);
        CHECK(cache.size() == 100);
    }
    const auto after_first = ep.request_count();
    CHECK(after_first == 7);  // ceil(100 / 16)

    EmbeddingCache reopened(dir.path());
    const auto second = embed_texts(ep, texts, reopened, opts);
    CHECK(ep.request_count() == after_first);
    CHECK(second == first);  // bitwise equal through the on-disk cache
    for (const auto& v : second) CHECK(std::abs(v.norm() - 1.0) < 1e-6);
}

TEST_CASE("cache keys separate endpoints") {
    CHECK(EmbeddingCache::key("a", "t") != EmbeddingCache::key("b", "t"));
    CHECK(EmbeddingCache::key("a", "t") == EmbeddingCache::key("a", "t"));
    CHECK(EmbeddingCache::key("a", "t").size() == 64);
}

TEST_CASE("dimension mismatch across a batch") {
    RaggedEndpoint ep;
    EmbeddingCache cache;
    CHECK_THROWS_WITH(embed_texts(ep, {"a", "b"}, cache), "embedding dimension mismatch in batch: 4 vs 3");
}

TEST_CASE("transient endpoint failures are retried") {
    FlakyEndpoint ep;
    EmbeddingCache cache;
    EmbedOptions opts;
    opts.retry.initial_backoff = std::chrono::milliseconds(0);
    CHECK(embed_texts(ep, {"a"}, cache, opts).size() == 1);

    FlakyEndpoint dead;
    dead.failures = 100;
    opts.retry.max_retries = 1;
    EmbeddingCache cache2;
    CHECK_THROWS_AS(embed_texts(dead, {"a"}, cache2, opts), GatewayError);
}

TEST_CASE("empty inputs rejected") {
    MockEmbeddingBackend ep("m", 8);
    EmbeddingCache cache;
    CHECK_THROWS(embed_texts(ep, {}, cache));
    CHECK_THROWS(embed_texts(ep, {"ok", ""}, cache));
}
