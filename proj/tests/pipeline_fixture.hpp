#pragma once

// Offline pipeline fixture: synthetic corpus, token-hash embeddings, an
// exact index and a gateway wired to the scripted mock suite.

#include "amod/embedding.hpp"
#include "amod/gateway.hpp"
#include "amod/mock_backend.hpp"
#include "amod/synth.hpp"
#include "amod/templates.hpp"
#include "amod/vector_index.hpp"

#include <memory>
#include <string>
#include <vector>

namespace testing_support {

struct PipelineFixture {
    amod::LabelSchema schema = amod::fine_grained_schema();
    amod::TemplateSet templates = amod::TemplateSet::load(AMOD_TEMPLATE_DIR);
    std::vector<amod::ModerationInstance> corpus;
    amod::VectorIndex index{"", 1};
    amod::MockSuite suite;
    std::unique_ptr<amod::Gateway> gateway;
    amod::ModelHandle base, coa, aux, external;

    explicit PipelineFixture(std::size_t n, std::uint64_t seed = 1)
        : corpus(amod::synth_corpus(n, schema, seed)), suite(amod::default_mock_suite(schema)) {
        amod::MockEmbeddingBackend embedder("mock-embedding", 256);
        amod::EmbeddingCache cache;
        std::vector<std::string> texts;
        for (const auto& inst : corpus) texts.push_back(inst.text);
        index = amod::VectorIndex::build(corpus, amod::embed_texts(embedder, texts, cache), schema.name());
        wire();
    }

    // Re-registers the (possibly edited) scripts on a fresh gateway.
    void wire() {
        gateway = std::make_unique<amod::Gateway>(amod::RetryPolicy{0, std::chrono::milliseconds(0)});
        base = gateway->register_mock(suite.base, amod::ModelKind::base);
        coa = gateway->register_mock(suite.coa, amod::ModelKind::coa);
        aux = gateway->register_mock(suite.aux, amod::ModelKind::aux);
        external = gateway->register_mock(suite.external, amod::ModelKind::external);
    }

    // Makes the base model end the chain for synthetic instance #n on `wrong`.
    void wrong_stage1_decision(std::size_t n, const std::string& wrong) {
        amod::MockRule r;
        r.pattern = "Task: chain of analogy[\\s\\S]*Content: #" + std::to_string(n) + " ";
        r.response = "The examples suggest otherwise.\nDecision: " + wrong;
        suite.base.rules.insert(suite.base.rules.begin(), r);
    }

    void wrong_rule_category(std::size_t n, const std::string& wrong) {
        suite.aux.rules.insert(suite.aux.rules.begin(), amod::wrong_category_rule(n, wrong));
    }

    std::string other_label(std::size_t n) const {
        const auto& gold = corpus.at(n - 1).label;
        return gold == "Politics" ? "Bias" : "Politics";
    }
};

}  // namespace testing_support
