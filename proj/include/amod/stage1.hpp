#pragma once

#include "amod/gateway.hpp"
#include "amod/quarantine.hpp"
#include "amod/schema.hpp"
#include "amod/templates.hpp"
#include "amod/vector_index.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

struct AugmentedChain {
    std::string instance_id;
    std::vector<std::string> analogy_ids;
    std::string chain_text;
    std::optional<std::string> decision;
};

/// A generated chain plus, when it must not be trained on, the reason.
struct AugmentationOutcome {
    AugmentedChain chain;
    std::optional<std::string> quarantine_reason;
};

/// Generation prompt: the instance text, its gold label and the labeled analogy block.
std::string augmentation_prompt(const ModerationInstance& inst, const RetrievalResult& analogies,
                                const TemplateSet& templates, const LabelSchema& schema);

/// SFT prompt shown to the trained model: the moderation query alone.
std::string moderation_query(const ModerationInstance& inst, const TemplateSet& templates,
                             const LabelSchema& schema);

/// Parses the decision out of a generated chain and applies the gold-label gate.
AugmentationOutcome interpret_augmented_chain(const ModerationInstance& inst, const RetrievalResult& analogies,
                                              const std::string& response, const LabelSchema& schema);

AugmentationOutcome generate_augmented_chain(const Gateway& gateway, const ModelHandle& base,
                                             const ModerationInstance& inst, const RetrievalResult& analogies,
                                             const TemplateSet& templates, const LabelSchema& schema,
                                             const SamplingConfig& sampling = {});

/// Chain text truncated after its last decision line, which is rewritten to
/// "Decision: <label>".
std::string canonical_completion(const std::string& chain_text, const std::string& label);

struct Stage1Config {
    RetrievalPolicy policy = RetrievalPolicy::knn;
    std::size_t k = kDefaultNeighbors;
    std::uint64_t seed = 0;
    LabelFilter filter = LabelFilter::any;
    SamplingConfig sampling;
    std::size_t max_in_flight = 8;
};

struct Stage1Output {
    std::vector<SftRecord> records;
    std::vector<AugmentedChain> chains;  // parallel to records
    QuarantineReport quarantine;
    nlohmann::ordered_json manifest;
};

Stage1Output build_augmented_dataset(const std::vector<ModerationInstance>& corpus, const VectorIndex& index,
                                     const Gateway& gateway, const ModelHandle& base,
                                     const TemplateSet& templates, const LabelSchema& schema,
                                     const Stage1Config& config);

/// Deterministic digest of a corpus's records.
std::string corpus_digest(const std::vector<ModerationInstance>& corpus);

}  // namespace amod
