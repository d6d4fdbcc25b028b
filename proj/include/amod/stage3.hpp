#pragma once

#include "amod/chain.hpp"
#include "amod/gateway.hpp"
#include "amod/quarantine.hpp"
#include "amod/schema.hpp"
#include "amod/stage2.hpp"
#include "amod/templates.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

/// Prompt for the auxiliary model: instance text, analogy block, rule text and gold label.
std::string reasoning_prompt(const ModerationInstance& inst, const std::vector<AnalogyExample>& analogies,
                             const ModerationRule& rule, const TemplateSet& templates, const LabelSchema& schema);

struct SynthesisOutcome {
    std::string reasoning;  // raw model output
    ConsistencyVerdict verdict;
    std::optional<std::string> quarantine_reason;
};

/// Interprets a reasoning output against the gold label.
SynthesisOutcome interpret_reasoning(const ModerationInstance& inst, const std::string& output,
                                     const LabelSchema& schema);

/// Requires an accepted rule (Error otherwise). Gateway errors propagate.
SynthesisOutcome synthesize_reasoning(const Gateway& gateway, const ModelHandle& aux, const ModerationInstance& inst,
                                      const std::vector<AnalogyExample>& analogies, const ModerationRule& rule,
                                      const TemplateSet& templates, const LabelSchema& schema,
                                      const SamplingConfig& sampling = {});

/// Reasoning body with its trailing decision line (and anything after it) removed.
std::string strip_decision(const std::string& reasoning);

struct Stage3Config {
    SamplingConfig sampling;
    std::size_t max_in_flight = 8;
};

struct RecordProvenance {
    std::string instance_id;
    std::string rule_id;
    std::vector<std::string> analogy_ids;
};

struct Stage3Output {
    std::vector<SftRecord> records;
    std::vector<RecordProvenance> provenance;  // parallel to records
    QuarantineReport quarantine;
    nlohmann::ordered_json manifest;
};

/// Every corpus instance ends up either as a record or in the quarantine report.
Stage3Output emit_refined_dataset(const std::vector<ModerationInstance>& corpus,
                                  const std::vector<ModerationRule>& rules,
                                  const std::map<std::string, std::vector<AnalogyExample>>& analogies,
                                  const Gateway& gateway, const ModelHandle& aux, const TemplateSet& templates,
                                  const LabelSchema& schema, const Stage3Config& config);

}  // namespace amod
