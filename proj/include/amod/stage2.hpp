#pragma once

#include "amod/gateway.hpp"
#include "amod/quarantine.hpp"
#include "amod/schema.hpp"
#include "amod/templates.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

/// `unverified` is the transient state between induction and the consistency
/// gate; ledgers only ever hold the other three.
enum class RuleStatus { unverified, accepted, discarded, pending_review };

std::string_view to_string(RuleStatus s);
RuleStatus parse_rule_status(std::string_view text);

struct ConsistencyVerdict {
    std::string instance_id;
    std::optional<std::string> extracted_category;
    std::string gold;
    bool consistent = false;
};

struct ModerationRule {
    std::string rule_id;
    std::string instance_id;
    std::string text;
    std::vector<std::string> analogy_ids;
    std::string inducer_model;
    RuleStatus status = RuleStatus::unverified;
    std::string reason;  // set when discarded
    std::optional<ConsistencyVerdict> verdict;
};

nlohmann::ordered_json to_json(const ModerationRule& rule);
ModerationRule rule_from_json(const nlohmann::json& j);

/// Examples parsed from a model's "Example n: / Label:" output, ids
/// "virt:<instance_id>:<n>". Entries lacking text or label are dropped.
std::vector<AnalogyExample> parse_virtual_analogies(const std::string& output, const std::string& instance_id,
                                                    const LabelSchema& schema);

std::string virtual_analogy_prompt(const ModerationInstance& inst, std::size_t count,
                                   const TemplateSet& templates, const LabelSchema& schema);

/// Throws ParseError("no analogies parsed") when the output yields nothing usable.
std::vector<AnalogyExample> generate_virtual_analogies(const Gateway& gateway, const ModelHandle& coa,
                                                       const ModerationInstance& inst, const TemplateSet& templates,
                                                       const LabelSchema& schema, std::size_t count = 4,
                                                       const SamplingConfig& sampling = {});

/// Text between "RULE:" and "END" in the last such span; nullopt when absent or empty.
std::optional<std::string> extract_rule_text(const std::string& output);

std::string rule_induction_prompt(const ModerationInstance& inst, const std::vector<AnalogyExample>& analogies,
                                  const TemplateSet& templates, const LabelSchema& schema);

/// Builds the rule record from the auxiliary model's output. Unparseable
/// output gives a discarded rule with reason "unparseable".
ModerationRule rule_from_output(const ModerationInstance& inst, const std::vector<AnalogyExample>& analogies,
                                const std::string& inducer_model, const std::string& output);

struct InducedRule {
    ModerationRule rule;
    std::string raw_output;
};

InducedRule induce_rule(const Gateway& gateway, const ModelHandle& aux, const ModerationInstance& inst,
                        const std::vector<AnalogyExample>& analogies, const TemplateSet& templates,
                        const LabelSchema& schema, const SamplingConfig& sampling = {});

/// Never throws; missing or unknown categories are inconsistent.
ConsistencyVerdict verify_label_consistency(const std::string& model_output, const std::string& gold,
                                            const LabelSchema& schema, const std::string& instance_id = {});

/// Flags ceil(fraction * n) rules, drawn uniformly without replacement under
/// `seed`, as pending_review and returns copies of them in draw order.
std::vector<ModerationRule> sample_for_manual_review(std::vector<ModerationRule>& rules, double fraction,
                                                     std::uint64_t seed);

struct Stage2Config {
    std::size_t virtual_analogies = 4;
    SamplingConfig sampling;
    std::size_t max_in_flight = 8;
    double review_fraction = 0.0;  // 0 disables manual-review sampling
    std::uint64_t review_seed = 0;
};

struct Stage2Output {
    std::vector<ModerationRule> rules;  // corpus order
    std::map<std::string, std::vector<AnalogyExample>> analogies;
    QuarantineReport skipped;  // instances that never reached rule induction
    std::vector<ModerationRule> review_sample;
    nlohmann::ordered_json manifest;

    std::size_t count(RuleStatus s) const;
};

Stage2Output induce_rules(const std::vector<ModerationInstance>& corpus, const Gateway& gateway,
                          const ModelHandle& coa, const ModelHandle& aux, const TemplateSet& templates,
                          const LabelSchema& schema, const Stage2Config& config);

/// One line per manual-review item: rule, instance text, gold label, analogies.
std::string review_export_jsonl(const std::vector<ModerationRule>& sample,
                                const std::vector<ModerationInstance>& corpus,
                                const std::map<std::string, std::vector<AnalogyExample>>& analogies);

/// Applies reviewer decisions (rule_id -> approved) to pending_review rules.
/// Returns how many rules changed state.
std::size_t apply_rule_reviews(std::vector<ModerationRule>& rules, const std::map<std::string, bool>& approvals);

void write_rules(const std::vector<ModerationRule>& rules, const std::filesystem::path& path);
std::vector<ModerationRule> read_rules(const std::filesystem::path& path);
void write_analogies(const std::map<std::string, std::vector<AnalogyExample>>& analogies,
                     const std::filesystem::path& path);
std::map<std::string, std::vector<AnalogyExample>> read_analogies(const std::filesystem::path& path);

}  // namespace amod
