#include "amod/stage3.hpp"

#include "amod/error.hpp"
#include "amod/eval.hpp"
#include "amod/stage1.hpp"

#include <unordered_map>

namespace amod {

std::string reasoning_prompt(const ModerationInstance& inst, const std::vector<AnalogyExample>& analogies,
                             const ModerationRule& rule, const TemplateSet& templates, const LabelSchema& schema) {
    return render(templates.get(template_names::reasoning_synthesis),
                  {{"text", inst.text},
                   {"analogies", render_analogy_block(analogies, true)},
                   {"rule", rule.text},
                   {"label", inst.label},
                   {"categories", schema.joined()}});
}

std::string strip_decision(const std::string& reasoning) {
    std::string body = reasoning;
    if (auto pos = last_decision_line(reasoning)) body.resize(*pos);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r' || body.back() == ' ' || body.back() == '\t'))
        body.pop_back();
    const auto start = body.find_first_not_of(" \t\r\n");
    return start == std::string::npos ? std::string() : body.substr(start);
}

SynthesisOutcome interpret_reasoning(const ModerationInstance& inst, const std::string& output,
                                     const LabelSchema& schema) {
    SynthesisOutcome out;
    out.reasoning = output;
    out.verdict = verify_label_consistency(output, inst.label, schema, inst.id);
    if (!out.verdict.consistent) {
        out.quarantine_reason = out.verdict.extracted_category
                                    ? "inconsistent reasoning: got " + *out.verdict.extracted_category + ", expected " +
                                          inst.label
                                    : "inconsistent reasoning: no decision";
    } else if (strip_decision(output).empty()) {
        out.quarantine_reason = "empty reasoning";
    }
    return out;
}

SynthesisOutcome synthesize_reasoning(const Gateway& gateway, const ModelHandle& aux, const ModerationInstance& inst,
                                      const std::vector<AnalogyExample>& analogies, const ModerationRule& rule,
                                      const TemplateSet& templates, const LabelSchema& schema,
                                      const SamplingConfig& sampling) {
    if (rule.status != RuleStatus::accepted)
        throw Error("rule " + rule.rule_id + " is " + std::string(to_string(rule.status)) + ", not accepted");
    const auto ex =
        gateway.complete(aux, {{"user", reasoning_prompt(inst, analogies, rule, templates, schema)}}, sampling);
    return interpret_reasoning(inst, ex.response, schema);
}

Stage3Output emit_refined_dataset(const std::vector<ModerationInstance>& corpus,
                                  const std::vector<ModerationRule>& rules,
                                  const std::map<std::string, std::vector<AnalogyExample>>& analogies,
                                  const Gateway& gateway, const ModelHandle& aux, const TemplateSet& templates,
                                  const LabelSchema& schema, const Stage3Config& config) {
    templates.require({template_names::reasoning_synthesis, template_names::cot});
    std::unordered_map<std::string, const ModerationRule*> rule_for;
    for (const auto& r : rules)
        if (!rule_for.emplace(r.instance_id, &r).second)
            throw DatasetError("two rules for instance " + r.instance_id);

    Stage3Output out;
    std::vector<std::string> reason(corpus.size());
    std::vector<std::size_t> active;
    std::vector<std::vector<ChatMessage>> batch;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& inst = corpus[i];
        const auto rit = rule_for.find(inst.id);
        if (rit == rule_for.end()) {
            reason[i] = "no rule";
            continue;
        }
        const auto& rule = *rit->second;
        if (rule.status != RuleStatus::accepted) {
            reason[i] = "rule " + std::string(to_string(rule.status)) + (rule.reason.empty() ? "" : ": " + rule.reason);
            continue;
        }
        const auto ait = analogies.find(inst.id);
        if (ait == analogies.end() || ait->second.empty()) {
            reason[i] = "no analogies";
            continue;
        }
        batch.push_back({{"user", reasoning_prompt(inst, ait->second, rule, templates, schema)}});
        active.push_back(i);
    }

    std::vector<BatchItem> results;
    if (!batch.empty()) results = gateway.complete_batch(aux, batch, config.sampling, config.max_in_flight);

    std::vector<std::optional<SftRecord>> record_at(corpus.size());
    std::vector<bool> hard(corpus.size(), false);
    for (std::size_t b = 0; b < active.size(); ++b) {
        const auto i = active[b];
        const auto& inst = corpus[i];
        if (!results[b].ok()) {
            reason[i] = "gateway error: " + results[b].error;
            hard[i] = true;
            continue;
        }
        const auto outcome = interpret_reasoning(inst, results[b].exchange->response, schema);
        if (outcome.quarantine_reason) {
            reason[i] = *outcome.quarantine_reason;
            continue;
        }
        const auto& rule = *rule_for.at(inst.id);
        const auto completion = assemble_hierarchical_chain(
            rule.text, render_analogy_block(analogies.at(inst.id), true), strip_decision(outcome.reasoning), inst.label);
        // Fail closed: a record that does not parse back is never emitted.
        const auto parsed = parse_hierarchical_chain(completion);
        if (parsed.decision != inst.label) {
            reason[i] = "assembled decision mismatch";
            continue;
        }
        record_at[i] = SftRecord{inst.id, moderation_query(inst, templates, schema), completion, Stage::stage3, inst.label};
    }

    nlohmann::ordered_json prov = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (!record_at[i]) {
            out.quarantine.add(corpus[i].id, reason[i], hard[i]);
            continue;
        }
        const auto& rule = *rule_for.at(corpus[i].id);
        RecordProvenance p{corpus[i].id, rule.rule_id, {}};
        for (const auto& a : analogies.at(corpus[i].id)) p.analogy_ids.push_back(a.id);
        prov.push_back({{"instance_id", p.instance_id}, {"rule_id", p.rule_id}, {"analogy_ids", p.analogy_ids}});
        out.provenance.push_back(std::move(p));
        out.records.push_back(std::move(*record_at[i]));
    }

    auto& m = out.manifest;
    m["stage"] = "stage3";
    m["schema"] = schema.name();
    m["corpus_digest"] = corpus_digest(corpus);
    m["models"] = {{"aux", aux.id}};
    m["sampling"] = to_json(config.sampling);
    m["template_digests"] = templates.digests();
    m["records"] = out.records.size();
    m["quarantined"] = out.quarantine.size();
    m["hard_errors"] = out.quarantine.hard_errors();
    m["provenance"] = std::move(prov);
    return out;
}

}  // namespace amod
